use crate::error::{check_len, Result};
use crate::image::Image;
use crate::scalar::Real;

/// Root mean squared pixel difference.
pub fn rmse<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<T> {
    rmse_slices(a.pixels(), b.pixels())
}

pub fn rmse_slices<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    check_len("rmse operands", a.len(), b.len())?;
    if a.is_empty() {
        return Ok(T::zero());
    }
    let ss: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok((ss / T::of_usize(a.len())).sqrt())
}
