//! MLEM in the transmission form
//!
//! ```text
//! x_j ← x_j · Σ_i A_ij exp(-(A x)_i) / Σ_i A_ij exp(-y_i)
//! ```

use crate::error::{check_len, Error, Result};
use crate::image::Image;
use crate::metrics::rmse_slices;
use crate::projector::{Sinogram, SystemMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlemConfig<T = f64> {
    pub max_iters: usize,
    pub x_init: T,
    /// Floor for the denominator of touched pixels.
    pub epsilon: T,
}

impl<T: Real> Default for MlemConfig<T> {
    fn default() -> Self {
        Self { max_iters: 400, x_init: T::of(0.1), epsilon: T::of(1e-12) }
    }
}

impl<T: Real> MlemConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.x_init > T::zero()) || !(self.epsilon > T::zero()) {
            return Err(Error::InvalidParameter("MLEM needs max_iters >= 1, x_init > 0, epsilon > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlemResult<T = f64> {
    /// Iterate whose projection is closest to the reference projection, or
    /// the final iterate when no reference was given.
    pub selected: Image<T>,
    /// 1-based.
    pub selected_iteration: usize,
    pub final_image: Image<T>,
    /// Projection RMSE against the reference for iterations `1..=max_iters`.
    pub projection_rmse: Vec<T>,
}

/// `Σ_i A_ij exp(-y_i)`, floored at `epsilon` for pixels any ray touches.
fn denominator<T: Real>(a: &SystemMatrix<T>, y: &Sinogram<T>, eps: T) -> Result<Vec<T>> {
    let ey: Vec<T> = y.values().iter().map(|v| (-*v).exp()).collect();
    let den = a.apply_transpose(&ey)?;
    let touched = a.column_sums();
    Ok(den
        .into_iter()
        .zip(touched)
        .map(|(d, s)| if s > T::zero() { d.max(eps) } else { T::zero() })
        .collect())
}

/// One multiplicative update. Pixels with a zero denominator are left alone;
/// the rest are kept at or above the smallest positive normal value, since
/// a factor that underflows to zero would otherwise pin a pixel there.
pub fn mlem_step<T: Real>(a: &SystemMatrix<T>, x: &mut [T], denom: &[T]) -> Result<()> {
    let yx = a.apply(x)?;
    let e: Vec<T> = yx.iter().map(|v| (-*v).exp()).collect();
    let num = a.apply_transpose(&e)?;
    for ((xj, &n), &d) in x.iter_mut().zip(&num).zip(denom) {
        if d > T::zero() {
            *xj = (*xj * n / d).max(T::min_positive_value());
        }
    }
    Ok(())
}

pub fn mlem_reconstruct<T: Real>(
    a: &SystemMatrix<T>,
    y: &Sinogram<T>,
    cfg: &MlemConfig<T>,
    gt_projection: Option<&Sinogram<T>>,
) -> Result<MlemResult<T>> {
    cfg.validate()?;
    check_len("sinogram", a.n_rows(), y.len())?;
    if let Some(r) = gt_projection {
        check_len("reference projection", a.n_rows(), r.len())?;
    }
    if let Some(v) = y.values().iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite projection value {v}")));
    }
    let n = (a.n_cols() as f64).sqrt().round() as usize;
    let denom = denominator(a, y, cfg.epsilon)?;
    let mut x = vec![cfg.x_init; a.n_cols()];
    let mut best: Option<(T, usize, Vec<T>)> = None;
    let mut projection_rmse = Vec::new();

    for it in 1..=cfg.max_iters {
        mlem_step(a, &mut x, &denom)?;
        if let Some(reference) = gt_projection {
            let err = rmse_slices(&a.apply(&x)?, reference.values())?;
            projection_rmse.push(err);
            if best.as_ref().is_none_or(|b| err < b.0) {
                best = Some((err, it, x.clone()));
            }
        }
    }
    let final_image = Image::from_pixels(n, x)?;
    let (selected, selected_iteration) = match best {
        Some((_, it, img)) => (Image::from_pixels(n, img)?, it),
        None => (final_image.clone(), cfg.max_iters),
    };
    Ok(MlemResult { selected, selected_iteration, final_image, projection_rmse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::rmse;
    use crate::phantoms::make_block_phantom;
    use crate::projector::{build_system_matrix, forward_project, make_geometry};

    fn setup(n: usize, angles: usize) -> SystemMatrix {
        build_system_matrix(&make_geometry(n, angles).unwrap())
    }

    #[test]
    fn consistent_data_is_a_fixed_point() {
        let a = setup(4, 36);
        let x0 = make_block_phantom::<f64>().map(|v| v + 0.05);
        let y = forward_project(&a, &x0).unwrap();
        let denom = denominator(&a, &y, 1e-12).unwrap();
        let mut x = x0.pixels().to_vec();
        mlem_step(&a, &mut x, &denom).unwrap();
        for (u, v) in x.iter().zip(x0.pixels()) {
            assert!((u - v).abs() <= 1e-12 * v.abs());
        }
    }

    #[test]
    fn air_scan_drives_image_to_zero() {
        let a = setup(4, 36);
        let y = Sinogram::zeros(36, 8);
        let r = mlem_reconstruct(&a, &y, &MlemConfig::default(), Some(&y)).unwrap();
        assert!(rmse(&r.final_image, &Image::zeros(4)).unwrap() < 1e-2);
        assert!(r.final_image.pixels().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn block_phantom_is_recovered() {
        let a = setup(4, 36);
        let gt = make_block_phantom::<f64>();
        let y = forward_project(&a, &gt).unwrap();
        let r = mlem_reconstruct(&a, &y, &MlemConfig::default(), Some(&y)).unwrap();
        assert!(rmse(&r.selected, &gt).unwrap() < 5e-2);
        assert_eq!(r.projection_rmse.len(), 400);
        let min = r.projection_rmse.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(r.projection_rmse[r.selected_iteration - 1], min);
    }

    #[test]
    fn untouched_pixels_keep_their_start_value() {
        // A single view at 0° misses the top corners of a 16×16 grid.
        let a = setup(16, 1);
        let untouched = a.column_sums().iter().position(|&s| s == 0.0).expect("corner pixel is outside the fan");
        assert_eq!(untouched, 0);
        let y = Sinogram::zeros(1, 32);
        let r = mlem_reconstruct(&a, &y, &MlemConfig { max_iters: 5, ..Default::default() }, None).unwrap();
        assert_eq!(r.final_image.pixels()[untouched], 0.1);
        assert_eq!(r.selected_iteration, 5);
    }

    #[test]
    fn bad_config() {
        let a = setup(4, 3);
        let y = Sinogram::zeros(3, 8);
        assert!(mlem_reconstruct(&a, &y, &MlemConfig { max_iters: 0, ..Default::default() }, None).is_err());
        assert!(mlem_reconstruct(&a, &y, &MlemConfig { x_init: 0.0, ..Default::default() }, None).is_err());
    }
}
