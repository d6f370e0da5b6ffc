//! Ground-truth test objects.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{GrayRaster, Image};
use crate::scalar::Real;

/// 4×4 object with the non-zero 2×2 block in the middle.
pub fn make_block_phantom<T: Real>() -> Image<T> {
    let mut img = Image::zeros(4);
    img.set(1, 1, T::of(0.3));
    img.set(1, 2, T::of(0.4));
    img.set(2, 1, T::of(0.8));
    img.set(2, 2, T::of(0.2));
    img
}

/// One ellipse of the phantom, in coordinates normalized to `[-1, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub angle_deg: f64,
}

const fn e(intensity: f64, semi_x: f64, semi_y: f64, center_x: f64, center_y: f64, angle_deg: f64) -> Ellipse {
    Ellipse { intensity, semi_x, semi_y, center_x, center_y, angle_deg }
}

/// Modified (high-contrast) Shepp–Logan table. Intensities sum to at most 1.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    e(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    e(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    e(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    e(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    e(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    e(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    e(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    e(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    e(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    e(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }
}

/// Normalized coordinate of the centre of pixel `i` along an axis of `n` pixels.
fn center_coord(i: usize, n: usize) -> f64 {
    -1.0 + (2 * i + 1) as f64 / n as f64
}

/// Shepp–Logan phantom point-sampled at pixel centres and clamped to `[0, 1]`.
pub fn make_shepp_logan<T: Real>(n: usize) -> Result<Image<T>> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("Shepp-Logan needs n >= 2, got {n}")));
    }
    Ok(Image::from_fn(n, |row, col| {
        let x = center_coord(col, n);
        let y = -center_coord(row, n);
        let v: f64 = SHEPP_LOGAN.iter().filter(|el| el.contains(x, y)).map(|el| el.intensity).sum();
        T::of(v.clamp(0.0, 1.0))
    }))
}

/// Centred disk of the given value and radius (cm); handy for sanity checks.
pub fn make_disk<T: Real>(n: usize, radius_cm: f64, value: f64) -> Image<T> {
    let scale = crate::image::OBJECT_SIDE_CM / n as f64;
    let half = crate::image::OBJECT_SIDE_CM / 2.0;
    Image::from_fn(n, |row, col| {
        let x = -half + (col as f64 + 0.5) * scale;
        let y = half - (row as f64 + 0.5) * scale;
        if x.hypot(y) <= radius_cm {
            T::of(value)
        } else {
            T::zero()
        }
    })
}

/// Averages `raster` over an `n × n` partition of its rows and columns.
/// Block edges sit at `floor(i * H / n)`, so uneven sizes are handled.
pub fn block_mean_downsample(raster: &GrayRaster, n: usize) -> Result<Vec<f64>> {
    if n == 0 || raster.height < n || raster.width < n {
        return Err(Error::InvalidSize(format!(
            "cannot downsample {}x{} to {n}x{n}",
            raster.height, raster.width
        )));
    }
    let edges = |len: usize| (0..=n).map(|i| i * len / n).collect::<Vec<_>>();
    let rows = edges(raster.height);
    let cols = edges(raster.width);
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for rr in rows[r]..rows[r + 1] {
                for cc in cols[c]..cols[c + 1] {
                    acc += raster.get(rr, cc);
                }
            }
            out.push(acc / ((rows[r + 1] - rows[r]) * (cols[c + 1] - cols[c])) as f64);
        }
    }
    Ok(out)
}

/// Affinely maps values onto `[0, 1]`. A constant input maps to all zeros;
/// spreads within `1e-12` relative of the magnitude count as constant, since
/// block means of a constant raster differ in the last bits.
pub fn normalize_unit(values: &mut [f64]) {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let flat = !(span > 1e-12 * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE));
    for v in values.iter_mut() {
        *v = if flat { 0.0 } else { (*v - lo) / span };
    }
}

pub fn ct_phantom_from_raster<T: Real>(raster: &GrayRaster, n: usize) -> Result<Image<T>> {
    let mut values = block_mean_downsample(raster, n)?;
    normalize_unit(&mut values);
    Image::from_pixels(n, values.into_iter().map(T::of).collect())
}

/// Downsampled, range-normalized phantom from a grayscale CT slice on disk.
pub fn make_ct_phantom<T: Real>(source: impl AsRef<Path>, n: usize) -> Result<Image<T>> {
    ct_phantom_from_raster(&GrayRaster::read(source)?, n)
}
