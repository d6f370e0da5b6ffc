//! Fan-beam filtered back projection for a flat, equispaced detector.
//!
//! Detector samples are rescaled onto a virtual detector through the
//! isocenter (pitch `τ = pitch · R / SDD`, `R` the source radius), weighted by
//! `R / sqrt(R² + s²)`, convolved with half the Shepp–Logan kernel, and
//! back-projected pixel by pixel with weight `1 / U²`, where `U` is the
//! pixel's depth along the central ray divided by `R`. The sum over views is
//! scaled by the angular step `2π / n_angles`; halving the kernel accounts
//! for every ray being measured twice over a full rotation.

use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::image::Image;
use crate::projector::{Geometry, Sinogram};
use crate::scalar::Real;

/// Shepp–Logan discrete kernel `h[k] = 2 / (π² τ² (1 - 4k²))` for `k` in `-(len-1)..=len-1`.
pub fn shepp_logan_kernel(len: usize, tau: f64) -> Vec<f64> {
    let m = len as i64 - 1;
    (-m..=m).map(|k| 2.0 / (PI * PI * tau * tau * (1.0 - 4.0 * (k * k) as f64))).collect()
}

pub fn fbp_reconstruct<T: Real>(geom: &Geometry, y: &Sinogram<T>) -> Result<Image<T>> {
    geom.validate()?;
    if geom.n_angles() < 2 {
        return Err(Error::DegenerateGeometry(format!("FBP needs at least 2 views, got {}", geom.n_angles())));
    }
    check_len("sinogram", geom.n_rays(), y.len())?;

    let nd = geom.n_det;
    let radius = geom.source_radius_cm();
    let tau = geom.det_spacing_cm * radius / geom.sdd_cm;
    let centre = (nd as f64 - 1.0) / 2.0;
    let kernel = shepp_logan_kernel(nd, tau);
    let pre_weight: Vec<f64> = (0..nd)
        .map(|k| {
            let s = (k as f64 - centre) * tau;
            radius / (radius * radius + s * s).sqrt()
        })
        .collect();

    // Filtered views, with the 1/2 redundancy factor folded in.
    let filtered: Vec<Vec<f64>> = (0..geom.n_angles())
        .map(|a| {
            let view: Vec<f64> = y.view(a).iter().zip(&pre_weight).map(|(v, w)| v.as_f64() * w).collect();
            (0..nd)
                .map(|i| {
                    let acc: f64 = view.iter().enumerate().map(|(k, v)| kernel[i + nd - 1 - k] * v).sum();
                    0.5 * tau * acc
                })
                .collect()
        })
        .collect();

    let n = geom.n;
    let pitch = geom.pixel_scale_cm();
    let half = geom.image_side_cm / 2.0;
    let d_beta = 2.0 * PI / geom.n_angles() as f64;
    let mut image = vec![0.0f64; n * n];
    for (a, q) in filtered.iter().enumerate() {
        let (to_src, axis) = geom.frame(a);
        for (j, px) in image.iter_mut().enumerate() {
            let x = -half + (j % n) as f64 * pitch + 0.5 * pitch;
            let yy = half - (j / n) as f64 * pitch - 0.5 * pitch;
            let depth = radius - (x * to_src[0] + yy * to_src[1]);
            let lateral = x * axis[0] + yy * axis[1];
            let s = radius * lateral / depth;
            let f = s / tau + centre;
            if f < 0.0 || f > (nd - 1) as f64 {
                continue;
            }
            let i0 = (f.floor() as usize).min(nd - 2);
            let t = f - i0 as f64;
            let val = (1.0 - t) * q[i0] + t * q[i0 + 1];
            let u = depth / radius;
            *px += val / (u * u);
        }
    }
    Image::from_pixels(n, image.into_iter().map(|v| T::of(v * d_beta)).collect())
}
