//! Poisson photon statistics on the detector.
//!
//! Each bin sees a mean photon count `I = I0 · exp(-y)`. A count `k` is drawn
//! from Poisson(I) and converted back to a line integral `ln(I0 / max(k, 1))`.
//! Bin `i` draws from its own substream `(seed, i)`, so results do not depend
//! on evaluation order or thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::projector::Sinogram;
use crate::scalar::Real;
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Unattenuated source intensity in photons.
    pub i0: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(i0: f64, seed: u64) -> Result<Self> {
        if !(i0 > 0.0 && i0.is_finite()) {
            return Err(Error::InvalidParameter(format!("i0 must be positive and finite, got {i0}")));
        }
        Ok(Self { i0, seed })
    }
}

/// Means below this use Knuth's product method, above it PTRS.
pub const SMALL_MEAN: f64 = 30.0;

/// Draws one Poisson variate with the given mean.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else if mean < SMALL_MEAN {
        knuth(rng, mean)
    } else {
        ptrs(rng, mean)
    }
}

fn knuth<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let limit = (-mean).exp();
    let mut k = 0;
    let mut p: f64 = rng.random();
    while p > limit {
        k += 1;
        p *= rng.random::<f64>();
    }
    k
}

/// Hörmann's transformed rejection with squeeze (PTRS).
fn ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        if lhs <= -mean + k * loglam - ln_factorial(k) {
            return k as u64;
        }
    }
}

/// `ln(k!)` for integral `k >= 0`.
fn ln_factorial(k: f64) -> f64 {
    if k < 10.0 {
        return (2..=k as u64).map(|i| (i as f64).ln()).sum();
    }
    // Stirling series for ln Γ(k + 1).
    let x = k + 1.0;
    let x2 = x * x;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x * x2 * x2)
}

/// Line integral inferred from a detected count.
pub fn counts_to_projection(i0: f64, count: u64) -> f64 {
    (i0 / count.max(1) as f64).ln()
}

pub fn apply_noise<T: Real>(y: &Sinogram<T>, cfg: &NoiseConfig) -> Result<Sinogram<T>> {
    if let Some(v) = y.values().iter().find(|v| !v.is_finite() || **v < T::zero()) {
        return Err(Error::InvalidParameter(format!("projection value {v} is not a finite non-negative number")));
    }
    let noisy = y
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, &yi)| {
            let mut rng = seeding::stream(cfg.seed, i as u64);
            let mean = cfg.i0 * (-yi.as_f64()).exp();
            T::of(counts_to_projection(cfg.i0, sample_poisson(&mut rng, mean)))
        })
        .collect();
    y.with_values(noisy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(mean: f64, draws: usize, seed: u64) -> (f64, f64) {
        let mut rng = seeding::stream(seed, 0);
        let xs: Vec<f64> = (0..draws).map(|_| sample_poisson(&mut rng, mean) as f64).collect();
        let m = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
        (m, var)
    }

    #[test]
    fn moments_match_across_both_regimes() {
        for &mean in &[0.5, 4.0, 29.0, 30.0, 100.0, 1e4, 1e6] {
            let n = 10_000;
            let (m, var) = moments(mean, n, 11);
            assert!((m - mean).abs() <= 4.0 * (mean / n as f64).sqrt(), "mean {mean}: {m}");
            if mean >= 100.0 {
                assert!((var - mean).abs() <= 0.1 * mean, "var {mean}: {var}");
            }
        }
    }

    #[test]
    fn ln_factorial_is_continuous_at_the_switch() {
        let direct: f64 = (2..=10u64).map(|i| (i as f64).ln()).sum();
        assert!((ln_factorial(10.0) - direct).abs() < 1e-10);
        let direct: f64 = (2..=50u64).map(|i| (i as f64).ln()).sum();
        assert!((ln_factorial(50.0) - direct).abs() < 1e-10);
    }

    #[test]
    fn huge_intensity_leaves_projections_unchanged() {
        let y = Sinogram::new((0..50).map(|i| i as f64 * 0.1).collect(), 10).unwrap();
        let noisy = apply_noise(&y, &NoiseConfig::new(1e12, 3).unwrap()).unwrap();
        for (a, b) in y.values().iter().zip(noisy.values()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_counts_floor_to_one() {
        let y = Sinogram::new(vec![20.0; 4], 4).unwrap();
        let noisy = apply_noise(&y, &NoiseConfig::new(10.0, 1).unwrap()).unwrap();
        for v in noisy.values() {
            assert!((v - 10f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_seed_reproduces_bits() {
        let y = Sinogram::new(vec![0.5; 64], 8).unwrap();
        let cfg = NoiseConfig::new(1e3, 42).unwrap();
        let a = apply_noise(&y, &cfg).unwrap();
        let b = apply_noise(&y, &cfg).unwrap();
        assert_eq!(a, b);
        let c = apply_noise(&y, &NoiseConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn projection_is_monotone_in_count() {
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let p = counts_to_projection(1e3, k);
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(NoiseConfig::new(0.0, 1).is_err());
        assert!(NoiseConfig::new(f64::INFINITY, 1).is_err());
        let y = Sinogram::new(vec![-1.0], 1).unwrap();
        assert!(apply_noise(&y, &NoiseConfig::new(10.0, 1).unwrap()).is_err());
    }
}
