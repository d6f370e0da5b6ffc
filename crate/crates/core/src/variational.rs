//! Variational real-number reconstruction.
//!
//! Every round solves the QUBO for the current encoding window, decodes the
//! winning bits into an image `x`, then narrows and recentres the window:
//!
//! ```text
//! k ← k + c
//! d ← x - 2^{q_max - k - 1}      (with the updated k)
//! ```
//!
//! After the update `x` sits at bit pattern `(0, …, 0, 1)` of the new window,
//! i.e. it stays representable while the window shrinks by `2^{-c}`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::anneal::{AnnealSchedule, QuboSampler, SimulatedAnnealer};
use crate::error::{check_len, Error, Result};
use crate::image::Image;
use crate::metrics::rmse;
use crate::projector::{Sinogram, SystemMatrix};
use crate::qubo::{assemble_qubo, decode, EncodingState};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct QactConfig<T = f64> {
    /// Bits per pixel.
    pub q_max: usize,
    /// Exponent step per round.
    pub c: T,
    /// Per-pixel exponent steps, overriding `c` when set.
    pub c_per_pixel: Option<Vec<T>>,
    pub k0: T,
    pub d0: T,
    pub n_iters: usize,
    pub sampler: AnnealSchedule,
    /// Stop once every window is narrower than this. Off when `None`.
    pub early_stop_width: Option<T>,
}

impl<T: Real> Default for QactConfig<T> {
    fn default() -> Self {
        Self {
            q_max: 2,
            c: T::of(0.5),
            c_per_pixel: None,
            k0: T::one(),
            d0: T::zero(),
            n_iters: 30,
            sampler: AnnealSchedule::default(),
            early_stop_width: None,
        }
    }
}

impl<T: Real> QactConfig<T> {
    pub fn validate(&self, n_pixels: usize) -> Result<()> {
        if self.n_iters == 0 {
            return Err(Error::InvalidParameter("n_iters must be at least 1".into()));
        }
        if self.q_max == 0 || self.q_max > 31 {
            return Err(Error::InvalidParameter(format!("q_max must be in 1..=31, got {}", self.q_max)));
        }
        if !(self.c > T::zero()) {
            return Err(Error::InvalidParameter(format!("c must be positive, got {}", self.c)));
        }
        if let Some(cs) = &self.c_per_pixel {
            check_len("per-pixel c", n_pixels, cs.len())?;
            if cs.iter().any(|&c| !(c > T::zero())) {
                return Err(Error::InvalidParameter("per-pixel c must be positive".into()));
            }
        }
        self.sampler.validate()
    }

    fn step(&self, pixel: usize) -> T {
        self.c_per_pixel.as_ref().map_or(self.c, |cs| cs[pixel])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T = f64> {
    /// 1-based round number.
    pub iteration: usize,
    pub image: Image<T>,
    /// Best QUBO energy, i.e. the squared projection residual of `image`.
    pub energy: T,
    pub rmse: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QactTrace<T = f64> {
    pub records: Vec<IterationRecord<T>>,
}

impl<T: Real> QactTrace<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// RMSE at 1-based round `iteration`, if recorded.
    pub fn rmse_at(&self, iteration: usize) -> Option<T> {
        self.records.get(iteration.checked_sub(1)?)?.rmse
    }

    /// `iter,energy,rmse` rows; rmse is empty when no ground truth was given.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,energy,rmse\n");
        for r in &self.records {
            let rmse = r.rmse.map(|v| format!("{v:?}")).unwrap_or_default();
            writeln!(out, "{},{:?},{}", r.iteration, r.energy, rmse).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Applies one window update around the decoded image `x`.
pub fn refine<T: Real>(enc: &mut EncodingState<T>, x: &[T], steps: impl Fn(usize) -> T) {
    let two = T::of(2.0);
    let top = T::of_usize(enc.q_max) - T::one();
    for (j, &xj) in x.iter().enumerate() {
        enc.k[j] += steps(j);
        enc.d[j] = xj - two.powf(top - enc.k[j]);
    }
}

/// Reconstruction with the simulated annealer configured in `cfg.sampler`.
pub fn reconstruct<T: Real>(
    a: &SystemMatrix<T>,
    y: &Sinogram<T>,
    cfg: &QactConfig<T>,
    gt: Option<&Image<T>>,
) -> Result<(Image<T>, QactTrace<T>)> {
    reconstruct_with(a, y, cfg, gt, &SimulatedAnnealer { schedule: cfg.sampler })
}

/// Reconstruction with any QUBO sampler. `cfg.sampler` is ignored.
///
/// Pixels crossed by no ray do not enter the QUBO at all; their bits are
/// forced to zero so they stay at `d0` instead of wandering with the
/// sampler's tie-breaking.
pub fn reconstruct_with<T: Real, S: QuboSampler<T> + Clone>(
    a: &SystemMatrix<T>,
    y: &Sinogram<T>,
    cfg: &QactConfig<T>,
    gt: Option<&Image<T>>,
    sampler: &S,
) -> Result<(Image<T>, QactTrace<T>)> {
    let n_pixels = a.n_cols();
    cfg.validate(n_pixels)?;
    check_len("sinogram", a.n_rows(), y.len())?;
    if let Some(gt) = gt {
        check_len("ground truth", n_pixels, gt.len())?;
    }
    let mut enc = EncodingState {
        d: vec![cfg.d0; n_pixels],
        k: vec![cfg.k0; n_pixels],
        q_max: cfg.q_max,
        c: cfg.c,
    };
    let unseen: Vec<usize> = a.column_sums().iter().enumerate().filter(|(_, &s)| s == T::zero()).map(|(j, _)| j).collect();

    let mut trace = QactTrace::default();
    for round in 0..cfg.n_iters {
        let q = assemble_qubo(a, y, &enc)?;
        let mut sample = sampler.for_round(round as u64).sample(&q)?;
        for &j in &unseen {
            for b in 0..cfg.q_max {
                sample.best_bits.set(enc.var(j, b), false);
            }
        }
        let x = decode(&sample.best_bits, &enc)?;
        let err = gt.map(|g| rmse(&x, g)).transpose()?;
        log::debug!("round {}: energy {:e} rmse {:?}", round + 1, sample.best_energy.as_f64(), err.map(Real::as_f64));

        refine(&mut enc, x.pixels(), |j| cfg.step(j));
        trace.records.push(IterationRecord { iteration: round + 1, image: x, energy: sample.best_energy, rmse: err });

        if let Some(limit) = cfg.early_stop_width {
            if (0..n_pixels).all(|j| enc.window_width(j) < limit) {
                break;
            }
        }
    }
    let image = trace.records.last().expect("at least one round").image.clone();
    Ok((image, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anneal::ExhaustiveSolver;
    use crate::phantoms::make_block_phantom;
    use crate::projector::{build_system_matrix, forward_project, make_geometry};

    #[test]
    fn one_refinement_step() {
        let mut enc = EncodingState::uniform(1, 0.0, 1.0, 2, 0.5).unwrap();
        refine(&mut enc, &[0.5], |_| 0.5);
        assert_eq!(enc.k[0], 1.5);
        assert!((enc.d[0] - (0.5 - 2f64.powf(-0.5))).abs() < 1e-15);
        assert!((enc.d[0] + 0.20711).abs() < 1e-5);
    }

    #[test]
    fn window_widths_shrink_by_root_two() {
        let mut enc = EncodingState::uniform(1, 0.0, 1.0, 2, 0.5).unwrap();
        let mut widths = vec![enc.window_width(0)];
        for _ in 0..4 {
            refine(&mut enc, &[0.3], |_| 0.5);
            widths.push(enc.window_width(0));
        }
        assert_eq!(widths[0], 1.5);
        assert!((widths[1] - 3.0 * 2f64.powf(-1.5)).abs() < 1e-15);
        assert!((widths[2] - 0.75).abs() < 1e-15);
        for w in widths.windows(2) {
            assert!((w[0] / w[1] - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn previous_value_stays_inside_the_window() {
        let mut enc = EncodingState::uniform(3, 0.0, 1.0, 2, 0.5).unwrap();
        let xs = [0.9, -0.1, 0.45];
        for _ in 0..10 {
            refine(&mut enc, &xs, |_| 0.5);
            for (j, &x) in xs.iter().enumerate() {
                assert!(x > enc.d[j] && x < enc.d[j] + enc.window_width(j));
            }
        }
    }

    #[test]
    fn exhaustive_loop_recovers_a_small_image() {
        // Four views at 90° leave the 2×2 checkerboard in the null space.
        let geom = make_geometry(2, 3).unwrap();
        let a: SystemMatrix = build_system_matrix(&geom);
        let gt = Image::from_pixels(2, vec![0.3, 0.7, 0.55, 0.1]).unwrap();
        let y = forward_project(&a, &gt).unwrap();
        let cfg = QactConfig { n_iters: 20, ..Default::default() };
        let (x, trace) = reconstruct_with(&a, &y, &cfg, Some(&gt), &ExhaustiveSolver).unwrap();
        assert_eq!(trace.len(), 20);
        assert!(rmse(&x, &gt).unwrap() < 1e-3, "{:?}", x);
        for w in trace.records.windows(2).skip(1) {
            assert!(w[1].energy <= w[0].energy + 1e-12);
        }
    }

    #[test]
    fn annealed_block_phantom() {
        let geom = make_geometry(4, 36).unwrap();
        let a: SystemMatrix = build_system_matrix(&geom);
        let gt = make_block_phantom();
        let y = forward_project(&a, &gt).unwrap();
        let cfg = QactConfig { sampler: AnnealSchedule { n_sweeps: 300, n_reads: 8, ..Default::default() }, ..Default::default() };
        let (x, trace) = reconstruct(&a, &y, &cfg, Some(&gt)).unwrap();
        assert!(rmse(&x, &gt).unwrap() < 1e-3);
        assert!(trace.rmse_at(30).unwrap() < trace.rmse_at(1).unwrap());
        assert!(trace.to_csv().starts_with("iter,energy,rmse\n1,"));
    }

    #[test]
    fn early_stop_cuts_the_trace() {
        let geom = make_geometry(2, 4).unwrap();
        let a: SystemMatrix = build_system_matrix(&geom);
        let y = forward_project(&a, &Image::filled(2, 0.5)).unwrap();
        let cfg = QactConfig { early_stop_width: Some(0.1), ..Default::default() };
        let (_, trace) = reconstruct_with(&a, &y, &cfg, None, &ExhaustiveSolver).unwrap();
        // Width 3·2^{-k} drops below 0.1 once k > log2(30) ≈ 4.9, i.e. after 8 updates.
        assert_eq!(trace.len(), 8);
        assert!(trace.records[0].rmse.is_none());
    }

    #[test]
    fn configuration_errors() {
        let a: SystemMatrix = build_system_matrix(&make_geometry(2, 2).unwrap());
        let y = Sinogram::zeros(2, 4);
        let bad = QactConfig { n_iters: 0, ..Default::default() };
        assert!(reconstruct(&a, &y, &bad, None).is_err());
        let bad = QactConfig { c_per_pixel: Some(vec![0.5; 3]), ..Default::default() };
        assert!(reconstruct(&a, &y, &bad, None).is_err());
        assert!(reconstruct(&a, &Sinogram::zeros(1, 4), &QactConfig::default(), None).is_err());
    }
}
