//! QUBO minimizers: single-flip simulated annealing and exhaustive search.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qubo::{BitAssignment, QuboProblem};
use crate::scalar::Real;
use crate::seeding;

/// Largest problem [`exhaustive_solve`] will enumerate.
pub const EXHAUSTIVE_MAX_VARS: usize = 24;

/// Inverse-temperature ladder and sampling budget.
///
/// Inverse temperatures are in units of the problem's largest absolute
/// coefficient: a flip that raises the energy by that much is accepted with
/// probability `exp(-beta)`. This keeps one schedule meaningful whether the
/// coefficients are of order one or `1e-8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub n_sweeps: usize,
    pub n_reads: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self { n_sweeps: 1000, n_reads: 32, beta_start: 0.1, beta_end: 50.0, seed: 0 }
    }
}

impl AnnealSchedule {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sweeps == 0 || self.n_reads == 0 {
            return Err(Error::InvalidParameter("sweeps and reads must be at least 1".into()));
        }
        if !(self.beta_start > 0.0 && self.beta_end > self.beta_start && self.beta_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need beta_end > beta_start > 0, got {} -> {}",
                self.beta_start, self.beta_end
            )));
        }
        Ok(())
    }

    /// One inverse temperature per sweep, geometric from `beta_start` to `beta_end`.
    pub fn betas(&self) -> Vec<f64> {
        if self.n_sweeps == 1 {
            return vec![self.beta_end];
        }
        let ratio = (self.beta_end / self.beta_start).ln() / (self.n_sweeps - 1) as f64;
        (0..self.n_sweeps).map(|s| self.beta_start * (ratio * s as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult<T = f64> {
    pub best_bits: BitAssignment,
    pub best_energy: T,
    /// Best energy of each read, in read order.
    pub energies: Vec<T>,
}

/// Anything that can minimize a QUBO. The variational loop is generic over this.
pub trait QuboSampler<T: Real>: Sync {
    fn sample(&self, q: &QuboProblem<T>) -> Result<SampleResult<T>>;

    /// A sampler for the `round`-th call within one outer loop. Stochastic
    /// samplers use this to move to a fresh random stream.
    fn for_round(&self, _round: u64) -> Self
    where
        Self: Sized + Clone,
    {
        self.clone()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimulatedAnnealer {
    pub schedule: AnnealSchedule,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExhaustiveSolver;

impl<T: Real> QuboSampler<T> for SimulatedAnnealer {
    fn sample(&self, q: &QuboProblem<T>) -> Result<SampleResult<T>> {
        anneal(q, &self.schedule)
    }

    fn for_round(&self, round: u64) -> Self {
        let mut s = *self;
        s.schedule.seed = seeding::derive_seed(self.schedule.seed, round);
        s
    }
}

impl<T: Real> QuboSampler<T> for ExhaustiveSolver {
    fn sample(&self, q: &QuboProblem<T>) -> Result<SampleResult<T>> {
        exhaustive_solve(q)
    }
}

/// Symmetric adjacency of the coupling graph in CSR form.
struct Neighbours<T> {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<T>,
}

impl<T: Real> Neighbours<T> {
    fn new(q: &QuboProblem<T>) -> Self {
        let n = q.n_vars();
        let mut degree = vec![0usize; n + 1];
        for &(i, j, _) in q.quadratic() {
            degree[i + 1] += 1;
            degree[j + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let ptr = degree;
        let mut fill = ptr.clone();
        let mut idx = vec![0; ptr[n]];
        let mut val = vec![T::zero(); ptr[n]];
        for &(i, j, v) in q.quadratic() {
            idx[fill[i]] = j;
            val[fill[i]] = v;
            fill[i] += 1;
            idx[fill[j]] = i;
            val[fill[j]] = v;
            fill[j] += 1;
        }
        Self { ptr, idx, val }
    }

    fn of(&self, i: usize) -> (&[usize], &[T]) {
        let span = self.ptr[i]..self.ptr[i + 1];
        (&self.idx[span.clone()], &self.val[span])
    }

    /// Energy change of flipping each variable is `±field`.
    fn fields(&self, q: &QuboProblem<T>, state: &[bool]) -> Vec<T> {
        (0..state.len())
            .map(|i| {
                let (idx, val) = self.of(i);
                idx.iter().zip(val).filter(|(&j, _)| state[j]).fold(q.linear()[i], |acc, (_, &v)| acc + v)
            })
            .collect()
    }
}

/// Skip the random draw when acceptance is below `exp(-MAX_EXPONENT)`.
const MAX_EXPONENT: f64 = 60.0;

fn run_chain<T: Real>(q: &QuboProblem<T>, nb: &Neighbours<T>, betas: &[f64], seed: u64, read: u64) -> Result<(BitAssignment, T)> {
    let n = q.n_vars();
    let mut rng = seeding::stream(seed, read);
    let mut state: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    let mut field = nb.fields(q, &state);
    let mut current = q.energy(&BitAssignment::from_bits(state.clone()))?;
    let mut best = state.clone();
    let mut best_energy = current;

    for &beta in betas {
        for i in 0..n {
            let delta = if state[i] { -field[i] } else { field[i] };
            let accept = if delta <= T::zero() {
                true
            } else {
                let x = beta * delta.as_f64();
                x < MAX_EXPONENT && rng.random::<f64>() < (-x).exp()
            };
            if accept {
                state[i] = !state[i];
                current += delta;
                let (idx, val) = nb.of(i);
                if state[i] {
                    for (&j, &v) in idx.iter().zip(val) {
                        field[j] += v;
                    }
                } else {
                    for (&j, &v) in idx.iter().zip(val) {
                        field[j] -= v;
                    }
                }
            }
        }
        if current < best_energy {
            best.copy_from_slice(&state);
            best_energy = current;
        }
    }
    let best = BitAssignment::from_bits(best);
    let exact = q.energy(&best)?;
    Ok((best, exact))
}

/// Runs `n_reads` independent Metropolis chains and keeps the lowest state
/// seen at the end of any sweep (or at initialization).
///
/// Each read starts from a uniformly random assignment and sweeps the
/// variables in index order once per inverse temperature. Read `r` draws from
/// substream `(seed, r)`; results are reduced in read order, so the output is
/// identical for any thread count.
pub fn anneal<T: Real>(q: &QuboProblem<T>, sched: &AnnealSchedule) -> Result<SampleResult<T>> {
    sched.validate()?;
    if q.n_vars() == 0 {
        return Err(Error::InvalidSize("QUBO has no variables".into()));
    }
    let scale = q.max_abs_coefficient().as_f64();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let betas: Vec<f64> = sched.betas().into_iter().map(|b| b / scale).collect();
    let nb = Neighbours::new(q);

    let reads = (0..sched.n_reads as u64)
        .into_par_iter()
        .map(|r| run_chain(q, &nb, &betas, sched.seed, r))
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (r, read) in reads.iter().enumerate() {
        if read.1 < reads[best].1 {
            best = r;
        }
    }
    let energies = reads.iter().map(|r| r.1).collect();
    let (best_bits, best_energy) = reads.into_iter().nth(best).expect("at least one read");
    Ok(SampleResult { best_bits, best_energy, energies })
}

/// Global minimum by Gray-code enumeration of all `2^n` assignments.
///
/// Ties (equal up to accumulated rounding) go to the assignment with the
/// smallest little-endian integer value.
pub fn exhaustive_solve<T: Real>(q: &QuboProblem<T>) -> Result<SampleResult<T>> {
    let n = q.n_vars();
    if n > EXHAUSTIVE_MAX_VARS {
        return Err(Error::SizeCap { n_vars: n, cap: EXHAUSTIVE_MAX_VARS });
    }
    let mut coupling = vec![T::zero(); n * n];
    for &(i, j, v) in q.quadratic() {
        coupling[i * n + j] = v;
        coupling[j * n + i] = v;
    }
    let magnitude = q.linear().iter().chain(q.quadratic().iter().map(|e| &e.2)).fold(q.offset().abs(), |s, v| s + v.abs());
    let tol = T::epsilon() * T::of(64.0) * (T::one() + magnitude);

    let mut field = q.linear().to_vec();
    let mut state = 0u64;
    let mut current = q.offset();
    let (mut best_state, mut best_energy) = (0u64, current);
    for step in 1..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let on = state & (1 << i) == 0;
        let delta = if on { field[i] } else { -field[i] };
        state ^= 1 << i;
        current += delta;
        let row = &coupling[i * n..(i + 1) * n];
        for (f, &c) in field.iter_mut().zip(row) {
            if on {
                *f += c;
            } else {
                *f -= c;
            }
        }
        if current < best_energy - tol || (current <= best_energy + tol && state < best_state) {
            best_state = state;
            best_energy = current;
        }
    }
    let best_bits = BitAssignment::from_index(best_state, n);
    let best_energy = q.energy(&best_bits)?;
    Ok(SampleResult { best_bits, best_energy, energies: vec![best_energy] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::energy;

    fn brute_force(q: &QuboProblem) -> f64 {
        (0..1u64 << q.n_vars())
            .map(|s| q.energy(&BitAssignment::from_index(s, q.n_vars())).unwrap())
            .fold(f64::INFINITY, f64::min)
    }

    fn random_qubo(n: usize, seed: u64) -> QuboProblem {
        let mut rng = seeding::stream(seed, 99);
        let linear = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let quad: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| (i, j, rng.random_range(-1.0..1.0))).collect();
        QuboProblem::new(linear, quad, 0.0).unwrap()
    }

    #[test]
    fn constant_problem() {
        let q: QuboProblem = QuboProblem::new(vec![0.0; 5], [], 5.0).unwrap();
        let r = anneal(&q, &AnnealSchedule { n_sweeps: 10, n_reads: 2, ..Default::default() }).unwrap();
        assert_eq!(r.best_energy, 5.0);
        assert_eq!(exhaustive_solve(&q).unwrap().best_energy, 5.0);
        assert_eq!(exhaustive_solve(&q).unwrap().best_bits, BitAssignment::zeros(5));
    }

    #[test]
    fn single_variable() {
        let q: QuboProblem = QuboProblem::new(vec![-1.0], [], 0.0).unwrap();
        let r = exhaustive_solve(&q).unwrap();
        assert_eq!(r.best_bits.as_slice(), &[true]);
        assert_eq!(r.best_energy, -1.0);
    }

    #[test]
    fn single_ray_problem() {
        let q: QuboProblem = QuboProblem::new(vec![-0.25, 0.0], [(0, 1, 1.0)], 0.25).unwrap();
        let r = anneal(&q, &AnnealSchedule::default()).unwrap();
        assert_eq!(r.best_bits.as_slice(), &[true, false]);
        assert!(r.best_energy.abs() < 1e-15);
        assert_eq!(exhaustive_solve(&q).unwrap().best_bits, r.best_bits);
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        for seed in 0..20 {
            let q = random_qubo(9, seed);
            let r = exhaustive_solve(&q).unwrap();
            assert!((r.best_energy - brute_force(&q)).abs() < 1e-12);
            assert_eq!(r.best_energy, energy(&q, &r.best_bits).unwrap());
        }
    }

    #[test]
    fn exhaustive_breaks_ties_by_lowest_index() {
        // Symmetric: flipping either variable alone gives -1.
        let q: QuboProblem = QuboProblem::new(vec![-1.0, -1.0], [(0, 1, 1.0)], 0.0).unwrap();
        let r = exhaustive_solve(&q).unwrap();
        assert_eq!(r.best_bits.to_index(), 1);
    }

    #[test]
    fn exhaustive_enforces_cap() {
        let q: QuboProblem = QuboProblem::new(vec![0.0; 25], [], 0.0).unwrap();
        assert!(matches!(exhaustive_solve(&q), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn result_invariants_hold() {
        let q = random_qubo(14, 5);
        let r = anneal(&q, &AnnealSchedule { n_sweeps: 200, n_reads: 8, seed: 3, ..Default::default() }).unwrap();
        assert_eq!(r.energies.len(), 8);
        assert_eq!(r.best_energy, r.energies.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(r.best_energy, q.energy(&r.best_bits).unwrap());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let q = random_qubo(30, 8);
        let s = AnnealSchedule { n_sweeps: 100, n_reads: 6, seed: 17, ..Default::default() };
        assert_eq!(anneal(&q, &s).unwrap(), anneal(&q, &s).unwrap());
    }

    #[test]
    fn schedule_is_geometric() {
        let s = AnnealSchedule { n_sweeps: 3, beta_start: 1.0, beta_end: 100.0, ..Default::default() };
        let b = s.betas();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 10.0).abs() < 1e-9 && (b[2] - 100.0).abs() < 1e-9);
        assert!(AnnealSchedule { beta_end: 0.05, ..Default::default() }.validate().is_err());
        assert!(AnnealSchedule { n_reads: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn tiny_coefficients_are_handled_by_scaling() {
        let q = random_qubo(10, 2);
        let scaled = QuboProblem::new(
            q.linear().iter().map(|v| v * 1e-9).collect(),
            q.quadratic().iter().map(|&(i, j, v)| (i, j, v * 1e-9)),
            0.0,
        )
        .unwrap();
        let r = anneal(&scaled, &AnnealSchedule::default()).unwrap();
        let e = exhaustive_solve(&scaled).unwrap();
        assert!((r.best_energy - e.best_energy).abs() <= 1e-20);
    }
}
