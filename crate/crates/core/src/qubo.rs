//! Binary encoding of real pixel values and the least-squares QUBO.
//!
//! Each pixel `j` is represented by `q_max` bits `σ_{j,q}`:
//!
//! ```text
//! x_j = 2^{-k_j} Σ_q 2^q σ_{j,q} + d_j
//! ```
//!
//! which is affine in the bits, so the residual `Σ_i (A x(σ) - y)_i²` is an
//! exact quadratic polynomial in σ and can be written down in closed form.
//! Bit `(j, q)` is variable `j * q_max + q`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{check_len, parse_err, Error, Result};
use crate::image::Image;
use crate::projector::{Sinogram, SystemMatrix};
use crate::scalar::Real;

/// Coefficients smaller than this in magnitude are dropped.
pub const COEFF_EPS: f64 = 1e-15;

/// Per-pixel offsets and scale exponents of the binary expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingState<T = f64> {
    pub d: Vec<T>,
    pub k: Vec<T>,
    pub q_max: usize,
    pub c: T,
}

impl<T: Real> EncodingState<T> {
    pub fn uniform(n_pixels: usize, d0: T, k0: T, q_max: usize, c: T) -> Result<Self> {
        let s = Self { d: vec![d0; n_pixels], k: vec![k0; n_pixels], q_max, c };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_max == 0 {
            return Err(Error::InvalidParameter("q_max must be at least 1".into()));
        }
        if !(self.c > T::zero()) {
            return Err(Error::InvalidParameter(format!("c must be positive, got {}", self.c)));
        }
        check_len("encoding exponents", self.d.len(), self.k.len())
    }

    pub fn n_pixels(&self) -> usize {
        self.d.len()
    }

    pub fn n_vars(&self) -> usize {
        self.d.len() * self.q_max
    }

    pub fn var(&self, pixel: usize, q: usize) -> usize {
        pixel * self.q_max + q
    }

    /// Value contributed by bit `q` of `pixel`: `2^{q - k_j}`.
    pub fn weight(&self, pixel: usize, q: usize) -> T {
        T::of(2.0).powf(T::of_usize(q) - self.k[pixel])
    }

    /// Width `(2^{q_max} - 1) 2^{-k_j}` of the representable interval of `pixel`.
    pub fn window_width(&self, pixel: usize) -> T {
        T::of_usize((1 << self.q_max) - 1) * T::of(2.0).powf(-self.k[pixel])
    }
}

/// A 0/1 assignment to the QUBO variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitAssignment {
    bits: Vec<bool>,
}

impl BitAssignment {
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Bit `i` is bit `i` of `value` (little-endian).
    pub fn from_index(value: u64, n: usize) -> Self {
        Self { bits: (0..n).map(|i| (value >> i) & 1 == 1).collect() }
    }

    /// Inverse of [`BitAssignment::from_index`]; only meaningful for `len() <= 64`.
    pub fn to_index(&self) -> u64 {
        self.bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | (u64::from(b) << i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

impl std::fmt::Display for BitAssignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// `offset + Σ_i linear_i σ_i + Σ_{i<j} Q_ij σ_i σ_j` over binary σ.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem<T = f64> {
    linear: Vec<T>,
    /// Sorted by `(i, j)`, `i < j`, keys unique.
    quadratic: Vec<(usize, usize, T)>,
    offset: T,
}

impl<T: Real> QuboProblem<T> {
    /// Duplicate couplings are summed; `(j, i)` keys are folded onto `(i, j)`.
    pub fn new(linear: Vec<T>, quadratic: impl IntoIterator<Item = (usize, usize, T)>, offset: T) -> Result<Self> {
        let n = linear.len();
        let mut merged: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (i, j, v) in quadratic {
            if i == j || i >= n || j >= n {
                return Err(Error::InvalidParameter(format!("bad coupling key ({i}, {j}) for {n} variables")));
            }
            *merged.entry((i.min(j), i.max(j))).or_insert(T::zero()) += v;
        }
        let quadratic = merged.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        Self::from_sorted(linear, quadratic, offset)
    }

    fn from_sorted(linear: Vec<T>, quadratic: Vec<(usize, usize, T)>, offset: T) -> Result<Self> {
        if !offset.is_finite() || linear.iter().chain(quadratic.iter().map(|e| &e.2)).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("QUBO coefficients must be finite".into()));
        }
        Ok(Self { linear, quadratic, offset })
    }

    pub fn n_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn linear(&self) -> &[T] {
        &self.linear
    }

    pub fn quadratic(&self) -> &[(usize, usize, T)] {
        &self.quadratic
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn coupling(&self, i: usize, j: usize) -> T {
        let key = (i.min(j), i.max(j));
        self.quadratic
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|p| self.quadratic[p].2)
            .unwrap_or(T::zero())
    }

    /// Largest absolute linear or quadratic coefficient.
    pub fn max_abs_coefficient(&self) -> T {
        self.linear
            .iter()
            .chain(self.quadratic.iter().map(|e| &e.2))
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn energy(&self, bits: &BitAssignment) -> Result<T> {
        check_len("QUBO assignment", self.n_vars(), bits.len())?;
        let s = bits.as_slice();
        let lin: T = self.linear.iter().zip(s).filter(|(_, &b)| b).map(|(&v, _)| v).sum();
        let quad: T = self.quadratic.iter().filter(|e| s[e.0] && s[e.1]).map(|e| e.2).sum();
        Ok(self.offset + lin + quad)
    }

    /// Text form: `VARS <n> OFFSET <c>`, then `L <i> <v>` and `Q <i> <j> <v>` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("VARS {} OFFSET {:?}\n", self.n_vars(), self.offset);
        for (i, v) in self.linear.iter().enumerate() {
            if *v != T::zero() {
                writeln!(out, "L {i} {v:?}").unwrap();
            }
        }
        for (i, j, v) in &self.quadratic {
            writeln!(out, "Q {i} {j} {v:?}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header: Option<(usize, T)> = None;
        let mut linear = Vec::new();
        let mut quad = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<T>().map_err(|_| parse_err(ln + 1, format!("bad number {s:?}")));
            let idx = |s: &str| s.parse::<usize>().map_err(|_| parse_err(ln + 1, format!("bad index {s:?}")));
            match (f[0], header) {
                ("VARS", None) if f.len() == 4 && f[2] == "OFFSET" => {
                    let n = idx(f[1])?;
                    header = Some((n, num(f[3])?));
                    linear = vec![T::zero(); n];
                }
                ("L", Some((n, _))) if f.len() == 3 => {
                    let i = idx(f[1])?;
                    if i >= n {
                        return Err(parse_err(ln + 1, format!("variable {i} out of range")));
                    }
                    linear[i] += num(f[2])?;
                }
                ("Q", Some(_)) if f.len() == 4 => quad.push((idx(f[1])?, idx(f[2])?, num(f[3])?)),
                _ => return Err(parse_err(ln + 1, format!("unexpected line {line:?}"))),
            }
        }
        let (_, offset) = header.ok_or(Error::Parse { line: None, msg: "missing VARS header".into() })?;
        Self::new(linear, quad, offset)
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_text(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

pub fn energy<T: Real>(q: &QuboProblem<T>, bits: &BitAssignment) -> Result<T> {
    q.energy(bits)
}

/// Maps bits to pixel values through the binary expansion.
pub fn decode<T: Real>(bits: &BitAssignment, enc: &EncodingState<T>) -> Result<Image<T>> {
    enc.validate()?;
    check_len("bit assignment", enc.n_vars(), bits.len())?;
    let n = (enc.n_pixels() as f64).sqrt().round() as usize;
    if n * n != enc.n_pixels() {
        return Err(Error::InvalidSize(format!("{} pixels is not a square image", enc.n_pixels())));
    }
    let pixels = (0..enc.n_pixels())
        .map(|j| {
            let digits: usize = (0..enc.q_max).filter(|&q| bits.get(enc.var(j, q))).map(|q| 1 << q).sum();
            T::of(2.0).powf(-enc.k[j]) * T::of_usize(digits) + enc.d[j]
        })
        .collect();
    Image::from_pixels(n, pixels)
}

/// Dense upper triangle (`j <= j'`) of `AᵀA`, row-major in `j`.
fn gram_upper<T: Real>(a: &SystemMatrix<T>) -> Vec<T> {
    let p = a.n_cols();
    let mut g = vec![T::zero(); p * p];
    for r in 0..a.n_rows() {
        let (cols, vals) = a.row(r);
        for (u, (&cu, &vu)) in cols.iter().zip(vals).enumerate() {
            for (&cv, &vv) in cols[u..].iter().zip(&vals[u..]) {
                g[cu * p + cv] += vu * vv;
            }
        }
    }
    g
}

/// Expands `Σ_i (Σ_j A_ij x_j(σ) - y_i)²` into QUBO form.
///
/// With bit weights `w_{jq} = 2^{q - k_j}` and residual `b = y - A d`:
/// couplings are `2 w w' (AᵀA)_{jj'}`, the linear term of bit `(j, q)` is
/// `w² (AᵀA)_{jj} - 2 w (Aᵀb)_j` (using `σ² = σ`), and the offset is `|b|²`.
pub fn assemble_qubo<T: Real>(a: &SystemMatrix<T>, y: &Sinogram<T>, enc: &EncodingState<T>) -> Result<QuboProblem<T>> {
    enc.validate()?;
    check_len("encoding pixels", a.n_cols(), enc.n_pixels())?;
    check_len("sinogram", a.n_rows(), y.len())?;

    let p = a.n_cols();
    let qm = enc.q_max;
    let eps = T::of(COEFF_EPS);
    let ad = a.apply(&enc.d)?;
    let b: Vec<T> = y.values().iter().zip(&ad).map(|(&yi, &adi)| yi - adi).collect();
    let atb = a.apply_transpose(&b)?;
    let gram = gram_upper(a);
    let weights: Vec<T> = (0..p).flat_map(|j| (0..qm).map(move |q| (j, q))).map(|(j, q)| enc.weight(j, q)).collect();

    let linear: Vec<T> = (0..p * qm)
        .map(|v| {
            let j = v / qm;
            let w = weights[v];
            let coef = w * w * gram[j * p + j] - T::of(2.0) * w * atb[j];
            if coef.abs() < eps {
                T::zero()
            } else {
                coef
            }
        })
        .collect();

    let quadratic: Vec<(usize, usize, T)> = (0..p * qm)
        .into_par_iter()
        .flat_map_iter(|v| {
            let (j, w) = (v / qm, weights[v]);
            let gram = &gram;
            let weights = &weights;
            (v + 1..p * qm).filter_map(move |u| {
                let g = gram[j * p + u / qm];
                if g == T::zero() {
                    return None;
                }
                let coef = T::of(2.0) * w * weights[u] * g;
                (coef.abs() >= eps).then_some((v, u, coef))
            })
        })
        .collect();

    let offset = b.iter().map(|&r| r * r).sum();
    QuboProblem::from_sorted(linear, quadratic, offset)
}
