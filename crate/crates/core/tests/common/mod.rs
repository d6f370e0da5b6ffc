#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;

use qact::projector::Point;
use qact::seeding;
use qact::{BitAssignment, EncodingState, QuboProblem, SystemMatrix};

pub const SIDE: f64 = 25.6;

/// Intersection lengths estimated by sampling `samples` midpoints along the
/// part of the segment inside the grid's circumscribed circle.
pub fn dense_sampling(start: Point, end: Point, n: usize, samples: usize) -> BTreeMap<usize, f64> {
    let half = SIDE / 2.0;
    let pitch = SIDE / n as f64;
    let d = [end[0] - start[0], end[1] - start[1]];
    let len = d[0].hypot(d[1]);
    let r2 = 2.0 * half * half;
    // |start + t d|² = r² on the circle.
    let a = d[0] * d[0] + d[1] * d[1];
    let b = 2.0 * (start[0] * d[0] + start[1] * d[1]);
    let c = start[0] * start[0] + start[1] * start[1] - r2;
    let disc = b * b - 4.0 * a * c;
    let mut out = BTreeMap::new();
    if disc <= 0.0 {
        return out;
    }
    let t0 = ((-b - disc.sqrt()) / (2.0 * a)).max(0.0);
    let t1 = ((-b + disc.sqrt()) / (2.0 * a)).min(1.0);
    if t1 <= t0 {
        return out;
    }
    let step = (t1 - t0) / samples as f64;
    let h = step * len;
    for s in 0..samples {
        let t = t0 + (s as f64 + 0.5) * step;
        let (x, y) = (start[0] + t * d[0], start[1] + t * d[1]);
        if x.abs() >= half || y.abs() >= half {
            continue;
        }
        let col = ((x + half) / pitch).floor() as usize;
        let row = ((half - y) / pitch).floor() as usize;
        *out.entry(row * n + col.min(n - 1)).or_insert(0.0) += h;
    }
    out
}

pub fn random_qubo(rng: &mut impl Rng, n: usize) -> QuboProblem {
    let linear = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut quad = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            quad.push((i, j, rng.random_range(-1.0..1.0)));
        }
    }
    QuboProblem::new(linear, quad, rng.random_range(-1.0..1.0)).unwrap()
}

/// Direct residual `Σ_i (A x(σ) - y)_i²` of the decoded bits.
pub fn direct_energy(a: &SystemMatrix, y: &[f64], enc: &EncodingState, bits: &BitAssignment) -> f64 {
    let x: Vec<f64> = (0..enc.n_pixels())
        .map(|j| enc.d[j] + (0..enc.q_max).filter(|&q| bits.get(enc.var(j, q))).map(|q| enc.weight(j, q)).sum::<f64>())
        .collect();
    (0..a.n_rows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            let p: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
            (p - y[i]) * (p - y[i])
        })
        .sum()
}

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    seeding::stream(seed, 0x7e57)
}
