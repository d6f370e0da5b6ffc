//! Exact intersection lengths of a line segment with a square pixel grid.
//!
//! Parametrize the segment as `p(α) = start + α (end - start)`, `α ∈ [0, 1]`.
//! Clip α against the grid's bounding square, collect every α at which the
//! segment crosses a vertical or horizontal grid line, and sort. Consecutive
//! crossings bound a piece lying in a single pixel, identified from the
//! piece's midpoint.

use super::geometry::Point;

/// Pieces shorter than this (cm) are discarded.
pub const MIN_LENGTH_CM: f64 = 1e-12;

/// Returns `(pixel, length)` pairs, pixel index row-major, sorted by pixel.
///
/// The grid is `n × n` pixels covering `[-side/2, side/2]²`, with row 0 at
/// the top (largest y).
pub fn trace_ray(start: Point, end: Point, n: usize, side: f64) -> Vec<(usize, f64)> {
    let half = side / 2.0;
    let pitch = side / n as f64;
    let delta = [end[0] - start[0], end[1] - start[1]];
    let length = delta[0].hypot(delta[1]);
    if length == 0.0 {
        return Vec::new();
    }

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for k in 0..2 {
        if delta[k] == 0.0 {
            if start[k] <= -half || start[k] >= half {
                return Vec::new();
            }
        } else {
            let a0 = (-half - start[k]) / delta[k];
            let a1 = (half - start[k]) / delta[k];
            lo = lo.max(a0.min(a1));
            hi = hi.min(a0.max(a1));
        }
    }
    if hi <= lo {
        return Vec::new();
    }

    let mut alphas = Vec::with_capacity(2 * n + 4);
    alphas.push(lo);
    alphas.push(hi);
    for k in 0..2 {
        if delta[k] == 0.0 {
            continue;
        }
        for i in 0..=n {
            let plane = -half + i as f64 * pitch;
            let a = (plane - start[k]) / delta[k];
            if a > lo && a < hi {
                alphas.push(a);
            }
        }
    }
    alphas.sort_by(f64::total_cmp);

    let clamp = |v: f64| (v.max(0.0) as usize).min(n - 1);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(2 * n);
    for w in alphas.windows(2) {
        let seg = (w[1] - w[0]) * length;
        if seg <= MIN_LENGTH_CM {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let x = start[0] + mid * delta[0];
        let y = start[1] + mid * delta[1];
        let col = clamp(((x + half) / pitch).floor());
        let row = clamp(((half - y) / pitch).floor());
        let pixel = row * n + col;
        match out.last_mut() {
            Some((p, l)) if *p == pixel => *l += seg,
            _ => out.push((pixel, seg)),
        }
    }
    out.sort_by_key(|&(p, _)| p);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_ray_through_a_row() {
        let side = 25.6;
        // Through the middle of row 1 of a 4×4 grid.
        let y = side / 2.0 - 1.5 * 6.4;
        let hits = trace_ray([-40.0, y], [40.0, y], 4, side);
        assert_eq!(hits.iter().map(|h| h.0).collect::<Vec<_>>(), vec![4, 5, 6, 7]);
        for (_, l) in &hits {
            assert!((l - 6.4).abs() < 1e-12);
        }
        let total: f64 = hits.iter().map(|h| h.1).sum();
        assert!((total - 25.6).abs() < 1e-12);
    }

    #[test]
    fn diagonal_ray_visits_the_diagonal() {
        let hits = trace_ray([-20.0, 20.0], [20.0, -20.0], 4, 25.6);
        let pixels: Vec<usize> = hits.iter().map(|h| h.0).collect();
        assert_eq!(pixels, vec![0, 5, 10, 15]);
        let total: f64 = hits.iter().map(|h| h.1).sum();
        assert!((total - 25.6 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn missing_ray_is_empty() {
        assert!(trace_ray([-40.0, 13.0], [40.0, 13.0], 4, 25.6).is_empty());
        assert!(trace_ray([13.0, -40.0], [13.0, 40.0], 4, 25.6).is_empty());
        assert!(trace_ray([-40.0, 30.0], [40.0, 50.0], 4, 25.6).is_empty());
    }

    #[test]
    fn segment_ending_inside_is_clipped() {
        let hits = trace_ray([-40.0, 0.1], [0.0, 0.1], 2, 25.6);
        let total: f64 = hits.iter().map(|h| h.1).sum();
        assert!((total - 12.8).abs() < 1e-12);
        assert_eq!(hits.len(), 1);
    }
}
