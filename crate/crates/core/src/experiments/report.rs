//! Convergence tables and plots for the variational loop.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{parse_err, Error, Result};
use crate::image::write_pgm16;
use crate::scalar::Real;
use crate::variational::QactTrace;

/// One round of a trace, detached from its image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub energy: f64,
    pub rmse: Option<f64>,
}

pub fn trace_points<T: Real>(trace: &QactTrace<T>) -> Vec<TracePoint> {
    trace
        .records
        .iter()
        .map(|r| TracePoint { iteration: r.iteration, energy: r.energy.as_f64(), rmse: r.rmse.map(Real::as_f64) })
        .collect()
}

/// Parses the `iter,energy,rmse` trace format; an empty rmse field means none.
pub fn read_trace_csv(text: &str) -> Result<Vec<TracePoint>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "iter,energy,rmse" => {}
        _ => return Err(parse_err(1, "expected header iter,energy,rmse")),
    }
    lines
        .map(|(ln, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(parse_err(ln + 1, format!("expected 3 fields, found {}", f.len())));
            }
            let bad = |what: &str| parse_err(ln + 1, format!("bad {what}"));
            Ok(TracePoint {
                iteration: f[0].parse().map_err(|_| bad("iteration"))?,
                energy: f[1].parse().map_err(|_| bad("energy"))?,
                rmse: if f[2].is_empty() { None } else { Some(f[2].parse().map_err(|_| bad("rmse"))?) },
            })
        })
        .collect()
}

/// `iteration,rmse,energy` rows.
pub fn report_csv(points: &[TracePoint]) -> String {
    let mut out = String::from("iteration,rmse,energy\n");
    for p in points {
        let rmse = p.rmse.map(|v| format!("{v:?}")).unwrap_or_default();
        writeln!(out, "{},{},{:?}", p.iteration, rmse, p.energy).unwrap();
    }
    out
}

const BACKGROUND: u16 = u16::MAX;
const INK: u16 = 0;
const GRID: u16 = 0xC000;
const MARGIN: usize = 16;

/// Renders `values` against their index as a black polyline on white.
///
/// The vertical axis is logarithmic when every value is positive, linear
/// otherwise. A constant series is drawn as a horizontal line through the
/// middle of the plot area.
pub fn render_line_plot(values: &[f64], width: usize, height: usize) -> Vec<u16> {
    let mut px = vec![BACKGROUND; width * height];
    if width <= 2 * MARGIN || height <= 2 * MARGIN {
        return px;
    }
    let (x0, x1) = (MARGIN, width - MARGIN - 1);
    let (y0, y1) = (MARGIN, height - MARGIN - 1);
    let mut put = |x: usize, y: usize, v: u16| {
        if x < width && y < height {
            px[y * width + x] = v;
        }
    };
    for y in y0..=y1 {
        put(x0, y, INK);
    }
    for x in x0..=x1 {
        put(x, y1, INK);
        put(x, y0, GRID);
    }

    let log = values.iter().all(|&v| v > 0.0);
    let scaled: Vec<f64> = values.iter().map(|&v| if log { v.log10() } else { v }).filter(|v| v.is_finite()).collect();
    if scaled.is_empty() {
        return px;
    }
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let flat = !(span > 1e-12 * hi.abs().max(1.0));
    let to_px = |i: usize, v: f64| -> (i64, i64) {
        let fx = if scaled.len() == 1 { 0.5 } else { i as f64 / (scaled.len() - 1) as f64 };
        let fy = if flat { 0.5 } else { (v - lo) / span };
        let x = x0 as f64 + 2.0 + fx * (x1 - x0 - 4) as f64;
        let y = y1 as f64 - 2.0 - fy * (y1 - y0 - 4) as f64;
        (x.round() as i64, y.round() as i64)
    };
    let pts: Vec<(i64, i64)> = scaled.iter().enumerate().map(|(i, &v)| to_px(i, v)).collect();
    let mut draw = |x: i64, y: i64| {
        if x >= 0 && y >= 0 {
            put(x as usize, y as usize, INK);
        }
    };
    for w in pts.windows(2) {
        line(w[0], w[1], &mut draw);
    }
    for &(x, y) in &pts {
        for dy in -1..=1 {
            for dx in -1..=1 {
                draw(x + dx, y + dy);
            }
        }
    }
    px
}

/// Bresenham segment from `a` to `b`, inclusive.
fn line(a: (i64, i64), b: (i64, i64), plot: &mut impl FnMut(i64, i64)) {
    let (mut x, mut y) = a;
    let dx = (b.0 - x).abs();
    let dy = -(b.1 - y).abs();
    let sx = if x < b.0 { 1 } else { -1 };
    let sy = if y < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        plot(x, y);
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

pub const PLOT_WIDTH: usize = 320;
pub const PLOT_HEIGHT: usize = 200;

/// Writes the report table and a PGM line plot of RMSE per iteration
/// (energy when the trace carries no RMSE).
pub fn convergence_report(points: &[TracePoint], csv_path: impl AsRef<Path>, plot_path: impl AsRef<Path>) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    fs::write(csv_path, report_csv(points))?;
    let series: Vec<f64> = if points.iter().all(|p| p.rmse.is_some()) {
        points.iter().map(|p| p.rmse.unwrap()).collect()
    } else {
        points.iter().map(|p| p.energy).collect()
    };
    write_pgm16(plot_path, PLOT_WIDTH, PLOT_HEIGHT, &render_line_plot(&series, PLOT_WIDTH, PLOT_HEIGHT))
}
