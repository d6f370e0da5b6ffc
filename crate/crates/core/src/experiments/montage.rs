//! Side-by-side reconstruction grids: one row per grid point, columns
//! ground truth | QACT | MLEM | FBP (whichever were run).

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::write_pgm16;

use super::{Method, PointOutput};

/// Tiles are upscaled to at least this many pixels per side.
const MIN_TILE: usize = 64;
const GAP: usize = 2;

/// Montage raster as `(width, height, values in [0, 1])`. Gaps are white.
pub fn montage(points: &[&PointOutput]) -> Result<(usize, usize, Vec<f64>)> {
    let first = points.first().ok_or_else(|| Error::InvalidParameter("empty montage".into()))?;
    let n = first.ground_truth.n();
    if points.iter().any(|p| p.ground_truth.n() != n) {
        return Err(Error::InvalidSize("montage tiles must share one size".into()));
    }
    let columns: Vec<Method> = Method::ALL.into_iter().filter(|m| first.images.iter().any(|(k, _)| k == m)).collect();
    let factor = MIN_TILE.div_ceil(n).max(1);
    let tile = n * factor;
    let cols = columns.len() + 1;
    let width = cols * tile + (cols - 1) * GAP;
    let height = points.len() * tile + (points.len() - 1) * GAP;
    let mut px = vec![1.0; width * height];

    for (r, p) in points.iter().enumerate() {
        let mut tiles = vec![&p.ground_truth];
        for m in &columns {
            let img = p.images.iter().find(|(k, _)| k == m).map(|(_, i)| i);
            tiles.push(img.ok_or_else(|| Error::InvalidParameter(format!("grid point lacks {m}")))?);
        }
        for (c, img) in tiles.into_iter().enumerate() {
            let (top, left) = (r * (tile + GAP), c * (tile + GAP));
            for y in 0..tile {
                for x in 0..tile {
                    px[(top + y) * width + left + x] = img.get(y / factor, x / factor).clamp(0.0, 1.0);
                }
            }
        }
    }
    Ok((width, height, px))
}

pub fn write_montage(points: &[&PointOutput], path: impl AsRef<Path>) -> Result<()> {
    let (w, h, px) = montage(points)?;
    let data: Vec<u16> = px.iter().map(|v| (v * 65535.0).round() as u16).collect();
    write_pgm16(path, w, h, &data)
}
