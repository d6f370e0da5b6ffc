use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::geometry::Geometry;
use super::siddon::trace_ray;
use crate::error::{check_len, parse_err, Error, Result};
use crate::image::Image;
use crate::scalar::Real;

/// Sparse `m × n²` matrix of ray/pixel intersection lengths (cm), CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix<T = f64> {
    n_rows: usize,
    n_cols: usize,
    n_det: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

/// Projection values, laid out as `n_angles` consecutive views of `n_det` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram<T = f64> {
    values: Vec<T>,
    n_det: usize,
}

impl<T: Real> Sinogram<T> {
    pub fn new(values: Vec<T>, n_det: usize) -> Result<Self> {
        if n_det == 0 || !values.len().is_multiple_of(n_det) {
            return Err(Error::InvalidSize(format!(
                "{} values do not split into views of {n_det}",
                values.len()
            )));
        }
        Ok(Self { values, n_det })
    }

    pub fn zeros(n_angles: usize, n_det: usize) -> Self {
        Self { values: vec![T::zero(); n_angles * n_det], n_det }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_det(&self) -> usize {
        self.n_det
    }

    pub fn n_angles(&self) -> usize {
        self.values.len() / self.n_det
    }

    pub fn view(&self, angle: usize) -> &[T] {
        &self.values[angle * self.n_det..(angle + 1) * self.n_det]
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        check_len("sinogram values", self.values.len(), values.len())?;
        Ok(Self { values, n_det: self.n_det })
    }

    /// One view per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for view in self.values.chunks(self.n_det) {
            for (i, v) in view.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut width = None;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let before = values.len();
            for tok in line.split(',') {
                let v = tok.trim().parse::<T>().map_err(|_| parse_err(ln + 1, format!("bad value {tok:?}")))?;
                values.push(v);
            }
            let w = values.len() - before;
            match width {
                None => width = Some(w),
                Some(prev) if prev != w => return Err(parse_err(ln + 1, format!("expected {prev} values, found {w}"))),
                _ => {}
            }
        }
        Self::new(values, width.ok_or(Error::Parse { line: None, msg: "empty sinogram".into() })?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path)?)
    }
}

impl<T: Real> SystemMatrix<T> {
    /// Builds from per-row `(col, value)` lists; each list must hold distinct columns.
    pub fn from_rows(n_cols: usize, n_det: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidParameter(format!("row {r} repeats a column")));
            }
            for (c, v) in row {
                if c >= n_cols {
                    return Err(Error::InvalidParameter(format!("row {r} column {c} out of range")));
                }
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        let n_rows = row_ptr.len() - 1;
        let n_det = if n_det > 0 && n_rows % n_det == 0 { n_det } else { n_rows.max(1) };
        Ok(Self { n_rows, n_cols, n_det, row_ptr, cols, vals })
    }

    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n_rows];
        for (r, c, v) in triplets {
            if r >= n_rows {
                return Err(Error::InvalidParameter(format!("row {r} out of range")));
            }
            rows[r].push((c, v));
        }
        Self::from_rows(n_cols, n_rows, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Detector bins per view, used to shape sinograms.
    pub fn n_det(&self) -> usize {
        self.n_det
    }

    /// Reinterprets the row blocking, e.g. after loading from a triplet file.
    pub fn with_detector_count(mut self, n_det: usize) -> Result<Self> {
        if n_det == 0 || !self.n_rows.is_multiple_of(n_det) {
            return Err(Error::InvalidSize(format!("{} rows do not split into views of {n_det}", self.n_rows)));
        }
        self.n_det = n_det;
        Ok(self)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (c, v) = self.row(r);
            c.iter().zip(v).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n_rows).map(|r| self.row(r).1.iter().copied().sum()).collect()
    }

    /// Σ_i A_ij for every pixel j.
    pub fn column_sums(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_cols];
        for (_, c, v) in self.triplets() {
            out[c] += v;
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut dense = vec![vec![T::zero(); self.n_cols]; self.n_rows];
        for (r, c, v) in self.triplets() {
            dense[r][c] = v;
        }
        dense
    }

    /// `A x` on a flat pixel vector.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        check_len("forward projection", self.n_cols, x.len())?;
        Ok((0..self.n_rows)
            .into_par_iter()
            .map(|r| {
                let (c, v) = self.row(r);
                c.iter().zip(v).fold(T::zero(), |acc, (&c, &v)| acc + v * x[c])
            })
            .collect())
    }

    /// `Aᵀ y` on a flat ray vector.
    pub fn apply_transpose(&self, y: &[T]) -> Result<Vec<T>> {
        check_len("back projection", self.n_rows, y.len())?;
        let mut out = vec![T::zero(); self.n_cols];
        for (r, &yr) in y.iter().enumerate() {
            let (c, v) = self.row(r);
            for (&c, &v) in c.iter().zip(v) {
                out[c] += v * yr;
            }
        }
        Ok(out)
    }

    /// Text triplets with a `row,col,length_cm` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,length_cm\n");
        for (r, c, v) in self.triplets() {
            writeln!(out, "{r},{c},{v:?}").unwrap();
        }
        out
    }

    pub fn from_csv(text: &str, n_rows: usize, n_cols: usize) -> Result<Self> {
        let mut trip = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("row") {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(parse_err(ln + 1, "expected row,col,length"));
            }
            let r = f[0].parse().map_err(|_| parse_err(ln + 1, "bad row"))?;
            let c = f[1].parse().map_err(|_| parse_err(ln + 1, "bad col"))?;
            let v = f[2].parse().map_err(|_| parse_err(ln + 1, "bad length"))?;
            trip.push((r, c, v));
        }
        Self::from_triplets(n_rows, n_cols, trip)
    }

    /// Little-endian `u64 m, u64 n²`, then `(u64 row, u64 col, f64 length)` per entry.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 24 * self.nnz());
        out.extend_from_slice(&(self.n_rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_cols as u64).to_le_bytes());
        for (r, c, v) in self.triplets() {
            out.extend_from_slice(&(r as u64).to_le_bytes());
            out.extend_from_slice(&(c as u64).to_le_bytes());
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Parse { line: None, msg: msg.to_string() };
        if bytes.len() < 16 || !(bytes.len() - 16).is_multiple_of(24) {
            return Err(bad("truncated system matrix"));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let n_rows = word(0) as usize;
        let n_cols = word(8) as usize;
        let trip = bytes[16..].chunks_exact(24).map(|ch| {
            let r = u64::from_le_bytes(ch[0..8].try_into().unwrap()) as usize;
            let c = u64::from_le_bytes(ch[8..16].try_into().unwrap()) as usize;
            let v = f64::from_le_bytes(ch[16..24].try_into().unwrap());
            (r, c, T::of(v))
        });
        Self::from_triplets(n_rows, n_cols, trip)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Traces every `(angle, detector)` ray of `geom` through the image grid.
/// Lengths are computed in `f64` and stored as `T`.
pub fn build_system_matrix<T: Real>(geom: &Geometry) -> SystemMatrix<T> {
    let rows: Vec<Vec<(usize, T)>> = (0..geom.n_rays())
        .into_par_iter()
        .map(|row| {
            let (src, dst) = geom.ray(row);
            trace_ray(src, dst, geom.n, geom.image_side_cm)
                .into_iter()
                .map(|(p, l)| (p, T::of(l)))
                .collect()
        })
        .collect();
    SystemMatrix::from_rows(geom.n * geom.n, geom.n_det, rows).expect("traced rows are well formed")
}

pub fn forward_project<T: Real>(a: &SystemMatrix<T>, x: &Image<T>) -> Result<Sinogram<T>> {
    Ok(Sinogram { values: a.apply(x.pixels())?, n_det: a.n_det })
}

pub fn back_project<T: Real>(a: &SystemMatrix<T>, y: &Sinogram<T>) -> Result<Image<T>> {
    let flat = a.apply_transpose(y.values())?;
    let n = (flat.len() as f64).sqrt().round() as usize;
    Image::from_pixels(n, flat)
}
