//! Square attenuation images and their file formats.
//!
//! Pixels are stored row-major: pixel `(row, col)` lives at `row * n + col`.
//! Row 0 is the top of the object (largest y), column 0 its left edge
//! (smallest x).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{check_len, parse_err, Error, Result};
use crate::scalar::Real;

/// Side of the imaged object in cm. Every grid covers this square.
pub const OBJECT_SIDE_CM: f64 = 25.6;

#[derive(Debug, Clone, PartialEq)]
pub struct Image<T = f64> {
    n: usize,
    pixels: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, T::zero())
    }

    pub fn filled(n: usize, value: T) -> Self {
        Self { n, pixels: vec![value; n * n] }
    }

    pub fn from_pixels(n: usize, pixels: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("image side must be positive".into()));
        }
        check_len("image pixels", n * n, pixels.len())?;
        Ok(Self { n, pixels })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let pixels = (0..n * n).map(|i| f(i / n, i % n)).collect();
        Self { n, pixels }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Physical side of one pixel in cm.
    pub fn pixel_scale_cm(&self) -> f64 {
        OBJECT_SIDE_CM / self.n as f64
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [T] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.pixels[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.pixels[row * self.n + col] = value;
    }

    pub fn sum(&self) -> T {
        self.pixels.iter().copied().sum()
    }

    pub fn min_max(&self) -> (T, T) {
        self.pixels.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { n: self.n, pixels: self.pixels.iter().map(|&v| f(v)).collect() }
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> Image<U> {
        Image { n: self.n, pixels: self.pixels.iter().map(|v| U::of(v.as_f64())).collect() }
    }

    /// Nearest-neighbour upscale by an integer factor, used for montages.
    pub fn upscale(&self, factor: usize) -> Self {
        let m = self.n * factor;
        Self::from_fn(m, |r, c| self.get(r / factor, c / factor))
    }

    /// One row per line, values comma separated, shortest round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.pixels.len() * 12);
        for row in self.pixels.chunks(self.n) {
            for (i, v) in row.iter().enumerate() {
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
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<T>().map_err(|_| parse_err(ln + 1, format!("bad value {s:?}"))))
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::Parse { line: None, msg: "empty image".into() });
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(parse_err(i + 1, format!("expected {n} columns, found {}", r.len())));
        }
        Self::from_pixels(n, rows.concat())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path)?)
    }

    /// 16-bit binary PGM, `[0, 1]` mapped onto `[0, 65535]`; values outside are clamped.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let data: Vec<u16> = self
            .pixels
            .iter()
            .map(|v| (v.as_f64().clamp(0.0, 1.0) * 65535.0).round() as u16)
            .collect();
        write_pgm16(path, self.n, self.n, &data)
    }

    /// Inverse of [`Image::write_pgm`] for square images.
    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let raster = GrayRaster::read(path)?;
        if raster.width != raster.height {
            return Err(Error::InvalidSize(format!("image is {}x{}, not square", raster.width, raster.height)));
        }
        Self::from_pixels(raster.width, raster.data.iter().map(|&v| T::of(v)).collect())
    }
}

/// Writes big-endian 16-bit binary PGM (P5, maxval 65535).
pub fn write_pgm16(path: impl AsRef<Path>, width: usize, height: usize, data: &[u16]) -> Result<()> {
    check_len("pgm raster", width * height, data.len())?;
    let mut bytes = format!("P5\n{width} {height}\n65535\n").into_bytes();
    bytes.extend(data.iter().flat_map(|v| v.to_be_bytes()));
    fs::write(path, bytes)?;
    Ok(())
}

/// A decoded grayscale raster with intensities scaled to `[0, 1]` by the
/// format's maximum value.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRaster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayRaster {
    /// Reads an 8- or 16-bit grayscale file (binary PGM, or PNG).
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decoded = image::ImageReader::open(path)?
            .with_guessed_format()?
            .decode()
            .map_err(|e| Error::Decode { path: path.to_path_buf(), msg: e.to_string() })?;
        let gray = decoded.into_luma16();
        let (w, h) = gray.dimensions();
        Ok(Self {
            width: w as usize,
            height: h as usize,
            data: gray.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect(),
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}
