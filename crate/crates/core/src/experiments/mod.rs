//! Experiment grids: phantom, geometry, projection, noise, and every
//! requested reconstruction method, recorded as a results table plus image
//! files.
//!
//! Grid points are iterated as size → angles → i0 → seed and run in
//! parallel; results are merged back in that order, so the table is
//! deterministic for fixed seeds. With `timing = false` the `seconds` column
//! is written as `0`, making the whole CSV reproducible byte for byte.

mod montage;
mod report;

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::AnnealSchedule;
use crate::baselines::{fbp_reconstruct, mlem_reconstruct, MlemConfig};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::rmse;
use crate::noise::{apply_noise, NoiseConfig};
use crate::phantoms::{make_block_phantom, make_ct_phantom, make_shepp_logan};
use crate::projector::{build_system_matrix, forward_project, make_geometry, Sinogram};
use crate::variational::{reconstruct, QactConfig, QactTrace};

pub use montage::{montage, write_montage};
pub use report::{convergence_report, read_trace_csv, render_line_plot, report_csv, trace_points, TracePoint};

/// Standard grid values; anything else runs with a warning.
pub const GRID_SIZES: [usize; 4] = [4, 8, 16, 24];
pub const GRID_ANGLES: [usize; 4] = [3, 9, 18, 36];
pub const GRID_I0_RANGE: (f64, f64) = (1e1, 1e6);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    Block,
    SheppLogan,
    Ct,
}

impl PhantomKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Block => "block",
            Self::SheppLogan => "shepp_logan",
            Self::Ct => "ct",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "block" => Ok(Self::Block),
            "shepp_logan" | "shepp-logan" => Ok(Self::SheppLogan),
            "ct" => Ok(Self::Ct),
            _ => Err(Error::InvalidParameter(format!("unknown phantom {s:?} (block, shepp_logan, ct)"))),
        }
    }
}

/// Builds a phantom of the given kind. `source` is required for `Ct`.
pub fn make_phantom(kind: PhantomKind, n: usize, source: Option<&Path>) -> Result<Image> {
    match kind {
        PhantomKind::Block if n == 4 => Ok(make_block_phantom()),
        PhantomKind::Block => Err(Error::InvalidParameter(format!("the block phantom is 4x4, got n = {n}"))),
        PhantomKind::SheppLogan => make_shepp_logan(n),
        PhantomKind::Ct => {
            let src = source.ok_or_else(|| Error::InvalidParameter("ct phantom needs a source image".into()))?;
            make_ct_phantom(src, n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Qact,
    Mlem,
    Fbp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Qact, Method::Mlem, Method::Fbp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Qact => "qact",
            Self::Mlem => "mlem",
            Self::Fbp => "fbp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?} (qact, mlem, fbp)")))
    }
}

/// QACT settings as they appear in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QactSettings {
    pub q_max: usize,
    pub c: f64,
    pub k0: f64,
    pub d0: f64,
    pub n_iters: usize,
    pub n_sweeps: usize,
    pub n_reads: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for QactSettings {
    fn default() -> Self {
        let cfg = QactConfig::<f64>::default();
        Self {
            q_max: cfg.q_max,
            c: cfg.c,
            k0: cfg.k0,
            d0: cfg.d0,
            n_iters: cfg.n_iters,
            n_sweeps: cfg.sampler.n_sweeps,
            n_reads: cfg.sampler.n_reads,
            beta_start: cfg.sampler.beta_start,
            beta_end: cfg.sampler.beta_end,
        }
    }
}

impl QactSettings {
    pub fn config(&self, seed: u64) -> QactConfig {
        QactConfig {
            q_max: self.q_max,
            c: self.c,
            k0: self.k0,
            d0: self.d0,
            n_iters: self.n_iters,
            sampler: AnnealSchedule {
                n_sweeps: self.n_sweeps,
                n_reads: self.n_reads,
                beta_start: self.beta_start,
                beta_end: self.beta_end,
                seed,
            },
            ..QactConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlemSettings {
    pub max_iters: usize,
    pub x_init: f64,
}

impl Default for MlemSettings {
    fn default() -> Self {
        let cfg = MlemConfig::<f64>::default();
        Self { max_iters: cfg.max_iters, x_init: cfg.x_init }
    }
}

impl MlemSettings {
    pub fn config(&self) -> MlemConfig {
        MlemConfig { max_iters: self.max_iters, x_init: self.x_init, ..MlemConfig::default() }
    }
}

/// One experiment grid. An `i0` of infinity means noiseless data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub phantom: PhantomKind,
    /// Grayscale slice for the `ct` phantom.
    pub ct_source: Option<PathBuf>,
    pub sizes: Vec<usize>,
    pub angles: Vec<usize>,
    pub i0: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Record wall-clock seconds per method.
    pub timing: bool,
    pub qact: QactSettings,
    pub mlem: MlemSettings,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            phantom: PhantomKind::SheppLogan,
            ct_source: None,
            sizes: vec![16],
            angles: vec![36],
            i0: vec![f64::INFINITY],
            methods: Method::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            timing: true,
            qact: QactSettings::default(),
            mlem: MlemSettings::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec is always serializable")
    }

    /// Rejects empty or impossible grids; warns about points off the reference grid.
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.angles.is_empty() || self.i0.is_empty() || self.methods.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidParameter("sizes, angles, i0, methods and seeds must be non-empty".into()));
        }
        if self.phantom == PhantomKind::Block && self.sizes.iter().any(|&n| n != 4) {
            return Err(Error::InvalidParameter("the block phantom only exists at n = 4".into()));
        }
        if self.phantom == PhantomKind::Ct && self.ct_source.is_none() {
            return Err(Error::InvalidParameter("phantom = \"ct\" needs ct_source".into()));
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidSize(format!("image size must be at least 2, got {n}")));
        }
        if self.angles.contains(&0) {
            return Err(Error::InvalidParameter("angle counts must be positive".into()));
        }
        if let Some(i0) = self.i0.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::InvalidParameter(format!("i0 must be positive, got {i0}")));
        }
        self.qact.config(0).validate(1)?;
        self.mlem.config().validate()?;

        for n in self.sizes.iter().filter(|n| !GRID_SIZES.contains(n)) {
            log::warn!("size {n} is off the reference grid {GRID_SIZES:?}");
        }
        for a in self.angles.iter().filter(|a| !GRID_ANGLES.contains(a)) {
            log::warn!("angle count {a} is off the reference grid {GRID_ANGLES:?}");
        }
        for i0 in self.i0.iter().filter(|v| v.is_finite() && !(GRID_I0_RANGE.0..=GRID_I0_RANGE.1).contains(*v)) {
            log::warn!("i0 {i0} is outside the reference range 1e1..1e6");
        }
        Ok(())
    }

    /// Methods in canonical order without duplicates.
    pub fn method_set(&self) -> Vec<Method> {
        Method::ALL.into_iter().filter(|m| self.methods.contains(m)).collect()
    }

    /// Grid points in iteration order.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &n in &self.sizes {
            for &n_angles in &self.angles {
                for &i0 in &self.i0 {
                    for &seed in &self.seeds {
                        out.push(GridPoint { phantom: self.phantom, n, n_angles, i0, seed });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub phantom: PhantomKind,
    pub n: usize,
    pub n_angles: usize,
    pub i0: f64,
    pub seed: u64,
}

impl GridPoint {
    /// File name stem, e.g. `shepp_logan_n16_a36_iinf_s0`.
    pub fn stem(&self) -> String {
        format!("{}_n{}_a{}_i{}_s{}", self.phantom, self.n, self.n_angles, format_i0(self.i0), self.seed)
    }
}

fn format_i0(i0: f64) -> String {
    if i0.is_finite() {
        format!("{i0:e}")
    } else {
        "inf".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub phantom: PhantomKind,
    pub n: usize,
    pub n_angles: usize,
    pub i0: f64,
    pub method: Method,
    pub seed: u64,
    pub rmse: f64,
    pub seconds: f64,
}

pub const RESULTS_HEADER: &str = "phantom,n,n_angles,i0,method,seed,rmse,seconds";

/// Results table. `i0` is written as `inf` for noiseless points.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:?},{:?}",
            r.phantom,
            r.n,
            r.n_angles,
            format_i0(r.i0),
            r.method,
            r.seed,
            r.rmse,
            r.seconds
        )
        .unwrap();
    }
    out
}

/// Everything produced at one grid point.
#[derive(Debug, Clone)]
pub struct PointOutput {
    pub point: GridPoint,
    pub ground_truth: Image,
    /// Reconstructions in canonical method order.
    pub images: Vec<(Method, Image)>,
    pub rows: Vec<ResultRow>,
    pub qact_trace: Option<QactTrace>,
    /// Last MLEM iterate, next to the selected one in `images`.
    pub mlem_final: Option<Image>,
}

#[derive(Debug, Clone)]
pub struct GridOutput {
    pub points: Vec<PointOutput>,
}

impl GridOutput {
    pub fn rows(&self) -> Vec<ResultRow> {
        self.points.iter().flat_map(|p| p.rows.iter().cloned()).collect()
    }

    pub fn results_csv(&self) -> String {
        results_csv(&self.rows())
    }

    /// Writes `results.csv`, per-row images (exact CSV and 16-bit PGM), QACT
    /// traces, and one montage per (size, angle count).
    pub fn write(&self, spec: &ExperimentSpec, dir: &Path) -> Result<()> {
        let images = dir.join("images");
        let traces = dir.join("traces");
        fs::create_dir_all(&images)?;
        fs::create_dir_all(&traces)?;
        fs::write(dir.join("results.csv"), self.results_csv())?;
        fs::write(dir.join("spec.toml"), spec.to_toml())?;
        for p in &self.points {
            let stem = p.point.stem();
            let save = |name: &str, img: &Image| -> Result<()> {
                img.write_csv(images.join(format!("{stem}_{name}.csv")))?;
                img.write_pgm(images.join(format!("{stem}_{name}.pgm")))
            };
            save("gt", &p.ground_truth)?;
            for (m, img) in &p.images {
                save(m.name(), img)?;
            }
            if let Some(img) = &p.mlem_final {
                save("mlem_final", img)?;
            }
            if let Some(trace) = &p.qact_trace {
                trace.write_csv(traces.join(format!("{stem}_qact.csv")))?;
            }
        }
        for &n in &spec.sizes {
            for &a in &spec.angles {
                let group: Vec<&PointOutput> = self.points.iter().filter(|p| p.point.n == n && p.point.n_angles == a).collect();
                let name = format!("montage_{}_n{n}_a{a}.pgm", spec.phantom);
                write_montage(&group, dir.join(name))?;
            }
        }
        Ok(())
    }
}

/// Runs one grid point with every method in `methods`.
pub fn run_point(spec: &ExperimentSpec, point: GridPoint, methods: &[Method]) -> Result<PointOutput> {
    let gt = make_phantom(point.phantom, point.n, spec.ct_source.as_deref())?;
    let geom = make_geometry(point.n, point.n_angles)?;
    let a = build_system_matrix(&geom);
    let clean = forward_project(&a, &gt)?;
    let y: Sinogram = if point.i0.is_finite() { apply_noise(&clean, &NoiseConfig::new(point.i0, point.seed)?)? } else { clean.clone() };

    let mut out = PointOutput {
        point,
        ground_truth: gt.clone(),
        images: Vec::new(),
        rows: Vec::new(),
        qact_trace: None,
        mlem_final: None,
    };
    for &method in methods {
        let start = Instant::now();
        let image = match method {
            Method::Qact => {
                let (img, trace) = reconstruct(&a, &y, &spec.qact.config(point.seed), Some(&gt))?;
                out.qact_trace = Some(trace);
                img
            }
            Method::Mlem => {
                let res = mlem_reconstruct(&a, &y, &spec.mlem.config(), Some(&clean))?;
                out.mlem_final = Some(res.final_image);
                res.selected
            }
            Method::Fbp => fbp_reconstruct(&geom, &y)?,
        };
        let seconds = if spec.timing { start.elapsed().as_secs_f64() } else { 0.0 };
        let err = rmse(&image, &gt)?;
        log::info!("{} {}: rmse {:.3e} in {:.2}s", point.stem(), method, err, seconds);
        out.rows.push(ResultRow {
            phantom: point.phantom,
            n: point.n,
            n_angles: point.n_angles,
            i0: point.i0,
            method,
            seed: point.seed,
            rmse: err,
            seconds,
        });
        out.images.push((method, image));
    }
    Ok(out)
}

/// Runs the whole grid; results are in grid order regardless of scheduling.
pub fn run_grid(spec: &ExperimentSpec) -> Result<GridOutput> {
    spec.validate()?;
    let methods = spec.method_set();
    let points = spec.points().into_par_iter().map(|p| run_point(spec, p, &methods)).collect::<Result<Vec<_>>>()?;
    Ok(GridOutput { points })
}
