use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qact::experiments::{read_trace_csv, trace_points, Method, PhantomKind};
use qact::{
    apply_noise, assemble_qubo, build_system_matrix, convergence_report, exhaustive_solve, fbp_reconstruct, forward_project,
    make_geometry, mlem_reconstruct, reconstruct, rmse, run_grid, AnnealSchedule, EncodingState, ExperimentSpec, Image,
    MlemConfig, NoiseConfig, QactConfig, QuboProblem, Sinogram, SystemMatrix,
};

#[derive(Parser)]
#[command(name = "qact", version, about = "CT reconstruction as binary quadratic optimization")]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = "QACT_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth phantom.
    Phantom(PhantomArgs),
    /// Forward-project an image into a sinogram.
    Project(ProjectArgs),
    /// Add Poisson counting noise to a sinogram.
    Noise(NoiseArgs),
    /// Reconstruct an image from a sinogram.
    Reconstruct(ReconstructArgs),
    /// Build the QUBO of one encoding window.
    Qubo(QuboArgs),
    /// Minimize a QUBO read from a text file.
    SolveQubo(SolveArgs),
    /// Run an experiment grid from a TOML config.
    Grid(GridArgs),
    /// Convergence table and plot from a QACT trace.
    Report(ReportArgs),
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, value_parser = parse_phantom)]
    kind: PhantomKind,
    #[arg(long)]
    n: usize,
    /// Grayscale slice (PGM or PNG) for `--kind ct`.
    #[arg(long)]
    source: Option<PathBuf>,
    /// `.csv` or `.pgm`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    angles: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also save the system matrix (`.bin` or `.csv`).
    #[arg(long)]
    matrix_out: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    sinogram: PathBuf,
    #[arg(long)]
    i0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Qact,
    Mlem,
    Fbp,
}

#[derive(Args)]
struct QactArgs {
    #[arg(long, default_value_t = 2)]
    q_max: usize,
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    k0: f64,
    #[arg(long, default_value_t = 0.0)]
    d0: f64,
    #[arg(long, default_value_t = 30)]
    iters: usize,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 32)]
    reads: usize,
    #[arg(long, default_value_t = 0.1)]
    beta_start: f64,
    #[arg(long, default_value_t = 50.0)]
    beta_end: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl QactArgs {
    fn schedule(&self) -> AnnealSchedule {
        AnnealSchedule {
            n_sweeps: self.sweeps,
            n_reads: self.reads,
            beta_start: self.beta_start,
            beta_end: self.beta_end,
            seed: self.seed,
        }
    }

    fn config(&self) -> QactConfig {
        QactConfig {
            q_max: self.q_max,
            c: self.c,
            k0: self.k0,
            d0: self.d0,
            n_iters: self.iters,
            sampler: self.schedule(),
            ..QactConfig::default()
        }
    }
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Sinogram CSV; image size and view count follow from its shape.
    #[arg(long)]
    sinogram: PathBuf,
    /// Ground truth, for per-iteration RMSE and the printed score.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Precomputed system matrix (`.bin` or `.csv`).
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// QACT trace CSV (`iter,energy,rmse`).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    qact: QactArgs,
    #[arg(long, default_value_t = 400)]
    mlem_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    mlem_init: f64,
    /// Noiseless projection used to pick the best MLEM iterate.
    #[arg(long)]
    mlem_reference: Option<PathBuf>,
}

#[derive(Args)]
struct QuboArgs {
    #[arg(long)]
    sinogram: PathBuf,
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    q_max: usize,
    #[arg(long, default_value_t = 1.0)]
    k0: f64,
    #[arg(long, default_value_t = 0.0)]
    d0: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    qubo: PathBuf,
    /// Enumerate all assignments instead of annealing (at most 24 variables).
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 32)]
    reads: usize,
    #[arg(long, default_value_t = 0.1)]
    beta_start: f64,
    #[arg(long, default_value_t = 50.0)]
    beta_end: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    config: PathBuf,
    /// Leave the `seconds` column at zero so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Output prefix; writes `<prefix>.csv` and `<prefix>.pgm`.
    #[arg(long)]
    out: PathBuf,
}

fn parse_phantom(s: &str) -> std::result::Result<PhantomKind, String> {
    s.parse().map_err(|e: qact::Error| e.to_string())
}

struct Ctx {
    out_dir: PathBuf,
}

impl Ctx {
    /// Resolves an output path and makes sure its directory exists.
    fn output(&self, path: &Path) -> Result<PathBuf> {
        let full = if path.is_absolute() { path.to_path_buf() } else { self.out_dir.join(path) };
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(full)
    }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

fn read_image(path: &Path) -> Result<Image> {
    let img = match extension(path).as_str() {
        "pgm" | "png" => Image::read_pgm(path),
        _ => Image::read_csv(path),
    };
    img.with_context(|| format!("reading image {}", path.display()))
}

fn write_image(img: &Image, path: &Path) -> Result<()> {
    match extension(path).as_str() {
        "pgm" => img.write_pgm(path)?,
        "csv" => img.write_csv(path)?,
        other => bail!("unsupported image extension {other:?} (csv, pgm)"),
    }
    Ok(())
}

fn read_sinogram(path: &Path) -> Result<Sinogram> {
    Sinogram::read_csv(path).with_context(|| format!("reading sinogram {}", path.display()))
}

/// Image side and view count implied by a sinogram with `2n` bins per view.
fn sinogram_shape(y: &Sinogram) -> Result<(usize, usize)> {
    if y.n_det() % 2 != 0 || y.n_det() == 0 {
        bail!("sinogram has {} bins per view; expected 2n", y.n_det());
    }
    Ok((y.n_det() / 2, y.n_angles()))
}

fn system_matrix(y: &Sinogram, path: Option<&Path>) -> Result<SystemMatrix> {
    let (n, n_angles) = sinogram_shape(y)?;
    let a = match path {
        None => build_system_matrix(&make_geometry(n, n_angles)?),
        Some(p) if extension(p) == "bin" => SystemMatrix::read_binary(p)?,
        Some(p) => SystemMatrix::from_csv(&fs::read_to_string(p)?, y.len(), n * n)?,
    };
    if a.n_rows() != y.len() || a.n_cols() != n * n {
        bail!("system matrix is {}x{}, sinogram needs {}x{}", a.n_rows(), a.n_cols(), y.len(), n * n);
    }
    Ok(a)
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx { out_dir: cli.out_dir };
    match cli.command {
        Command::Phantom(args) => {
            let img = qact::experiments::make_phantom(args.kind, args.n, args.source.as_deref())?;
            write_image(&img, &ctx.output(&args.out)?)?;
        }
        Command::Project(args) => {
            let img = read_image(&args.image)?;
            let geom = make_geometry(img.n(), args.angles)?;
            let a: SystemMatrix = build_system_matrix(&geom);
            forward_project(&a, &img)?.write_csv(ctx.output(&args.out)?)?;
            if let Some(path) = args.matrix_out {
                let path = ctx.output(&path)?;
                if extension(&path) == "bin" {
                    a.write_binary(path)?;
                } else {
                    a.write_csv(path)?;
                }
            }
        }
        Command::Noise(args) => {
            let y = read_sinogram(&args.sinogram)?;
            apply_noise(&y, &NoiseConfig::new(args.i0, args.seed)?)?.write_csv(ctx.output(&args.out)?)?;
        }
        Command::Reconstruct(args) => reconstruct_cmd(&ctx, args)?,
        Command::Qubo(args) => {
            let y = read_sinogram(&args.sinogram)?;
            let a = system_matrix(&y, args.matrix.as_deref())?;
            let enc = EncodingState::uniform(a.n_cols(), args.d0, args.k0, args.q_max, 0.5)?;
            assemble_qubo(&a, &y, &enc)?.write_text(ctx.output(&args.out)?)?;
        }
        Command::SolveQubo(args) => {
            let q: QuboProblem = QuboProblem::read_text(&args.qubo)?;
            let res = if args.exhaustive {
                exhaustive_solve(&q)?
            } else {
                let schedule = AnnealSchedule {
                    n_sweeps: args.sweeps,
                    n_reads: args.reads,
                    beta_start: args.beta_start,
                    beta_end: args.beta_end,
                    seed: args.seed,
                };
                qact::anneal(&q, &schedule)?
            };
            println!("energy {:?}", res.best_energy);
            println!("bits {}", res.best_bits);
        }
        Command::Grid(args) => {
            let mut spec = ExperimentSpec::read(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
            if args.no_timing {
                spec.timing = false;
            }
            if let Some(src) = &spec.ct_source {
                if src.is_relative() {
                    let base = args.config.parent().unwrap_or(Path::new("."));
                    spec.ct_source = Some(base.join(src));
                }
            }
            let out = run_grid(&spec)?;
            fs::create_dir_all(&ctx.out_dir)?;
            out.write(&spec, &ctx.out_dir)?;
            print!("{}", out.results_csv());
        }
        Command::Report(args) => {
            let text = fs::read_to_string(&args.trace).with_context(|| format!("reading {}", args.trace.display()))?;
            let points = read_trace_csv(&text)?;
            let prefix = ctx.output(&args.out)?;
            convergence_report(&points, prefix.with_extension("csv"), prefix.with_extension("pgm"))?;
        }
    }
    Ok(())
}

fn reconstruct_cmd(ctx: &Ctx, args: ReconstructArgs) -> Result<()> {
    let y = read_sinogram(&args.sinogram)?;
    let gt = args.gt.as_deref().map(read_image).transpose()?;
    let a = system_matrix(&y, args.matrix.as_deref())?;
    let method = match args.method {
        MethodArg::Qact => Method::Qact,
        MethodArg::Mlem => Method::Mlem,
        MethodArg::Fbp => Method::Fbp,
    };
    let image = match method {
        Method::Qact => {
            let (img, trace) = reconstruct(&a, &y, &args.qact.config(), gt.as_ref())?;
            if let Some(path) = &args.trace {
                trace.write_csv(ctx.output(path)?)?;
            }
            if let Some(last) = trace_points(&trace).last() {
                log::info!("final energy {:e}", last.energy);
            }
            img
        }
        Method::Mlem => {
            let reference = args.mlem_reference.as_deref().map(read_sinogram).transpose()?;
            let cfg = MlemConfig { max_iters: args.mlem_iters, x_init: args.mlem_init, ..MlemConfig::default() };
            let res = mlem_reconstruct(&a, &y, &cfg, reference.as_ref())?;
            log::info!("selected iteration {}", res.selected_iteration);
            res.selected
        }
        Method::Fbp => {
            let (n, n_angles) = sinogram_shape(&y)?;
            fbp_reconstruct(&make_geometry(n, n_angles)?, &y)?
        }
    };
    write_image(&image, &ctx.output(&args.out)?)?;
    if let Some(gt) = &gt {
        println!("rmse {:?}", rmse(&image, gt)?);
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
