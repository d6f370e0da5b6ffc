//! CT reconstruction posed as quadratic unconstrained binary optimization.
//!
//! Pixel values are encoded with a few bits each; the squared projection
//! residual then becomes a QUBO, minimized here by simulated annealing. A
//! variational outer loop narrows each pixel's encoding window around the
//! previous solution, so two bits per pixel are enough to approach real
//! values. MLEM and filtered back projection are included for comparison,
//! along with phantoms, a fan-beam ray tracer, Poisson noise, and an
//! experiment harness.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the common `f64` instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anneal;
pub mod baselines;
pub mod error;
pub mod experiments;
pub mod image;
pub mod metrics;
pub mod noise;
pub mod phantoms;
pub mod projector;
pub mod qubo;
pub mod scalar;
pub mod seeding;
pub mod variational;

pub use anneal::{anneal, exhaustive_solve, AnnealSchedule, ExhaustiveSolver, QuboSampler, SampleResult, SimulatedAnnealer};
pub use baselines::{fbp_reconstruct, mlem_reconstruct, MlemConfig, MlemResult};
pub use error::{Error, Result};
pub use experiments::{convergence_report, run_grid, ExperimentSpec, GridOutput, Method, PhantomKind};
pub use image::{Image, OBJECT_SIDE_CM};
pub use metrics::rmse;
pub use noise::{apply_noise, NoiseConfig};
pub use phantoms::{make_block_phantom, make_ct_phantom, make_shepp_logan};
pub use projector::{back_project, build_system_matrix, forward_project, make_geometry, Geometry, Sinogram, SystemMatrix};
pub use qubo::{assemble_qubo, decode, energy, BitAssignment, EncodingState, QuboProblem};
pub use scalar::Real;
pub use variational::{reconstruct, reconstruct_with, QactConfig, QactTrace};

pub type Image64 = Image<f64>;
pub type Image32 = Image<f32>;
pub type Sinogram64 = Sinogram<f64>;
pub type SystemMatrix64 = SystemMatrix<f64>;
pub type QuboProblem64 = QuboProblem<f64>;
pub type EncodingState64 = EncodingState<f64>;
pub type QactConfig64 = QactConfig<f64>;
pub type QactTrace64 = QactTrace<f64>;
pub type SampleResult64 = SampleResult<f64>;
