//! Fan-beam acquisition geometry, ray tracing and projection operators.

mod geometry;
mod matrix;
pub mod siddon;

pub use geometry::{make_geometry, Geometry, Point, DETECTOR_PITCH_FACTOR, IDD_CM, SDD_CM};
pub use matrix::{back_project, build_system_matrix, forward_project, Sinogram, SystemMatrix};
pub use siddon::trace_ray;
