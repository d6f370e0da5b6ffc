//! Conventional reconstructions used as references.

mod fbp;
mod mlem;

pub use fbp::{fbp_reconstruct, shepp_logan_kernel};
pub use mlem::{mlem_reconstruct, mlem_step, MlemConfig, MlemResult};
