use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem has {n_vars} variables, exhaustive search is capped at {cap}")]
    SizeCap { n_vars: usize, cap: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("parse error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },

    #[error("failed to decode image {path}: {msg}")]
    Decode { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Config(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, actual })
    }
}

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line: Some(line), msg: msg.into() }
}
