use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the voxelization, homogenization and optimization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The sampled level-set field has a uniform sign, so there is no zero crossing to mesh.
    #[error("no isosurface: the level-set field does not change sign inside the cell")]
    NoSurface,

    #[error("solver diverged: relative residual {residual:.3e} after {iterations} iterations (tolerance {tolerance:.1e})")]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("volume bisection failed: target {target:.6} not reachable (achievable range {min:.6}..{max:.6})")]
    BisectionFailed { target: f64, min: f64, max: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable name of the variant, e.g. `NoSurface`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NoSurface => "NoSurface",
            Error::SolverDiverged { .. } => "SolverDiverged",
            Error::BisectionFailed { .. } => "BisectionFailed",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::Format { .. } => "Format",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
