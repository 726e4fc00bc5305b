use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("normal vector is not unit length (|n| = {norm})")]
    NonUnitNormal { norm: f64 },

    #[error("sample set has no interior points")]
    EmptyInterior,

    #[error("field length mismatch: truth has {truth} values, prediction has {pred}")]
    LengthMismatch { truth: usize, pred: usize },

    #[error("ground-truth field is identically zero; relative error is undefined")]
    ZeroNormalizer,

    #[error("non-finite {what} at the starting point")]
    NonFiniteStart { what: &'static str },

    #[error("training diverged: non-finite loss at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("unknown problem `{0}` (expected rod1d, plate2d, plate2d-patch, cube3d or cube3d-patch)")]
    UnknownProblem(String),

    #[error("unknown loss `{0}` (expected collocation or energy)")]
    UnknownLoss(String),

    #[error("checkpoint parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
