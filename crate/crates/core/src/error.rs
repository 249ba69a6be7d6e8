use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the toolkit.
///
/// Infeasibility of a side condition is *not* an error: it is reported as a
/// state of [`crate::energy::EnergyReport`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid slip system: {0}")]
    InvalidSlipSystem(String),

    #[error("slip vector leaves the slip plane at cell {cell}: |s.m|/|s| = {ratio:e}")]
    NonTangential { cell: usize, ratio: f64 },

    #[error("unknown slip system id {0}")]
    UnknownSystem(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A numerical validity guard tripped (quadrature, kernel radius, erosion, ...).
    #[error("guard `{guard}` violated: {detail}")]
    Guard { guard: &'static str, detail: String },

    #[error("TV budget exceeded after {retries} retries: increase {increase:e} > budget {budget:e}")]
    Budget {
        retries: usize,
        increase: f64,
        budget: f64,
    },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn guard(guard: &'static str, detail: impl Into<String>) -> Self {
        Error::Guard {
            guard,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
