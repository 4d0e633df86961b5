use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong between reading a config and writing tables.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration became unstable at t = {time}: |f_k| exceeded {guard:e} at k = {k}")]
    Unstable { time: f64, k: f64, guard: f64 },

    #[error("momentum {k} outside the radial grid [0, {k_max}]")]
    MomentumOutOfRange { k: f64, k_max: f64 },

    #[error("correlation matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("symplectic pairing failed: residual {residual:e} exceeds {tolerance:e}")]
    PairingFailure { residual: f64, tolerance: f64 },

    #[error("symplectic eigenvalue {0} is below 1/2")]
    SubPhysicalEigenvalue(f64),

    #[error("block at q_par = {q_par} failed: {source}")]
    Block {
        q_par: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("table schema mismatch: {0}")]
    Schema(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) => 2,
            Error::Io { .. } | Error::Format(_) | Error::Schema(_) => 4,
            Error::Block { source, .. } => source.exit_code(),
            Error::Unstable { .. }
            | Error::MomentumOutOfRange { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::PairingFailure { .. }
            | Error::SubPhysicalEigenvalue(_)
            | Error::Fit(_) => 3,
        }
    }
}
