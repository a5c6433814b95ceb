use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit codes: usage/config problems exit 2,
/// missing roots or insufficient data exit 3, violated numerical contracts
/// exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical contract violated: {0}")]
    ContractViolation(String),

    #[error("integrator did not converge: monodromy changed by {delta:.3e} after doubling steps (limit {limit:.1e})")]
    IntegratorAccuracy { delta: f64, limit: f64 },

    #[error("no root found: {0}")]
    NotFound(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("calibration failed: best residual {best_residual:.3e} ({context})")]
    CalibrationFailure { best_residual: f64, context: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 usage, 3 not-found/insufficient data,
    /// 4 numerical contract violation, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::Parse { .. } | Error::InvalidArgument(_) => 2,
            Error::NotFound(_) | Error::InsufficientData(_) | Error::CalibrationFailure { .. } => 3,
            Error::ContractViolation(_) | Error::IntegratorAccuracy { .. } => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
