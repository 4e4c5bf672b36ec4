use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, material, electrode or scenario description.
    #[error("configuration error: {0}")]
    Config(String),

    /// Mismatched vector/matrix sizes.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// An iterative solve did not reach its tolerance.
    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    /// NaN or infinity appeared during a solve or time step.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// Direct factorization failed (matrix not positive definite or singular).
    #[error("factorization failed: {0}")]
    Factorization(String),

    /// A time step failed; wraps the underlying cause.
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// A comparison metric is undefined because the reference field vanishes.
    #[error("undefined metric: reference norm is zero")]
    ZeroReference,

    /// Two artifacts were produced on different grids.
    #[error("grid fingerprint mismatch: {0} vs {1}")]
    FingerprintMismatch(String, String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::FingerprintMismatch(..) | Error::ZeroReference => 1,
            Error::Dimension { .. }
            | Error::NotConverged { .. }
            | Error::NonFinite(_)
            | Error::Factorization(_) => 2,
            Error::Step { source, .. } => source.exit_code(),
            Error::Io { .. } | Error::Format { .. } => 3,
        }
    }
}
