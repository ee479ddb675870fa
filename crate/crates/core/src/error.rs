//! Crate-wide error type.
//!
//! Variants are grouped by the stage that raises them so the CLI can map
//! them onto exit codes: configuration/validation problems, numerical or
//! convergence failures, and I/O or parse failures.

use thiserror::Error;

/// Any failure raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A function argument violated its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration file or structure failed validation.
    /// `path` is a dotted path to the offending field.
    #[error("config error at `{path}`: {message}")]
    Config {
        /// Dotted path to the field that failed validation.
        path: String,
        /// Human-readable description of the violation.
        message: String,
    },

    /// An iterative numerical routine failed to converge.
    #[error("{routine} failed to converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        /// Name of the routine that gave up.
        routine: &'static str,
        /// Iterations performed before giving up.
        iterations: usize,
        /// Final residual or gradient norm.
        residual: f64,
    },

    /// A design matrix was rank deficient (collinear columns).
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient {
        /// Zero-based index of the first dependent column.
        column: usize,
    },

    /// A likelihood-ratio test was requested for models that are not nested
    /// (the restricted model fit better than the unrestricted one).
    #[error("models are not nested: restricted log-likelihood {restricted} exceeds unrestricted {unrestricted}")]
    NotNested {
        /// Log-likelihood of the restricted model.
        restricted: f64,
        /// Log-likelihood of the unrestricted model.
        unrestricted: f64,
    },

    /// The grid posterior oracle refuses problems with too many parameters.
    #[error("grid oracle supports at most {max} parameters, got {requested}")]
    OracleTooLarge {
        /// Hard parameter-count cap.
        max: usize,
        /// Parameters in the rejected request.
        requested: usize,
    },

    /// A dataset failed structural validation before fitting or analysis.
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    /// A CSV or JSON artifact could not be parsed.
    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        /// Name or path of the artifact being read.
        source_name: String,
        /// One-based line number (0 when unknown).
        line: u64,
        /// Description of the problem.
        message: String,
    },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        /// Path involved in the failed operation.
        path: String,
        /// Operating-system error.
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Convenience constructor for [`Error::InvalidArgument`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Convenience constructor for [`Error::Config`].
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Convenience constructor for [`Error::Io`].
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
