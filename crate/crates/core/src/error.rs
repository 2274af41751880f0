use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: entry ({row}, {col}) differs from the conjugate of ({col}, {row}) by {deviation:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("Hilbert space dimension {dim} exceeds the supported maximum of {max}")]
    DimensionOverflow { dim: usize, max: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("model produced a non-finite value at point {index} (params {params:?})")]
    NonFinite { index: usize, params: Vec<f64> },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("mismatched field: records at B = {first} T and {second} T cannot be differenced")]
    MismatchedField { first: f64, second: f64 },
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("csv error on line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
