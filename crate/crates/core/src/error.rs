use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid component space: {0}")]
    InvalidSpace(String),

    #[error("input {input:?} does not belong to space with cardinalities {cardinalities:?}")]
    InputOutOfSpace {
        input: Vec<usize>,
        cardinalities: Vec<usize>,
    },

    #[error("mismatched component counts: {left} vs {right}")]
    MismatchedSpaces { left: usize, right: usize },

    #[error("invalid task parameters: {0}")]
    InvalidTask(String),

    #[error("invalid salience profile: {0}")]
    InvalidProfile(String),

    #[error("degenerate similarity table: {0}")]
    DegenerateTable(String),

    #[error("kernel is not positive semidefinite: min eigenvalue {min_eigenvalue:e}, max eigenvalue {max_eigenvalue:e}")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("kernel matrix is singular beyond jitter (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("overlap class {0} not realized by any pair")]
    MissingOverlapClass(String),

    #[error("value {value} outside domain: {what}")]
    OutOfDomain { what: String, value: f64 },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Whether the failure came from the numerics (non-PSD or singular kernels).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotPsd { .. } | Error::Singular { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
