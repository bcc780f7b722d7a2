use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid cut: {0}")]
    InvalidCut(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("point lies outside the tree domain: {0}")]
    OutOfDomain(String),

    #[error("cell {index} lies outside the tree domain: {detail}")]
    CellOutOfDomain { index: usize, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),

    #[error("tree and table are inconsistent: {0}")]
    InconsistentTree(String),

    #[error("recursion depth {0} exceeded while sampling a tree")]
    DepthExceeded(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("marker mismatch: {0}")]
    MarkerMismatch(String),

    #[error("no tree with one candidate type per leaf found after {attempts} attempts; try a larger budget")]
    SynthesisFailed { attempts: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // The cause is folded into the message rather than exposed as a
    // source so callers printing error chains don't repeat it.
    #[error("io error on {path}: {cause}")]
    Io { path: String, cause: std::io::Error },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach a file path to a raw io error.
    pub fn io(path: impl Into<String>, cause: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }
}
