use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing required file {0}")]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate graph: total volume is zero (no edges)")]
    DegenerateGraph,

    #[error("tree does not match graph: {0}")]
    TreeMismatch(String),

    #[error("exhaustive search refused: n = {n}, k = {k} (limits n <= 9, k in {{2, 3}})")]
    SearchTooLarge { n: usize, k: usize },

    #[error("labeling mode needs categorical node labels, but the dataset has none")]
    MissingCategories,

    #[error("tree leaves are not all at the same depth")]
    NonUniformHeight,

    #[error("height mismatch: expected {expected}, found {found}")]
    HeightMismatch { expected: usize, found: usize },

    #[error("label not present in frozen dictionary: {0}")]
    UnknownLabel(String),

    #[error("feature vectors were built against different label dictionaries")]
    DictionaryMismatch,

    #[error("solver did not converge after {iterations} iterations (max KKT violation {violation:e})")]
    NoConvergence { iterations: usize, violation: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad input files or arguments rather than
    /// numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::NoConvergence { .. } | Error::Numerical(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
