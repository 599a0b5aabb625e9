use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("objective returned non-finite value {value}{} at position {position:?}", iteration_suffix(*.iteration))]
    NonFiniteObjective {
        value: f64,
        position: Vec<f64>,
        iteration: Option<usize>,
    },

    #[error("backpropagation diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("feature set must not be empty")]
    EmptyFeatureSet,

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: label `{value}` is not a binary class (0 or 1)")]
    Label { row: usize, value: String },

    #[error("invalid label {0}: expected 0 or 1")]
    NonBinaryLabel(usize),

    #[error("{0}")]
    Degenerate(String),

    #[error("fold {fold}: training portion contains a single class")]
    DegenerateFold { fold: usize },

    #[error("unknown benchmark function `{0}`")]
    UnknownFunction(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn iteration_suffix(iteration: Option<usize>) -> String {
    match iteration {
        Some(t) => format!(" in iteration {t}"),
        None => String::new(),
    }
}

impl Error {
    /// Tags an objective-evaluation error with the iteration it occurred in.
    pub fn at_iteration(self, t: usize) -> Self {
        match self {
            Error::NonFiniteObjective {
                value, position, ..
            } => Error::NonFiniteObjective {
                value,
                position,
                iteration: Some(t),
            },
            other => other,
        }
    }
}
