use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure families, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Parse,
    Validation,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("ragged row at line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("dataset is empty{0}")]
    EmptyDataset(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("row count mismatch: {what} has {found} rows, expected {expected}")]
    RowCountMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is not row-stochastic: row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },

    #[error("eigensolver did not converge")]
    EigenNonConvergence,

    #[error("neighbourhood graph is disconnected: {} components ({})", .0.len(), describe_components(.0))]
    DisconnectedGraph(Vec<Vec<usize>>),

    #[error("bad forest file: {0}")]
    Format(String),
}

fn describe_components(components: &[Vec<usize>]) -> String {
    components
        .iter()
        .map(|c| {
            let shown: Vec<String> = c.iter().take(5).map(|i| i.to_string()).collect();
            let more = if c.len() > 5 { ", ..." } else { "" };
            format!("[{}{}] size {}", shown.join(", "), more, c.len())
        })
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::MissingFile(_) | Error::Io { .. } => ErrorClass::Io,
            Error::MissingColumn(_)
            | Error::RaggedRow { .. }
            | Error::Parse(_)
            | Error::Format(_)
            | Error::EmptyDataset(_) => ErrorClass::Parse,
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::RowCountMismatch { .. } => ErrorClass::Validation,
            Error::NonFinite(_)
            | Error::NotStochastic { .. }
            | Error::EigenNonConvergence
            | Error::DisconnectedGraph(_) => ErrorClass::Numeric,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
