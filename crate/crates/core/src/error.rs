use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::types::ValueType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("column {col} out of range for a table with {width} columns")]
    ColumnOutOfRange { col: usize, width: usize },

    #[error("{what}, line {line}: {msg}")]
    Parse { what: String, line: usize, msg: String },

    #[error("cannot train: {0}")]
    Training(String),

    #[error("feature schema mismatch: expected {expected}, got {got}")]
    SchemaMismatch { expected: String, got: String },

    #[error("{0} is not available")]
    MissingResource(&'static str),

    #[error("only {found} qualifying {ty} columns, {needed} needed")]
    InsufficientColumns { ty: ValueType, found: usize, needed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cell {0} is not in the qrels")]
    UnknownCell(String),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(what: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            line,
            msg: msg.into(),
        }
    }
}
