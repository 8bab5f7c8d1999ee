use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CccfError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset vanished under filtering (min_count = {min_count})")]
    EmptyAfterFilter { min_count: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("component {component}: cannot complete an orthogonal basis ({reason})")]
    RankCollapse { component: usize, reason: String },

    #[error("zero-norm vector has no direction")]
    ZeroNorm,

    #[error("integer accumulator overflow: {0}")]
    Overflow(String),

    #[error("malformed model file: {0}")]
    Format(String),

    #[error("unknown user id `{0}`")]
    UserNotFound(String),
}

pub type Result<T> = std::result::Result<T, CccfError>;
