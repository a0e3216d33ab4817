use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("every row of the sequence has zero norm; masses are undefined")]
    AllZeroSequence,

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("dimension mismatch{}: expected {expected}, got {got}", line_suffix(*.line))]
    DimensionMismatch {
        expected: usize,
        got: usize,
        line: Option<usize>,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index} out of range 1..={bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate gradient: {0}")]
    DegenerateGradient(String),

    #[error("numerical underflow: {0}")]
    NumericalUnderflow(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" on line {l}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed or inconsistent input data, as
    /// opposed to I/O failures or numerical breakdown.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::NumericalUnderflow(_) | Error::DegenerateGradient(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
