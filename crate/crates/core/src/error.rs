use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate sample id `{0}`")]
    DuplicateSample(String),

    #[error("label {label} of sample `{id}` is outside [0, {class_count})")]
    LabelRange {
        id: String,
        label: i64,
        class_count: usize,
    },

    #[error("parse error{}: {message}", line_suffix(.line))]
    Parse {
        line: Option<usize>,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("normalization error at line {line}: row `{id}` sums to {sum}")]
    Normalization { line: usize, id: String, sum: f64 },

    #[error("training diverged at iteration {iteration}: loss is {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("unknown modality `{0}`")]
    Key(String),

    #[error("grid of {points} points exceeds the budget of {budget}; use refine mode or a coarser step")]
    Budget { points: u64, budget: u64 },

    #[error("infeasible overlap for modalities {i} and {j}: {reason}")]
    Feasibility { i: usize, j: usize, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line: Some(line),
            message: message.into(),
        }
    }

    pub(crate) fn parse_anywhere(message: impl Into<String>) -> Self {
        Error::Parse {
            line: None,
            message: message.into(),
        }
    }
}

fn line_suffix(line: &Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}
