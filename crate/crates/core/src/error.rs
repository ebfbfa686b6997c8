use std::io;

use thiserror::Error;

use crate::molgraph::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("invalid molecular graph: {}", format_violations(.0))]
    InvalidGraph(Vec<Violation>),

    #[error("molecule generation failed: {0}")]
    Generation(String),

    #[error("render error: {0}")]
    Render(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("candidate error: {0}")]
    Candidate(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("non-finite loss {loss} at step {step}")]
    NonFinite { step: usize, loss: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
