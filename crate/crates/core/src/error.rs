use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("sign undefined: {0}")]
    SignUndefined(String),
    #[error("invalid retain ratio {0}; must lie in (0, 1]")]
    InvalidRatio(f64),
    #[error("field has no sign change; surface is empty")]
    EmptySurface,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("gradient output must be a 1x1 scalar, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },
    #[error("no differentiable path from output to variable {0}")]
    NoPath(usize),
    #[error("non-finite value produced: {0}")]
    Diagnostic(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn format(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            what,
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidRatio(_)
                | Error::InvalidInput(_)
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::Format { .. }
        )
    }
}
