//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {value} outside domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(&'static str),

    #[error("degenerate solid: {0}")]
    DegenerateSolid(String),

    #[error("invalid solid: {0}")]
    InvalidSolid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user input or configuration rather than a bug.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Contract(_) | Error::Shape(_))
    }
}
