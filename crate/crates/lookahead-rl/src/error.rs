//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Result`]. Variants carry enough
//! context to diagnose failures without a debugger: shape errors name the
//! operation and both shapes, format errors report the byte offset, config
//! errors report the offending key path.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension mismatch between an operation's inputs.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: String,
        expected: String,
        got: String,
    },

    /// A NaN or infinity where a finite number is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// An object was used in a way its current state does not allow
    /// (e.g. backward before a cached training forward).
    #[error("invalid state: {0}")]
    State(String),

    /// Optimizer-level failure; parameters are left unchanged.
    #[error("optimizer rejected update: {0}")]
    Optimizer(String),

    /// Malformed binary artifact (checkpoint or dataset).
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Invalid configuration value; `path` is the TOML key path.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// An artifact does not match what the operation requires
    /// (wrong checkpoint kind, incompatible layout, missing file role).
    #[error("artifact mismatch: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(String),
}

impl Error {
    pub fn shape(context: impl Into<String>, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    pub fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI. Validation errors — bad configuration
    /// values, missing or incompatible input artifacts, unreadable files —
    /// exit 1; failures arising during computation (non-finite values,
    /// optimizer rejection, invalid internal state) exit 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Shape { .. }
            | Error::Artifact(_)
            | Error::Format { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Toml(_) => 1,
            Error::NonFinite { .. } | Error::State(_) | Error::Optimizer(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
