use thiserror::Error;

use crate::kernel::KernelError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kernel(#[from] KernelError),

    /// Bad arguments to an operation (sizes, ranges, empty inputs).
    #[error("usage error: {0}")]
    Usage(String),

    /// Model parameters that violate a structural invariant.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
