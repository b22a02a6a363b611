use std::io;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller violated an operation's precondition (shape, range, size).
    #[error("contract violation: {0}")]
    Contract(String),
    /// An operation produced NaN or infinity.
    #[error("non-finite value: {0}")]
    Numeric(String),
    /// Malformed bytes in a container, bitstream or packed map.
    #[error("format error: {0}")]
    Format(String),
    /// Well-formed input that uses a variant this crate does not handle.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Stream ended or went inconsistent at the given byte offset.
    #[error("corrupt stream at byte {offset}: {msg}")]
    Corrupt { offset: usize, msg: String },
    /// A weight tensor is missing or has the wrong shape.
    #[error("cannot load tensor `{tensor}`: {msg}")]
    Load { tensor: String, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Contract(_) => "contract",
            Error::Numeric(_) => "numeric",
            Error::Format(_) => "format",
            Error::Unsupported(_) => "unsupported",
            Error::Corrupt { .. } => "corrupt",
            Error::Load { .. } => "load",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! contract {
    ($($arg:tt)*) => {
        $crate::error::Error::Contract(format!($($arg)*))
    };
}
pub(crate) use contract;
