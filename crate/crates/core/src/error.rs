use std::io;

/// Errors surfaced by every toolkit operation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    /// Bad magic, unsupported version or otherwise unparseable input.
    #[error("format error: {0}")]
    Format(String),
    /// Structurally valid header whose payload contradicts it.
    #[error("corrupt data: {0}")]
    Corrupt(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Operation applied to a unit sequence at the wrong processing stage.
    #[error("stage error: {0}")]
    Stage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(format!($($arg)*)))
    };
}
pub(crate) use bail;
