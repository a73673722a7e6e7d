use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the routine is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iteration failed to converge or a linear solve broke down.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A value overflowed the representable range.
    #[error("overflow: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
