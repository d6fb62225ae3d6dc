use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("negative power of q_{0}; only q_n may be inverted")]
    NegativePower(usize),
    #[error("invalid momentum shift: {0}")]
    InvalidShift(String),
    #[error("unbound parameter {0}")]
    UnboundParam(String),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("inconsistent system: {0}")]
    Inconsistent(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical blow-up: {0}")]
    BlowUp(String),
    #[error("certification failed: {0}")]
    Certification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
