use alloc::string::String;
use core::fmt;

/// Errors produced by the learning pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input data violates a structural requirement.
    InvalidData(String),
    /// A parameter is outside its admissible range.
    InvalidParameter(String),
    /// No split satisfies the class-coverage constraint.
    InfeasibleSplit(String),
    /// The validation set yields no cross-class ranking pairs.
    DegenerateValidation,
    /// A non-finite value appeared where only finite values are valid.
    NonFinite(&'static str),
    /// Every search thread diverged.
    AllDiverged(String),
    /// A numerical routine failed on input that should have been well posed.
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidData(m) => write!(f, "invalid data: {m}"),
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::InfeasibleSplit(m) => write!(f, "infeasible split: {m}"),
            Error::DegenerateValidation => f.write_str("degenerate validation set"),
            Error::NonFinite(what) => write!(f, "non-finite {what}"),
            Error::AllDiverged(m) => write!(f, "all threads diverged: {m}"),
            Error::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl core::error::Error for Error {}

/// Result alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;
