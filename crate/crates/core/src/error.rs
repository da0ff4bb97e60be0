use core::fmt;

/// Errors raised by the core constructions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A time or intrinsic-time argument lies outside the function's domain.
    Domain {
        what: &'static str,
        requested: i128,
        available: i128,
    },
    /// The requested construction does not fit in memory or in the integer
    /// representation of ticks.
    Resource { required: u128 },
    /// Crossing times do not agree with the walk they were computed from.
    Inconsistent { level: u32, index: usize },
    /// Invalid input (negative durations, non-monotone maps, bad parameters).
    Invalid(&'static str),
    /// Bound query with parameters outside the region where the formula applies.
    Usage(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain {
                what,
                requested,
                available,
            } => write!(
                f,
                "{what}: requested {requested} exceeds available domain {available}"
            ),
            Error::Resource { required } => {
                write!(f, "resource limit: {required} elements required")
            }
            Error::Inconsistent { level, index } => write!(
                f,
                "crossing sequence inconsistent with walk at level {level}, bridge {index}"
            ),
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
