use alloc::string::String;
use core::fmt;

/// Errors reported by model construction and numerical routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input violates its documented precondition.
    InvalidInput(String),
    /// A dq-tagged model was given where dq± was expected, or vice versa.
    WrongFrame,
    /// The requested object degenerates (zero polynomial, zero steady vector, ...).
    Degenerate(String),
    /// An element refers to a bus that does not exist.
    UnknownBus(usize),
    /// The network graph is not connected.
    Disconnected,
    /// A linear system or interconnection is singular.
    Singular(String),
    /// Iterative solver did not converge; carries the final residual.
    NoConvergence {
        /// What was being solved.
        what: String,
        /// Residual infinity norm at the last iterate.
        residual: f64,
    },
    /// Non-finite numbers or a failed factorization.
    Numerical(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(s) => write!(f, "invalid input: {s}"),
            Error::WrongFrame => write!(f, "transfer matrix has the wrong frame tag"),
            Error::Degenerate(s) => write!(f, "degenerate: {s}"),
            Error::UnknownBus(b) => write!(f, "unknown bus {b}"),
            Error::Disconnected => write!(f, "network is not connected"),
            Error::Singular(s) => write!(f, "singular: {s}"),
            Error::NoConvergence { what, residual } => {
                write!(f, "{what} did not converge (residual {residual:.3e})")
            }
            Error::Numerical(s) => write!(f, "numerical failure: {s}"),
        }
    }
}

impl core::error::Error for Error {}

/// Crate result alias.
pub type Result<T> = core::result::Result<T, Error>;
