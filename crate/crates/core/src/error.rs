//! Error type shared by all modules.
//!
//! Every failure mode of the library is a loud, named condition.  In
//! particular all window/precision decisions surface as either
//! [`Error::PrecisionExhausted`], [`Error::WindowTooSmall`] or
//! [`Error::StabilizationFailed`]; nothing is ever silently truncated.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// All error conditions produced by the library.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Error {
    /// Division by a scalar whose unit part is zero (zero or nilpotent-only).
    DivisionByNonUnit(String),
    /// Operands live in incompatible scalar rings (e.g. different nilpotency
    /// orders).
    RingMismatch(String),
    /// A coefficient outside the known precision window was required.
    PrecisionExhausted(String),
    /// A series that must be a unit of `R((t))` is not one.
    NotAUnit(String),
    /// An input violates a documented domain restriction.
    DomainViolation(String),
    /// A windowed computation did not stabilize under window growth.
    WindowTooSmall(String),
    /// No cyclic vector was found within the deterministic candidate budget.
    CyclicSearchFailed(String),
    /// A matrix that must be invertible is not.
    NotInvertible(String),
    /// The connection is not admissible in the stored basis.
    NotAdmissible(String),
    /// The connection is not regular singular in the stored basis.
    NotRegularSingularInBasis(String),
    /// A divisor with a non-rational (non-linear irreducible) factor was
    /// encountered by a global check.
    NonRationalDivisor(String),
    /// A truncated global computation disagreed with its enlarged re-run.
    StabilizationFailed(String),
    /// A local connection falls outside the supported branches
    /// (neither regular singular nor admissible in the stored basis).
    UnsupportedLocalType(String),
}

impl Error {
    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DivisionByNonUnit(_) => "DivisionByNonUnit",
            Error::RingMismatch(_) => "RingMismatch",
            Error::PrecisionExhausted(_) => "PrecisionExhausted",
            Error::NotAUnit(_) => "NotAUnit",
            Error::DomainViolation(_) => "DomainViolation",
            Error::WindowTooSmall(_) => "WindowTooSmall",
            Error::CyclicSearchFailed(_) => "CyclicSearchFailed",
            Error::NotInvertible(_) => "NotInvertible",
            Error::NotAdmissible(_) => "NotAdmissible",
            Error::NotRegularSingularInBasis(_) => "NotRegularSingularInBasis",
            Error::NonRationalDivisor(_) => "NonRationalDivisor",
            Error::StabilizationFailed(_) => "StabilizationFailed",
            Error::UnsupportedLocalType(_) => "UnsupportedLocalType",
        }
    }

    /// Human-readable detail message.
    pub fn message(&self) -> &str {
        match self {
            Error::DivisionByNonUnit(m)
            | Error::RingMismatch(m)
            | Error::PrecisionExhausted(m)
            | Error::NotAUnit(m)
            | Error::DomainViolation(m)
            | Error::WindowTooSmall(m)
            | Error::CyclicSearchFailed(m)
            | Error::NotInvertible(m)
            | Error::NotAdmissible(m)
            | Error::NotRegularSingularInBasis(m)
            | Error::NonRationalDivisor(m)
            | Error::StabilizationFailed(m)
            | Error::UnsupportedLocalType(m) => m,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
