//! Command-line companion to `epsdr-core`: expression parsing, JSON
//! file formats, report plumbing, and the seeded verification suites
//! behind the `verify` subcommand.

pub mod family;
pub mod parse;
pub mod suites;

use std::fmt;

/// Errors surfaced by the command-line layer.
#[derive(Debug)]
pub enum CliError {
    /// Source text failed to parse; `column` is 1-based.
    Parse { column: usize, message: String },
    /// An exact-arithmetic operation failed.
    Core(epsdr_core::error::Error),
    /// File-system failure.
    Io(String),
    /// Structurally invalid input: bad JSON shape or unusable values.
    Input(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse { column, message } => {
                write!(f, "parse error at column {column}: {message}")
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Input(m) => write!(f, "invalid input: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<epsdr_core::error::Error> for CliError {
    fn from(e: epsdr_core::error::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// Machine-readable error kind for JSON reports.
    pub fn kind(&self) -> &'static str {
        use epsdr_core::error::Error as E;
        match self {
            CliError::Parse { .. } => "ParseError",
            CliError::Io(_) => "IoError",
            CliError::Input(_) => "InputError",
            CliError::Core(e) => match e {
                E::DivisionByNonUnit(_) => "DivisionByNonUnit",
                E::RingMismatch(_) => "RingMismatch",
                E::PrecisionExhausted(_) => "PrecisionExhausted",
                E::NotAUnit(_) => "NotAUnit",
                E::DomainViolation(_) => "DomainViolation",
                E::WindowTooSmall(_) => "WindowTooSmall",
                E::CyclicSearchFailed(_) => "CyclicSearchFailed",
                E::NotInvertible(_) => "NotInvertible",
                E::NotAdmissible(_) => "NotAdmissible",
                E::NotRegularSingularInBasis(_) => "NotRegularSingularInBasis",
                E::NonRationalDivisor(_) => "NonRationalDivisor",
                E::StabilizationFailed(_) => "StabilizationFailed",
                E::UnsupportedLocalType(_) => "UnsupportedLocalType",
            },
        }
    }

    /// Column of a parse error, when there is one.
    pub fn column(&self) -> Option<usize> {
        match self {
            CliError::Parse { column, .. } => Some(*column),
            _ => None,
        }
    }
}

/// Result alias for the command-line layer.
pub type Result<T> = std::result::Result<T, CliError>;

/// Resolves the working precision: explicit flag, then the
/// `EPSDR_PRECISION` environment variable, then the library default.
pub fn resolve_precision(flag: Option<i64>) -> i64 {
    if let Some(p) = flag {
        return p;
    }
    if let Ok(text) = std::env::var("EPSDR_PRECISION") {
        if let Ok(p) = text.trim().parse::<i64>() {
            return p;
        }
    }
    epsdr_core::DEFAULT_PREC
}
