//! Exact de Rham ε-factor calculus for formal meromorphic connections
//! over `K((t))`.
//!
//! The crate computes, in exact arithmetic over `ℚ`, `ℚ(x)` and nilpotent
//! extensions `B[ε]/(ε^N)`:
//!
//! * Contou-Carrère symbols `{f,g}♭` of units of `R((t))`, both in closed
//!   form ([`symbol::cc_symbol`]) and through an independent
//!   determinant-commutator oracle ([`tate::symbol_oracle`]);
//! * Fredholm indices of banded operators on `R((t))ⁿ` ([`tate::index`]),
//!   irregularity and ε-degrees of connections ([`connect`]);
//! * ε-connection 1-form classes in `Ω¹_{K/ℚ}` for regular-singular and
//!   admissible connections ([`epsilon`]);
//! * de Rham cohomology, Gauß–Manin determinant classes and the local-global
//!   product-formula comparison for families on open subsets of `ℙ¹`
//!   ([`globalcurve`]);
//! * Weil reciprocity and residue-theorem checks on `ℙ¹` ([`symbol`]).
//!
//! Everything is deterministic and allocation-only: the crate is `#![no_std]`
//! (with `alloc`), keeps all series at explicit finite precision, and turns
//! every truncation decision into either a stable answer or a loud error
//! ([`error::Error`]).
//!
//! # Example
//!
//! ```
//! use epsdr_core::laurent::Laurent;
//! use epsdr_core::scalars::{Ring, Scalar};
//! use epsdr_core::symbol::cc_symbol;
//!
//! // {t, t}♭ = −1 in ℚ((t)).
//! let t = Laurent::t(Ring::Q, 32);
//! let s = cc_symbol(&t, &t).unwrap();
//! assert_eq!(s, Scalar::from_int(Ring::Q, -1));
//! ```

#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod connect;
pub mod epsilon;
pub mod error;
pub mod globalcurve;
pub mod kforms;
pub mod laurent;
mod linalg;
pub mod poly;
pub mod rng;
pub mod scalars;
pub mod symbol;
pub mod tate;

pub use error::{Error, Result};

/// Default working precision (number of known series coefficients above the
/// lowest exponent) used by constructors that do not take an explicit
/// precision.  Top-level drivers re-run at a higher precision to guard
/// against truncation artefacts.
pub const DEFAULT_PREC: i64 = 32;
