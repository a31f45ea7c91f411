//! Exact arithmetic tower: `ℚ`, the rational function field `K = ℚ(x)`,
//! and Artinian nilpotent extensions `R[ε]/(ε^N)` of either base.
//!
//! All values are canonical (fractions reduced, denominators monic,
//! nilpotent coefficient lists of fixed length), so equality is decidable
//! and structural.  Binary operations promote operands into the smallest
//! common ring; two nilpotent extensions of different truncation order do
//! not embed into one another and yield [`Error::RingMismatch`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::{format_rational, QPoly};

/// Reduced fraction of polynomials over `ℚ` in the horizontal variable `x`.
///
/// Invariants: denominator nonzero and monic, `gcd(numer, denom) = 1`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RatFun {
    numer: QPoly,
    denom: QPoly,
}

impl RatFun {
    /// Builds and reduces `numer / denom`; `denom = 0` is rejected.
    pub fn new(numer: QPoly, denom: QPoly) -> Result<RatFun> {
        if denom.is_zero() {
            return Err(Error::DivisionByNonUnit(
                "zero denominator in rational function".into(),
            ));
        }
        Ok(RatFun::reduced(numer, denom))
    }

    fn reduced(numer: QPoly, denom: QPoly) -> RatFun {
        if numer.is_zero() {
            return RatFun {
                numer: QPoly::zero(),
                denom: QPoly::one(),
            };
        }
        let g = numer.gcd(&denom);
        let numer = numer.div_exact(&g);
        let denom = denom.div_exact(&g);
        let (denom, lead) = denom.into_monic();
        let inv = BigRational::one() / lead;
        RatFun {
            numer: numer.scale(&inv),
            denom,
        }
    }

    /// The polynomial `p` viewed as `p/1`.
    pub fn from_poly(p: QPoly) -> RatFun {
        RatFun {
            numer: p,
            denom: QPoly::one(),
        }
    }

    /// Constant function.
    pub fn from_rational(c: BigRational) -> RatFun {
        RatFun::from_poly(QPoly::constant(c))
    }

    /// Numerator (reduced).
    pub fn numer(&self) -> &QPoly {
        &self.numer
    }

    /// Denominator (monic, coprime to the numerator).
    pub fn denom(&self) -> &QPoly {
        &self.denom
    }

    /// True iff the value is 0.
    pub fn is_zero(&self) -> bool {
        self.numer.is_zero()
    }

    /// Sum.
    pub fn add(&self, other: &RatFun) -> RatFun {
        RatFun::reduced(
            self.numer
                .mul(&other.denom)
                .add(&other.numer.mul(&self.denom)),
            self.denom.mul(&other.denom),
        )
    }

    /// Negation.
    pub fn neg(&self) -> RatFun {
        RatFun {
            numer: self.numer.neg(),
            denom: self.denom.clone(),
        }
    }

    /// Difference.
    pub fn sub(&self, other: &RatFun) -> RatFun {
        self.add(&other.neg())
    }

    /// Product.
    pub fn mul(&self, other: &RatFun) -> RatFun {
        RatFun::reduced(
            self.numer.mul(&other.numer),
            self.denom.mul(&other.denom),
        )
    }

    /// Multiplicative inverse; errors on 0.
    pub fn inv(&self) -> Result<RatFun> {
        if self.is_zero() {
            return Err(Error::DivisionByNonUnit(
                "inverse of zero rational function".into(),
            ));
        }
        Ok(RatFun::reduced(self.denom.clone(), self.numer.clone()))
    }

    /// Derivative with respect to `x` (quotient rule, reduced).
    pub fn d_dx(&self) -> RatFun {
        let num = self
            .numer
            .derivative()
            .mul(&self.denom)
            .sub(&self.numer.mul(&self.denom.derivative()));
        RatFun::reduced(num, self.denom.mul(&self.denom))
    }

    /// The value as a rational constant, if the function is constant.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.numer.is_constant() && self.denom.is_constant() {
            Some(self.numer.coeff(0))
        } else {
            None
        }
    }
}

impl fmt::Display for RatFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom.is_constant() {
            write!(f, "{}", self.numer)
        } else if self.numer.is_constant() || self.numer.degree() == 0 {
            write!(f, "{}/({})", self.numer, self.denom)
        } else {
            write!(f, "({})/({})", self.numer, self.denom)
        }
    }
}

impl fmt::Debug for RatFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Handle describing which ring of the tower a [`Scalar`] lives in.
///
/// The partial order is `Q ⊂ Qx`, `Q ⊂ QNil(n)`, with pushout
/// `QxNil(n)`; `QNil(n)` and `QNil(m)` are incomparable for `n ≠ m`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Ring {
    /// The rationals `ℚ`.
    Q,
    /// The rational function field `ℚ(x)`.
    Qx,
    /// `ℚ[ε]/(ε^n)`, `n ≥ 1`.
    QNil(u32),
    /// `ℚ(x)[ε]/(ε^n)`, `n ≥ 1`.
    QxNil(u32),
}

impl Ring {
    /// Truncation order of the nilpotent generator, if any (`ε^n = 0`).
    pub fn nil_order(self) -> Option<u32> {
        match self {
            Ring::Q | Ring::Qx => None,
            Ring::QNil(n) | Ring::QxNil(n) => Some(n),
        }
    }

    /// True iff the ring contains the horizontal variable `x`.
    pub fn has_x(self) -> bool {
        matches!(self, Ring::Qx | Ring::QxNil(_))
    }

    /// Smallest common ring of the tower, or [`Error::RingMismatch`] when
    /// the two nilpotent truncation orders differ.
    pub fn join(self, other: Ring) -> Result<Ring> {
        let nil = match (self.nil_order(), other.nil_order()) {
            (Some(n), Some(m)) if n != m => {
                return Err(Error::RingMismatch(format!(
                    "nilpotent orders differ: eps^{n} = 0 vs eps^{m} = 0"
                )));
            }
            (Some(n), _) | (_, Some(n)) => Some(n),
            (None, None) => None,
        };
        let has_x = self.has_x() || other.has_x();
        Ok(match (has_x, nil) {
            (false, None) => Ring::Q,
            (true, None) => Ring::Qx,
            (false, Some(n)) => Ring::QNil(n),
            (true, Some(n)) => Ring::QxNil(n),
        })
    }

    /// The ring with any nilpotent part forgotten (`ℚ` or `ℚ(x)`).
    pub fn base(self) -> Ring {
        if self.has_x() {
            Ring::Qx
        } else {
            Ring::Q
        }
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ring::Q => write!(f, "QQ"),
            Ring::Qx => write!(f, "QQ(x)"),
            Ring::QNil(n) => write!(f, "QQ[eps]/(eps^{n})"),
            Ring::QxNil(n) => write!(f, "QQ(x)[eps]/(eps^{n})"),
        }
    }
}

/// Element of the scalar tower; see [`Ring`] for the available rings.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Scalar {
    /// Element of `ℚ`.
    Rat(BigRational),
    /// Element of `ℚ(x)`.
    Fun(RatFun),
    /// Element of `ℚ[ε]/(ε^n)`: coefficients of `ε^0 .. ε^{n−1}`.
    NilRat {
        /// Truncation order, `ε^n = 0`.
        n: u32,
        /// Exactly `n` coefficients, low power first.
        coeffs: Vec<BigRational>,
    },
    /// Element of `ℚ(x)[ε]/(ε^n)`: coefficients of `ε^0 .. ε^{n−1}`.
    NilFun {
        /// Truncation order, `ε^n = 0`.
        n: u32,
        /// Exactly `n` coefficients, low power first.
        coeffs: Vec<RatFun>,
    },
}

impl Scalar {
    /// Ring this value lives in.
    pub fn ring(&self) -> Ring {
        match self {
            Scalar::Rat(_) => Ring::Q,
            Scalar::Fun(_) => Ring::Qx,
            Scalar::NilRat { n, .. } => Ring::QNil(*n),
            Scalar::NilFun { n, .. } => Ring::QxNil(*n),
        }
    }

    /// Zero of the given ring.
    pub fn zero(ring: Ring) -> Scalar {
        Scalar::from_rat(ring, BigRational::zero())
    }

    /// One of the given ring.
    pub fn one(ring: Ring) -> Scalar {
        Scalar::from_rat(ring, BigRational::one())
    }

    /// Integer constant embedded in the given ring.
    pub fn from_int(ring: Ring, value: i64) -> Scalar {
        Scalar::from_rat(ring, BigRational::from_integer(BigInt::from(value)))
    }

    /// Reduced fraction `p/q` embedded in the given ring; `q ≠ 0`.
    pub fn from_ratio(ring: Ring, p: i64, q: i64) -> Scalar {
        assert!(q != 0, "zero denominator");
        Scalar::from_rat(
            ring,
            BigRational::new(BigInt::from(p), BigInt::from(q)),
        )
    }

    /// Rational constant embedded in the given ring.
    pub fn from_rat(ring: Ring, value: BigRational) -> Scalar {
        match ring {
            Ring::Q => Scalar::Rat(value),
            Ring::Qx => Scalar::Fun(RatFun::from_rational(value)),
            Ring::QNil(n) => {
                let mut coeffs = vec![BigRational::zero(); n as usize];
                coeffs[0] = value;
                Scalar::NilRat { n, coeffs }
            }
            Ring::QxNil(n) => {
                let mut coeffs = vec![RatFun::from_rational(BigRational::zero()); n as usize];
                coeffs[0] = RatFun::from_rational(value);
                Scalar::NilFun { n, coeffs }
            }
        }
    }

    /// The variable `x` of `ℚ(x)` (promoted into `ring ∨ ℚ(x)`).
    pub fn x(ring: Ring) -> Scalar {
        let target = ring
            .join(Ring::Qx)
            .expect("joining with QQ(x) never mismatches");
        Scalar::Fun(RatFun::from_poly(QPoly::x()))
            .promote_to(target)
            .expect("promotion into the join is total")
    }

    /// The nilpotent generator `ε` of a nilpotent ring; `None` on `ℚ`/`ℚ(x)`
    /// and on `n = 1` (where `ε = 0` would be indistinguishable from zero).
    pub fn eps(ring: Ring) -> Option<Scalar> {
        match ring.nil_order() {
            Some(n) if n >= 2 => {
                let mut s = Scalar::zero(ring);
                match &mut s {
                    Scalar::NilRat { coeffs, .. } => coeffs[1] = BigRational::one(),
                    Scalar::NilFun { coeffs, .. } => {
                        coeffs[1] = RatFun::from_rational(BigRational::one())
                    }
                    _ => unreachable!(),
                }
                Some(s)
            }
            _ => None,
        }
    }

    /// Rational function embedded in the given ring (which must contain `x`
    /// after joining).
    pub fn from_fun(ring: Ring, value: RatFun) -> Scalar {
        let target = ring
            .join(Ring::Qx)
            .expect("joining with QQ(x) never mismatches");
        Scalar::Fun(value)
            .promote_to(target)
            .expect("promotion into the join is total")
    }

    /// Embeds `self` into a larger ring of the tower.
    pub fn promote_to(&self, ring: Ring) -> Result<Scalar> {
        let target = self.ring().join(ring)?;
        if target != ring {
            return Err(Error::RingMismatch(format!(
                "cannot embed element of {} into {}",
                self.ring(),
                ring
            )));
        }
        if self.ring() == ring {
            return Ok(self.clone());
        }
        let value = match (self, ring) {
            (Scalar::Rat(c), Ring::Qx) => Scalar::Fun(RatFun::from_rational(c.clone())),
            (Scalar::Rat(c), Ring::QNil(n)) => {
                let mut coeffs = vec![BigRational::zero(); n as usize];
                coeffs[0] = c.clone();
                Scalar::NilRat { n, coeffs }
            }
            (Scalar::Rat(c), Ring::QxNil(n)) => {
                let mut coeffs = vec![RatFun::from_rational(BigRational::zero()); n as usize];
                coeffs[0] = RatFun::from_rational(c.clone());
                Scalar::NilFun { n, coeffs }
            }
            (Scalar::Fun(v), Ring::QxNil(n)) => {
                let mut coeffs = vec![RatFun::from_rational(BigRational::zero()); n as usize];
                coeffs[0] = v.clone();
                Scalar::NilFun { n, coeffs }
            }
            (Scalar::NilRat { n, coeffs }, Ring::QxNil(m)) if *n == m => Scalar::NilFun {
                n: m,
                coeffs: coeffs.iter().map(|c| RatFun::from_rational(c.clone())).collect(),
            },
            _ => {
                return Err(Error::RingMismatch(format!(
                    "cannot embed element of {} into {}",
                    self.ring(),
                    ring
                )))
            }
        };
        Ok(value)
    }

    fn joined(&self, other: &Scalar) -> Result<(Scalar, Scalar, Ring)> {
        let ring = self.ring().join(other.ring())?;
        Ok((self.promote_to(ring)?, other.promote_to(ring)?, ring))
    }

    /// True iff the value is 0.
    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Rat(c) => c.is_zero(),
            Scalar::Fun(v) => v.is_zero(),
            Scalar::NilRat { coeffs, .. } => coeffs.iter().all(|c| c.is_zero()),
            Scalar::NilFun { coeffs, .. } => coeffs.iter().all(|c| c.is_zero()),
        }
    }

    /// True iff the value is 1.
    pub fn is_one(&self) -> bool {
        self == &Scalar::one(self.ring())
    }

    /// True iff the value is a unit (its ε⁰ part is nonzero).
    pub fn is_unit(&self) -> bool {
        !self.unit_part().is_zero()
    }

    /// True iff the value is nilpotent (zero ε⁰ part).
    pub fn is_nilpotent(&self) -> bool {
        self.unit_part().is_zero()
    }

    /// The ε⁰ coefficient, re-embedded as an element of the same ring.
    pub fn unit_part(&self) -> Scalar {
        match self {
            Scalar::Rat(_) | Scalar::Fun(_) => self.clone(),
            Scalar::NilRat { n, coeffs } => {
                let mut out = vec![BigRational::zero(); *n as usize];
                out[0] = coeffs[0].clone();
                Scalar::NilRat { n: *n, coeffs: out }
            }
            Scalar::NilFun { n, coeffs } => {
                let mut out = vec![RatFun::from_rational(BigRational::zero()); *n as usize];
                out[0] = coeffs[0].clone();
                Scalar::NilFun { n: *n, coeffs: out }
            }
        }
    }

    /// Splits `a = u + ν` with `u` the ε⁰ part and `ν` nilpotent.
    ///
    /// On `ℚ` and `ℚ(x)` this degenerates to `(a, 0)`.
    pub fn unit_nil_split(&self) -> (Scalar, Scalar) {
        let u = self.unit_part();
        let nu = self.sub(&u).expect("same ring");
        (u, nu)
    }

    /// The ε⁰ coefficient as an element of the base field (`ℚ` or `ℚ(x)`).
    pub fn unit_part_base(&self) -> Scalar {
        match self {
            Scalar::Rat(_) | Scalar::Fun(_) => self.clone(),
            Scalar::NilRat { coeffs, .. } => Scalar::Rat(coeffs[0].clone()),
            Scalar::NilFun { coeffs, .. } => Scalar::Fun(coeffs[0].clone()),
        }
    }

    /// Sum (operands promoted into their smallest common ring).
    pub fn add(&self, other: &Scalar) -> Result<Scalar> {
        let (a, b, _) = self.joined(other)?;
        Ok(match (a, b) {
            (Scalar::Rat(x), Scalar::Rat(y)) => Scalar::Rat(x + y),
            (Scalar::Fun(x), Scalar::Fun(y)) => Scalar::Fun(x.add(&y)),
            (Scalar::NilRat { n, coeffs: x }, Scalar::NilRat { coeffs: y, .. }) => {
                Scalar::NilRat {
                    n,
                    coeffs: x.iter().zip(&y).map(|(a, b)| a + b).collect(),
                }
            }
            (Scalar::NilFun { n, coeffs: x }, Scalar::NilFun { coeffs: y, .. }) => {
                Scalar::NilFun {
                    n,
                    coeffs: x.iter().zip(&y).map(|(a, b)| a.add(b)).collect(),
                }
            }
            _ => unreachable!("joined values share a variant"),
        })
    }

    /// Negation.
    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Rat(c) => Scalar::Rat(-c.clone()),
            Scalar::Fun(v) => Scalar::Fun(v.neg()),
            Scalar::NilRat { n, coeffs } => Scalar::NilRat {
                n: *n,
                coeffs: coeffs.iter().map(|c| -c.clone()).collect(),
            },
            Scalar::NilFun { n, coeffs } => Scalar::NilFun {
                n: *n,
                coeffs: coeffs.iter().map(|c| c.neg()).collect(),
            },
        }
    }

    /// Difference.
    pub fn sub(&self, other: &Scalar) -> Result<Scalar> {
        self.add(&other.neg())
    }

    /// Product (operands promoted into their smallest common ring).
    pub fn mul(&self, other: &Scalar) -> Result<Scalar> {
        let (a, b, _) = self.joined(other)?;
        Ok(match (a, b) {
            (Scalar::Rat(x), Scalar::Rat(y)) => Scalar::Rat(x * y),
            (Scalar::Fun(x), Scalar::Fun(y)) => Scalar::Fun(x.mul(&y)),
            (Scalar::NilRat { n, coeffs: x }, Scalar::NilRat { coeffs: y, .. }) => {
                let mut out = vec![BigRational::zero(); n as usize];
                for (i, a) in x.iter().enumerate() {
                    if a.is_zero() {
                        continue;
                    }
                    for (j, b) in y.iter().enumerate() {
                        if i + j < n as usize {
                            out[i + j] += a * b;
                        }
                    }
                }
                Scalar::NilRat { n, coeffs: out }
            }
            (Scalar::NilFun { n, coeffs: x }, Scalar::NilFun { coeffs: y, .. }) => {
                let zero = RatFun::from_rational(BigRational::zero());
                let mut out = vec![zero; n as usize];
                for (i, a) in x.iter().enumerate() {
                    if a.is_zero() {
                        continue;
                    }
                    for (j, b) in y.iter().enumerate() {
                        if i + j < n as usize {
                            out[i + j] = out[i + j].add(&a.mul(b));
                        }
                    }
                }
                Scalar::NilFun { n, coeffs: out }
            }
            _ => unreachable!("joined values share a variant"),
        })
    }

    /// Multiplicative inverse; the value must be a unit.
    ///
    /// For `a = u(1 + w)` with `w` nilpotent the geometric series
    /// truncates: `a⁻¹ = u⁻¹ Σ_{k<n} (−w)^k`.
    pub fn inv(&self) -> Result<Scalar> {
        match self {
            Scalar::Rat(c) => {
                if c.is_zero() {
                    Err(Error::DivisionByNonUnit("inverse of 0 in QQ".into()))
                } else {
                    Ok(Scalar::Rat(BigRational::one() / c))
                }
            }
            Scalar::Fun(v) => Ok(Scalar::Fun(v.inv().map_err(|_| {
                Error::DivisionByNonUnit("inverse of 0 in QQ(x)".into())
            })?)),
            Scalar::NilRat { .. } | Scalar::NilFun { .. } => {
                let ring = self.ring();
                let u = self.unit_part_base();
                if u.is_zero() {
                    return Err(Error::DivisionByNonUnit(format!(
                        "inverse of a non-unit in {ring}: zero eps^0 part"
                    )));
                }
                // Invert in the base field first; recursing at the same
                // nilpotent order would never bottom out.
                let u_inv = u.inv()?.promote_to(ring)?;
                // w = a·u⁻¹ − 1 is nilpotent.
                let w = self.mul(&u_inv)?.sub(&Scalar::one(ring))?;
                let n = ring.nil_order().expect("nilpotent ring");
                let mut acc = Scalar::one(ring);
                let mut pw = Scalar::one(ring);
                for _ in 1..n {
                    pw = pw.mul(&w)?.neg();
                    acc = acc.add(&pw)?;
                }
                acc.mul(&u_inv)
            }
        }
    }

    /// Quotient `self / other`; `other` must be a unit.
    pub fn div(&self, other: &Scalar) -> Result<Scalar> {
        self.mul(&other.inv()?)
    }

    /// Integer power; negative exponents require a unit base.
    pub fn pow(&self, k: i64) -> Result<Scalar> {
        let ring = self.ring();
        if k == 0 {
            return Ok(Scalar::one(ring));
        }
        let base = if k < 0 { self.inv()? } else { self.clone() };
        let mut acc = Scalar::one(ring);
        let mut sq = base;
        let mut e = k.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq)?;
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq)?;
            }
        }
        Ok(acc)
    }

    /// Derivative with respect to `x`; constants (including all of
    /// `ℚ[ε]/(ε^n)`) map to 0.
    pub fn d_dx(&self) -> Scalar {
        match self {
            Scalar::Rat(_) => Scalar::zero(Ring::Q),
            Scalar::Fun(v) => Scalar::Fun(v.d_dx()),
            Scalar::NilRat { n, .. } => Scalar::zero(Ring::QNil(*n)),
            Scalar::NilFun { n, coeffs } => Scalar::NilFun {
                n: *n,
                coeffs: coeffs.iter().map(|c| c.d_dx()).collect(),
            },
        }
    }

    /// The value as a rational number, if it lies in `ℚ ⊂ ring`.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            Scalar::Rat(c) => Some(c.clone()),
            Scalar::Fun(v) => v.as_rational(),
            Scalar::NilRat { coeffs, .. } => {
                if coeffs[1..].iter().all(|c| c.is_zero()) {
                    Some(coeffs[0].clone())
                } else {
                    None
                }
            }
            Scalar::NilFun { coeffs, .. } => {
                if coeffs[1..].iter().all(|c| c.is_zero()) {
                    coeffs[0].as_rational()
                } else {
                    None
                }
            }
        }
    }

    /// The value as a rational function of `x`, if its ε-part vanishes.
    pub fn as_ratfun(&self) -> Option<RatFun> {
        match self {
            Scalar::Rat(c) => Some(RatFun::from_rational(c.clone())),
            Scalar::Fun(v) => Some(v.clone()),
            Scalar::NilRat { coeffs, .. } => {
                if coeffs[1..].iter().all(|c| c.is_zero()) {
                    Some(RatFun::from_rational(coeffs[0].clone()))
                } else {
                    None
                }
            }
            Scalar::NilFun { coeffs, .. } => {
                if coeffs[1..].iter().all(|c| c.is_zero()) {
                    Some(coeffs[0].clone())
                } else {
                    None
                }
            }
        }
    }

    /// `exp` of a nilpotent element: the series `Σ a^k/k!` truncates.
    pub fn exp_nilpotent(&self) -> Result<Scalar> {
        if !self.is_nilpotent() {
            return Err(Error::DomainViolation(
                "exp_nilpotent requires a nilpotent argument".into(),
            ));
        }
        let ring = self.ring();
        let n = ring.nil_order().unwrap_or(1);
        let mut acc = Scalar::one(ring);
        let mut term = Scalar::one(ring);
        for k in 1..n {
            term = term
                .mul(self)?
                .div(&Scalar::from_int(ring, k as i64))?;
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    /// `log` of a unipotent element `1 + w`, `w` nilpotent: `Σ (−1)^{k+1} w^k/k`.
    pub fn log_unipotent(&self) -> Result<Scalar> {
        let ring = self.ring();
        let w = self.sub(&Scalar::one(ring))?;
        if !w.is_nilpotent() {
            return Err(Error::DomainViolation(
                "log_unipotent requires an argument of the form 1 + nilpotent".into(),
            ));
        }
        let n = ring.nil_order().unwrap_or(1);
        let mut acc = Scalar::zero(ring);
        let mut pw = Scalar::one(ring);
        for k in 1..n {
            pw = pw.mul(&w)?;
            if pw.is_zero() {
                break;
            }
            let signed = if k % 2 == 1 { pw.clone() } else { pw.neg() };
            acc = acc.add(&signed.div(&Scalar::from_int(ring, k as i64))?)?;
        }
        Ok(acc)
    }

    /// ε-expansion of the value in the base field: coefficient of `ε^k`
    /// as an element of `ℚ` or `ℚ(x)`.
    pub fn eps_coeff(&self, k: usize) -> Scalar {
        match self {
            Scalar::Rat(c) => {
                if k == 0 {
                    Scalar::Rat(c.clone())
                } else {
                    Scalar::zero(Ring::Q)
                }
            }
            Scalar::Fun(v) => {
                if k == 0 {
                    Scalar::Fun(v.clone())
                } else {
                    Scalar::zero(Ring::Qx)
                }
            }
            Scalar::NilRat { coeffs, .. } => coeffs
                .get(k)
                .map(|c| Scalar::Rat(c.clone()))
                .unwrap_or_else(|| Scalar::zero(Ring::Q)),
            Scalar::NilFun { coeffs, .. } => coeffs
                .get(k)
                .map(|c| Scalar::Fun(c.clone()))
                .unwrap_or_else(|| Scalar::zero(Ring::Qx)),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Rat(c) => write!(f, "{}", format_rational(c)),
            Scalar::Fun(v) => write!(f, "{v}"),
            Scalar::NilRat { coeffs, .. } => {
                write_nil_terms(f, coeffs.iter().map(format_rational))
            }
            Scalar::NilFun { coeffs, .. } => {
                write_nil_terms(f, coeffs.iter().map(|c| c.to_string()))
            }
        }
    }
}

fn write_nil_terms<I: Iterator<Item = String>>(
    f: &mut fmt::Formatter<'_>,
    terms: I,
) -> fmt::Result {
    let mut wrote = false;
    for (k, term) in terms.enumerate() {
        if term == "0" {
            continue;
        }
        if wrote {
            write!(f, " + ")?;
        }
        wrote = true;
        let needs_parens = term.contains('+') || term.contains('-') || term.contains('/');
        match k {
            0 => write!(f, "{term}")?,
            _ => {
                if needs_parens {
                    write!(f, "({term})")?;
                } else {
                    write!(f, "{term}")?;
                }
                if k == 1 {
                    write!(f, "*eps")?;
                } else {
                    write!(f, "*eps^{k}")?;
                }
            }
        }
    }
    if !wrote {
        write!(f, "0")?;
    }
    Ok(())
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} : {}", self.ring())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Scalar {
        Scalar::x(Ring::Qx)
    }

    #[test]
    fn inverse_pair_in_qx() {
        // (x/(x+1)) · ((x+1)/x) = 1
        let one = Scalar::one(Ring::Qx);
        let xp1 = x().add(&one).unwrap();
        let a = x().div(&xp1).unwrap();
        let b = xp1.div(&x()).unwrap();
        assert_eq!(a.mul(&b).unwrap(), one);
    }

    #[test]
    fn truncated_geometric_inverse() {
        // (1+ε)⁻¹ = 1 − ε in ℚ[ε]/(ε²)
        let ring = Ring::QNil(2);
        let eps = Scalar::eps(ring).unwrap();
        let one = Scalar::one(ring);
        let inv = one.add(&eps).unwrap().inv().unwrap();
        assert_eq!(inv, one.sub(&eps).unwrap());
    }

    #[test]
    fn rational_addition() {
        let a = Scalar::from_ratio(Ring::Q, 1, 2);
        let b = Scalar::from_ratio(Ring::Q, 1, 3);
        assert_eq!(a.add(&b).unwrap(), Scalar::from_ratio(Ring::Q, 5, 6));
    }

    #[test]
    fn derivative_examples() {
        // x² → 2x; 1/x → −1/x²; x²+1 → 2x
        let two_x = Scalar::from_int(Ring::Qx, 2).mul(&x()).unwrap();
        assert_eq!(x().pow(2).unwrap().d_dx(), two_x);
        let inv_x = x().inv().unwrap();
        let expect = x().pow(2).unwrap().inv().unwrap().neg();
        assert_eq!(inv_x.d_dx(), expect);
        let p = x().pow(2).unwrap().add(&Scalar::one(Ring::Qx)).unwrap();
        assert_eq!(p.d_dx(), two_x);
    }

    #[test]
    fn unit_nil_split_examples() {
        // 3 + 2ε → (3, 2ε)
        let ring = Ring::QNil(2);
        let eps = Scalar::eps(ring).unwrap();
        let two_eps = Scalar::from_int(ring, 2).mul(&eps).unwrap();
        let a = Scalar::from_int(ring, 3).add(&two_eps).unwrap();
        let (u, nu) = a.unit_nil_split();
        assert_eq!(u, Scalar::from_int(ring, 3));
        assert_eq!(nu, two_eps);
        assert!(a.is_unit());

        // ε → (0, ε)
        let (u, nu) = eps.unit_nil_split();
        assert!(u.is_zero());
        assert_eq!(nu, eps);
        assert!(!eps.is_unit());
        assert!(eps.inv().is_err());

        // x + ε/x → (x, ε/x)
        let ringx = Ring::QxNil(2);
        let epsx = Scalar::eps(ringx).unwrap();
        let xbig = Scalar::x(ringx);
        let tail = epsx.div(&xbig).unwrap();
        let a = xbig.add(&tail).unwrap();
        let (u, nu) = a.unit_nil_split();
        assert_eq!(u, xbig);
        assert_eq!(nu, tail);
    }

    #[test]
    fn ring_mismatch_between_nil_orders() {
        let a = Scalar::eps(Ring::QNil(2)).unwrap();
        let b = Scalar::eps(Ring::QNil(3)).unwrap();
        assert!(matches!(a.add(&b), Err(Error::RingMismatch(_))));
    }

    #[test]
    fn promotion_pushout() {
        let a = Scalar::eps(Ring::QNil(3)).unwrap();
        let b = Scalar::x(Ring::Qx);
        let prod = a.mul(&b).unwrap();
        assert_eq!(prod.ring(), Ring::QxNil(3));
        assert_eq!(prod.eps_coeff(1), Scalar::x(Ring::Qx));
    }

    #[test]
    fn scalar_exp_log_round_trip() {
        let ring = Ring::QNil(4);
        let eps = Scalar::eps(ring).unwrap();
        let two_eps = Scalar::from_int(ring, 2).mul(&eps).unwrap();
        let e = two_eps.exp_nilpotent().unwrap();
        assert_eq!(e.log_unipotent().unwrap(), two_eps);
        assert!(Scalar::one(ring).exp_nilpotent().is_err());
    }

    #[test]
    fn nilpotent_cube_vanishes() {
        let eps = Scalar::eps(Ring::QNil(3)).unwrap();
        assert!(!eps.pow(2).unwrap().is_zero());
        assert!(eps.pow(3).unwrap().is_zero());
    }
}
