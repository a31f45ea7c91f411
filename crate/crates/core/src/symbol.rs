//! Closed-form Contou-Carrère symbol, residue pairing, and global
//! reciprocity checkers on the projective line.
//!
//! The symbol `{f,g}♭` of two units of `R((t))` is assembled
//! bimultiplicatively from the canonical splitting
//! `f = t^d · r · f₊ · f₋` (see [`Laurent::decompose`]).  Its component
//! table is: `{t^m, t^n} = (−1)^{mn}`; `{r, t^m} = r^{−m}` with the
//! transposed slot contributing the inverse; and the unipotent cross-term
//! `{f₊, g₋} = exp(Σ_{i≥1} i·α_i·β_i)` where `log f₊ = Σ α_i tⁱ` and
//! `log g₋ = Σ β_i t⁻ⁱ` — a finite sum, because the `β_i` are nilpotent
//! and finitely many.  Every other component pair is 1 (a fact the
//! independent lattice-frame oracle re-verifies rather than assumes).
//! Over a field the symbol is the inverse of the classical tame symbol;
//! nilpotent coefficients deform it.
//!
//! The global checkers take rational functions of `t` whose zeros and
//! poles are rational points, expand them locally at every point of their
//! combined support (coordinate `t − p`, or `1/t` at infinity), and test
//! Weil reciprocity `Π_p {f,g}♭_p = 1` and the residue theorem
//! `Σ_p Res_p(f·dg) = 0`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::laurent::Laurent;
use crate::poly::QPoly;
use crate::scalars::{Ring, Scalar};

/// The Contou-Carrère symbol `{f,g}♭ ∈ R^×` of two units of `R((t))`.
///
/// Both arguments must be units: their valuations (lowest exponents with
/// unit coefficient) must be visible inside the precision window.
pub fn cc_symbol(f: &Laurent, g: &Laurent) -> Result<Scalar> {
    let ring = f.ring().join(g.ring())?;
    let f = f.promote_to(ring)?;
    let g = g.promote_to(ring)?;
    let (df, rf, f_plus, f_minus) = f.decompose()?;
    let (dg, rg, g_plus, g_minus) = g.decompose()?;
    let sign = if df % 2 != 0 && dg % 2 != 0 { -1 } else { 1 };
    let mut acc = Scalar::from_int(ring, sign);
    acc = acc.mul(&rf.pow(-dg)?)?;
    acc = acc.mul(&rg.pow(df)?)?;
    acc = acc.mul(&cross_term(&f_plus, &g_minus, false)?)?;
    acc = acc.mul(&cross_term(&g_plus, &f_minus, true)?)?;
    Ok(acc)
}

/// `exp(± Σ_{i≥1} i·α_i·β_i)` for `log plus = Σ α_i tⁱ` and
/// `log minus = Σ β_i t⁻ⁱ`.  The transposed slot (`invert = true`)
/// contributes the inverse, i.e. the negated exponent sum.
fn cross_term(plus: &Laurent, minus: &Laurent, invert: bool) -> Result<Scalar> {
    let ring = plus.ring();
    let betas: Vec<(i64, Scalar)> = minus
        .log_unip()?
        .terms()
        .into_iter()
        .filter(|(k, _)| *k < 0)
        .collect();
    if betas.is_empty() {
        return Ok(Scalar::one(ring));
    }
    let log_plus = plus.log_unip()?;
    let mut sum = Scalar::zero(ring);
    for (k, beta) in betas {
        let i = -k;
        if i >= log_plus.prec() {
            return Err(Error::PrecisionExhausted(format!(
                "symbol cross-term needs the t^{i} logarithm coefficient; the window ends at t^{}",
                log_plus.prec()
            )));
        }
        let alpha = log_plus.coeff(i);
        if alpha.is_zero() {
            continue;
        }
        sum = sum.add(&alpha.mul(&beta)?.mul(&Scalar::from_int(ring, i))?)?;
    }
    if invert {
        sum = sum.neg();
    }
    sum.exp_nilpotent()
}

/// The residue pairing `[a,b]♭ = Res(b·da) = res_t(b·∂_t a)`.
pub fn residue_pairing(a: &Laurent, b: &Laurent) -> Result<Scalar> {
    let ring = a.ring().join(b.ring())?;
    let a = a.promote_to(ring)?;
    let b = b.promote_to(ring)?;
    b.mul(&a.d_dt())?.res_t()
}

/// Lie-level compatibility probe: `{f, exp(εa)}♭ − 1`, which equals
/// `ε·Res(a·dlog f)` exactly, for `f` a unit and `a` arbitrary.
///
/// A square-zero `ε` is adjoined automatically when the coefficient ring
/// of the inputs has no nilpotent part; a ring that already carries
/// nilpotents is used as is.
pub fn lie_compatibility(f: &Laurent, a: &Laurent) -> Result<Scalar> {
    let mut ring = f.ring().join(a.ring())?;
    if ring.nil_order().is_none() {
        ring = ring.join(Ring::QNil(2))?;
    }
    let eps = Scalar::eps(ring).expect("ring has nilpotents by construction");
    let u = a.promote_to(ring)?.scale(&eps)?.exp_nilp()?;
    let sym = cc_symbol(&f.promote_to(ring)?, &u)?;
    sym.sub(&Scalar::one(ring))
}

/// A rational point of the projective line: finite `t = p`, or `t = ∞`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PointOnLine {
    /// The point `t = p`.
    Finite(BigRational),
    /// The point at infinity (local coordinate `1/t`).
    Infinity,
}

impl fmt::Display for PointOnLine {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointOnLine::Finite(p) => write!(out, "{p}"),
            PointOnLine::Infinity => write!(out, "inf"),
        }
    }
}

/// One point of a divisor on the projective line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivisorPoint {
    /// Where the zero or pole sits.
    pub location: PointOnLine,
    /// Its order: positive for zeros, negative for poles.
    pub multiplicity: i64,
}

/// A rational function of `t` that splits over ℚ: a unit constant times
/// a product of integer powers of monic linear factors `t − root`.  This
/// is the input class of the global reciprocity checkers — every zero
/// and pole is rational (or `∞`).  The constant may carry nilpotents.
#[derive(Clone, Debug)]
pub struct SplitRational {
    ring: Ring,
    lead: Scalar,
    factors: Vec<(BigRational, i64)>,
}

impl SplitRational {
    /// A nonzero constant function.
    pub fn constant(lead: Scalar) -> Result<SplitRational> {
        SplitRational::from_factors(lead, &[])
    }

    /// `lead · Π (t − root)^m`.  Duplicate roots are merged and zero
    /// powers dropped; the lead must be a unit scalar.
    pub fn from_factors(lead: Scalar, factors: &[(BigRational, i64)]) -> Result<SplitRational> {
        if !lead.is_unit() {
            return Err(Error::NotAUnit(
                "leading constant of a rational function must be a unit".into(),
            ));
        }
        let mut merged: Vec<(BigRational, i64)> = Vec::new();
        for (root, m) in factors {
            match merged.iter_mut().find(|(r, _)| r == root) {
                Some((_, acc)) => *acc += *m,
                None => merged.push((root.clone(), *m)),
            }
        }
        merged.retain(|(_, m)| *m != 0);
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(SplitRational {
            ring: lead.ring(),
            lead,
            factors: merged,
        })
    }

    /// Splits a polynomial with rational coefficients into linear factors.
    ///
    /// Fails with `NonRationalDivisor` when an irreducible factor of
    /// degree ≥ 2 remains, and with `DomainViolation` on the zero
    /// polynomial (which has no divisor).
    pub fn from_poly(ring: Ring, p: &QPoly) -> Result<SplitRational> {
        if p.is_zero() {
            return Err(Error::DomainViolation(
                "the zero function has no divisor".into(),
            ));
        }
        let mut rest = p.clone();
        let mut factors: Vec<(BigRational, i64)> = Vec::new();
        for root in p.rational_roots() {
            let lin = QPoly::from_coeffs(vec![-root.clone(), BigRational::one()]);
            let mut m = 0i64;
            loop {
                let (quot, rem) = rest.div_rem(&lin);
                if !rem.is_zero() {
                    break;
                }
                rest = quot;
                m += 1;
            }
            if m > 0 {
                factors.push((root, m));
            }
        }
        if !rest.is_constant() {
            return Err(Error::NonRationalDivisor(format!(
                "an irreducible factor of degree {} has no rational root",
                rest.degree()
            )));
        }
        let lead = Scalar::from_rat(ring, rest.coeff(0));
        SplitRational::from_factors(lead, &factors)
    }

    /// `numer/denom`, both required to split over ℚ.
    pub fn from_ratio(ring: Ring, numer: &QPoly, denom: &QPoly) -> Result<SplitRational> {
        let n = SplitRational::from_poly(ring, numer)?;
        let d = SplitRational::from_poly(ring, denom)?;
        n.div(&d)
    }

    /// The coefficient ring of the leading constant.
    pub fn ring(&self) -> Ring {
        self.ring
    }

    /// Rescales by a unit constant (the way nilpotent leads enter).
    pub fn scale(&self, c: &Scalar) -> Result<SplitRational> {
        let lead = self.lead.mul(c)?;
        if !lead.is_unit() {
            return Err(Error::NotAUnit(
                "rescaled leading constant is no longer a unit".into(),
            ));
        }
        Ok(SplitRational {
            ring: lead.ring(),
            lead,
            factors: self.factors.clone(),
        })
    }

    /// Product of two split functions (factor lists concatenate).
    pub fn mul(&self, other: &SplitRational) -> Result<SplitRational> {
        let lead = self.lead.mul(&other.lead)?;
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        SplitRational::from_factors(lead, &factors)
    }

    /// Multiplicative inverse (all multiplicities negate).
    pub fn inv(&self) -> Result<SplitRational> {
        let lead = self.lead.inv()?;
        let factors: Vec<(BigRational, i64)> = self
            .factors
            .iter()
            .map(|(r, m)| (r.clone(), -m))
            .collect();
        SplitRational::from_factors(lead, &factors)
    }

    /// Quotient `self/other`.
    pub fn div(&self, other: &SplitRational) -> Result<SplitRational> {
        self.mul(&other.inv()?)
    }

    fn promote_to(&self, ring: Ring) -> Result<SplitRational> {
        Ok(SplitRational {
            ring,
            lead: self.lead.promote_to(ring)?,
            factors: self.factors.clone(),
        })
    }

    /// Total degree `Σ multiplicities = deg(numer) − deg(denom)`.
    pub fn degree(&self) -> i64 {
        self.factors.iter().map(|(_, m)| m).sum()
    }

    /// The divisor: all zeros and poles with multiplicities, including
    /// the point at infinity (of multiplicity `−degree`) when it carries
    /// one.
    pub fn divisor(&self) -> Vec<DivisorPoint> {
        let mut points: Vec<DivisorPoint> = self
            .factors
            .iter()
            .map(|(r, m)| DivisorPoint {
                location: PointOnLine::Finite(r.clone()),
                multiplicity: *m,
            })
            .collect();
        let deg = self.degree();
        if deg != 0 {
            points.push(DivisorPoint {
                location: PointOnLine::Infinity,
                multiplicity: -deg,
            });
        }
        points
    }

    /// Exact value at a finite rational point that is not a pole.
    pub fn eval(&self, p: &BigRational) -> Result<Scalar> {
        let mut acc = self.lead.clone();
        for (root, m) in &self.factors {
            let c = p - root;
            if c.is_zero() {
                if *m < 0 {
                    return Err(Error::NotInvertible(format!(
                        "pole of order {} at t = {root}",
                        -m
                    )));
                }
                return Ok(Scalar::zero(self.ring));
            }
            acc = acc.mul(&Scalar::from_rat(self.ring, c).pow(*m)?)?;
        }
        Ok(acc)
    }

    /// Laurent expansion in the local coordinate at `at`: `τ = t − p` at
    /// a finite point, `s = 1/t` at infinity.
    pub fn local_expansion(&self, at: &PointOnLine, prec: i64) -> Result<Laurent> {
        let ring = self.ring;
        match at {
            PointOnLine::Finite(p) => {
                let mut acc = Laurent::from_scalar(ring, self.lead.clone(), prec);
                for (root, m) in &self.factors {
                    let c = p - root;
                    let base = if c.is_zero() {
                        Laurent::monomial(ring, Scalar::one(ring), 1, prec + 1)
                    } else {
                        Laurent::from_terms(
                            ring,
                            &[(0, Scalar::from_rat(ring, c)), (1, Scalar::one(ring))],
                            prec,
                        )
                    };
                    acc = acc.mul(&base.pow(*m)?)?;
                }
                Ok(acc)
            }
            PointOnLine::Infinity => {
                // t = 1/s:  lead·Π(1/s − root)^m = lead·s^{−Σm}·Π(1 − root·s)^m.
                let mut acc =
                    Laurent::from_scalar(ring, self.lead.clone(), prec).shift(-self.degree());
                for (root, m) in &self.factors {
                    if root.is_zero() {
                        continue;
                    }
                    let base = Laurent::from_terms(
                        ring,
                        &[
                            (0, Scalar::one(ring)),
                            (1, Scalar::from_rat(ring, -root.clone())),
                        ],
                        prec,
                    );
                    acc = acc.mul(&base.pow(*m)?)?;
                }
                Ok(acc)
            }
        }
    }
}

impl fmt::Display for SplitRational {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "({})", self.lead)?;
        for (root, m) in &self.factors {
            if root.is_zero() {
                write!(out, "*t^{m}")?;
            } else if root.is_negative() {
                write!(out, "*(t+{})^{m}", -root)?;
            } else {
                write!(out, "*(t-{root})^{m}")?;
            }
        }
        Ok(())
    }
}

/// Distinct points of `supp(div f) ∪ supp(div g)`, finite ones first in
/// increasing order, then infinity.
fn support_union(f: &SplitRational, g: &SplitRational) -> Vec<PointOnLine> {
    let mut points: Vec<PointOnLine> = Vec::new();
    for d in f.divisor().into_iter().chain(g.divisor()) {
        if !points.contains(&d.location) {
            points.push(d.location);
        }
    }
    points.sort();
    points
}

/// The outcome of a Weil-reciprocity run: every local symbol, and their
/// product (which the reciprocity law asserts equals 1).
#[derive(Clone, Debug)]
pub struct ReciprocityReport {
    /// The symbol of the pair of local expansions at each support point.
    pub per_point: Vec<(PointOnLine, Scalar)>,
    /// Product of all local symbols; 1 when reciprocity holds.
    pub product: Scalar,
}

/// Weil reciprocity over `ℙ¹(ℚ)`: expands `f` and `g` at every point of
/// `supp(div f) ∪ supp(div g)`, computes the symbol there, and returns
/// all local values together with their product.
pub fn weil_reciprocity_check(
    f: &SplitRational,
    g: &SplitRational,
) -> Result<ReciprocityReport> {
    let ring = f.ring.join(g.ring)?;
    let f = f.promote_to(ring)?;
    let g = g.promote_to(ring)?;
    let prec = crate::DEFAULT_PREC;
    let mut per_point = Vec::new();
    let mut product = Scalar::one(ring);
    for at in support_union(&f, &g) {
        let lf = f.local_expansion(&at, prec)?;
        let lg = g.local_expansion(&at, prec)?;
        let value = cc_symbol(&lf, &lg)?;
        product = product.mul(&value)?;
        per_point.push((at, value));
    }
    Ok(ReciprocityReport { per_point, product })
}

/// Residue theorem over `ℙ¹(ℚ)`: returns `Σ_p Res_p(f·dg)`, summed over
/// the combined support of the divisors (which contains every pole of
/// `f·dg`); the theorem asserts the sum is 0.
pub fn residue_theorem_check(f: &SplitRational, g: &SplitRational) -> Result<Scalar> {
    let ring = f.ring.join(g.ring)?;
    let f = f.promote_to(ring)?;
    let g = g.promote_to(ring)?;
    let prec = crate::DEFAULT_PREC;
    let mut total = Scalar::zero(ring);
    for at in support_union(&f, &g) {
        let lf = f.local_expansion(&at, prec)?;
        let lg = g.local_expansion(&at, prec)?;
        total = total.add(&lf.mul(&lg.d_dt())?.res_t()?)?;
    }
    Ok(total)
}
