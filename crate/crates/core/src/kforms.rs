//! Differential forms over the base field `K` and over the two-variable
//! completion, plus the decision procedure for logarithmic-derivative
//! classes in `Ω¹_K / dlog K^×`.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::laurent::Laurent;
use crate::poly::QPoly;
use crate::scalars::{RatFun, Ring, Scalar};

/// A 1-form `c·dx` over the base field (or a nilpotent extension of it).
#[derive(Clone, Debug, PartialEq)]
pub struct KForm {
    /// Coefficient of `dx`.
    pub coeff: Scalar,
}

impl KForm {
    /// The form `c·dx`.
    pub fn new(coeff: Scalar) -> KForm {
        KForm { coeff }
    }

    /// The zero form over a ring.
    pub fn zero(ring: Ring) -> KForm {
        KForm { coeff: Scalar::zero(ring) }
    }

    /// True iff the coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    /// Sum.
    pub fn add(&self, other: &KForm) -> Result<KForm> {
        Ok(KForm { coeff: self.coeff.add(&other.coeff)? })
    }

    /// Difference.
    pub fn sub(&self, other: &KForm) -> Result<KForm> {
        Ok(KForm { coeff: self.coeff.sub(&other.coeff)? })
    }

    /// Negation.
    pub fn neg(&self) -> KForm {
        KForm { coeff: self.coeff.neg() }
    }

    /// Scalar multiple.
    pub fn scale(&self, c: &Scalar) -> Result<KForm> {
        Ok(KForm { coeff: self.coeff.mul(c)? })
    }

    /// Integer multiple.
    pub fn scale_int(&self, k: i64) -> Result<KForm> {
        self.scale(&Scalar::from_int(self.coeff.ring(), k))
    }
}

impl core::fmt::Display for KForm {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({})*dx", self.coeff)
    }
}

/// The logarithmic derivative `(du/dx)/u · dx` of a scalar unit.
pub fn dlog_x(u: &Scalar) -> Result<KForm> {
    Ok(KForm::new(u.d_dx().mul(&u.inv()?)?))
}

/// An absolute 1-form `a_t·dt + a_x·dx` with series coefficients.
#[derive(Clone, Debug)]
pub struct AbsForm {
    /// Coefficient of `dt`.
    pub a_t: Laurent,
    /// Coefficient of `dx`.
    pub a_x: Laurent,
}

impl AbsForm {
    /// Builds a form from its two coefficients.
    pub fn new(a_t: Laurent, a_x: Laurent) -> AbsForm {
        AbsForm { a_t, a_x }
    }

    /// A pure `dt`-form.
    pub fn from_dt(a_t: Laurent) -> AbsForm {
        let ring = a_t.ring();
        let prec = a_t.prec();
        AbsForm { a_t, a_x: Laurent::zero(ring, prec) }
    }

    /// A pure `dx`-form.
    pub fn from_dx(a_x: Laurent) -> AbsForm {
        let ring = a_x.ring();
        let prec = a_x.prec();
        AbsForm { a_t: Laurent::zero(ring, prec), a_x }
    }

    /// The absolute logarithmic derivative `du/u` of a unit series:
    /// `(∂_t u/u)·dt + (∂_x u/u)·dx`.
    pub fn dlog(u: &Laurent) -> Result<AbsForm> {
        let ui = u.inv()?;
        Ok(AbsForm {
            a_t: u.d_dt().mul(&ui)?,
            a_x: u.d_dx().mul(&ui)?,
        })
    }

    /// Sum.
    pub fn add(&self, other: &AbsForm) -> Result<AbsForm> {
        Ok(AbsForm {
            a_t: self.a_t.add(&other.a_t)?,
            a_x: self.a_x.add(&other.a_x)?,
        })
    }

    /// Negation.
    pub fn neg(&self) -> AbsForm {
        AbsForm { a_t: self.a_t.neg(), a_x: self.a_x.neg() }
    }

    /// Scalar multiple.
    pub fn scale(&self, c: &Scalar) -> Result<AbsForm> {
        Ok(AbsForm { a_t: self.a_t.scale(c)?, a_x: self.a_x.scale(c)? })
    }
}

/// Residue of the wedge `α ∧ β` along `t`: writes the wedge as
/// `φ(t)·(dx∧dt)` with `φ = a_x·b_t − b_x·a_t` and returns `res_t(φ)·dx`.
///
/// The orientation (the order of the two products) is pinned by the
/// coherence identity between the two ε-class branches, which is exercised
/// in the acceptance suite; flipping it breaks that identity.
pub fn res_wedge(alpha: &AbsForm, beta: &AbsForm) -> Result<KForm> {
    let lhs = alpha.a_x.mul(&beta.a_t)?;
    let rhs = beta.a_x.mul(&alpha.a_t)?;
    Ok(KForm::new(lhs.sub(&rhs)?.res_t()?))
}

/// Decides whether `ψ = dh/h` for some `h ∈ ℚ(x)^×`; on success also
/// returns the witness `h` (a product of the integer-residue factors).
///
/// The decision is complete on `ℚ(x)·dx`: the form must be proper with a
/// squarefree denominator, and every residue must be an integer.  Residues
/// are located as integer roots of the interpolated resultant
/// `R(c) = res_x(D, N − c·D′)`; candidate factors are `p_c = gcd(D, N − c·D′)`
/// and the reconstruction `Σ c·p_c′/p_c = N/D` is verified exactly before
/// answering `true`.
pub fn dlog_class_test(psi: &KForm) -> Result<(bool, Option<Scalar>)> {
    let ring = psi.coeff.ring();
    if ring.nil_order().is_some() {
        return Err(Error::DomainViolation(
            "dlog classes are decided over the base field, not nilpotent extensions".into(),
        ));
    }
    if psi.is_zero() {
        return Ok((true, Some(Scalar::one(ring))));
    }
    let fun = psi
        .coeff
        .as_ratfun()
        .ok_or_else(|| Error::DomainViolation("dlog test needs a rational-function form".into()))?;
    let n = fun.numer().clone();
    let d = fun.denom().clone();

    // Polynomial part must vanish (a nonzero polynomial form is never dlog).
    if d.is_constant() || n.degree() >= d.degree() {
        return Ok((false, None));
    }
    if !d.is_squarefree() {
        return Ok((false, None));
    }

    // R(c) = res_x(D, N − c·D′) interpolated from deg D + 1 sample points
    // (D is monic, so the sampled values are polynomial in c of degree
    // exactly deg D).
    let dprime = d.derivative();
    let deg = d.degree() as usize;
    let mut points: Vec<(BigRational, BigRational)> = Vec::with_capacity(deg + 1);
    for i in 0..=deg {
        let c = BigRational::from(BigInt::from(i as i64));
        let probe = n.sub(&dprime.scale(&c));
        points.push((c, d.resultant(&probe)));
    }
    let r_of_c = interpolate(&points);
    if r_of_c.is_zero() {
        // Can only happen when N and D share a factor, which reduced
        // rational functions never do.
        return Ok((false, None));
    }

    let mut witness_num = QPoly::one();
    let mut witness_den = QPoly::one();
    let mut reconstruction = RatFun::from_poly(QPoly::zero());
    let mut matched_degree = 0i64;
    for k in r_of_c.integer_roots() {
        if k.is_zero() {
            continue;
        }
        let kq = BigRational::from(k.clone());
        let p_k = d.gcd(&n.sub(&dprime.scale(&kq)));
        if p_k.degree() < 1 {
            continue;
        }
        matched_degree += p_k.degree();
        let term = RatFun::new(p_k.derivative().scale(&kq), p_k.clone())?;
        reconstruction = reconstruction.add(&term);
        let mag: u64 = match k.abs().try_into() {
            Ok(v) => v,
            Err(_) => return Ok((false, None)),
        };
        let mut pw = QPoly::one();
        for _ in 0..mag {
            pw = pw.mul(&p_k);
        }
        if k.is_positive() {
            witness_num = witness_num.mul(&pw);
        } else {
            witness_den = witness_den.mul(&pw);
        }
    }
    if matched_degree != d.degree() {
        return Ok((false, None));
    }
    // Exact reconstruction is authoritative.
    if reconstruction.sub(&fun).is_zero() {
        let witness = RatFun::new(witness_num, witness_den)?;
        Ok((true, Some(Scalar::from_fun(ring.join(Ring::Qx)?, witness))))
    } else {
        Ok((false, None))
    }
}

/// Lagrange interpolation through exact sample points.
fn interpolate(points: &[(BigRational, BigRational)]) -> QPoly {
    let mut acc = QPoly::zero();
    for (i, (xi, yi)) in points.iter().enumerate() {
        if yi.is_zero() {
            continue;
        }
        let mut basis = QPoly::one();
        let mut denom = BigRational::one();
        for (j, (xj, _)) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            basis = basis.mul(&QPoly::from_coeffs(alloc::vec![-xj.clone(), BigRational::one()]));
            denom *= xi - xj;
        }
        acc = acc.add(&basis.scale(&(yi / denom)));
    }
    acc
}
