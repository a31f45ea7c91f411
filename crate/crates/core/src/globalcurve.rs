//! Families on open subsets of ℙ¹: de Rham cohomology, the Gauß–Manin
//! determinant class, and the local–global product-formula comparison.
//!
//! A [`GlobalFamily`] is a flat connection on a trivial bundle over
//! `U = ℙ¹ ∖ D`, with `D ⊂ ℚ ∪ {∞}` a finite set of rational punctures
//! (∞ always removed) and coefficients in `K = ℚ(x)`.  The module
//! computes:
//!
//! * `H⁰` and `H¹` of the relative de Rham complex
//!   `𝒪(U)ⁿ → Ω¹(U)ⁿ` by exact, degree-truncated linear algebra over
//!   `K`, certified stable under enlarging the pole-order bound
//!   ([`derham`]);
//! * the connection form of `⊗ᵢ (det Hⁱ)^{(−1)^{i+1}}` for the
//!   Gauß–Manin action of `∂_x` ([`gm_det_class`]);
//! * formal local models at every puncture ([`local_at`]), feeding the
//!   ε-classes of [`crate::epsilon`];
//! * the comparison of the summed local ε-classes against the global
//!   determinant class, modulo `dlog K^×` with an explicit witness
//!   ([`product_formula_check`]).
//!
//! Everything is exact: elements of `𝒪(U)` are rational functions in
//! `t` over `K` with denominators supported on the punctures
//! ([`RatT`]), and all expansions have finite, tracked precision.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::connect::{self, Connection};
use crate::epsilon::{self, Branch, EpsilonClass, NuChoice};
use crate::error::{Error, Result};
use crate::kforms::{dlog_class_test, KForm};
use crate::laurent::Laurent;
use crate::scalars::{Ring, Scalar};

/// Default pole-order bound for the truncated cohomology solve; the
/// computation is re-run at `bound + 4` and must agree.
pub const DEFAULT_POLE_BOUND: i64 = 24;

// ---- dense polynomials in t over Scalar -------------------------------

type TP = Vec<Scalar>;

fn tp_trim(mut p: TP) -> TP {
    while p.last().map_or(false, Scalar::is_zero) {
        p.pop();
    }
    p
}

fn tp_is_zero(p: &TP) -> bool {
    p.iter().all(Scalar::is_zero)
}

fn tp_deg(p: &TP) -> i64 {
    p.len() as i64 - 1
}

fn tp_add(a: &TP, b: &TP) -> Result<TP> {
    let mut out = vec![Scalar::zero(Ring::Qx); a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] = out[i].add(c)?;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] = out[i].add(c)?;
    }
    Ok(tp_trim(out))
}

fn tp_neg(a: &TP) -> TP {
    a.iter().map(Scalar::neg).collect()
}

fn tp_mul(a: &TP, b: &TP) -> Result<TP> {
    if tp_is_zero(a) || tp_is_zero(b) {
        return Ok(Vec::new());
    }
    let mut out = vec![Scalar::zero(Ring::Qx); a.len() + b.len() - 1];
    for (i, ca) in a.iter().enumerate() {
        if ca.is_zero() {
            continue;
        }
        for (j, cb) in b.iter().enumerate() {
            if cb.is_zero() {
                continue;
            }
            out[i + j] = out[i + j].add(&ca.mul(cb)?)?;
        }
    }
    Ok(tp_trim(out))
}

fn tp_scale(a: &TP, c: &Scalar) -> Result<TP> {
    let out = a
        .iter()
        .map(|e| e.mul(c))
        .collect::<Result<Vec<Scalar>>>()?;
    Ok(tp_trim(out))
}

fn tp_eval(a: &TP, at: &Scalar) -> Result<Scalar> {
    let mut acc = Scalar::zero(Ring::Qx);
    for c in a.iter().rev() {
        acc = acc.mul(at)?.add(c)?;
    }
    Ok(acc)
}

fn tp_ddt(a: &TP) -> Result<TP> {
    if a.len() <= 1 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(a.len() - 1);
    for (k, c) in a.iter().enumerate().skip(1) {
        out.push(c.mul(&Scalar::from_int(Ring::Qx, k as i64))?);
    }
    Ok(tp_trim(out))
}

fn tp_ddx(a: &TP) -> TP {
    tp_trim(a.iter().map(Scalar::d_dx).collect())
}

/// Synthetic division by `t − p`: returns the quotient and the
/// remainder `a(p)`.
fn tp_div_linear(a: &TP, p: &Scalar) -> Result<(TP, Scalar)> {
    let mut quot = vec![Scalar::zero(Ring::Qx); a.len().saturating_sub(1)];
    let mut carry = Scalar::zero(Ring::Qx);
    for (k, c) in a.iter().enumerate().rev() {
        let v = c.add(&carry.mul(p)?)?;
        if k == 0 {
            return Ok((tp_trim(quot), v));
        }
        quot[k - 1] = v.clone();
        carry = v;
    }
    Ok((Vec::new(), Scalar::zero(Ring::Qx)))
}

/// Long division by a monic divisor: `a = q·d + r` with `deg r < deg d`.
fn tp_divrem_monic(a: &TP, d: &TP) -> Result<(TP, TP)> {
    let dd = tp_deg(d);
    if dd < 0 {
        return Err(Error::DomainViolation("division by the zero polynomial".into()));
    }
    let mut rem: TP = a.clone();
    let mut quot = vec![Scalar::zero(Ring::Qx); a.len()];
    while tp_deg(&rem) >= dd {
        let k = (tp_deg(&rem) - dd) as usize;
        let c = rem.last().expect("nonempty").clone();
        quot[k] = quot[k].add(&c)?;
        for (j, e) in d.iter().enumerate() {
            rem[k + j] = rem[k + j].sub(&c.mul(e)?)?;
        }
        rem = tp_trim(rem);
    }
    Ok((tp_trim(quot), rem))
}

/// Coefficients of `a(p + τ)` as a polynomial in `τ`.
fn tp_taylor_shift(a: &TP, p: &Scalar) -> Result<TP> {
    let mut rest = a.clone();
    let mut out = Vec::with_capacity(a.len());
    while !tp_is_zero(&rest) {
        let (q, r) = tp_div_linear(&rest, p)?;
        out.push(r);
        rest = q;
    }
    Ok(tp_trim(out))
}

// ---- rational functions in t with punctured denominators --------------

/// A rational function in `t` over `K = ℚ(x)` whose denominator is a
/// product of linear factors `(t − p)` at rational points `p` — the
/// coordinate ring of a punctured affine line.  The stored form is
/// always reduced: no denominator factor divides the numerator.
#[derive(Clone, Debug)]
pub struct RatT {
    num: TP,
    den: Vec<(Scalar, usize)>,
}

impl RatT {
    /// Builds `num(t) / Π (t − pᵢ)^{mᵢ}` and reduces.  Numerator
    /// coefficients may live in `ℚ` or `ℚ(x)`; denominator points must
    /// be rational constants.
    pub fn new(num: Vec<Scalar>, den: Vec<(Scalar, usize)>) -> Result<RatT> {
        let mut num_qx = Vec::with_capacity(num.len());
        for c in num {
            if c.ring().join(Ring::Qx)? != Ring::Qx {
                return Err(Error::DomainViolation(
                    "family coefficients must live in ℚ(x)".into(),
                ));
            }
            num_qx.push(c.promote_to(Ring::Qx)?);
        }
        let mut den_q: Vec<(Scalar, usize)> = Vec::new();
        for (p, m) in den {
            if p.ring() != Ring::Q {
                return Err(Error::DomainViolation(
                    "denominator points must be rational constants".into(),
                ));
            }
            if m == 0 {
                continue;
            }
            match den_q.iter_mut().find(|(q, _)| *q == p) {
                Some((_, mm)) => *mm += m,
                None => den_q.push((p, m)),
            }
        }
        let mut out = RatT {
            num: tp_trim(num_qx),
            den: den_q,
        };
        out.reduce()?;
        Ok(out)
    }

    /// The zero function.
    pub fn zero() -> RatT {
        RatT {
            num: Vec::new(),
            den: Vec::new(),
        }
    }

    /// A constant.
    pub fn from_scalar(c: &Scalar) -> Result<RatT> {
        RatT::new(vec![c.clone()], Vec::new())
    }

    /// The coordinate `t`.
    pub fn t() -> RatT {
        RatT {
            num: vec![Scalar::zero(Ring::Qx), Scalar::one(Ring::Qx)],
            den: Vec::new(),
        }
    }

    /// `t^k` for `k ≥ 0`, or `t^k = 1/(t−0)^{−k}` for `k < 0`.
    pub fn t_pow(k: i64) -> RatT {
        if k >= 0 {
            let mut num = vec![Scalar::zero(Ring::Qx); k as usize + 1];
            num[k as usize] = Scalar::one(Ring::Qx);
            RatT {
                num,
                den: Vec::new(),
            }
        } else {
            RatT {
                num: vec![Scalar::one(Ring::Qx)],
                den: vec![(Scalar::zero(Ring::Q), (-k) as usize)],
            }
        }
    }

    /// `1/(t − p)^m` at a rational point `p`.
    pub fn pole(p: &Scalar, m: usize) -> Result<RatT> {
        RatT::new(vec![Scalar::one(Ring::Qx)], vec![(p.clone(), m)])
    }

    fn den_poly(&self) -> Result<TP> {
        let mut d = vec![Scalar::one(Ring::Qx)];
        for (p, m) in &self.den {
            let lin = vec![p.promote_to(Ring::Qx)?.neg(), Scalar::one(Ring::Qx)];
            for _ in 0..*m {
                d = tp_mul(&d, &lin)?;
            }
        }
        Ok(d)
    }

    fn reduce(&mut self) -> Result<()> {
        if tp_is_zero(&self.num) {
            self.num = Vec::new();
            self.den = Vec::new();
            return Ok(());
        }
        let mut den = core::mem::take(&mut self.den);
        for (p, m) in den.iter_mut() {
            let pq = p.promote_to(Ring::Qx)?;
            while *m > 0 {
                let (q, r) = tp_div_linear(&self.num, &pq)?;
                if !r.is_zero() {
                    break;
                }
                self.num = q;
                *m -= 1;
            }
        }
        den.retain(|(_, m)| *m > 0);
        self.den = den;
        Ok(())
    }

    /// True iff the function is 0.
    pub fn is_zero(&self) -> bool {
        tp_is_zero(&self.num)
    }

    /// Sum.
    pub fn add(&self, other: &RatT) -> Result<RatT> {
        // Common denominator with per-point maximal multiplicities.
        let mut den: Vec<(Scalar, usize)> = self.den.clone();
        for (p, m) in &other.den {
            match den.iter_mut().find(|(q, _)| q == p) {
                Some((_, mm)) => *mm = (*mm).max(*m),
                None => den.push((p.clone(), *m)),
            }
        }
        let lift = |f: &RatT| -> Result<TP> {
            let mut num = f.num.clone();
            for (p, m) in &den {
                let have = f
                    .den
                    .iter()
                    .find(|(q, _)| q == p)
                    .map_or(0, |(_, mm)| *mm);
                let lin = vec![p.promote_to(Ring::Qx)?.neg(), Scalar::one(Ring::Qx)];
                for _ in have..*m {
                    num = tp_mul(&num, &lin)?;
                }
            }
            Ok(num)
        };
        let num = tp_add(&lift(self)?, &lift(other)?)?;
        RatT::new(num, den)
    }

    /// Negation.
    pub fn neg(&self) -> RatT {
        RatT {
            num: tp_neg(&self.num),
            den: self.den.clone(),
        }
    }

    /// Difference.
    pub fn sub(&self, other: &RatT) -> Result<RatT> {
        self.add(&other.neg())
    }

    /// Product.
    pub fn mul(&self, other: &RatT) -> Result<RatT> {
        let num = tp_mul(&self.num, &other.num)?;
        let mut den = self.den.clone();
        for (p, m) in &other.den {
            match den.iter_mut().find(|(q, _)| q == p) {
                Some((_, mm)) => *mm += m,
                None => den.push((p.clone(), *m)),
            }
        }
        RatT::new(num, den)
    }

    /// Scalar multiple.
    pub fn scale(&self, c: &Scalar) -> Result<RatT> {
        RatT::new(tp_scale(&self.num, &c.promote_to(Ring::Qx)?)?, self.den.clone())
    }

    /// Derivative in `t`.
    pub fn d_dt(&self) -> Result<RatT> {
        // (N/D)' = [N'·E − N·Σ mᵢ·E/(t−pᵢ)] / (D·E), E = Π (t−pᵢ).
        let mut e = vec![Scalar::one(Ring::Qx)];
        for (p, _) in &self.den {
            let lin = vec![p.promote_to(Ring::Qx)?.neg(), Scalar::one(Ring::Qx)];
            e = tp_mul(&e, &lin)?;
        }
        let mut correction: TP = Vec::new();
        for (p, m) in &self.den {
            let mut partial = vec![Scalar::from_int(Ring::Qx, *m as i64)];
            for (q, _) in &self.den {
                if q == p {
                    continue;
                }
                let lin = vec![q.promote_to(Ring::Qx)?.neg(), Scalar::one(Ring::Qx)];
                partial = tp_mul(&partial, &lin)?;
            }
            correction = tp_add(&correction, &partial)?;
        }
        let num = tp_add(
            &tp_mul(&tp_ddt(&self.num)?, &e)?,
            &tp_neg(&tp_mul(&self.num, &correction)?),
        )?;
        let mut den = self.den.clone();
        for (_, m) in den.iter_mut() {
            *m += 1;
        }
        RatT::new(num, den)
    }

    /// Derivative in `x` (the denominator is `x`-free).
    pub fn d_dx(&self) -> Result<RatT> {
        RatT::new(tp_ddx(&self.num), self.den.clone())
    }

    /// Value at a point where the denominator does not vanish.
    pub fn eval(&self, at: &Scalar) -> Result<Scalar> {
        let at = at.promote_to(Ring::Qx)?;
        let mut d = Scalar::one(Ring::Qx);
        for (p, m) in &self.den {
            let factor = at.sub(&p.promote_to(Ring::Qx)?)?;
            if factor.is_zero() {
                return Err(Error::DomainViolation(
                    "evaluation at a pole of the function".into(),
                ));
            }
            for _ in 0..*m {
                d = d.mul(&factor)?;
            }
        }
        tp_eval(&self.num, &at)?.mul(&d.inv()?)
    }
}

impl core::fmt::Display for RatT {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        write!(f, "(")?;
        let mut first = true;
        for (k, c) in self.num.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})*t")?,
                _ => write!(f, "({c})*t^{k}")?,
            }
        }
        write!(f, ")")?;
        for (p, m) in &self.den {
            if p.is_zero() {
                write!(f, "/t^{m}")?;
            } else {
                write!(f, "/(t - {p})^{m}")?;
            }
        }
        Ok(())
    }
}

// ---- the family type ---------------------------------------------------

/// A flat connection on the trivial rank-`n` bundle over
/// `U = ℙ¹ ∖ D`, `D = {p₁, …, p_r, ∞}` with rational `pᵢ`, written
/// `∇ = d + A_x·dx + A_t·dt` with entries in `𝒪(U)`.
#[derive(Clone, Debug)]
pub struct GlobalFamily {
    punctures: Vec<Scalar>,
    rank: usize,
    a_t: Vec<Vec<RatT>>,
    a_x: Option<Vec<Vec<RatT>>>,
}

/// A point of the puncture set.
#[derive(Clone, Debug, PartialEq)]
pub enum Place {
    /// A finite rational puncture `t = p`.
    Finite(Scalar),
    /// The point at infinity (local coordinate `s = 1/t`, `dt = −ds/s²`).
    Infinity,
}

impl core::fmt::Display for Place {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Place::Finite(p) => write!(f, "t = {p}"),
            Place::Infinity => f.write_str("t = ∞"),
        }
    }
}

impl GlobalFamily {
    /// Builds and validates a family: distinct rational punctures,
    /// square matrices with denominators supported on the punctures,
    /// and exact flatness `∂_x A_t − ∂_t A_x + [A_x, A_t] = 0` when the
    /// absolute part is present.
    pub fn new(
        punctures: Vec<Scalar>,
        a_t: Vec<Vec<RatT>>,
        a_x: Option<Vec<Vec<RatT>>>,
    ) -> Result<GlobalFamily> {
        for p in &punctures {
            if p.ring() != Ring::Q {
                return Err(Error::NonRationalDivisor(format!(
                    "puncture {p} is not a rational constant"
                )));
            }
        }
        for (i, p) in punctures.iter().enumerate() {
            if punctures[..i].contains(p) {
                return Err(Error::DomainViolation(format!("duplicate puncture {p}")));
            }
        }
        let rank = a_t.len();
        if rank == 0 {
            return Err(Error::DomainViolation("family rank must be ≥ 1".into()));
        }
        let check_shape = |m: &Vec<Vec<RatT>>| -> Result<()> {
            if m.len() != rank || m.iter().any(|r| r.len() != rank) {
                return Err(Error::DomainViolation(format!(
                    "family matrices must be {rank}×{rank}"
                )));
            }
            for row in m {
                for e in row {
                    for (p, _) in &e.den {
                        if !punctures.contains(p) {
                            return Err(Error::DomainViolation(format!(
                                "entry has a pole at t = {p}, outside the puncture set"
                            )));
                        }
                    }
                }
            }
            Ok(())
        };
        check_shape(&a_t)?;
        if let Some(ax) = &a_x {
            check_shape(ax)?;
            // Exact flatness.
            for i in 0..rank {
                for j in 0..rank {
                    let mut flat = a_t[i][j].d_dx()?.sub(&ax[i][j].d_dt()?)?;
                    for k in 0..rank {
                        flat = flat
                            .add(&ax[i][k].mul(&a_t[k][j])?)?
                            .sub(&a_t[i][k].mul(&ax[k][j])?)?;
                    }
                    if !flat.is_zero() {
                        return Err(Error::DomainViolation(format!(
                            "the family is not flat: curvature entry ({i},{j}) is {flat}"
                        )));
                    }
                }
            }
        }
        Ok(GlobalFamily {
            punctures,
            rank,
            a_t,
            a_x,
        })
    }

    /// Rank of the bundle.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The finite punctures (∞ is always part of the divisor).
    pub fn punctures(&self) -> &[Scalar] {
        &self.punctures
    }

    /// The `dt`-part of the connection matrix.
    pub fn a_t(&self) -> &Vec<Vec<RatT>> {
        &self.a_t
    }

    /// The `dx`-part, when the family carries an absolute connection.
    pub fn a_x(&self) -> Option<&Vec<Vec<RatT>>> {
        self.a_x.as_ref()
    }

    /// All places of the divisor, finite punctures first.
    pub fn places(&self) -> Vec<Place> {
        let mut out: Vec<Place> = self
            .punctures
            .iter()
            .map(|p| Place::Finite(p.clone()))
            .collect();
        out.push(Place::Infinity);
        out
    }

    /// Gauge transformation `A ↦ G·A·G⁻¹ − (dG)·G⁻¹` in both parts, for
    /// `G ∈ GL_n(𝒪(U))` supplied together with its inverse (verified).
    pub fn gauge(&self, g: &[Vec<RatT>], g_inv: &[Vec<RatT>]) -> Result<GlobalFamily> {
        let n = self.rank;
        let mul = |a: &[Vec<RatT>], b: &[Vec<RatT>]| -> Result<Vec<Vec<RatT>>> {
            let mut out = vec![vec![RatT::zero(); n]; n];
            for i in 0..n {
                for j in 0..n {
                    for (k, bk) in b.iter().enumerate() {
                        out[i][j] = out[i][j].add(&a[i][k].mul(&bk[j])?)?;
                    }
                }
            }
            Ok(out)
        };
        let id_check = mul(g, g_inv)?;
        for (i, row) in id_check.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let expect = if i == j {
                    RatT::from_scalar(&Scalar::one(Ring::Qx))?
                } else {
                    RatT::zero()
                };
                if !e.sub(&expect)?.is_zero() {
                    return Err(Error::DomainViolation(
                        "the supplied matrices are not mutually inverse".into(),
                    ));
                }
            }
        }
        let transform = |a: &Vec<Vec<RatT>>, d: &dyn Fn(&RatT) -> Result<RatT>| -> Result<Vec<Vec<RatT>>> {
            let gag = mul(&mul(g, a)?, g_inv)?;
            let mut dg = vec![vec![RatT::zero(); n]; n];
            for i in 0..n {
                for j in 0..n {
                    dg[i][j] = d(&g[i][j])?;
                }
            }
            let dgg = mul(&dg, g_inv)?;
            let mut out = vec![vec![RatT::zero(); n]; n];
            for i in 0..n {
                for j in 0..n {
                    out[i][j] = gag[i][j].sub(&dgg[i][j])?;
                }
            }
            Ok(out)
        };
        let a_t = transform(&self.a_t, &|f: &RatT| f.d_dt())?;
        let a_x = match &self.a_x {
            Some(ax) => Some(transform(ax, &|f: &RatT| f.d_dx())?),
            None => None,
        };
        GlobalFamily::new(self.punctures.clone(), a_t, a_x)
    }
}

// ---- local expansions ---------------------------------------------------

/// Laurent expansion of `f` in the local coordinate `τ = t − p`.
fn laurent_at_finite(f: &RatT, p: &Scalar, prec: i64) -> Result<Laurent> {
    if f.is_zero() {
        return Ok(Laurent::zero(Ring::Qx, prec));
    }
    let pq = p.promote_to(Ring::Qx)?;
    let mut pole_order: i64 = 0;
    let mut unit = vec![Scalar::one(Ring::Qx)];
    for (q, m) in &f.den {
        if q == p {
            pole_order = *m as i64;
        } else {
            let lin = vec![q.promote_to(Ring::Qx)?.neg(), Scalar::one(Ring::Qx)];
            for _ in 0..*m {
                unit = tp_mul(&unit, &lin)?;
            }
        }
    }
    let work = prec + pole_order + 2;
    let num_shift = tp_taylor_shift(&f.num, &pq)?;
    let den_shift = tp_taylor_shift(&unit, &pq)?;
    let to_laurent = |p: &TP| -> Laurent {
        let terms: Vec<(i64, Scalar)> = p
            .iter()
            .enumerate()
            .map(|(k, c)| (k as i64, c.clone()))
            .collect();
        Laurent::from_terms(Ring::Qx, &terms, work)
    };
    let series = to_laurent(&num_shift)
        .mul(&to_laurent(&den_shift).inv()?)?
        .shift(-pole_order);
    Ok(series.truncate(prec))
}

/// Laurent expansion of `f(1/s)` in `s` (the coordinate at ∞).
fn laurent_at_infinity(f: &RatT, prec: i64) -> Result<Laurent> {
    if f.is_zero() {
        return Ok(Laurent::zero(Ring::Qx, prec));
    }
    let den = f.den_poly()?;
    let rev = |p: &TP| -> TP { tp_trim(p.iter().rev().cloned().collect()) };
    let num_rev = rev(&f.num);
    let den_rev = rev(&den);
    let val = tp_deg(&den) - tp_deg(&f.num);
    let work = prec + val.abs() + 2;
    let to_laurent = |p: &TP| -> Laurent {
        let terms: Vec<(i64, Scalar)> = p
            .iter()
            .enumerate()
            .map(|(k, c)| (k as i64, c.clone()))
            .collect();
        Laurent::from_terms(Ring::Qx, &terms, work)
    };
    let series = to_laurent(&num_rev)
        .mul(&to_laurent(&den_rev).inv()?)?
        .shift(val);
    Ok(series.truncate(prec))
}

/// Formal local model of the family at a place of `D`: the connection
/// matrices expanded in the local coordinate (`τ = t − p`, or `s = 1/t`
/// at ∞ with `dt = −ds/s²`) to the requested precision.
pub fn local_at(fam: &GlobalFamily, place: &Place, prec: i64) -> Result<Connection> {
    if let Place::Finite(p) = place {
        if !fam.punctures.contains(p) {
            return Err(Error::DomainViolation(format!(
                "t = {p} is not in the puncture set"
            )));
        }
    }
    let expand_matrix = |m: &Vec<Vec<RatT>>, twist: bool| -> Result<Vec<Vec<Laurent>>> {
        let mut out = Vec::with_capacity(fam.rank);
        for row in m {
            let mut orow = Vec::with_capacity(fam.rank);
            for e in row {
                let series = match place {
                    Place::Finite(p) => laurent_at_finite(e, p, prec)?,
                    Place::Infinity => {
                        let base = laurent_at_infinity(e, prec + 2)?;
                        if twist {
                            // dt = −ds/s².
                            base.shift(-2).neg().truncate(prec)
                        } else {
                            base.truncate(prec)
                        }
                    }
                };
                orow.push(series);
            }
            out.push(orow);
        }
        Ok(out)
    };
    let a_t = expand_matrix(&fam.a_t, true)?;
    let a_x = match &fam.a_x {
        Some(ax) => Some(expand_matrix(ax, false)?),
        None => None,
    };
    Connection::new(a_t, a_x)
}

// ---- the truncated de Rham solve ----------------------------------------

/// One slot of the monomial/partial-fraction basis of `𝒪(U)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Cell {
    /// `t^k`, `k ≥ 0`.
    Deg(i64),
    /// `(t − p_i)^{−j}`, `j ≥ 1`, indexed by puncture.
    Pole(usize, i64),
}

impl Cell {
    fn depth(&self) -> i64 {
        match self {
            Cell::Deg(k) => *k,
            Cell::Pole(_, j) => *j,
        }
    }
}

/// Index bookkeeping for the truncated basis of `𝒪(U)ⁿ`.
struct Grid {
    rank: usize,
    n_poles: usize,
    bound: i64,
    cells_per_comp: usize,
}

impl Grid {
    fn new(rank: usize, n_poles: usize, bound: i64) -> Grid {
        Grid {
            rank,
            n_poles,
            bound,
            cells_per_comp: (bound + 1) as usize + n_poles * bound as usize,
        }
    }

    fn rows(&self) -> usize {
        self.rank * self.cells_per_comp
    }

    fn index(&self, comp: usize, cell: Cell) -> usize {
        let c = match cell {
            Cell::Deg(k) => k as usize,
            Cell::Pole(i, j) => (self.bound + 1) as usize + i * self.bound as usize + (j - 1) as usize,
        };
        comp * self.cells_per_comp + c
    }

    fn cell_at(&self, index: usize) -> (usize, Cell) {
        let comp = index / self.cells_per_comp;
        let c = index % self.cells_per_comp;
        let cell = if c <= self.bound as usize {
            Cell::Deg(c as i64)
        } else {
            let rest = c - (self.bound + 1) as usize;
            let i = rest / self.bound as usize;
            let j = rest % self.bound as usize;
            Cell::Pole(i, j as i64 + 1)
        };
        (comp, cell)
    }

    fn in_bounds(&self, cell: Cell) -> bool {
        match cell {
            Cell::Deg(k) => k >= 0 && k <= self.bound,
            Cell::Pole(i, j) => i < self.n_poles && j >= 1 && j <= self.bound,
        }
    }

    /// The basis function of a cell.
    fn function(&self, fam: &GlobalFamily, cell: Cell) -> Result<RatT> {
        match cell {
            Cell::Deg(k) => Ok(RatT::t_pow(k)),
            Cell::Pole(i, j) => RatT::pole(&fam.punctures[i], j as usize),
        }
    }
}

/// Sparse coordinates of `f` over the cell basis: polynomial part plus
/// principal parts at every puncture.  Errors if `f` exceeds the grid.
fn coordinates(fam: &GlobalFamily, grid: &Grid, f: &RatT) -> Result<Vec<(Cell, Scalar)>> {
    if f.is_zero() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let den = f.den_poly()?;
    let (poly_part, rem) = tp_divrem_monic(&f.num, &den)?;
    for (k, c) in poly_part.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let cell = Cell::Deg(k as i64);
        if !grid.in_bounds(cell) {
            return Err(Error::StabilizationFailed(format!(
                "degree {k} exceeds the truncation bound {}",
                grid.bound
            )));
        }
        out.push((cell, c.clone()));
    }
    // Principal parts of the proper fraction rem/den at each pole.
    let proper = RatT {
        num: rem,
        den: f.den.clone(),
    };
    for (p, m) in &f.den {
        let i = fam
            .punctures
            .iter()
            .position(|q| q == p)
            .ok_or_else(|| Error::DomainViolation(format!("pole at t = {p} outside the divisor")))?;
        let expansion = laurent_at_finite(&proper, p, 0)?;
        for j in 1..=(*m as i64) {
            let c = expansion.coeff(-j);
            if c.is_zero() {
                continue;
            }
            let cell = Cell::Pole(i, j);
            if !grid.in_bounds(cell) {
                return Err(Error::StabilizationFailed(format!(
                    "pole order {j} at t = {p} exceeds the truncation bound {}",
                    grid.bound
                )));
            }
            out.push((cell, c));
        }
    }
    Ok(out)
}

/// Column-echelon accumulator with deepest-first pivots and kernel
/// tracking; columns are kept mutually reduced, so one elimination
/// pass per vector suffices.
struct Echelon {
    rows: usize,
    depth: Vec<i64>,
    /// pivot row → (column normalized to 1 at the pivot, domain combo).
    cols: BTreeMap<usize, (Vec<Scalar>, Vec<Scalar>)>,
}

impl Echelon {
    fn new(rows: usize, depth: Vec<i64>) -> Echelon {
        Echelon {
            rows,
            depth,
            cols: BTreeMap::new(),
        }
    }

    fn reduce(&self, v: &mut [Scalar], combo: &mut Vec<Scalar>) -> Result<()> {
        for (r, (col, ccombo)) in &self.cols {
            let c = v[*r].clone();
            if c.is_zero() {
                continue;
            }
            for i in 0..self.rows {
                if !col[i].is_zero() {
                    v[i] = v[i].sub(&c.mul(&col[i])?)?;
                }
            }
            for (i, e) in ccombo.iter().enumerate() {
                if !e.is_zero() {
                    combo[i] = combo[i].sub(&c.mul(e)?)?;
                }
            }
        }
        Ok(())
    }

    /// Inserts a column; returns the pivot row, or `None` when the
    /// column is dependent (its combo is then a kernel vector).
    fn insert(&mut self, mut v: Vec<Scalar>, mut combo: Vec<Scalar>) -> Result<Option<usize>> {
        self.reduce(&mut v, &mut combo)?;
        let pivot = (0..self.rows)
            .filter(|&i| !v[i].is_zero())
            .max_by_key(|&i| (self.depth[i], i));
        let Some(p) = pivot else {
            return Ok(None);
        };
        let inv = v[p].inv()?;
        for e in v.iter_mut() {
            if !e.is_zero() {
                *e = e.mul(&inv)?;
            }
        }
        for e in combo.iter_mut() {
            if !e.is_zero() {
                *e = e.mul(&inv)?;
            }
        }
        // Keep existing columns clear of the new pivot row.
        for (_, (col, ccombo)) in self.cols.iter_mut() {
            let c = col[p].clone();
            if c.is_zero() {
                continue;
            }
            for i in 0..v.len() {
                if !v[i].is_zero() {
                    col[i] = col[i].sub(&c.mul(&v[i])?)?;
                }
            }
            for (i, e) in combo.iter().enumerate() {
                if !e.is_zero() {
                    ccombo[i] = ccombo[i].sub(&c.mul(e)?)?;
                }
            }
        }
        self.cols.insert(p, (v, combo));
        Ok(Some(p))
    }
}

/// One truncated solve of `∇_t : 𝒪(U)ⁿ → Ω¹(U)ⁿ` at pole bound `b`.
struct Analysis {
    grid: Grid,
    echelon: Echelon,
    domain: Vec<(usize, Cell)>,
    kernel: Vec<Vec<Scalar>>,
    rep_rows: Vec<usize>,
    bound: i64,
}

/// Pole/degree growth of multiplication by the connection matrices.
fn growth(fam: &GlobalFamily) -> i64 {
    let mut kappa = 1i64;
    let mut scan = |m: &Vec<Vec<RatT>>| {
        for row in m {
            for e in row {
                for (_, mult) in &e.den {
                    kappa = kappa.max(*mult as i64 + 1);
                }
                let den_deg: i64 = e.den.iter().map(|(_, m)| *m as i64).sum();
                kappa = kappa.max(tp_deg(&e.num) - den_deg + 1);
            }
        }
    };
    scan(&fam.a_t);
    if let Some(ax) = &fam.a_x {
        scan(ax);
    }
    kappa
}

fn analyze(fam: &GlobalFamily, bound: i64) -> Result<Analysis> {
    let kappa = growth(fam);
    let low_window = bound / 2;
    if low_window <= kappa + 2 {
        return Err(Error::DomainViolation(format!(
            "family pole data (growth {kappa}) is too steep for the truncation bound {bound}"
        )));
    }
    let n = fam.rank;
    let n_poles = fam.punctures.len();
    let grid = Grid::new(n, n_poles, bound + kappa);
    let rows = grid.rows();
    let depth: Vec<i64> = (0..rows).map(|i| grid.cell_at(i).1.depth()).collect();

    // Domain cells: depth ≤ bound.
    let mut domain: Vec<(usize, Cell)> = Vec::new();
    for comp in 0..n {
        for k in 0..=bound {
            domain.push((comp, Cell::Deg(k)));
        }
        for i in 0..n_poles {
            for j in 1..=bound {
                domain.push((comp, Cell::Pole(i, j)));
            }
        }
    }

    let mut echelon = Echelon::new(rows, depth);
    let mut kernel: Vec<Vec<Scalar>> = Vec::new();
    for (col_idx, (comp, cell)) in domain.iter().enumerate() {
        // ∇_t of the basis vector f·e_comp: f'·e_comp + A_t·(f·e_comp).
        let f = grid.function(fam, *cell)?;
        let mut image: Vec<RatT> = vec![RatT::zero(); n];
        image[*comp] = f.d_dt()?;
        for i in 0..n {
            image[i] = image[i].add(&fam.a_t[i][*comp].mul(&f)?)?;
        }
        let mut v = vec![Scalar::zero(Ring::Qx); rows];
        for (i, entry) in image.iter().enumerate() {
            for (c, s) in coordinates(fam, &grid, entry)? {
                let r = grid.index(i, c);
                v[r] = v[r].add(&s)?;
            }
        }
        let mut combo = vec![Scalar::zero(Ring::Qx); domain.len()];
        combo[col_idx] = Scalar::one(Ring::Qx);
        if echelon.insert(v.clone(), combo.clone())?.is_none() {
            // Dependent column: re-reduce to recover the kernel
            // combination (the insert discards its working copy).
            echelon.reduce(&mut v, &mut combo)?;
            kernel.push(combo);
        }
    }

    // Classify non-pivot rows: low-window rows are H¹ representatives,
    // rows hugging the truncation boundary are artifacts, anything in
    // between means the computation did not stabilize.
    let mut rep_rows = Vec::new();
    for r in 0..rows {
        if echelon.cols.contains_key(&r) {
            continue;
        }
        let d = grid.cell_at(r).1.depth();
        if d <= low_window {
            rep_rows.push(r);
        } else if d <= bound - kappa {
            return Err(Error::StabilizationFailed(format!(
                "an unreduced class at depth {d} sits between the certified window {low_window} \
                 and the truncation boundary; raise the pole bound"
            )));
        }
    }
    Ok(Analysis {
        grid,
        echelon,
        domain,
        kernel,
        rep_rows,
        bound,
    })
}

impl Analysis {
    fn rep_descriptor(&self) -> Vec<(usize, Cell)> {
        self.rep_rows.iter().map(|&r| self.grid.cell_at(r)).collect()
    }

    /// Reduces an `n`-vector of functions mod the image; the result is
    /// supported on the representative rows.
    fn reduce_vector(&self, fam: &GlobalFamily, v: &[RatT]) -> Result<Vec<Scalar>> {
        let rows = self.grid.rows();
        let mut coords = vec![Scalar::zero(Ring::Qx); rows];
        for (i, entry) in v.iter().enumerate() {
            for (c, s) in coordinates(fam, &self.grid, entry)? {
                let r = self.grid.index(i, c);
                coords[r] = coords[r].add(&s)?;
            }
        }
        let mut combo = vec![Scalar::zero(Ring::Qx); self.domain.len()];
        self.echelon.reduce(&mut coords, &mut combo)?;
        for (r, c) in coords.iter().enumerate() {
            if !c.is_zero() && !self.rep_rows.contains(&r) {
                return Err(Error::StabilizationFailed(format!(
                    "a reduction escaped the certified window at depth {}",
                    self.grid.cell_at(r).1.depth()
                )));
            }
        }
        Ok(coords)
    }

    /// The flat sections as vectors of rational functions.
    fn kernel_sections(&self, fam: &GlobalFamily) -> Result<Vec<Vec<RatT>>> {
        let mut out = Vec::with_capacity(self.kernel.len());
        for combo in &self.kernel {
            let mut section = vec![RatT::zero(); self.grid.rank];
            for (idx, c) in combo.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let (comp, cell) = self.domain[idx];
                let f = self.grid.function(fam, cell)?.scale(c)?;
                section[comp] = section[comp].add(&f)?;
            }
            out.push(section);
        }
        Ok(out)
    }

    /// Trace of the Gauß–Manin action of `∂_x` on `H¹` minus its trace
    /// on `H⁰`.
    fn gm_trace(&self, fam: &GlobalFamily) -> Result<Scalar> {
        let needs_absolute = !self.rep_rows.is_empty() || !self.kernel.is_empty();
        if needs_absolute && fam.a_x.is_none() {
            return Err(Error::DomainViolation(
                "the family carries no absolute (dx) part, but its cohomology is nonzero".into(),
            ));
        }
        let mut trace = Scalar::zero(Ring::Qx);
        // H¹ side: lift a representative form f·e_comp·dt, apply
        // ∂_x + A_x to the coefficient, reduce, read the diagonal.
        for &r in &self.rep_rows {
            let (comp, cell) = self.grid.cell_at(r);
            let f = self.grid.function(fam, cell)?;
            let mut gm: Vec<RatT> = vec![RatT::zero(); self.grid.rank];
            gm[comp] = f.d_dx()?;
            if let Some(ax) = &fam.a_x {
                for i in 0..self.grid.rank {
                    gm[i] = gm[i].add(&ax[i][comp].mul(&f)?)?;
                }
            }
            let reduced = self.reduce_vector(fam, &gm)?;
            trace = trace.add(&reduced[r])?;
        }
        // H⁰ side: the Gauß–Manin image of a flat section is flat, so
        // it must be an exact combination of the kernel basis.
        if !self.kernel.is_empty() {
            let sections = self.kernel_sections(fam)?;
            let rows = self.grid.rows();
            let depth: Vec<i64> = (0..rows).map(|i| self.grid.cell_at(i).1.depth()).collect();
            let mut basis = Echelon::new(rows, depth);
            let dim = sections.len();
            for (j, s) in sections.iter().enumerate() {
                let mut coords = vec![Scalar::zero(Ring::Qx); rows];
                for (i, entry) in s.iter().enumerate() {
                    for (c, sc) in coordinates(fam, &self.grid, entry)? {
                        let r = self.grid.index(i, c);
                        coords[r] = coords[r].add(&sc)?;
                    }
                }
                let mut combo = vec![Scalar::zero(Ring::Qx); dim];
                combo[j] = Scalar::one(Ring::Qx);
                if basis.insert(coords, combo)?.is_none() {
                    return Err(Error::StabilizationFailed(
                        "the flat-section basis is degenerate".into(),
                    ));
                }
            }
            for (j, s) in sections.iter().enumerate() {
                let mut gm: Vec<RatT> = vec![RatT::zero(); self.grid.rank];
                for i in 0..self.grid.rank {
                    gm[i] = s[i].d_dx()?;
                    if let Some(ax) = &fam.a_x {
                        for (k, sk) in s.iter().enumerate() {
                            gm[i] = gm[i].add(&ax[i][k].mul(sk)?)?;
                        }
                    }
                }
                let mut coords = vec![Scalar::zero(Ring::Qx); rows];
                for (i, entry) in gm.iter().enumerate() {
                    for (c, sc) in coordinates(fam, &self.grid, entry)? {
                        let r = self.grid.index(i, c);
                        coords[r] = coords[r].add(&sc)?;
                    }
                }
                let mut combo = vec![Scalar::zero(Ring::Qx); dim];
                basis.reduce(&mut coords, &mut combo)?;
                if coords.iter().any(|c| !c.is_zero()) {
                    return Err(Error::StabilizationFailed(
                        "the Gauß–Manin image of a flat section left the computed H⁰".into(),
                    ));
                }
                // combo holds −coordinates of gm(s_j) over the basis.
                trace = trace.sub(&combo[j].neg())?;
            }
        }
        Ok(trace)
    }
}

/// Runs the truncated solve at the default bound and at `bound + 4`,
/// requiring identical dimensions and identical representative slots.
fn analyzed_pair(fam: &GlobalFamily) -> Result<(Analysis, Analysis)> {
    let b = DEFAULT_POLE_BOUND.max(4 * (growth(fam) + 2));
    let run1 = analyze(fam, b)?;
    let run2 = analyze(fam, b + 4)?;
    if run1.kernel.len() != run2.kernel.len() {
        return Err(Error::StabilizationFailed(format!(
            "dim H⁰ moved from {} to {} between bounds {} and {}",
            run1.kernel.len(),
            run2.kernel.len(),
            run1.bound,
            run2.bound
        )));
    }
    if run1.rep_descriptor() != run2.rep_descriptor() {
        return Err(Error::StabilizationFailed(format!(
            "the H¹ representatives moved between bounds {} and {}",
            run1.bound, run2.bound
        )));
    }
    Ok((run1, run2))
}

// ---- public reports ------------------------------------------------------

/// Dimensions and explicit bases of the relative de Rham cohomology of
/// a family.
#[derive(Clone, Debug)]
pub struct CohomologySummary {
    /// `dim_K H⁰` — the space of flat sections.
    pub dim_h0: usize,
    /// `dim_K H¹`.
    pub dim_h1: usize,
    /// Basis of flat sections, as vectors of rational functions.
    pub h0_basis: Vec<Vec<RatT>>,
    /// Representatives of `H¹`, as vectors of rational functions `f`
    /// standing for the classes `[f·dt]`.
    pub h1_reps: Vec<Vec<RatT>>,
    /// Pole-order bound at which the solve stabilized.
    pub bound_used: i64,
}

/// Computes `H⁰` and `H¹` of `∇_t : 𝒪(U)ⁿ → Ω¹(U)ⁿ` by exact
/// degree-truncated linear algebra, verified stable under raising the
/// pole-order bound by 4.  Errors with [`Error::StabilizationFailed`]
/// when the two runs disagree or a class sits outside the certified
/// window.
pub fn derham(fam: &GlobalFamily) -> Result<CohomologySummary> {
    let (run1, _run2) = analyzed_pair(fam)?;
    let h0_basis = run1.kernel_sections(fam)?;
    let mut h1_reps = Vec::with_capacity(run1.rep_rows.len());
    for (comp, cell) in run1.rep_descriptor() {
        let mut rep = vec![RatT::zero(); fam.rank];
        rep[comp] = run1.grid.function(fam, cell)?;
        h1_reps.push(rep);
    }
    Ok(CohomologySummary {
        dim_h0: run1.kernel.len(),
        dim_h1: run1.rep_rows.len(),
        h0_basis,
        h1_reps,
        bound_used: run1.bound,
    })
}

/// Euler–Poincaré cross-check data for a family: returns
/// `(dim H¹ − dim H⁰, Σ_p irregularity_p + n·(deg D − 2))`, which must
/// agree for a correct truncated solve on `ℙ¹`.
pub fn euler_poincare_check(fam: &GlobalFamily, summary: &CohomologySummary) -> Result<(i64, i64)> {
    let observed = summary.dim_h1 as i64 - summary.dim_h0 as i64;
    let mut irr_sum = 0i64;
    for place in fam.places() {
        let local = local_at(fam, &place, crate::DEFAULT_PREC)?;
        irr_sum += connect::irregularity(&local)?;
    }
    let deg_d = fam.punctures.len() as i64 + 1;
    let predicted = irr_sum + (fam.rank as i64) * (deg_d - 2);
    Ok((observed, predicted))
}

/// Connection form of the Gauß–Manin determinant line
/// `⊗ᵢ (det Hⁱ)^{(−1)^{i+1}}` in the bases chosen by [`derham`]:
/// `Tr(GM | H¹)·dx − Tr(GM | H⁰)·dx`, where `GM` is the action of
/// `∂_x` through the absolute connection.  The trace is re-computed at
/// the enlarged bound and must agree.
pub fn gm_det_class(fam: &GlobalFamily) -> Result<KForm> {
    let (run1, run2) = analyzed_pair(fam)?;
    let t1 = run1.gm_trace(fam)?;
    let t2 = run2.gm_trace(fam)?;
    if !t1.sub(&t2)?.is_zero() {
        return Err(Error::StabilizationFailed(format!(
            "the Gauß–Manin trace moved between bounds {} and {}",
            run1.bound, run2.bound
        )));
    }
    Ok(KForm::new(t1))
}

/// One local contribution to the product-formula comparison.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    /// Where the contribution lives.
    pub place: Place,
    /// Which lattice shape evaluated it.
    pub branch: Branch,
    /// The local ε-class.
    pub class: EpsilonClass,
}

/// The outcome of the local–global comparison.
#[derive(Clone, Debug)]
pub struct ProductFormulaReport {
    /// Per-place ε-classes of the formal local models.
    pub local_terms: Vec<LocalTerm>,
    /// Sum of the local ε-forms.
    pub lhs: KForm,
    /// The Gauß–Manin determinant class.
    pub rhs: KForm,
    /// `lhs − rhs`.
    pub difference: KForm,
    /// Whether the difference is `dlog` of a unit of `ℚ(x)` — the
    /// comparison is asserted modulo `dlog K^×`.
    pub is_dlog: bool,
    /// A witness `w` with `dlog w = difference`, when one exists.
    pub witness: Option<Scalar>,
    /// Σ of the local ε-degrees.
    pub local_degree_sum: i64,
    /// `dim H⁰` of the family.
    pub dim_h0: usize,
    /// `dim H¹` of the family.
    pub dim_h1: usize,
    /// Whether `local_degree_sum = dim H¹ − dim H⁰`.
    pub degrees_match: bool,
    /// `is_dlog ∧ degrees_match`.
    pub pass: bool,
}

/// Writes `ν = w·dt` as constant × Π (t−pᵢ)^{eᵢ}; errors unless the
/// divisor of `w` is supported on the punctures.
fn validate_generator(fam: &GlobalFamily, nu: &RatT) -> Result<()> {
    if nu.is_zero() {
        return Err(Error::DomainViolation("ν must be a nonzero form".into()));
    }
    let mut rest = nu.num.clone();
    for p in &fam.punctures {
        let pq = p.promote_to(Ring::Qx)?;
        loop {
            let (q, r) = tp_div_linear(&rest, &pq)?;
            if r.is_zero() && !tp_is_zero(&q) {
                rest = q;
            } else {
                break;
            }
        }
    }
    if tp_deg(&rest) > 0 {
        return Err(Error::DomainViolation(
            "ν must generate ω(U): its divisor must be supported on the punctures".into(),
        ));
    }
    for (p, _) in &nu.den {
        if !fam.punctures.contains(p) {
            return Err(Error::DomainViolation(format!(
                "ν has a pole at t = {p}, outside the puncture set"
            )));
        }
    }
    Ok(())
}

/// Expansion of the coefficient of `ν = w·dt` in the local coordinate
/// at a place, as the coefficient of the local `dt` (resp. `ds`).
fn nu_series_at(nu: &RatT, place: &Place, prec: i64) -> Result<Laurent> {
    match place {
        Place::Finite(p) => laurent_at_finite(nu, p, prec),
        Place::Infinity => Ok(laurent_at_infinity(nu, prec + 2)?
            .shift(-2)
            .neg()
            .truncate(prec)),
    }
}

/// Compares the sum of the local ε-classes of a family against the
/// global Gauß–Manin determinant class, for a global form `ν = w·dt`
/// whose divisor is supported on the punctures.
///
/// The report records every local term, both sides, their difference,
/// the `dlog ℚ(x)^×` test with witness, and the degree bookkeeping
/// `Σ_p deg ε_p = dim H¹ − dim H⁰`.  Local models that fit neither
/// ε-class branch surface as [`Error::UnsupportedLocalType`].
pub fn product_formula_check(
    fam: &GlobalFamily,
    nu: &RatT,
    prec: i64,
) -> Result<ProductFormulaReport> {
    validate_generator(fam, nu)?;
    let (run1, run2) = analyzed_pair(fam)?;
    let t1 = run1.gm_trace(fam)?;
    let t2 = run2.gm_trace(fam)?;
    if !t1.sub(&t2)?.is_zero() {
        return Err(Error::StabilizationFailed(format!(
            "the Gauß–Manin trace moved between bounds {} and {}",
            run1.bound, run2.bound
        )));
    }
    let rhs = KForm::new(t1);

    let mut local_terms = Vec::new();
    let mut lhs = KForm::zero(Ring::Qx);
    let mut local_degree_sum = 0i64;
    for place in fam.places() {
        let local = local_at(fam, &place, prec)?;
        let series = nu_series_at(nu, &place, prec)?;
        let choice = NuChoice::from_series(&series)?;
        let (branch, class) = match epsilon::eps_class(&local, &choice) {
            Ok(bc) => bc,
            Err(Error::NotRegularSingularInBasis(msg)) | Err(Error::NotAdmissible(msg)) => {
                return Err(Error::UnsupportedLocalType(format!(
                    "the local model at {place} fits no ε-class branch: {msg}"
                )));
            }
            Err(e) => return Err(e),
        };
        lhs = lhs.add(&class.form)?;
        local_degree_sum += class.degree;
        local_terms.push(LocalTerm {
            place,
            branch,
            class,
        });
    }

    let difference = lhs.sub(&rhs)?;
    let (is_dlog, witness) = dlog_class_test(&difference)?;
    let dim_h0 = run1.kernel.len();
    let dim_h1 = run1.rep_rows.len();
    let degrees_match = local_degree_sum == dim_h1 as i64 - dim_h0 as i64;
    Ok(ProductFormulaReport {
        local_terms,
        lhs,
        rhs,
        difference,
        is_dlog,
        witness,
        local_degree_sum,
        dim_h0,
        dim_h1,
        degrees_match,
        pass: is_dlog && degrees_match,
    })
}
