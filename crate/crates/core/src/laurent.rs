//! Truncated Laurent series `R((t))` with explicit precision tracking.
//!
//! A [`Laurent`] value knows its coefficients for every exponent below its
//! precision bound `N` and *nothing* beyond; every operation propagates the
//! largest precision it can honestly claim, and operations that would need
//! unknown coefficients fail loudly with [`Error::PrecisionExhausted`]
//! instead of guessing.  Coefficients live in the scalar tower of
//! [`crate::scalars`], so series over `ℚ[ε]/(ε^N)` carry nilpotent
//! directions through all of the multiplicative structure (valuation is
//! computed modulo nilpotents, negative-exponent tails must be nilpotent,
//! and the unit-group decomposition `f = t^d · r · f₊ · f₋` is exact).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::scalars::{Ring, Scalar};

/// Truncated Laurent series: coefficients for exponents `v0 .. prec−1`
/// are stored (the one at `v0` nonzero unless the series is zero), all
/// exponents below `v0` are known to vanish, and exponents `≥ prec` are
/// unknown.
#[derive(Clone, PartialEq, Eq)]
pub struct Laurent {
    ring: Ring,
    /// Lowest stored exponent; equals `prec` for the zero series.
    v0: i64,
    /// Coefficients for exponents `v0 .. prec−1` (length `prec − v0`).
    coeffs: Vec<Scalar>,
    /// Exponents `< prec` are known.
    prec: i64,
}

impl Laurent {
    /// The zero series, known to the given precision.
    pub fn zero(ring: Ring, prec: i64) -> Laurent {
        Laurent {
            ring,
            v0: prec,
            coeffs: Vec::new(),
            prec,
        }
    }

    /// The constant series 1.
    pub fn one(ring: Ring, prec: i64) -> Laurent {
        Laurent::monomial(ring, Scalar::one(ring), 0, prec)
    }

    /// The coordinate `t`.
    pub fn t(ring: Ring, prec: i64) -> Laurent {
        Laurent::monomial(ring, Scalar::one(ring), 1, prec)
    }

    /// The single term `c · t^k`.
    pub fn monomial(ring: Ring, c: Scalar, k: i64, prec: i64) -> Laurent {
        Laurent::from_terms(ring, &[(k, c)], prec)
    }

    /// A constant series.
    pub fn from_scalar(ring: Ring, c: Scalar, prec: i64) -> Laurent {
        Laurent::monomial(ring, c, 0, prec)
    }

    /// Builds a series from `(exponent, coefficient)` terms; terms at or
    /// above `prec` are rejected by assertion (they would be claims about
    /// unknown coefficients).
    pub fn from_terms(ring: Ring, terms: &[(i64, Scalar)], prec: i64) -> Laurent {
        let mut v0 = prec;
        for (k, c) in terms {
            assert!(*k < prec, "term exponent {k} at or above precision {prec}");
            if !c.is_zero() {
                v0 = v0.min(*k);
            }
        }
        if v0 == prec {
            return Laurent::zero(ring, prec);
        }
        let mut coeffs = vec![Scalar::zero(ring); (prec - v0) as usize];
        for (k, c) in terms {
            if c.is_zero() {
                continue;
            }
            let idx = (*k - v0) as usize;
            let promoted = c
                .promote_to(ring)
                .expect("term coefficient must embed into the series ring");
            coeffs[idx] = coeffs[idx].add(&promoted).expect("same ring");
        }
        Laurent::normalized(ring, v0, coeffs, prec)
    }

    /// Builds from a dense coefficient list starting at exponent `v0`;
    /// exponents from `v0 + coeffs.len()` up to `prec` are taken as known
    /// zeros.
    pub fn from_coeff_range(ring: Ring, v0: i64, coeffs: Vec<Scalar>, prec: i64) -> Laurent {
        assert!(
            v0 + coeffs.len() as i64 <= prec,
            "coefficient list extends past the precision bound"
        );
        let mut full = coeffs;
        for c in &mut full {
            *c = c
                .promote_to(ring)
                .expect("coefficient must embed into the series ring");
        }
        full.resize((prec - v0) as usize, Scalar::zero(ring));
        Laurent::normalized(ring, v0, full, prec)
    }

    fn normalized(ring: Ring, mut v0: i64, mut coeffs: Vec<Scalar>, prec: i64) -> Laurent {
        debug_assert_eq!(coeffs.len() as i64, prec - v0);
        let lead = coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead == coeffs.len() {
            return Laurent::zero(ring, prec);
        }
        if lead > 0 {
            coeffs.drain(..lead);
            v0 += lead as i64;
        }
        Laurent {
            ring,
            v0,
            coeffs,
            prec,
        }
    }

    /// Ring of the coefficients.
    pub fn ring(&self) -> Ring {
        self.ring
    }

    /// Precision bound: coefficients of `t^k` are known exactly for `k < prec`.
    pub fn prec(&self) -> i64 {
        self.prec
    }

    /// Lowest exponent carrying a nonzero coefficient (`prec` for the zero
    /// series).  The coefficient there may be nilpotent; see [`Laurent::val`].
    pub fn low_exp(&self) -> i64 {
        self.v0
    }

    /// True iff every known coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of `t^k`.  Panics if `k ≥ prec` — asking for unknown
    /// coefficients is a programming error; operations that may legitimately
    /// run out of window return [`Error::PrecisionExhausted`] instead.
    pub fn coeff(&self, k: i64) -> Scalar {
        assert!(
            k < self.prec,
            "coefficient of t^{k} requested but precision is {}",
            self.prec
        );
        if k < self.v0 {
            Scalar::zero(self.ring)
        } else {
            self.coeffs[(k - self.v0) as usize].clone()
        }
    }

    /// All nonzero known terms, low exponent first.
    pub fn terms(&self) -> Vec<(i64, Scalar)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (self.v0 + i as i64, c.clone()))
            .collect()
    }

    /// Re-embeds all coefficients in a larger ring of the tower.
    pub fn promote_to(&self, ring: Ring) -> Result<Laurent> {
        if ring == self.ring {
            return Ok(self.clone());
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| c.promote_to(ring))
            .collect::<Result<Vec<_>>>()?;
        Ok(Laurent {
            ring,
            v0: if self.is_zero() { self.prec } else { self.v0 },
            coeffs,
            prec: self.prec,
        })
    }

    fn joined(&self, other: &Laurent) -> Result<(Laurent, Laurent, Ring)> {
        let ring = self.ring.join(other.ring)?;
        Ok((self.promote_to(ring)?, other.promote_to(ring)?, ring))
    }

    /// Drops knowledge above `new_prec` (which must not exceed the current
    /// bound — precision can only shrink).
    pub fn truncate(&self, new_prec: i64) -> Laurent {
        assert!(new_prec <= self.prec, "cannot extend precision by fiat");
        if new_prec <= self.v0 {
            return Laurent::zero(self.ring, new_prec);
        }
        let keep = (new_prec - self.v0) as usize;
        Laurent::normalized(
            self.ring,
            self.v0,
            self.coeffs[..keep].to_vec(),
            new_prec,
        )
    }

    /// Multiplies by `t^k` (an exact operation shifting the window).
    pub fn shift(&self, k: i64) -> Laurent {
        Laurent {
            ring: self.ring,
            v0: self.v0 + k,
            coeffs: self.coeffs.clone(),
            prec: self.prec + k,
        }
    }

    /// Sum; precision is the minimum of the operands'.
    pub fn add(&self, other: &Laurent) -> Result<Laurent> {
        let (a, b, ring) = self.joined(other)?;
        let prec = a.prec.min(b.prec);
        let v0 = a.v0.min(b.v0).min(prec);
        let mut coeffs = vec![Scalar::zero(ring); (prec - v0) as usize];
        for (src, base) in [(&a, v0), (&b, v0)] {
            for (i, c) in src.coeffs.iter().enumerate() {
                let k = src.v0 + i as i64;
                if k < prec {
                    let idx = (k - base) as usize;
                    coeffs[idx] = coeffs[idx].add(c).expect("same ring");
                }
            }
        }
        Ok(Laurent::normalized(ring, v0, coeffs, prec))
    }

    /// Negation.
    pub fn neg(&self) -> Laurent {
        Laurent {
            ring: self.ring,
            v0: self.v0,
            coeffs: self.coeffs.iter().map(Scalar::neg).collect(),
            prec: self.prec,
        }
    }

    /// Difference.
    pub fn sub(&self, other: &Laurent) -> Result<Laurent> {
        self.add(&other.neg())
    }

    /// Product.  The precision is `min(N₁ + v₂, N₂ + v₁)`: the first unknown
    /// coefficient of either factor, multiplied by the other factor's lowest
    /// term, is where knowledge stops.
    pub fn mul(&self, other: &Laurent) -> Result<Laurent> {
        let (a, b, ring) = self.joined(other)?;
        let prec = (a.prec + b.v0).min(b.prec + a.v0);
        if a.is_zero() || b.is_zero() {
            return Ok(Laurent::zero(ring, prec));
        }
        let v0 = a.v0 + b.v0;
        let mut coeffs = vec![Scalar::zero(ring); (prec - v0).max(0) as usize];
        for (i, ca) in a.coeffs.iter().enumerate() {
            if ca.is_zero() {
                continue;
            }
            let ka = a.v0 + i as i64;
            for (j, cb) in b.coeffs.iter().enumerate() {
                let k = ka + b.v0 + j as i64;
                if k >= prec {
                    break;
                }
                if cb.is_zero() {
                    continue;
                }
                let idx = (k - v0) as usize;
                coeffs[idx] = coeffs[idx]
                    .add(&ca.mul(cb).expect("same ring"))
                    .expect("same ring");
            }
        }
        Ok(Laurent::normalized(ring, v0.min(prec), coeffs, prec))
    }

    /// Multiplies by a series whose support is *exactly* known (a Laurent
    /// polynomial, e.g. a nilpotent tail factor).  Only the polynomial's
    /// lowest exponent costs precision, so this is sharper than [`Laurent::mul`]
    /// for unit-group bookkeeping.
    fn mul_exact_terms(&self, terms: &[(i64, Scalar)]) -> Result<Laurent> {
        let mut ring = self.ring;
        for (_, c) in terms {
            ring = ring.join(c.ring())?;
        }
        let a = self.promote_to(ring)?;
        let nonzero: Vec<(i64, Scalar)> = terms
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (*k, c.promote_to(ring).expect("joined ring")))
            .collect();
        if nonzero.is_empty() {
            // Exact zero multiplicand: the product is exactly zero on the
            // same window.
            return Ok(Laurent::zero(ring, a.prec));
        }
        let pmin = nonzero.iter().map(|(k, _)| *k).min().unwrap();
        let prec = a.prec + pmin;
        if a.is_zero() {
            return Ok(Laurent::zero(ring, prec));
        }
        let v0 = a.v0 + pmin;
        let mut coeffs = vec![Scalar::zero(ring); (prec - v0) as usize];
        for (i, ca) in a.coeffs.iter().enumerate() {
            if ca.is_zero() {
                continue;
            }
            let ka = a.v0 + i as i64;
            for (kp, cp) in &nonzero {
                let k = ka + kp;
                if k >= prec {
                    continue;
                }
                let idx = (k - v0) as usize;
                coeffs[idx] = coeffs[idx]
                    .add(&ca.mul(cp).expect("same ring"))
                    .expect("same ring");
            }
        }
        Ok(Laurent::normalized(ring, v0, coeffs, prec))
    }

    /// Multiplies every coefficient by a scalar.
    pub fn scale(&self, c: &Scalar) -> Result<Laurent> {
        let ring = self.ring.join(c.ring())?;
        let a = self.promote_to(ring)?;
        let c = c.promote_to(ring)?;
        let coeffs = a
            .coeffs
            .iter()
            .map(|v| v.mul(&c).expect("same ring"))
            .collect();
        Ok(Laurent::normalized(ring, a.v0, coeffs, a.prec))
    }

    /// Integer power; negative exponents require a unit base.
    pub fn pow(&self, k: i64) -> Result<Laurent> {
        if k == 0 {
            return Ok(Laurent::one(self.ring, self.prec - self.v0.min(0)));
        }
        let base = if k < 0 { self.inv()? } else { self.clone() };
        let mut acc = base.clone();
        for _ in 1..k.unsigned_abs() {
            acc = acc.mul(&base)?;
        }
        Ok(acc)
    }

    /// Valuation: the lowest exponent whose coefficient has nonzero unit
    /// part.  Nilpotent low-order terms are ignored (valuation is taken
    /// modulo the nilradical), matching the unit-group decomposition.
    pub fn val(&self) -> Result<i64> {
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_unit() {
                return Ok(self.v0 + i as i64);
            }
        }
        Err(Error::PrecisionExhausted(format!(
            "no coefficient with nonzero unit part below precision {}",
            self.prec
        )))
    }

    /// Coefficient of `t⁻¹`; requires the window to cover exponent −1.
    pub fn res_t(&self) -> Result<Scalar> {
        if self.prec < 0 {
            return Err(Error::PrecisionExhausted(format!(
                "residue needs precision ≥ 0, have {}",
                self.prec
            )));
        }
        Ok(self.coeff(-1))
    }

    /// Derivative `∂_t f` (term-wise; the precision drops by one).
    pub fn d_dt(&self) -> Laurent {
        let prec = self.prec - 1;
        if self.is_zero() {
            return Laurent::zero(self.ring, prec);
        }
        let mut terms = Vec::with_capacity(self.coeffs.len());
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = self.v0 + i as i64;
            if k == 0 || c.is_zero() {
                continue;
            }
            terms.push((k - 1, c.mul(&Scalar::from_int(self.ring, k)).expect("same ring")));
        }
        Laurent::from_terms(self.ring, &terms, prec)
    }

    /// Coefficient-wise derivative with respect to the horizontal variable.
    pub fn d_dx(&self) -> Laurent {
        let coeffs: Vec<Scalar> = self
            .coeffs
            .iter()
            .map(|c| {
                c.d_dx()
                    .promote_to(self.ring)
                    .expect("d/dx stays in the ring")
            })
            .collect();
        Laurent::normalized(self.ring, self.v0, coeffs, self.prec)
    }

    /// Logarithmic derivative `(∂_t f)/f`; requires a unit.
    pub fn dlog_t(&self) -> Result<Laurent> {
        self.d_dt().mul(&self.inv()?)
    }

    /// Strictly-negative-exponent part as exact terms (these are fully known
    /// whenever `prec ≥ 0`).
    fn negative_terms(&self) -> Vec<(i64, Scalar)> {
        self.terms().into_iter().filter(|(k, _)| *k < 0).collect()
    }

    /// Splits a unit into canonical factors: `f = t^d · r · f₊ · f₋` with
    /// `d` the valuation, `r` a unit scalar, `f₊ ∈ 1 + t·R[[t]]`, and `f₋`
    /// of the form `1 + (nilpotent)·t⁻¹ + …` with finitely many terms.
    ///
    /// The negative tail is peeled iteratively: with `u₀` the current unit
    /// coefficient at `t⁰` and `ν` the current strictly negative part,
    /// `k = 1 + u₀⁻¹ν` transfers the tail into the `f₋` accumulator; each
    /// round either raises the nilpotency degree of the remaining tail or
    /// shortens it, so the loop terminates.
    pub fn decompose(&self) -> Result<(i64, Scalar, Laurent, Laurent)> {
        let d = self.val()?;
        let mut g = self.shift(-d);
        if g.prec < 1 {
            return Err(Error::PrecisionExhausted(format!(
                "decomposition needs the t^0 coefficient; precision after shift is {}",
                g.prec
            )));
        }
        let fminus_prec = g.prec;
        // f₋ and the running product of peeled inverse factors are finite
        // products of exactly-known unipotent polynomials, so both are
        // accumulated as exact term lists; the (window-costly) division is
        // applied to f once at the end instead of once per round.
        let mut fminus_terms: Vec<(i64, Scalar)> = vec![(0, Scalar::one(self.ring))];
        let mut k_inv_acc: Vec<(i64, Scalar)> = vec![(0, Scalar::one(self.ring))];
        loop {
            let tail = g.negative_terms();
            if tail.is_empty() {
                break;
            }
            if g.prec < 1 {
                return Err(Error::PrecisionExhausted(
                    "window exhausted while peeling the nilpotent tail".into(),
                ));
            }
            for (_, c) in &tail {
                debug_assert!(c.is_nilpotent(), "sub-valuation coefficient must be nilpotent");
            }
            let u0 = g.coeff(0);
            if !u0.is_unit() {
                return Err(Error::NotAUnit(
                    "t^0 coefficient lost its unit part during tail peeling".into(),
                ));
            }
            let u0_inv = u0.inv()?;
            let k_terms: Vec<(i64, Scalar)> = tail
                .iter()
                .map(|(e, c)| (*e, c.mul(&u0_inv).expect("same ring")))
                .collect();
            // k = 1 + u₀⁻¹ν  and  k⁻¹ = Σ (−u₀⁻¹ν)^j, a finite exact sum.
            let mut k = vec![(0, Scalar::one(g.ring))];
            k.extend(k_terms.iter().cloned());
            let k_inv = invert_unipotent_terms(g.ring, &k_terms);
            fminus_terms = mul_term_lists(self.ring, &fminus_terms, &k);
            k_inv_acc = mul_term_lists(self.ring, &k_inv_acc, &k_inv);
            g = g.mul_exact_terms(&k_inv)?;
        }
        let fminus = Laurent::from_terms(self.ring, &fminus_terms, fminus_prec);
        // Nilpotency collapses the accumulated inverse tail, so one exact
        // multiplication is sharper than the iterated ones used above for
        // tail detection.
        let g = self.shift(-d).mul_exact_terms(&k_inv_acc)?;
        if g.prec < 1 {
            return Err(Error::PrecisionExhausted(
                "window exhausted while peeling the nilpotent tail".into(),
            ));
        }
        let r = g.coeff(0);
        if !r.is_unit() {
            return Err(Error::NotAUnit(
                "constant coefficient is not a unit scalar".into(),
            ));
        }
        let fplus = g.scale(&r.inv()?)?;
        Ok((d, r, fplus, fminus))
    }

    /// Multiplicative inverse of a unit, via the canonical decomposition:
    /// `f⁻¹ = t^{−d} · r⁻¹ · f₊⁻¹ · f₋⁻¹`.
    pub fn inv(&self) -> Result<Laurent> {
        let (d, r, fplus, fminus) = self.decompose().map_err(|e| match e {
            Error::PrecisionExhausted(m) => Error::NotAUnit(format!(
                "no unit coefficient within the precision window ({m})"
            )),
            other => other,
        })?;
        // f₊ = 1 + w with w ∈ t·R[[t]]: back-substitute h·f₊ = 1
        // coefficient by coefficient; no precision is lost.
        let n = fplus.prec;
        let ring = fplus.ring;
        let mut h = vec![Scalar::zero(ring); n.max(1) as usize];
        h[0] = Scalar::one(ring);
        for k in 1..n {
            let mut acc = Scalar::zero(ring);
            for j in 1..=k {
                let fj = fplus.coeff(j);
                if fj.is_zero() || h[(k - j) as usize].is_zero() {
                    continue;
                }
                acc = acc.add(&fj.mul(&h[(k - j) as usize])?)?;
            }
            h[k as usize] = acc.neg();
        }
        let fplus_inv = Laurent::from_coeff_range(ring, 0, h, n.max(1));
        // f₋ = 1 + ν with ν an exact nilpotent tail.
        let nu: Vec<(i64, Scalar)> = fminus.negative_terms();
        let fminus_inv_terms = invert_unipotent_terms(ring, &nu);
        let mut out = fplus_inv.mul_exact_terms(&fminus_inv_terms)?;
        out = out.scale(&r.inv()?)?;
        Ok(out.shift(-d))
    }

    /// Logarithm of `f ∈ 1 + (t·R[[t]] + nilpotents)`.
    ///
    /// The argument is factored as `f = f₀ · k` with `k` collecting all
    /// (necessarily nilpotent) terms at exponents ≤ 0 and `f₀ ∈ 1 + t·R[[t]]`;
    /// then `log f = log f₀ + log k`, the first by the window-truncated
    /// Mercator series, the second by an exact finite sum.
    pub fn log_unip(&self) -> Result<Laurent> {
        let ring = self.ring;
        if self.prec < 1 {
            return Err(Error::PrecisionExhausted(
                "logarithm needs the t^0 coefficient inside the window".into(),
            ));
        }
        // Domain check: terms at exponent ≤ 0 must be nilpotent apart from
        // the constant 1.
        for (k, c) in self.terms() {
            let offending = if k < 0 {
                !c.is_nilpotent()
            } else if k == 0 {
                !c.sub(&Scalar::one(ring))?.is_nilpotent()
            } else {
                false
            };
            if offending {
                return Err(Error::DomainViolation(format!(
                    "log argument has a non-unipotent term at t^{k}"
                )));
            }
        }
        if self.coeff(0).is_nilpotent() {
            return Err(Error::DomainViolation(
                "log argument has constant term 0 + nilpotent; expected 1 + nilpotent".into(),
            ));
        }
        let mut g = self.clone();
        let mut log_tail = Laurent::zero(ring, self.prec);
        loop {
            if g.prec < 1 {
                return Err(Error::PrecisionExhausted(
                    "window exhausted while peeling the unipotent tail".into(),
                ));
            }
            let mut tail = g.negative_terms();
            let c0 = g.coeff(0);
            let gamma = c0.sub(&Scalar::one(ring))?;
            if !gamma.is_zero() {
                tail.push((0, gamma));
            }
            if tail.is_empty() {
                break;
            }
            // Peel k = 1 + tail: accumulate log k exactly, divide it out.
            let log_k = log_unipotent_terms(ring, &tail)?;
            log_tail = log_tail
                .add(&Laurent::from_terms(ring, &log_k, self.prec))?;
            let k_inv = invert_unipotent_terms(ring, &tail);
            g = g.mul_exact_terms(&k_inv)?;
        }
        // g ∈ 1 + t·R[[t]]: Mercator series, powers only gain valuation.
        let w = g.sub(&Laurent::one(ring, g.prec))?;
        let mut acc = Laurent::zero(ring, g.prec);
        let mut pw = Laurent::one(ring, g.prec);
        for k in 1..g.prec.max(1) {
            pw = pw.mul(&w)?.truncate(g.prec);
            if pw.is_zero() {
                break;
            }
            let term = pw.scale(&Scalar::from_ratio(
                ring,
                if k % 2 == 1 { 1 } else { -1 },
                k,
            ))?;
            acc = acc.add(&term)?;
        }
        acc.add(&log_tail)
    }

    /// Exponential of a topologically nilpotent element: terms at exponents
    /// ≤ 0 must have nilpotent coefficients.
    pub fn exp_nilp(&self) -> Result<Laurent> {
        let ring = self.ring;
        if self.prec < 1 {
            return Err(Error::PrecisionExhausted(
                "exponential needs the t^0 coefficient inside the window".into(),
            ));
        }
        let mut tail = Vec::new();
        let mut pos_terms = Vec::new();
        for (k, c) in self.terms() {
            if k <= 0 {
                if !c.is_nilpotent() {
                    return Err(Error::DomainViolation(format!(
                        "exp argument has a non-nilpotent term at t^{k}"
                    )));
                }
                tail.push((k, c));
            } else {
                pos_terms.push((k, c));
            }
        }
        // exp(tail) is a finite exact sum; exp(positive part) is the
        // window-truncated exponential series.
        let exp_tail = exp_nilpotent_terms(ring, &tail)?;
        let a = Laurent::from_terms(ring, &pos_terms, self.prec);
        let mut acc = Laurent::one(ring, self.prec);
        let mut term = Laurent::one(ring, self.prec);
        for k in 1..self.prec.max(1) {
            term = term
                .mul(&a)?
                .scale(&Scalar::from_ratio(ring, 1, k))?
                .truncate(self.prec);
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term)?;
        }
        acc.mul_exact_terms(&exp_tail)
    }

    /// Reinterprets the series in `t` as a series in `s` with `t = s^e`
    /// (exponents stretch by `e`; the gaps are known zeros).
    pub fn stretch(&self, e: u32) -> Laurent {
        assert!(e >= 1);
        let e = e as i64;
        let terms: Vec<(i64, Scalar)> =
            self.terms().into_iter().map(|(k, c)| (e * k, c)).collect();
        Laurent::from_terms(self.ring, &terms, e * self.prec)
    }

    /// Extracts the residue-class component `f_r` of `f = Σ_r f_r(t^e)·t^r`,
    /// as a series in `s = t^e`: the coefficient of `s^k` is the coefficient
    /// of `t^{ek+r}` in `f` (`0 ≤ r < e`).
    pub fn unstretch(&self, e: u32, r: u32) -> Laurent {
        assert!(e >= 1 && r < e);
        let (e, r) = (e as i64, r as i64);
        let prec = (self.prec - r).div_euclid(e) + i64::from((self.prec - r).rem_euclid(e) > 0);
        let terms: Vec<(i64, Scalar)> = self
            .terms()
            .into_iter()
            .filter(|(k, _)| k.rem_euclid(e) == r)
            .map(|(k, c)| ((k - r).div_euclid(e), c))
            .collect();
        Laurent::from_terms(self.ring, &terms, prec)
    }
}

/// Exact inverse of `1 + ν` where `ν` is a finite list of nilpotent terms:
/// `Σ_j (−ν)^j`, which terminates by nilpotency of the coefficients.
fn invert_unipotent_terms(ring: Ring, nu: &[(i64, Scalar)]) -> Vec<(i64, Scalar)> {
    let mut acc: Vec<(i64, Scalar)> = vec![(0, Scalar::one(ring))];
    let mut pw: Vec<(i64, Scalar)> = vec![(0, Scalar::one(ring))];
    loop {
        pw = mul_term_lists(ring, &pw, nu);
        for (_, c) in &mut pw {
            *c = c.neg();
        }
        if pw.is_empty() {
            break;
        }
        acc = add_term_lists(ring, &acc, &pw);
    }
    acc
}

/// Exact `log(1 + ν)` for a finite nilpotent term list.
fn log_unipotent_terms(ring: Ring, nu: &[(i64, Scalar)]) -> Result<Vec<(i64, Scalar)>> {
    let mut acc: Vec<(i64, Scalar)> = Vec::new();
    let mut pw: Vec<(i64, Scalar)> = vec![(0, Scalar::one(ring))];
    let mut k = 1i64;
    loop {
        pw = mul_term_lists(ring, &pw, nu);
        if pw.is_empty() {
            break;
        }
        let coeff = Scalar::from_ratio(ring, if k % 2 == 1 { 1 } else { -1 }, k);
        let term: Vec<(i64, Scalar)> = pw
            .iter()
            .map(|(e, c)| (*e, c.mul(&coeff).expect("same ring")))
            .collect();
        acc = add_term_lists(ring, &acc, &term);
        k += 1;
    }
    Ok(acc)
}

/// Exact `exp(ν)` for a finite nilpotent term list.
fn exp_nilpotent_terms(ring: Ring, nu: &[(i64, Scalar)]) -> Result<Vec<(i64, Scalar)>> {
    let mut acc: Vec<(i64, Scalar)> = vec![(0, Scalar::one(ring))];
    let mut pw: Vec<(i64, Scalar)> = vec![(0, Scalar::one(ring))];
    let mut k = 1i64;
    loop {
        pw = mul_term_lists(ring, &pw, nu);
        if pw.is_empty() {
            break;
        }
        let coeff = Scalar::from_ratio(ring, 1, k);
        pw = pw
            .iter()
            .map(|(e, c)| (*e, c.mul(&coeff).expect("same ring")))
            .collect();
        acc = add_term_lists(ring, &acc, &pw);
        k += 1;
    }
    Ok(acc)
}

fn mul_term_lists(
    ring: Ring,
    a: &[(i64, Scalar)],
    b: &[(i64, Scalar)],
) -> Vec<(i64, Scalar)> {
    let mut out: Vec<(i64, Scalar)> = Vec::new();
    for (ka, ca) in a {
        for (kb, cb) in b {
            let prod = ca.mul(cb).expect("same ring");
            if prod.is_zero() {
                continue;
            }
            out = add_term_lists(ring, &out, &[(ka + kb, prod)]);
        }
    }
    out
}

fn add_term_lists(
    _ring: Ring,
    a: &[(i64, Scalar)],
    b: &[(i64, Scalar)],
) -> Vec<(i64, Scalar)> {
    let mut out: Vec<(i64, Scalar)> = a.to_vec();
    for (k, c) in b {
        if let Some(slot) = out.iter_mut().find(|(e, _)| e == k) {
            slot.1 = slot.1.add(c).expect("same ring");
        } else {
            out.push((*k, c.clone()));
        }
    }
    out.retain(|(_, c)| !c.is_zero());
    out.sort_by_key(|(e, _)| *e);
    out
}

impl fmt::Display for Laurent {
    /// Renders as `c0*t^k0 + … + O(t^N)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms();
        if terms.is_empty() {
            return write!(f, "0 + O(t^{})", self.prec);
        }
        for (i, (k, c)) in terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let cs = format!("{c}");
            let atom = !cs.contains('+')
                && !cs.contains(' ')
                && !(cs.len() > 1 && cs[1..].contains('-'));
            let wrapped: String = if atom { cs } else { format!("({cs})") };
            match k {
                0 => write!(f, "{wrapped}")?,
                1 => write!(f, "{wrapped}*t")?,
                _ => write!(f, "{wrapped}*t^{k}")?,
            }
        }
        write!(f, " + O(t^{})", self.prec)
    }
}

impl fmt::Debug for Laurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
