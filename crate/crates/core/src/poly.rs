//! Dense univariate polynomials over exact big rationals.
//!
//! This is the arithmetic substrate for the rational function field
//! `K = ℚ(x)`: reduced fractions of [`QPoly`] values with monic
//! denominators.  Besides ring operations it provides the Euclidean tools
//! needed by the logarithmic-derivative decision procedure: gcd, extended
//! gcd, resultants, squarefree tests and integer-root extraction.
//!
//! Invariant: the coefficient vector never has a trailing (leading-term)
//! zero; the zero polynomial is the empty vector.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Polynomial over `ℚ` in one variable, dense low-to-high coefficients.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QPoly {
    coeffs: Vec<BigRational>,
}

impl QPoly {
    /// The zero polynomial.
    pub fn zero() -> Self {
        QPoly { coeffs: Vec::new() }
    }

    /// The constant polynomial `1`.
    pub fn one() -> Self {
        QPoly::constant(BigRational::one())
    }

    /// Constant polynomial.
    pub fn constant(c: BigRational) -> Self {
        if c.is_zero() {
            QPoly::zero()
        } else {
            QPoly { coeffs: vec![c] }
        }
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        QPoly {
            coeffs: vec![BigRational::zero(), BigRational::one()],
        }
    }

    /// Builds from low-to-high coefficients, trimming leading zeros.
    pub fn from_coeffs(coeffs: Vec<BigRational>) -> Self {
        let mut p = QPoly { coeffs };
        p.trim();
        p
    }

    /// Constant polynomial from an integer.
    pub fn from_int(n: i64) -> Self {
        QPoly::constant(BigRational::from_integer(BigInt::from(n)))
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if c.is_zero()) {
            self.coeffs.pop();
        }
    }

    /// True iff this is the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports `-1` for convenience.
    pub fn degree(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    /// Coefficient of `x^k` (zero outside the stored range).
    pub fn coeff(&self, k: usize) -> BigRational {
        self.coeffs.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Low-to-high coefficient slice.
    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Leading coefficient (`0` for the zero polynomial).
    pub fn leading(&self) -> BigRational {
        self.coeffs.last().cloned().unwrap_or_else(BigRational::zero)
    }

    /// True iff the polynomial is a nonzero constant.
    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    /// Sum.
    pub fn add(&self, other: &QPoly) -> QPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(self.coeff(k) + other.coeff(k));
        }
        QPoly::from_coeffs(out)
    }

    /// Difference.
    pub fn sub(&self, other: &QPoly) -> QPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(self.coeff(k) - other.coeff(k));
        }
        QPoly::from_coeffs(out)
    }

    /// Negation.
    pub fn neg(&self) -> QPoly {
        QPoly {
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }

    /// Product.
    pub fn mul(&self, other: &QPoly) -> QPoly {
        if self.is_zero() || other.is_zero() {
            return QPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        QPoly::from_coeffs(out)
    }

    /// Multiplication by a scalar.
    pub fn scale(&self, c: &BigRational) -> QPoly {
        if c.is_zero() {
            return QPoly::zero();
        }
        QPoly {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Euclidean division: returns `(quotient, remainder)` with
    /// `self = q·div + r`, `deg r < deg div`.  Panics on `div = 0`.
    pub fn div_rem(&self, div: &QPoly) -> (QPoly, QPoly) {
        assert!(!div.is_zero(), "polynomial division by zero");
        let mut rem = self.clone();
        let dlead = div.leading();
        let ddeg = div.coeffs.len() - 1;
        let mut q = vec![BigRational::zero(); self.coeffs.len().saturating_sub(ddeg)];
        while !rem.is_zero() && rem.coeffs.len() - 1 >= ddeg {
            let shift = rem.coeffs.len() - 1 - ddeg;
            let factor = rem.leading() / &dlead;
            q[shift] = factor.clone();
            // rem -= factor * x^shift * div
            for (j, b) in div.coeffs.iter().enumerate() {
                let idx = shift + j;
                let sub = &factor * b;
                rem.coeffs[idx] -= sub;
            }
            rem.trim();
        }
        (QPoly::from_coeffs(q), rem)
    }

    /// Remainder of Euclidean division.
    pub fn rem(&self, div: &QPoly) -> QPoly {
        self.div_rem(div).1
    }

    /// Exact quotient; panics if the division is not exact.
    pub fn div_exact(&self, div: &QPoly) -> QPoly {
        let (q, r) = self.div_rem(div);
        assert!(r.is_zero(), "inexact polynomial division");
        q
    }

    /// Derivative.
    pub fn derivative(&self) -> QPoly {
        if self.coeffs.len() <= 1 {
            return QPoly::zero();
        }
        let mut out = Vec::with_capacity(self.coeffs.len() - 1);
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            out.push(c * BigRational::from_integer(BigInt::from(k)));
        }
        QPoly::from_coeffs(out)
    }

    /// Evaluation at a rational point.
    pub fn eval(&self, at: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * at + c;
        }
        acc
    }

    /// Makes the polynomial monic; returns the former leading coefficient.
    /// Panics on the zero polynomial.
    pub fn into_monic(self) -> (QPoly, BigRational) {
        assert!(!self.is_zero());
        let lead = self.leading();
        let inv = BigRational::one() / &lead;
        (self.scale(&inv), lead)
    }

    /// Monic greatest common divisor (gcd(0,0) = 0).
    pub fn gcd(&self, other: &QPoly) -> QPoly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            a.into_monic().0
        }
    }

    /// Extended gcd: returns `(g, s, t)` with `g = s·self + t·other`
    /// and `g` monic (or zero).
    pub fn extended_gcd(&self, other: &QPoly) -> (QPoly, QPoly, QPoly) {
        let (mut r0, mut r1) = (self.clone(), other.clone());
        let (mut s0, mut s1) = (QPoly::one(), QPoly::zero());
        let (mut t0, mut t1) = (QPoly::zero(), QPoly::one());
        while !r1.is_zero() {
            let (q, r) = r0.div_rem(&r1);
            let s = s0.sub(&q.mul(&s1));
            let t = t0.sub(&q.mul(&t1));
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s;
            t0 = t1;
            t1 = t;
        }
        if r0.is_zero() {
            return (r0, s0, t0);
        }
        let lead = r0.leading();
        let inv = BigRational::one() / lead;
        (r0.scale(&inv), s0.scale(&inv), t0.scale(&inv))
    }

    /// Inverse of `self` modulo `m` (both nonzero, coprime).
    pub fn inverse_mod(&self, m: &QPoly) -> Option<QPoly> {
        let (g, s, _) = self.extended_gcd(m);
        if g.degree() != 0 {
            return None;
        }
        Some(s.rem(m))
    }

    /// True iff squarefree (coprime with its derivative); constants count
    /// as squarefree.
    pub fn is_squarefree(&self) -> bool {
        if self.is_constant() {
            return true;
        }
        self.gcd(&self.derivative()).degree() == 0
    }

    /// Resultant `res(self, other)` via the Euclidean remainder sequence.
    pub fn resultant(&self, other: &QPoly) -> BigRational {
        let mut a = self.clone();
        let mut b = other.clone();
        if a.is_zero() || b.is_zero() {
            return BigRational::zero();
        }
        let mut acc = BigRational::one();
        let mut sign = BigRational::one();
        loop {
            let db = b.degree();
            if db == 0 {
                // res(a, const) = const^{deg a}
                let mut p = BigRational::one();
                for _ in 0..a.degree() {
                    p *= b.coeff(0);
                }
                return acc * sign * p;
            }
            let r = a.rem(&b);
            if r.is_zero() {
                return BigRational::zero();
            }
            let da = a.degree();
            let dr = r.degree();
            // res(a,b) = (-1)^{da·db} lc(b)^{da-dr} res(b,r)
            if (da * db) % 2 == 1 {
                sign = -sign;
            }
            let mut p = BigRational::one();
            for _ in 0..(da - dr) {
                p *= b.leading();
            }
            acc *= p;
            a = b;
            b = r;
        }
    }

    /// All integer roots, with multiplicity stripped (each root listed once).
    ///
    /// Works by primitivizing to `ℤ[x]`, enumerating divisors of the (nonzero)
    /// trailing coefficient from a partial factorization, and verifying each
    /// candidate exactly.  Divisor enumeration is complete whenever the
    /// trailing coefficient's prime factors below `10^5` and at most one
    /// larger cofactor describe it, which covers every input this crate
    /// generates; a remaining composite cofactor is still offered as a
    /// candidate, so misses would require two distinct prime factors above
    /// `10^5` *and* a root of that size.
    pub fn integer_roots(&self) -> Vec<BigInt> {
        let mut roots = Vec::new();
        if self.is_zero() || self.is_constant() {
            return roots;
        }
        // Strip x^k so the trailing coefficient is nonzero.
        let mut low = 0usize;
        while self.coeff(low).is_zero() {
            low += 1;
        }
        if low > 0 {
            roots.push(BigInt::zero());
        }
        let shifted = QPoly::from_coeffs(self.coeffs[low..].to_vec());
        if shifted.is_constant() {
            return roots;
        }
        // Clear denominators: integer root r of shifted divides |a0| and
        // lc·r divides ... (we only need r | a0 after making it integral).
        let mut den = BigInt::one();
        for c in shifted.coeffs() {
            den = den.lcm(c.denom());
        }
        let int_coeffs: Vec<BigInt> = shifted
            .coeffs()
            .iter()
            .map(|c| (c * BigRational::from_integer(den.clone())).to_integer())
            .collect();
        let a0 = int_coeffs[0].magnitude().clone();
        for d in divisors_from_partial_factorization(&a0) {
            for sign in [1i64, -1] {
                let cand = BigInt::from(sign) * BigInt::from_biguint(num_bigint::Sign::Plus, d.clone());
                let cand_q = BigRational::from_integer(cand.clone());
                if shifted.eval(&cand_q).is_zero() && !roots.contains(&cand) {
                    roots.push(cand);
                }
            }
        }
        roots
    }

    /// All rational roots (each listed once), by the rational-root theorem
    /// on the primitivized integer form: candidates `p/q` with `p` dividing
    /// the trailing and `q` the leading coefficient, each verified exactly.
    /// The divisor-enumeration caveat of [`QPoly::integer_roots`] applies to
    /// both coefficients.
    pub fn rational_roots(&self) -> Vec<BigRational> {
        let mut roots = Vec::new();
        if self.is_zero() || self.is_constant() {
            return roots;
        }
        let mut low = 0usize;
        while self.coeff(low).is_zero() {
            low += 1;
        }
        if low > 0 {
            roots.push(BigRational::zero());
        }
        let shifted = QPoly::from_coeffs(self.coeffs[low..].to_vec());
        if shifted.is_constant() {
            return roots;
        }
        let mut den = BigInt::one();
        for c in shifted.coeffs() {
            den = den.lcm(c.denom());
        }
        let int_coeffs: Vec<BigInt> = shifted
            .coeffs()
            .iter()
            .map(|c| (c * BigRational::from_integer(den.clone())).to_integer())
            .collect();
        let a0 = int_coeffs[0].magnitude().clone();
        let lead = int_coeffs.last().expect("nonconstant").magnitude().clone();
        for p in divisors_from_partial_factorization(&a0) {
            for q in divisors_from_partial_factorization(&lead) {
                for sign in [1i64, -1] {
                    let cand = BigRational::new(
                        BigInt::from(sign) * BigInt::from_biguint(num_bigint::Sign::Plus, p.clone()),
                        BigInt::from_biguint(num_bigint::Sign::Plus, q.clone()),
                    );
                    if shifted.eval(&cand).is_zero() && !roots.contains(&cand) {
                        roots.push(cand);
                    }
                }
            }
        }
        roots
    }
}

/// All divisors of `n` derivable from trial division below `10^5`,
/// keeping any remaining cofactor as one extra prime-like factor.
fn divisors_from_partial_factorization(n: &BigUint) -> Vec<BigUint> {
    let mut factors: Vec<(BigUint, u32)> = Vec::new();
    let mut m = n.clone();
    if m.is_zero() {
        return vec![BigUint::one()];
    }
    let mut p = 2u64;
    while p <= 100_000 {
        let bp = BigUint::from(p);
        if (&bp * &bp) > m {
            break;
        }
        let mut e = 0u32;
        while (&m % &bp).is_zero() {
            m = &m / &bp;
            e += 1;
        }
        if e > 0 {
            factors.push((bp, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if !m.is_one() {
        factors.push((m, 1));
    }
    let mut divisors = vec![BigUint::one()];
    for (p, e) in factors {
        let mut next = Vec::with_capacity(divisors.len() * (e as usize + 1));
        for d in &divisors {
            let mut pk = BigUint::one();
            for _ in 0..=e {
                next.push(d * &pk);
                pk *= &p;
            }
        }
        divisors = next;
    }
    divisors
}

impl fmt::Debug for QPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for QPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " {} ", if c.is_negative() { "-" } else { "+" })?;
            } else if c.is_negative() {
                write!(f, "-")?;
            }
            first = false;
            let a = c.abs();
            if k == 0 {
                write!(f, "{a}")?;
            } else {
                if !a.is_one() {
                    write!(f, "{a}*")?;
                }
                if k == 1 {
                    write!(f, "x")?;
                } else {
                    write!(f, "x^{k}")?;
                }
            }
        }
        Ok(())
    }
}

/// Parses failure positions are not tracked here; the CLI has the
/// position-aware parser.  This is a small helper for tests and `Display`
/// round-trips of polynomial data.
impl QPoly {
    /// Squarefree part `self / gcd(self, self')`, monic.
    pub fn squarefree_part(&self) -> QPoly {
        if self.is_constant() {
            return QPoly::one();
        }
        let g = self.gcd(&self.derivative());
        self.div_exact(&g).into_monic().0
    }
}

/// Formats a rational number without spaces, e.g. `-3/2`.
pub fn format_rational(q: &BigRational) -> String {
    use alloc::format;
    if q.denom().is_one() {
        format!("{}", q.numer())
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}
