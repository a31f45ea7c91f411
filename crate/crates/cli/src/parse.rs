//! Expression parsing for the command-line tools.
//!
//! One small grammar covers scalars, truncated series, rational
//! functions of `t`, and 1-form literals:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' ['-'] integer)?
//! atom   := integer | 'x' | 't' | 'eps' | 'dt' | 'dx' | '(' expr ')'
//! ```
//!
//! A trailing `(prec N)` marker, or the `+ O(t^N)` tail produced by the
//! series printer, fixes the working precision of a series literal, so
//! printed values parse back to themselves.  Parse errors carry 1-based
//! source columns.

use crate::{CliError, Result};
use epsdr_core::globalcurve::RatT;
use epsdr_core::laurent::Laurent;
use epsdr_core::scalars::{Ring, Scalar};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(i64),
    X,
    T,
    Eps,
    Dt,
    Dx,
    BigO,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LPar,
    RPar,
}

fn err(column: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        column,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<(Vec<(usize, Tok)>, usize)> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let col = i + 1;
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                toks.push((col, Tok::Plus));
                i += 1;
            }
            '-' => {
                toks.push((col, Tok::Minus));
                i += 1;
            }
            '*' => {
                toks.push((col, Tok::Star));
                i += 1;
            }
            '/' => {
                toks.push((col, Tok::Slash));
                i += 1;
            }
            '^' => {
                toks.push((col, Tok::Caret));
                i += 1;
            }
            '(' => {
                toks.push((col, Tok::LPar));
                i += 1;
            }
            ')' => {
                toks.push((col, Tok::RPar));
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let value: i64 = text
                    .parse()
                    .map_err(|_| err(start + 1, format!("integer literal {text} overflows")))?;
                toks.push((start + 1, Tok::Int(value)));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let tok = match word.as_str() {
                    "x" => Tok::X,
                    "t" => Tok::T,
                    "eps" => Tok::Eps,
                    "dt" => Tok::Dt,
                    "dx" => Tok::Dx,
                    "O" => Tok::BigO,
                    _ => {
                        return Err(err(
                            start + 1,
                            format!("unknown name '{word}' (expected x, t, eps, dt, dx)"),
                        ))
                    }
                };
                toks.push((start + 1, tok));
            }
            _ => return Err(err(col, format!("unexpected character '{c}'"))),
        }
    }
    Ok((toks, chars.len() + 1))
}

/// Abstract syntax of an input expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Int(i64),
    X,
    T,
    Eps,
    Dt,
    Dx,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(_, t)| t)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(c, _)| *c)
            .unwrap_or(self.end_col)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let col = self.col();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(err(col, format!("expected {what}"))),
        }
    }

    fn signed_int(&mut self, what: &str) -> Result<i64> {
        let mut sign = 1i64;
        loop {
            match self.peek() {
                Some(Tok::Minus) => {
                    sign = -sign;
                    self.bump();
                }
                Some(Tok::Plus) => {
                    self.bump();
                }
                _ => break,
            }
        }
        let col = self.col();
        match self.bump() {
            Some(Tok::Int(n)) => Ok(sign * n),
            _ => Err(err(col, format!("expected {what}"))),
        }
    }

    /// `expr (+ O(t^N))?` — the `O` tail records a precision and must
    /// close the input.
    fn expr_with_prec(&mut self) -> Result<(Expr, Option<i64>)> {
        let mut node = self.term()?;
        let mut prec = None;
        loop {
            match self.peek() {
                Some(Tok::Plus) if matches!(self.peek2(), Some(Tok::BigO)) => {
                    self.bump();
                    self.bump();
                    self.expect(Tok::LPar, "'(' after O")?;
                    self.expect(Tok::T, "'t' inside O(...)")?;
                    self.expect(Tok::Caret, "'^' inside O(...)")?;
                    let n = self.signed_int("an integer precision inside O(...)")?;
                    self.expect(Tok::RPar, "')' closing O(...)")?;
                    prec = Some(n);
                    break;
                }
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    node = Expr::Add(Box::new(node), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    node = Expr::Sub(Box::new(node), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok((node, prec))
    }

    fn term(&mut self) -> Result<Expr> {
        let mut node = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let rhs = self.unary()?;
                    node = Expr::Mul(Box::new(node), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let rhs = self.unary()?;
                    node = Expr::Div(Box::new(node), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(node)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Plus) => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let k = self.signed_int("an integer exponent")?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.col();
        match self.bump() {
            Some(Tok::Int(n)) => Ok(Expr::Int(n)),
            Some(Tok::X) => Ok(Expr::X),
            Some(Tok::T) => Ok(Expr::T),
            Some(Tok::Eps) => Ok(Expr::Eps),
            Some(Tok::Dt) => Ok(Expr::Dt),
            Some(Tok::Dx) => Ok(Expr::Dx),
            Some(Tok::LPar) => {
                let inner = self.term_chain()?;
                self.expect(Tok::RPar, "')'")?;
                Ok(inner)
            }
            Some(other) => Err(err(col, format!("unexpected token {other:?}"))),
            None => Err(err(col, "unexpected end of input")),
        }
    }

    /// Plain `expr` without the O-tail handling (inside parentheses).
    fn term_chain(&mut self) -> Result<Expr> {
        let mut node = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    node = Expr::Add(Box::new(node), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    node = Expr::Sub(Box::new(node), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(node)
    }
}

/// Splits a trailing `(prec N)` marker off a source string.
fn split_prec_suffix(src: &str) -> (String, Option<i64>) {
    let trimmed = src.trim_end();
    if !trimmed.ends_with(')') {
        return (src.to_string(), None);
    }
    if let Some(open) = trimmed.rfind("(prec") {
        let inner = &trimmed[open + 5..trimmed.len() - 1];
        if let Ok(n) = inner.trim().parse::<i64>() {
            return (trimmed[..open].to_string(), Some(n));
        }
    }
    (src.to_string(), None)
}

/// Parses a full source string into an expression plus any precision
/// marker (`(prec N)` suffix or `+ O(t^N)` tail).
pub fn parse_expression(src: &str) -> Result<(Expr, Option<i64>)> {
    let (body, suffix_prec) = split_prec_suffix(src);
    let (toks, end_col) = lex(&body)?;
    if toks.is_empty() {
        return Err(err(1, "empty expression"));
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end_col,
    };
    let (expr, tail_prec) = p.expr_with_prec()?;
    if p.pos < p.toks.len() {
        return Err(err(p.col(), "unexpected trailing input"));
    }
    Ok((expr, tail_prec.or(suffix_prec)))
}

/// The smallest ring whose generators cover the names used in `e`.
pub fn infer_ring(e: &Expr, base: Ring) -> Ring {
    fn walk(e: &Expr, has_x: &mut bool, has_eps: &mut bool) {
        match e {
            Expr::X => *has_x = true,
            Expr::Eps => *has_eps = true,
            Expr::Neg(a) | Expr::Pow(a, _) => walk(a, has_x, has_eps),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                walk(a, has_x, has_eps);
                walk(b, has_x, has_eps);
            }
            _ => {}
        }
    }
    let (mut has_x, mut has_eps) = (false, false);
    walk(e, &mut has_x, &mut has_eps);
    let mut ring = base;
    if has_x {
        ring = ring.join(Ring::Qx).unwrap_or(ring);
    }
    if has_eps && ring.nil_order().is_none() {
        ring = ring
            .join(match ring {
                Ring::Qx => Ring::QxNil(3),
                _ => Ring::QNil(3),
            })
            .unwrap_or(ring);
    }
    ring
}

/// Names accepted by `--ring`.
pub fn ring_by_name(name: &str) -> Result<Ring> {
    match name.to_ascii_lowercase().as_str() {
        "q" => Ok(Ring::Q),
        "qx" => Ok(Ring::Qx),
        "qnil2" => Ok(Ring::QNil(2)),
        "qnil3" => Ok(Ring::QNil(3)),
        "qxnil2" => Ok(Ring::QxNil(2)),
        "qxnil3" => Ok(Ring::QxNil(3)),
        other => Err(CliError::Input(format!(
            "unknown ring '{other}' (expected one of q, qx, qnil2, qnil3, qxnil2, qxnil3)"
        ))),
    }
}

fn scalar_pow(s: &Scalar, k: i64) -> Result<Scalar> {
    if k == 0 {
        return Ok(Scalar::one(s.ring()));
    }
    let base = if k < 0 {
        s.inv().map_err(CliError::Core)?
    } else {
        s.clone()
    };
    let mut acc = base.clone();
    for _ in 1..k.unsigned_abs() {
        acc = acc.mul(&base).map_err(CliError::Core)?;
    }
    Ok(acc)
}

/// Evaluates an expression as a scalar (no `t`, `dt`, `dx`).
pub fn eval_scalar(e: &Expr, ring: Ring) -> Result<Scalar> {
    match e {
        Expr::Int(n) => Ok(Scalar::from_int(ring, *n)),
        Expr::X => {
            if matches!(ring, Ring::Qx | Ring::QxNil(_)) {
                Ok(Scalar::x(ring))
            } else {
                Err(CliError::Input(format!("'x' is not an element of {ring:?}")))
            }
        }
        Expr::Eps => Scalar::eps(ring)
            .ok_or_else(|| CliError::Input(format!("'eps' is not an element of {ring:?}"))),
        Expr::T | Expr::Dt | Expr::Dx => Err(CliError::Input(
            "series and form symbols cannot appear in a scalar".into(),
        )),
        Expr::Neg(a) => Ok(eval_scalar(a, ring)?.neg()),
        Expr::Add(a, b) => eval_scalar(a, ring)?
            .add(&eval_scalar(b, ring)?)
            .map_err(CliError::Core),
        Expr::Sub(a, b) => eval_scalar(a, ring)?
            .sub(&eval_scalar(b, ring)?)
            .map_err(CliError::Core),
        Expr::Mul(a, b) => eval_scalar(a, ring)?
            .mul(&eval_scalar(b, ring)?)
            .map_err(CliError::Core),
        Expr::Div(a, b) => {
            let d = eval_scalar(b, ring)?.inv().map_err(CliError::Core)?;
            eval_scalar(a, ring)?.mul(&d).map_err(CliError::Core)
        }
        Expr::Pow(a, k) => scalar_pow(&eval_scalar(a, ring)?, *k),
    }
}

/// Extra working precision needed so that divisions and negative powers
/// inside `e` still leave `prec` valid coefficients.
fn slack(e: &Expr) -> i64 {
    match e {
        Expr::Neg(a) => slack(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => slack(a) + slack(b),
        Expr::Div(a, b) => slack(a) + slack(b) + 16,
        Expr::Pow(a, k) => slack(a) * k.unsigned_abs().max(1) as i64 + 2 * k.unsigned_abs() as i64,
        _ => 0,
    }
}

/// Evaluates an expression as a truncated series with exactly `prec`
/// retained coefficients past the leading exponent origin.
pub fn eval_series(e: &Expr, ring: Ring, prec: i64) -> Result<Laurent> {
    let wp = prec + slack(e) + 8;
    let v = eval_series_at(e, ring, wp)?;
    if v.prec() < prec {
        return Err(CliError::Input(format!(
            "expression loses too much precision (needs {prec}, has {})",
            v.prec()
        )));
    }
    Ok(v.truncate(prec))
}

fn eval_series_at(e: &Expr, ring: Ring, wp: i64) -> Result<Laurent> {
    match e {
        Expr::Int(n) => Ok(Laurent::from_scalar(ring, Scalar::from_int(ring, *n), wp)),
        Expr::X | Expr::Eps => Ok(Laurent::from_scalar(ring, eval_scalar(e, ring)?, wp)),
        Expr::T => Ok(Laurent::t(ring, wp)),
        Expr::Dt | Expr::Dx => Err(CliError::Input(
            "form symbols cannot appear inside a series".into(),
        )),
        Expr::Neg(a) => Ok(eval_series_at(a, ring, wp)?.neg()),
        Expr::Add(a, b) => eval_series_at(a, ring, wp)?
            .add(&eval_series_at(b, ring, wp)?)
            .map_err(CliError::Core),
        Expr::Sub(a, b) => eval_series_at(a, ring, wp)?
            .sub(&eval_series_at(b, ring, wp)?)
            .map_err(CliError::Core),
        Expr::Mul(a, b) => eval_series_at(a, ring, wp)?
            .mul(&eval_series_at(b, ring, wp)?)
            .map_err(CliError::Core),
        Expr::Div(a, b) => {
            let d = eval_series_at(b, ring, wp)?.inv().map_err(CliError::Core)?;
            eval_series_at(a, ring, wp)?.mul(&d).map_err(CliError::Core)
        }
        Expr::Pow(a, k) => eval_series_at(a, ring, wp)?
            .pow(*k)
            .map_err(CliError::Core),
    }
}

/// Evaluates an expression as an exact rational constant.
pub fn eval_qconst(e: &Expr) -> Result<BigRational> {
    match e {
        Expr::Int(n) => Ok(BigRational::from_integer(BigInt::from(*n))),
        Expr::Neg(a) => Ok(-eval_qconst(a)?),
        Expr::Add(a, b) => Ok(eval_qconst(a)? + eval_qconst(b)?),
        Expr::Sub(a, b) => Ok(eval_qconst(a)? - eval_qconst(b)?),
        Expr::Mul(a, b) => Ok(eval_qconst(a)? * eval_qconst(b)?),
        Expr::Div(a, b) => {
            let d = eval_qconst(b)?;
            if d.is_zero() {
                return Err(CliError::Input("division by zero".into()));
            }
            Ok(eval_qconst(a)? / d)
        }
        Expr::Pow(a, k) => {
            let base = eval_qconst(a)?;
            if *k < 0 && base.is_zero() {
                return Err(CliError::Input("division by zero".into()));
            }
            let mut acc = BigRational::one();
            let b = if *k < 0 { base.recip() } else { base };
            for _ in 0..k.unsigned_abs() {
                acc *= &b;
            }
            Ok(acc)
        }
        _ => Err(CliError::Input(
            "expected a rational constant (integers and + - * / ^ only)".into(),
        )),
    }
}

/// Writes `e` as a degree-≤1 polynomial `c0 + c1·t` when possible.
fn linear_in_t(e: &Expr) -> Option<(BigRational, BigRational)> {
    match e {
        Expr::Int(n) => Some((BigRational::from_integer(BigInt::from(*n)), BigRational::zero())),
        Expr::T => Some((BigRational::zero(), BigRational::one())),
        Expr::Neg(a) => {
            let (c0, c1) = linear_in_t(a)?;
            Some((-c0, -c1))
        }
        Expr::Add(a, b) => {
            let (a0, a1) = linear_in_t(a)?;
            let (b0, b1) = linear_in_t(b)?;
            Some((a0 + b0, a1 + b1))
        }
        Expr::Sub(a, b) => {
            let (a0, a1) = linear_in_t(a)?;
            let (b0, b1) = linear_in_t(b)?;
            Some((a0 - b0, a1 - b1))
        }
        Expr::Mul(a, b) => {
            let (a0, a1) = linear_in_t(a)?;
            let (b0, b1) = linear_in_t(b)?;
            if !a1.is_zero() && !b1.is_zero() {
                return None;
            }
            Some((&a0 * &b0, &a0 * &b1 + &a1 * &b0))
        }
        Expr::Div(a, b) => {
            let (a0, a1) = linear_in_t(a)?;
            let (b0, b1) = linear_in_t(b)?;
            if !b1.is_zero() || b0.is_zero() {
                return None;
            }
            Some((a0 / &b0, a1 / &b0))
        }
        Expr::Pow(a, k) => match *k {
            0 => Some((BigRational::one(), BigRational::zero())),
            1 => linear_in_t(a),
            _ => {
                let (c0, c1) = linear_in_t(a)?;
                if !c1.is_zero() {
                    return None;
                }
                if *k < 0 && c0.is_zero() {
                    return None;
                }
                let b = if *k < 0 { c0.recip() } else { c0 };
                let mut acc = BigRational::one();
                for _ in 0..k.unsigned_abs() {
                    acc *= &b;
                }
                Some((acc, BigRational::zero()))
            }
        },
        _ => None,
    }
}

/// Writes `e` as `lead · Π (t − rᵢ)^{mᵢ}` with a scalar (possibly
/// `x`-dependent) lead and rational roots.
fn t_factors(e: &Expr) -> Result<(Scalar, Vec<(BigRational, i64)>)> {
    match e {
        Expr::T => Ok((
            Scalar::one(Ring::Q),
            vec![(BigRational::zero(), 1)],
        )),
        Expr::Neg(a) => {
            let (lead, fs) = t_factors(a)?;
            Ok((lead.neg(), fs))
        }
        Expr::Mul(a, b) => {
            let (la, mut fa) = t_factors(a)?;
            let (lb, fb) = t_factors(b)?;
            fa.extend(fb);
            Ok((la.mul(&lb).map_err(CliError::Core)?, fa))
        }
        Expr::Div(a, b) => {
            let (la, mut fa) = t_factors(a)?;
            let (lb, fb) = t_factors(b)?;
            fa.extend(fb.into_iter().map(|(r, m)| (r, -m)));
            let lead = la
                .mul(&lb.inv().map_err(CliError::Core)?)
                .map_err(CliError::Core)?;
            Ok((lead, fa))
        }
        Expr::Pow(a, k) => {
            let (la, fa) = t_factors(a)?;
            Ok((
                scalar_pow(&la, *k)?,
                fa.into_iter().map(|(r, m)| (r, m * k)).collect(),
            ))
        }
        other => {
            // Not multiplicative at the top: it must be t-free (a scalar
            // lead) or linear in t.
            let ring = infer_ring(other, Ring::Q);
            if let Ok(s) = eval_scalar(other, ring) {
                return Ok((s, Vec::new()));
            }
            if let Some((c0, c1)) = linear_in_t(other) {
                if !c1.is_zero() {
                    let root = -c0 / &c1;
                    return Ok((Scalar::from_rat(Ring::Q, c1), vec![(root, 1)]));
                }
            }
            Err(CliError::Input(
                "this factor is neither t-free nor a product of rational linear factors of t"
                    .into(),
            ))
        }
    }
}

/// Evaluates an expression as an exact rational function of `t` over
/// ℚ(x), with poles restricted to rational points.
pub fn eval_ratt(e: &Expr) -> Result<RatT> {
    match e {
        Expr::Int(n) => RatT::from_scalar(&Scalar::from_int(Ring::Qx, *n)).map_err(CliError::Core),
        Expr::X => RatT::from_scalar(&Scalar::x(Ring::Qx)).map_err(CliError::Core),
        Expr::T => Ok(RatT::t()),
        Expr::Eps => Err(CliError::Input(
            "families are defined over ℚ(x); 'eps' is not available here".into(),
        )),
        Expr::Dt | Expr::Dx => Err(CliError::Input(
            "form symbols cannot appear inside a coefficient".into(),
        )),
        Expr::Neg(a) => Ok(eval_ratt(a)?.neg()),
        Expr::Add(a, b) => eval_ratt(a)?.add(&eval_ratt(b)?).map_err(CliError::Core),
        Expr::Sub(a, b) => eval_ratt(a)?.sub(&eval_ratt(b)?).map_err(CliError::Core),
        Expr::Mul(a, b) => eval_ratt(a)?.mul(&eval_ratt(b)?).map_err(CliError::Core),
        Expr::Div(a, b) => eval_ratt(a)?
            .mul(&ratt_inverse(b)?)
            .map_err(CliError::Core),
        Expr::Pow(a, k) => {
            if *k >= 0 {
                let base = eval_ratt(a)?;
                let mut acc = RatT::from_scalar(&Scalar::one(Ring::Q)).map_err(CliError::Core)?;
                for _ in 0..*k {
                    acc = acc.mul(&base).map_err(CliError::Core)?;
                }
                Ok(acc)
            } else {
                let inv = ratt_inverse(a)?;
                let mut acc = RatT::from_scalar(&Scalar::one(Ring::Q)).map_err(CliError::Core)?;
                for _ in 0..k.unsigned_abs() {
                    acc = acc.mul(&inv).map_err(CliError::Core)?;
                }
                Ok(acc)
            }
        }
    }
}

fn ratt_inverse(e: &Expr) -> Result<RatT> {
    let (lead, factors) = t_factors(e)?;
    let mut acc =
        RatT::from_scalar(&lead.inv().map_err(CliError::Core)?).map_err(CliError::Core)?;
    for (root, m) in factors {
        if m == 0 {
            continue;
        }
        let p = Scalar::from_rat(Ring::Q, root);
        let piece = if m > 0 {
            RatT::pole(&p, m as usize).map_err(CliError::Core)?
        } else {
            let lin = RatT::new(
                vec![p.neg(), Scalar::one(Ring::Q)],
                Vec::new(),
            )
            .map_err(CliError::Core)?;
            let mut acc2 = RatT::from_scalar(&Scalar::one(Ring::Q)).map_err(CliError::Core)?;
            for _ in 0..m.unsigned_abs() {
                acc2 = acc2.mul(&lin).map_err(CliError::Core)?;
            }
            acc2
        };
        acc = acc.mul(&piece).map_err(CliError::Core)?;
    }
    Ok(acc)
}

/// Rewrites a 1-form literal as its `dt`-coefficient: exactly one `dt`
/// factor must appear multiplicatively; `dx` is rejected.
fn strip_dt(e: &Expr) -> Result<(Expr, i64)> {
    match e {
        Expr::Dt => Ok((Expr::Int(1), 1)),
        Expr::Dx => Err(CliError::Input(
            "dx cannot appear in a ν literal; ν must be a multiple of dt".into(),
        )),
        Expr::Neg(a) => {
            let (a2, n) = strip_dt(a)?;
            Ok((Expr::Neg(Box::new(a2)), n))
        }
        Expr::Mul(a, b) => {
            let (a2, na) = strip_dt(a)?;
            let (b2, nb) = strip_dt(b)?;
            Ok((Expr::Mul(Box::new(a2), Box::new(b2)), na + nb))
        }
        Expr::Div(a, b) => {
            let (a2, na) = strip_dt(a)?;
            let (b2, nb) = strip_dt(b)?;
            Ok((Expr::Div(Box::new(a2), Box::new(b2)), na - nb))
        }
        Expr::Pow(a, k) => {
            let (a2, na) = strip_dt(a)?;
            Ok((Expr::Pow(Box::new(a2), *k), na * k))
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let (a2, na) = strip_dt(a)?;
            let (b2, nb) = strip_dt(b)?;
            if na != nb {
                return Err(CliError::Input(
                    "every summand of a form literal needs the same dt power".into(),
                ));
            }
            let node = match e {
                Expr::Add(..) => Expr::Add(Box::new(a2), Box::new(b2)),
                _ => Expr::Sub(Box::new(a2), Box::new(b2)),
            };
            Ok((node, na))
        }
        other => Ok((other.clone(), 0)),
    }
}

/// Parses a series literal like `x*t^-2 + 1 (prec 16)`.
pub fn parse_series(src: &str, ring: Option<Ring>, default_prec: i64) -> Result<Laurent> {
    let (expr, prec) = parse_expression(src)?;
    let ring = ring.unwrap_or_else(|| infer_ring(&expr, Ring::Q));
    eval_series(&expr, ring, prec.unwrap_or(default_prec))
}

/// Parses a scalar literal like `(3/2)*x + 1`.
pub fn parse_scalar(src: &str, ring: Option<Ring>) -> Result<Scalar> {
    let (expr, _) = parse_expression(src)?;
    let ring = ring.unwrap_or_else(|| infer_ring(&expr, Ring::Q));
    eval_scalar(&expr, ring)
}

/// Parses a rational constant like `-7/3`.
pub fn parse_qconst(src: &str) -> Result<BigRational> {
    let (expr, _) = parse_expression(src)?;
    eval_qconst(&expr)
}

/// Parses a rational function of `t` (family matrix entries).
pub fn parse_ratt(src: &str) -> Result<RatT> {
    let (expr, _) = parse_expression(src)?;
    eval_ratt(&expr)
}

/// Parses a local 1-form literal (`dt`, `dt/t`, `x*t^2*dt`, …) into the
/// series coefficient of `dt`.
pub fn parse_nu_series(src: &str, ring: Option<Ring>, default_prec: i64) -> Result<Laurent> {
    let (expr, prec) = parse_expression(src)?;
    let (coeff, ndt) = strip_dt(&expr)?;
    if ndt != 1 {
        return Err(CliError::Input(format!(
            "ν must carry exactly one dt factor, found dt^{ndt}"
        )));
    }
    let ring = ring.unwrap_or_else(|| infer_ring(&coeff, Ring::Q));
    eval_series(&coeff, ring, prec.unwrap_or(default_prec))
}

/// Parses a global 1-form literal into the rational `dt`-coefficient.
pub fn parse_nu_ratt(src: &str) -> Result<RatT> {
    let (expr, _) = parse_expression(src)?;
    let (coeff, ndt) = strip_dt(&expr)?;
    if ndt != 1 {
        return Err(CliError::Input(format!(
            "ν must carry exactly one dt factor, found dt^{ndt}"
        )));
    }
    eval_ratt(&coeff)
}

/// Parses a factored rational function of `t` over ℚ for the
/// reciprocity checks: a unit constant times integer powers of rational
/// linear factors, e.g. `3*(t-1)^2/(t+4)`.
pub fn parse_split_rational(src: &str) -> Result<epsdr_core::symbol::SplitRational> {
    let (expr, _) = parse_expression(src)?;
    let (lead, factors) = t_factors(&expr)?;
    if lead.ring() != Ring::Q {
        return Err(CliError::Input(
            "the leading constant must be rational".into(),
        ));
    }
    let mut merged: Vec<(BigRational, i64)> = Vec::new();
    for (r, m) in factors {
        if let Some(slot) = merged.iter_mut().find(|(q, _)| *q == r) {
            slot.1 += m;
        } else {
            merged.push((r, m));
        }
    }
    merged.retain(|(_, m)| *m != 0);
    epsdr_core::symbol::SplitRational::from_factors(lead, &merged).map_err(CliError::Core)
}
