//! Finite-window Fredholm calculus on `R((t))ⁿ`.
//!
//! This module computes indices of banded operators on the formal punctured
//! disc, Koszul signs, and — independently of the closed-form symbol in
//! [`crate::symbol`] — the commutator-determinant pairing of two unit Laurent
//! series, obtained from relative determinants between lattice frames.
//!
//! Everything asymptotic is evaluated on a finite window and certified by
//! recomputation on an enlarged window; agreement is never assumed.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::laurent::Laurent;
use crate::linalg::SMat;
use crate::scalars::{Ring, Scalar};

/// Degree-and-parity bookkeeping for a graded determinant line.
///
/// The line itself is never materialised; only its degree (an index) and the
/// induced parity travel through computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradedLineTag {
    /// Degree of the line (an integer index).
    pub degree: i64,
}

impl GradedLineTag {
    /// Tag with the given degree.
    pub fn new(degree: i64) -> GradedLineTag {
        GradedLineTag { degree }
    }

    /// Parity in `ℤ/2`, always the degree mod 2.
    pub fn parity(&self) -> u8 {
        (self.degree.rem_euclid(2)) as u8
    }

    /// Tag of a tensor product: degrees add.
    pub fn tensor(&self, other: &GradedLineTag) -> GradedLineTag {
        GradedLineTag::new(self.degree + other.degree)
    }
}

/// Sign `(−1)^{pq}` governing the super-commutation of two graded lines.
pub fn koszul_sign(p: i64, q: i64) -> i64 {
    if (p.rem_euclid(2)) * (q.rem_euclid(2)) == 1 {
        -1
    } else {
        1
    }
}

/// A continuous endomorphism of `R((t))ⁿ` presented by its action on basis
/// vectors, together with a band bound `s` guaranteeing
/// `op(t^a·O^n) ⊆ t^{a−s}·O^n` for every `a`.
#[derive(Clone, Debug)]
pub enum BandedOperator {
    /// The identity on `R((t))^rank`.
    Identity {
        /// Module rank.
        rank: usize,
    },
    /// Scalar multiplication by a fixed series on `R((t))^rank`.
    Mult {
        /// The multiplier.
        f: Laurent,
        /// Module rank.
        rank: usize,
    },
    /// Multiplication by a square matrix of series (row-major).
    MatMult {
        /// Row-major `n×n` matrix of series.
        a: Vec<Vec<Laurent>>,
    },
    /// `h·(d/dt + A)` — a connection operator contracted with a vector
    /// field `h·∂_t`.
    ConnTau {
        /// Coefficient of the vector field.
        h: Laurent,
        /// Row-major `n×n` connection matrix.
        a: Vec<Vec<Laurent>>,
    },
    /// Composition: `Compose(f, g)` applies `g` first, then `f`.
    Compose(Box<BandedOperator>, Box<BandedOperator>),
    /// A base operator modified on finitely many basis vectors: for each
    /// listed `(j, i)` the image of `t^j·e_i` is *replaced* by the given
    /// column.  Used to exercise finite-rank-perturbation invariance.
    FiniteRank {
        /// The unperturbed operator.
        base: Box<BandedOperator>,
        /// Overrides: `((j, i), column)`.
        overrides: Vec<((i64, usize), Vec<Laurent>)>,
    },
}

impl BandedOperator {
    /// Module rank `n`.
    pub fn rank(&self) -> usize {
        match self {
            BandedOperator::Identity { rank } | BandedOperator::Mult { rank, .. } => *rank,
            BandedOperator::MatMult { a } | BandedOperator::ConnTau { a, .. } => a.len(),
            BandedOperator::Compose(f, g) => {
                let r = f.rank();
                assert_eq!(r, g.rank(), "composed operators must share rank");
                r
            }
            BandedOperator::FiniteRank { base, .. } => base.rank(),
        }
    }

    /// Coefficient ring joined over all entries.
    pub fn ring(&self) -> Result<Ring> {
        match self {
            BandedOperator::Identity { .. } => Ok(Ring::Q),
            BandedOperator::Mult { f, .. } => Ok(f.ring()),
            BandedOperator::MatMult { a } => join_rings(a.iter().flatten()),
            BandedOperator::ConnTau { h, a } => {
                let r = join_rings(a.iter().flatten())?;
                r.join(h.ring())
            }
            BandedOperator::Compose(f, g) => f.ring()?.join(g.ring()?),
            BandedOperator::FiniteRank { base, overrides } => {
                let mut r = base.ring()?;
                for (_, col) in overrides {
                    for l in col {
                        r = r.join(l.ring())?;
                    }
                }
                Ok(r)
            }
        }
    }

    /// A band bound `s` with `op(t^a·O^n) ⊆ t^{a−s}·O^n`.
    pub fn band(&self) -> i64 {
        match self {
            BandedOperator::Identity { .. } => 0,
            BandedOperator::Mult { f, .. } => {
                if f.is_zero() {
                    0
                } else {
                    -f.low_exp()
                }
            }
            BandedOperator::MatMult { a } => a
                .iter()
                .flatten()
                .filter(|l| !l.is_zero())
                .map(|l| -l.low_exp())
                .max()
                .unwrap_or(0),
            BandedOperator::ConnTau { h, a } => {
                let vh = if h.is_zero() { 0 } else { h.low_exp() };
                let s_deriv = 1 - vh;
                let s_mat = a
                    .iter()
                    .flatten()
                    .filter(|l| !l.is_zero())
                    .map(|l| -vh - l.low_exp())
                    .max();
                match s_mat {
                    Some(s) => s_deriv.max(s),
                    None => s_deriv,
                }
            }
            BandedOperator::Compose(f, g) => f.band() + g.band(),
            BandedOperator::FiniteRank { base, overrides } => {
                let mut s = base.band();
                for ((j, _), col) in overrides {
                    for l in col {
                        if !l.is_zero() {
                            s = s.max(j - l.low_exp());
                        }
                    }
                }
                s
            }
        }
    }

    /// Applies the operator to a coordinate vector of series.
    pub fn apply(&self, v: &[Laurent]) -> Result<Vec<Laurent>> {
        let n = self.rank();
        assert_eq!(v.len(), n, "vector length must equal operator rank");
        match self {
            BandedOperator::Identity { .. } => Ok(v.to_vec()),
            BandedOperator::Mult { f, .. } => v.iter().map(|c| f.mul(c)).collect(),
            BandedOperator::MatMult { a } => mat_apply(a, v),
            BandedOperator::ConnTau { h, a } => {
                let av = mat_apply(a, v)?;
                let mut out = Vec::with_capacity(n);
                for (c, extra) in v.iter().zip(av.iter()) {
                    out.push(h.mul(&c.d_dt().add(extra)?)?);
                }
                Ok(out)
            }
            BandedOperator::Compose(f, g) => f.apply(&g.apply(v)?),
            BandedOperator::FiniteRank { base, .. } => base.apply(v),
        }
    }

    /// Image of the basis vector `t^j·e_i` as a coordinate column.
    pub fn image(&self, j: i64, i: usize) -> Result<Vec<Laurent>> {
        if let BandedOperator::FiniteRank { base, overrides } = self {
            for ((oj, oi), col) in overrides {
                if *oj == j && *oi == i {
                    return Ok(col.clone());
                }
            }
            return base.image(j, i);
        }
        let ring = self.ring()?;
        let n = self.rank();
        let prec = j + 96;
        let mut v = vec![Laurent::zero(ring, prec); n];
        v[i] = Laurent::monomial(ring, Scalar::one(ring), j, prec);
        self.apply(&v)
    }
}

fn join_rings<'a, I: Iterator<Item = &'a Laurent>>(iter: I) -> Result<Ring> {
    let mut r = Ring::Q;
    for l in iter {
        r = r.join(l.ring())?;
    }
    Ok(r)
}

fn mat_apply(a: &[Vec<Laurent>], v: &[Laurent]) -> Result<Vec<Laurent>> {
    let n = a.len();
    let mut out = Vec::with_capacity(n);
    for row in a {
        assert_eq!(row.len(), n, "connection matrix must be square");
        let mut acc: Option<Laurent> = None;
        for (entry, c) in row.iter().zip(v.iter()) {
            if entry.is_zero() || c.is_zero() {
                continue;
            }
            let term = entry.mul(c)?;
            acc = Some(match acc {
                Some(prev) => prev.add(&term)?,
                None => term,
            });
        }
        out.push(match acc {
            Some(l) => l,
            None => Laurent::zero(v[0].ring(), i64::MAX / 4),
        });
    }
    Ok(out)
}

/// How many rows above the window floor are excluded from the surjectivity
/// certificate (they may legitimately be covered only by basis vectors below
/// the window).
const FLOOR_GUARD: i64 = 4;
/// How many bottom basis exponents the kernel must avoid.
const KERNEL_GUARD: i64 = 2;
/// Cap on the lattice depth `c`; keeping it small keeps the precision demand
/// on operator entries proportional to the window alone.
const DEPTH_CAP: i64 = 8;

/// Index of a banded Fredholm operator — the degree of its determinant
/// line, insensitive to finite-rank perturbations.
///
/// The computation picks a lattice `L = t^c·O^n` at the *deepest* depth
/// `c` whose covering strip is certified on the window, then returns
/// `dim(op(domain) mod L) − dim(domain ∩ levels below c)`.  Taking the
/// deepest depth keeps every exceptional level (where the operator has
/// pointwise kernel or cokernel) above `L`, so only the generic
/// filtration shift is counted — exceptional levels are finite-rank
/// phenomena and must not contribute.  The whole computation is repeated
/// on a window enlarged by 8 at both ends; since the two runs count
/// disjoint level ranges, any anomaly corrupts at most one of them and
/// surfaces as a stabilization mismatch.
///
/// Requires a field coefficient ring (`ℚ` or `ℚ(x)`).
pub fn index(op: &BandedOperator, window: (i64, i64)) -> Result<i64> {
    let ring = op.ring()?;
    if ring.nil_order().is_some() {
        return Err(Error::DomainViolation(
            "index requires a field coefficient ring".into(),
        ));
    }
    let (a, b) = window;
    assert!(a < b, "empty index window");
    let i1 = index_once(op, a, b)?;
    let i2 = index_once(op, a - 8, b + 8)?;
    if i1 != i2 {
        return Err(Error::WindowTooSmall(format!(
            "index did not stabilize under window growth ({i1} vs {i2} on ({a},{b}))"
        )));
    }
    Ok(i1)
}

fn index_once(op: &BandedOperator, a: i64, b: i64) -> Result<i64> {
    let n = op.rank();
    let s = op.band();
    let rows_lo = a - s;
    let guard = rows_lo + FLOOR_GUARD;
    let c_top = (b - s).min(DEPTH_CAP);
    if c_top <= guard || (b - a) <= 2 * KERNEL_GUARD {
        return Err(Error::WindowTooSmall(format!(
            "window ({a},{b}) leaves no certified strip for band {s}"
        )));
    }

    // Assemble all image columns once; verify the band bound as we go and
    // record how deep the columns are known so the depth search never reads
    // fabricated coefficients.
    let mut cols: Vec<Vec<Laurent>> = Vec::with_capacity(((b - a) as usize) * n);
    let mut min_prec = i64::MAX;
    for j in a..b {
        for i in 0..n {
            let col = op.image(j, i)?;
            for comp in &col {
                if !comp.is_zero() && comp.low_exp() < j - s {
                    return Err(Error::DomainViolation(format!(
                        "band bound violated: image of t^{j}·e_{i} reaches t^{}",
                        comp.low_exp()
                    )));
                }
                min_prec = min_prec.min(comp.prec());
            }
            cols.push(col);
        }
    }
    let eff_top = c_top.min(min_prec);
    if eff_top <= guard {
        return Err(Error::PrecisionExhausted(format!(
            "operator entries known below t^{min_prec} but the index window needs t^{}",
            guard + 1
        )));
    }

    let ring = op.ring()?;
    let build = |r_lo: i64, r_hi: i64, skip_cols: usize| -> SMat {
        let rows = ((r_hi - r_lo) as usize) * n;
        let mut m = SMat::zeros(ring, rows, cols.len() - skip_cols);
        for (ci, col) in cols.iter().enumerate().skip(skip_cols) {
            for (comp, l) in col.iter().enumerate() {
                for k in r_lo..r_hi {
                    let v = if k < l.prec() { l.coeff(k) } else { Scalar::zero(ring) };
                    if !v.is_zero() {
                        let r = ((k - r_lo) as usize) * n + comp;
                        m.set(r, ci - skip_cols, v.promote_to(ring).expect("ring join"));
                    }
                }
            }
        }
        m
    };

    // Take the deepest lattice depth whose strip above the guard is
    // certified surjective.  Depth levels where the operator degenerates
    // (pointwise kernel or cokernel) then stay above the lattice, where they
    // are finite-rank noise: their columns are cut to zero and their levels
    // are not charged against the image rank.
    let mut chosen: Option<i64> = None;
    for c in guard + 1..=eff_top {
        let m = build(guard, c, 0);
        if m.rank()? == ((c - guard) as usize) * n {
            chosen = Some(c);
            break;
        }
    }
    let c = chosen.ok_or_else(|| {
        Error::WindowTooSmall(format!(
            "no strip-surjective lattice depth in ({},{}]",
            guard, eff_top
        ))
    })?;

    let r_full = build(rows_lo, c, 0).rank()?;
    // Kernel elements hugging the window floor signal a solution space that
    // continues below the window.
    let skip = (KERNEL_GUARD as usize) * n;
    let r_wo = build(rows_lo, c, skip).rank()?;
    if r_full - r_wo != skip {
        return Err(Error::WindowTooSmall(
            "kernel of the windowed operator meets the window floor".into(),
        ));
    }
    Ok(r_full as i64 - (n as i64) * (c - a))
}

// ---------------------------------------------------------------------------
// Lattice frames and the commutator-determinant pairing.
// ---------------------------------------------------------------------------

/// Canonical column-echelon frame of a lattice on a finite window: column
/// with pivot `e` has unit coefficient 1 at `t^e`, coefficient 0 at every
/// other pivot exponent, and nilpotent entries (if any) below the valuation.
struct Frame {
    pivots: Vec<i64>,
    cols: Vec<Laurent>,
}

impl Frame {
    /// Columns with pivot exponent `< cut`, paired with their pivots.
    fn shallow(&self, cut: i64) -> Vec<(i64, Laurent)> {
        self.pivots
            .iter()
            .zip(self.cols.iter())
            .filter(|(p, _)| **p < cut)
            .map(|(p, c)| (*p, c.clone()))
            .collect()
    }
}

/// Reduced column echelon of a generating family, all columns truncated to
/// the window `t^hi`.  The result is canonical: it depends only on the span.
fn echelon_frame(gens: Vec<Laurent>, hi: i64) -> Result<Frame> {
    let mut work: Vec<Laurent> = Vec::new();
    for g in gens {
        if g.prec() < hi {
            return Err(Error::PrecisionExhausted(format!(
                "frame generator known below t^{} but the window needs t^{hi}",
                g.prec()
            )));
        }
        work.push(g.truncate(hi));
    }
    let mut placed: Vec<(i64, Laurent)> = Vec::new();
    let mut remaining = work;
    while !remaining.is_empty() {
        // Deterministic pick: smallest valuation, first occurrence.
        let mut best: Option<(usize, i64)> = None;
        let mut idx = 0;
        while idx < remaining.len() {
            if remaining[idx].is_zero() {
                remaining.remove(idx);
                continue;
            }
            let v = remaining[idx].val().map_err(|_| {
                Error::WindowTooSmall(
                    "frame column without a unit pivot inside the window".into(),
                )
            })?;
            match best {
                Some((_, bv)) if bv <= v => {}
                _ => best = Some((idx, v)),
            }
            idx += 1;
        }
        let Some((pick, p)) = best else { break };
        let mut col = remaining.remove(pick);
        col = col.scale(&col.coeff(p).inv()?)?;
        for other in remaining.iter_mut() {
            let c = other.coeff(p);
            if !c.is_zero() {
                *other = other.sub(&col.scale(&c)?)?;
            }
        }
        for (_, other) in placed.iter_mut() {
            let c = other.coeff(p);
            if !c.is_zero() {
                *other = other.sub(&col.scale(&c)?)?;
            }
        }
        placed.push((p, col));
    }
    placed.sort_by_key(|(p, _)| *p);
    for w in placed.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::WindowTooSmall(
                "frame pivots collided inside the window".into(),
            ));
        }
    }
    Ok(Frame {
        pivots: placed.iter().map(|(p, _)| *p).collect(),
        cols: placed.into_iter().map(|(_, c)| c).collect(),
    })
}

/// True iff the two series agree on all exponents below `hi`.
fn eq_below(a: &Laurent, b: &Laurent, hi: i64) -> bool {
    let lo = a.low_exp().min(b.low_exp()).min(hi);
    if a.prec() < hi || b.prec() < hi {
        return false;
    }
    for k in lo..hi {
        if a.coeff(k) != b.coeff(k) {
            return false;
        }
    }
    true
}

/// Determinant of the transition from a source family to the canonical frame
/// of the same lattice: solves `src·C = tgt` on the pivot rows (where the
/// target restricts to the identity) and verifies the identity on *all* rows
/// below `read_hi` before returning `det C`.
fn transition_det(
    src: &[(i64, Laurent)],
    tgt: &Frame,
    cut: i64,
    read_hi: i64,
    ring: Ring,
) -> Result<Scalar> {
    let tgt_cols: Vec<(i64, Laurent)> = tgt.shallow(cut);
    if src.len() != tgt_cols.len()
        || src
            .iter()
            .zip(tgt_cols.iter())
            .any(|((p, _), (q, _))| p != q)
    {
        return Err(Error::WindowTooSmall(
            "source and target frames disagree on the pivot ladder".into(),
        ));
    }
    let m = src.len();
    let mut s_p = SMat::zeros(ring, m, m);
    for (ci, (_, col)) in src.iter().enumerate() {
        for (ri, (p, _)) in tgt_cols.iter().enumerate() {
            let v = if *p < col.prec() { col.coeff(*p) } else { Scalar::zero(ring) };
            if !v.is_zero() {
                s_p.set(ri, ci, v.promote_to(ring)?);
            }
        }
    }
    let c = s_p.solve_square(&SMat::identity(ring, m))?;
    for (k, (_, tcol)) in tgt_cols.iter().enumerate() {
        let mut acc = Laurent::zero(ring, read_hi);
        for (ci, (_, scol)) in src.iter().enumerate() {
            let w = c.get(ci, k);
            if w.is_zero() {
                continue;
            }
            acc = acc.add(&scol.truncate(read_hi.min(scol.prec())).scale(w)?)?;
        }
        if !eq_below(&acc, &tcol.truncate(read_hi.min(tcol.prec())), read_hi) {
            return Err(Error::WindowTooSmall(
                "transition between frames failed verification off the pivot rows".into(),
            ));
        }
    }
    c.det()
}

struct LegInput<'a> {
    /// Inverse of the multiplier.
    h_inv: &'a Laurent,
    /// Valuation of the multiplier.
    v_h: i64,
    /// Shallow columns (pivot, column) of the source lattice's frame.
    heads: &'a [(i64, Laurent)],
    /// Canonical frame of `h⁻¹·t^B·O`.
    tail: &'a Frame,
    /// Canonical frame of the target lattice.
    tgt: &'a Frame,
}

fn leg_det(input: LegInput<'_>, b_p: i64, ring: Ring) -> Result<Scalar> {
    let mut src: Vec<(i64, Laurent)> = Vec::new();
    for (e, z) in input.heads {
        let prod = input.h_inv.mul(z)?;
        let pivot = e - input.v_h;
        if prod.prec() < b_p || prod.val()? != pivot {
            return Err(Error::WindowTooSmall(
                "head column lost its pivot under multiplication".into(),
            ));
        }
        src.push((pivot, prod));
    }
    for (p, col) in input.tail.pivots.iter().zip(input.tail.cols.iter()) {
        if *p < b_p {
            src.push((*p, col.clone()));
        }
    }
    src.sort_by_key(|(p, _)| *p);
    transition_det(&src, input.tgt, b_p, b_p, ring)
}

/// The super-symbol of two unit series, computed from relative determinants
/// between lattice frames — the independent cross-check for the closed-form
/// symbol.
///
/// Routes `O → x⁻¹O → (xy)⁻¹O` and `O → y⁻¹O → (xy)⁻¹O` are trivialised by
/// canonical frames on a window derived from `window`; the four transition
/// determinants assemble into the commutator ratio, multiplied by the Koszul
/// sign `(−1)^{v(f)v(g)}`.  The value is recomputed at `window + 8` and must
/// agree exactly.
pub fn symbol_oracle(f: &Laurent, g: &Laurent, window: i64) -> Result<Scalar> {
    let r1 = oracle_once(f, g, window)?;
    let r2 = oracle_once(f, g, window + 8)?;
    if r1 != r2 {
        return Err(Error::WindowTooSmall(format!(
            "symbol oracle did not stabilize between windows {window} and {}",
            window + 8
        )));
    }
    Ok(r1)
}

fn oracle_once(f: &Laurent, g: &Laurent, m: i64) -> Result<Scalar> {
    let ring = f.ring().join(g.ring())?;
    let f = f.promote_to(ring)?;
    let g = g.promote_to(ring)?;
    let vf = f
        .val()
        .map_err(|_| Error::NotAUnit("first argument is not a unit to working precision".into()))?;
    let vg = g
        .val()
        .map_err(|_| Error::NotAUnit("second argument is not a unit to working precision".into()))?;
    let x_inv = f.inv()?;
    let y_inv = g.inv()?;
    let fg = f.mul(&g)?;
    let xy_inv = fg.inv()?;

    // Window layout: heads split at B, transitions read below B', frame
    // entries carried to B'' so multiplied heads stay exact below B'.
    let b = [m, 1, -f.low_exp(), -g.low_exp(), 1 - vf, 1 - vg]
        .into_iter()
        .max()
        .unwrap();
    let b_p = b + vf.abs() + vg.abs() + 8;
    let b_pp = b_p + (-x_inv.low_exp()).max(0) + (-y_inv.low_exp()).max(0) + 2;
    for (series, name) in [(&x_inv, "f"), (&y_inv, "g"), (&xy_inv, "f·g")] {
        if series.prec() < b_pp {
            return Err(Error::PrecisionExhausted(format!(
                "inverse of {name} known below t^{} but the oracle window needs t^{b_pp}",
                series.prec()
            )));
        }
    }

    let gens = |h_inv: &Laurent, from: i64, count: i64| -> Vec<Laurent> {
        (0..count).map(|j| h_inv.shift(from + j)).collect()
    };
    // Canonical frames of the three non-trivial lattices...
    let xf = echelon_frame(gens(&x_inv, 0, b_pp + vf), b_pp)?;
    let yf = echelon_frame(gens(&y_inv, 0, b_pp + vg), b_pp)?;
    let zf = echelon_frame(gens(&xy_inv, 0, b_pp + vf + vg), b_pp)?;
    // ...and of the two tail lattices h⁻¹·t^B·O shared by each pair of legs.
    let tx = echelon_frame(gens(&x_inv, b, b_p - b + vf), b_pp)?;
    let ty = echelon_frame(gens(&y_inv, b, b_p - b + vg), b_pp)?;

    // Shallow frame of O is just the monomial ladder.
    let o_heads: Vec<(i64, Laurent)> = (0..b)
        .map(|j| (j, Laurent::monomial(ring, Scalar::one(ring), j, b_pp)))
        .collect();
    let x_heads = xf.shallow(b);
    let y_heads = yf.shallow(b);

    let dx1 = leg_det(
        LegInput { h_inv: &x_inv, v_h: vf, heads: &o_heads, tail: &tx, tgt: &xf },
        b_p,
        ring,
    )?;
    let e2 = leg_det(
        LegInput { h_inv: &y_inv, v_h: vg, heads: &x_heads, tail: &ty, tgt: &zf },
        b_p,
        ring,
    )?;
    let e1 = leg_det(
        LegInput { h_inv: &y_inv, v_h: vg, heads: &o_heads, tail: &ty, tgt: &yf },
        b_p,
        ring,
    )?;
    let dx2 = leg_det(
        LegInput { h_inv: &x_inv, v_h: vf, heads: &y_heads, tail: &tx, tgt: &zf },
        b_p,
        ring,
    )?;

    let plain = dx1.mul(&e2)?.div(&e1.mul(&dx2)?)?;
    let sign = Scalar::from_int(ring, koszul_sign(vf, vg));
    sign.mul(&plain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    const W: (i64, i64) = (-8, 8);

    fn lt(terms: &[(i64, i64)]) -> Laurent {
        let ts: Vec<(i64, Scalar)> = terms
            .iter()
            .map(|(k, c)| (*k, Scalar::from_int(Ring::Q, *c)))
            .collect();
        Laurent::from_terms(Ring::Q, &ts, 64)
    }

    #[test]
    fn koszul_sign_values() {
        assert_eq!(koszul_sign(1, 1), -1);
        assert_eq!(koszul_sign(0, 1), 1);
        assert_eq!(koszul_sign(0, 0), 1);
        assert_eq!(koszul_sign(-3, 5), -1);
    }

    #[test]
    fn graded_line_tag_parity() {
        assert_eq!(GradedLineTag::new(-3).parity(), 1);
        assert_eq!(GradedLineTag::new(4).parity(), 0);
        assert_eq!(
            GradedLineTag::new(2).tensor(&GradedLineTag::new(5)).degree,
            7
        );
    }

    #[test]
    fn index_of_identity_and_multiplications() {
        let id = BandedOperator::Identity { rank: 2 };
        assert_eq!(index(&id, W).unwrap(), 0);

        let mt = BandedOperator::Mult { f: lt(&[(1, 1)]), rank: 1 };
        assert_eq!(index(&mt, W).unwrap(), -1);

        // val(f) = 2 on rank 2: −n·v = −4.
        let f = lt(&[(2, 3), (3, 3)]);
        let mf = BandedOperator::Mult { f, rank: 2 };
        assert_eq!(index(&mf, W).unwrap(), -4);

        let minv = BandedOperator::Mult { f: lt(&[(-3, 1), (0, 2)]), rank: 1 };
        assert_eq!(index(&minv, W).unwrap(), 3);
    }

    #[test]
    fn index_of_derivative_and_regular_singular() {
        let one = lt(&[(0, 1)]);
        let zero = Laurent::zero(Ring::Q, 64);
        let ddt = BandedOperator::ConnTau { h: one.clone(), a: vec![vec![zero]] };
        assert_eq!(index(&ddt, W).unwrap(), 1);

        // d/dt + κ/t, κ = 7/2: still index 1.
        let kappa = Laurent::monomial(Ring::Q, Scalar::from_ratio(Ring::Q, 7, 2), -1, 64);
        let rs = BandedOperator::ConnTau { h: one.clone(), a: vec![vec![kappa]] };
        assert_eq!(index(&rs, W).unwrap(), 1);

        // Resonant integer residues keep index 1: kernel and cokernel both
        // acquire one dimension.
        for k in [-3i64, 3] {
            let kappa = Laurent::monomial(Ring::Q, Scalar::from_int(Ring::Q, k), -1, 64);
            let rs = BandedOperator::ConnTau { h: one.clone(), a: vec![vec![kappa]] };
            assert_eq!(index(&rs, W).unwrap(), 1, "kappa = {k}");
        }
    }

    #[test]
    fn index_of_irregular_connection_over_qx() {
        // d/dt + x·t⁻² on ℚ(x)((t)): index 2.
        let ring = Ring::Qx;
        let one = Laurent::one(ring, 64);
        let a = Laurent::monomial(ring, Scalar::x(ring), -2, 64);
        let op = BandedOperator::ConnTau { h: one, a: vec![vec![a]] };
        assert_eq!(index(&op, W).unwrap(), 2);
    }

    #[test]
    fn index_rejects_nilpotent_rings() {
        let ring = Ring::QNil(2);
        let f = Laurent::t(ring, 32);
        let op = BandedOperator::Mult { f, rank: 1 };
        match index(&op, W) {
            Err(Error::DomainViolation(_)) => {}
            other => panic!("expected DomainViolation, got {other:?}"),
        }
    }

    #[test]
    fn index_additive_under_composition() {
        let mut rng = SplitMix64::new(0x1a7e_90de);
        for _ in 0..6 {
            let vf = rng.int_in(-2, 3);
            let vg = rng.int_in(-2, 3);
            let f = lt(&[(vf, rng.nonzero_in(4)), (vf + 1, rng.int_in(-4, 4))]);
            let g = lt(&[(vg, rng.nonzero_in(4)), (vg + 2, rng.int_in(-4, 4))]);
            let a = BandedOperator::Mult { f: f.clone(), rank: 1 };
            let b = BandedOperator::Mult { f: g.clone(), rank: 1 };
            let ab = BandedOperator::Compose(Box::new(a.clone()), Box::new(b.clone()));
            assert_eq!(
                index(&ab, W).unwrap(),
                index(&a, W).unwrap() + index(&b, W).unwrap()
            );
        }
    }

    #[test]
    fn index_ignores_finite_rank_perturbation() {
        let f = lt(&[(1, 1), (2, 5)]);
        let base = BandedOperator::Mult { f: f.clone(), rank: 1 };
        let bump_col = vec![lt(&[(0, 3), (2, -1)])];
        let pert = BandedOperator::FiniteRank {
            base: Box::new(base.clone()),
            overrides: vec![((2, 0), bump_col), ((3, 0), vec![Laurent::zero(Ring::Q, 64)])],
        };
        assert_eq!(index(&base, W).unwrap(), index(&pert, W).unwrap());
    }

    #[test]
    fn oracle_monomial_and_constant_values() {
        let t = lt(&[(1, 1)]);
        let r = lt(&[(0, 5)]);
        // {t,t} = −1.
        assert_eq!(
            symbol_oracle(&t, &t, 8).unwrap(),
            Scalar::from_int(Ring::Q, -1)
        );
        // {r,t} = r⁻¹.
        assert_eq!(
            symbol_oracle(&r, &t, 8).unwrap(),
            Scalar::from_ratio(Ring::Q, 1, 5)
        );
        // {t²·3, 5}: r_g^{v(f)} = 25.
        let f = lt(&[(2, 3)]);
        assert_eq!(
            symbol_oracle(&f, &r, 8).unwrap(),
            Scalar::from_int(Ring::Q, 25)
        );
    }

    #[test]
    fn oracle_unipotent_pair_is_trivial() {
        let f = lt(&[(0, 1), (1, 1)]);
        let g = lt(&[(0, 1), (1, 2)]);
        assert_eq!(
            symbol_oracle(&f, &g, 8).unwrap(),
            Scalar::one(Ring::Q)
        );
    }

    #[test]
    fn oracle_detects_wild_pair() {
        // (1−at, 1−bt⁻¹) with b nilpotent: the pairing is 1+ab.
        let ring = Ring::QNil(2);
        let eps = Scalar::eps(ring).unwrap();
        let one = Scalar::one(ring);
        let a = Scalar::from_int(ring, 2);
        let f = Laurent::from_terms(ring, &[(0, one.clone()), (1, a.neg())], 64);
        let g = Laurent::from_terms(ring, &[(-1, eps.neg()), (0, one.clone())], 64);
        let expected = one.add(&Scalar::from_int(ring, 2).mul(&eps).unwrap()).unwrap();
        assert_eq!(symbol_oracle(&f, &g, 8).unwrap(), expected);

        // {t, 1−bt⁻¹} = 1.
        let t = Laurent::t(ring, 64);
        assert_eq!(symbol_oracle(&t, &g, 8).unwrap(), Scalar::one(ring));
    }

    #[test]
    fn oracle_inverse_symmetry() {
        let f = lt(&[(-1, 2), (0, 1), (1, 3)]);
        let g = lt(&[(1, 1), (2, 1)]);
        let a = symbol_oracle(&f, &g, 8).unwrap();
        let b = symbol_oracle(&g, &f, 8).unwrap();
        assert!(a.mul(&b).unwrap().is_one());
    }
}
