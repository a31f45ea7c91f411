//! Local meromorphic connections on `K((t))ⁿ`: gauge action, cyclic
//! vectors, irregularity, ε-degree, admissible and regular-singular
//! structure detection, and ramified pullback/pushforward.
//!
//! A connection is stored as `∇ = d + A_t·dt (+ A_x·dx)` with `A_t`,
//! `A_x` matrices of Laurent series in the fixed basis; the standard
//! lattice is the `O`-span of that basis.  Everything here is basis
//! level by design: structure detection checks the stored basis and
//! never searches for a better lattice.
//!
//! The ε-degree is computed by the closed formula
//! `i(∇) + (v(ν)+1)·n` from the irregularity `i(∇)` (read off a cyclic
//! vector for `τ = t∂_t`); the finite-window Fredholm index of
//! `∇(τ_ν)` provides an independent route to the same integer and the
//! two are compared in the test batteries, never collapsed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::laurent::Laurent;
use crate::linalg::SMat;
use crate::rng::SplitMix64;
use crate::scalars::{Ring, Scalar};
use crate::tate::BandedOperator;

/// A meromorphic connection `∇ = d + A_t·dt (+ A_x·dx)` on `R((t))ⁿ`
/// in a fixed basis.  `A_x` is absent for purely relative connections.
#[derive(Clone, Debug)]
pub struct Connection {
    ring: Ring,
    rank: usize,
    a_t: Vec<Vec<Laurent>>,
    a_x: Option<Vec<Vec<Laurent>>>,
}

/// A cyclic vector `e` for the operator `τ = ∇(h·∂_t)` together with the
/// coefficients of the minimal relation
/// `τⁿe = a_{n−1}·τ^{n−1}e + … + a_0·e`.
#[derive(Clone, Debug)]
pub struct CyclicData {
    /// The cyclic vector, as a column over `R((t))`.
    pub e: Vec<Laurent>,
    /// Relation coefficients `a_0 … a_{n−1}`.
    pub a: Vec<Laurent>,
}

/// The shape certificate of an admissible connection in the stored
/// basis: `A_t = g·t^{−m}` with `g` over `O` and `g(0)` invertible, and
/// `A_x = η·t^{−m+1}` with `η` over `O`.
#[derive(Clone, Debug)]
pub struct AdmissibleData {
    /// Vertical pole order (`≥ 2`).
    pub m: i64,
    /// `t^m·A_t`, a matrix over `O` with invertible constant term.
    pub g: Vec<Vec<Laurent>>,
    /// `t^{m−1}·A_x`, a matrix over `O`.
    pub eta: Vec<Vec<Laurent>>,
}

/// The residue data of a regular-singular connection in the stored
/// basis.
#[derive(Clone, Debug)]
pub struct RegularSingularData {
    /// Residue matrix: the `t⁰`-coefficient of `t·A_t`.
    pub kappa: Vec<Vec<Scalar>>,
    /// Fiber connection matrix `A_x(0)` (zero when `A_x` is absent).
    pub eta0: Vec<Vec<Scalar>>,
    /// The regular part `A_t − κ·t⁻¹`, a matrix over `O`.
    pub tail: Vec<Vec<Laurent>>,
}

impl Connection {
    /// Builds a connection, promoting all entries to a common ring and
    /// truncating to a common precision.  Shape is validated here;
    /// flatness is a separate check ([`Connection::is_flat`]) so that
    /// deliberately broken inputs can exercise the detection errors.
    pub fn new(a_t: Vec<Vec<Laurent>>, a_x: Option<Vec<Vec<Laurent>>>) -> Result<Connection> {
        let rank = a_t.len();
        if rank == 0 {
            return Err(Error::DomainViolation("connection rank must be ≥ 1".into()));
        }
        let mut ring = Ring::Q;
        let mut prec = i64::MAX;
        let check = |m: &Vec<Vec<Laurent>>, ring: &mut Ring, prec: &mut i64| -> Result<()> {
            if m.len() != rank || m.iter().any(|row| row.len() != rank) {
                return Err(Error::DomainViolation(format!(
                    "connection matrix must be {rank}×{rank}"
                )));
            }
            for row in m {
                for entry in row {
                    *ring = ring.join(entry.ring())?;
                    *prec = (*prec).min(entry.prec());
                }
            }
            Ok(())
        };
        check(&a_t, &mut ring, &mut prec)?;
        if let Some(ax) = &a_x {
            check(ax, &mut ring, &mut prec)?;
        }
        let normalize = |m: Vec<Vec<Laurent>>| -> Result<Vec<Vec<Laurent>>> {
            m.into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|e| Ok(e.promote_to(ring)?.truncate(prec)))
                        .collect()
                })
                .collect()
        };
        Ok(Connection {
            ring,
            rank,
            a_t: normalize(a_t)?,
            a_x: match a_x {
                Some(ax) => Some(normalize(ax)?),
                None => None,
            },
        })
    }

    /// Rank `n` of the underlying free module.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Common coefficient ring of all entries.
    pub fn ring(&self) -> Ring {
        self.ring
    }

    /// The `dt`-part matrix.
    pub fn a_t(&self) -> &Vec<Vec<Laurent>> {
        &self.a_t
    }

    /// The `dx`-part matrix, when the connection has an absolute part.
    pub fn a_x(&self) -> Option<&Vec<Vec<Laurent>>> {
        self.a_x.as_ref()
    }

    /// Integrability to the stored precision:
    /// `∂_x(A_t) − ∂_t(A_x) + [A_x, A_t] = 0` coefficientwise.
    /// A connection without absolute part is flat by convention.
    pub fn is_flat(&self) -> Result<bool> {
        let Some(a_x) = &self.a_x else {
            return Ok(true);
        };
        let mut defect = mat_sub(&mat_d_dx(&self.a_t), &mat_d_dt(a_x))?;
        let comm = mat_sub(&mat_mul(a_x, &self.a_t)?, &mat_mul(&self.a_t, a_x)?)?;
        defect = mat_add(&defect, &comm)?;
        Ok(defect.iter().all(|row| row.iter().all(Laurent::is_zero)))
    }
}

/// Change of basis by a matrix `G` invertible over `R((t))`:
/// `A ↦ G·A·G⁻¹ − (dG)·G⁻¹` in both the `dt` and `dx` components.
pub fn gauge(c: &Connection, g: &[Vec<Laurent>]) -> Result<Connection> {
    if g.len() != c.rank || g.iter().any(|row| row.len() != c.rank) {
        return Err(Error::DomainViolation(format!(
            "gauge matrix must be {0}×{0}",
            c.rank
        )));
    }
    let g: Vec<Vec<Laurent>> = g.to_vec();
    let g_inv = mat_inv(&g)?;
    let transform = |a: &Vec<Vec<Laurent>>, dg: &Vec<Vec<Laurent>>| -> Result<Vec<Vec<Laurent>>> {
        let conj = mat_mul(&mat_mul(&g, a)?, &g_inv)?;
        mat_sub(&conj, &mat_mul(dg, &g_inv)?)
    };
    let a_t = transform(&c.a_t, &mat_d_dt(&g))?;
    let a_x = match &c.a_x {
        Some(ax) => Some(transform(ax, &mat_d_dx(&g))?),
        None => None,
    };
    Connection::new(a_t, a_x)
}

/// One application of `τ = ∇(h·∂_t)`: `v ↦ h·(∂_t v + A_t·v)`.
fn tau_apply(c: &Connection, h: &Laurent, v: &[Laurent]) -> Result<Vec<Laurent>> {
    let mut out = Vec::with_capacity(c.rank);
    for i in 0..c.rank {
        let mut acc = v[i].d_dt();
        for j in 0..c.rank {
            if c.a_t[i][j].is_zero() || v[j].is_zero() {
                continue;
            }
            acc = acc.add(&c.a_t[i][j].mul(&v[j])?)?;
        }
        out.push(h.mul(&acc)?);
    }
    Ok(out)
}

/// Deterministic-first candidate for the cyclic-vector search.
fn cyclic_candidate(ring: Ring, n: usize, prec: i64, attempt: usize) -> Vec<Laurent> {
    let unit = |i: usize| -> Vec<Laurent> {
        (0..n)
            .map(|j| {
                if i == j {
                    Laurent::one(ring, prec)
                } else {
                    Laurent::zero(ring, prec)
                }
            })
            .collect()
    };
    if attempt < n {
        return unit(attempt);
    }
    match attempt - n {
        // All ones, then staggered powers of t — distinct exponents make
        // the candidates transversal to eigen-decompositions.
        0 => (0..n).map(|_| Laurent::one(ring, prec)).collect(),
        1 => (0..n)
            .map(|j| Laurent::monomial(ring, Scalar::one(ring), j as i64, prec))
            .collect(),
        2 => (0..n)
            .map(|j| Laurent::monomial(ring, Scalar::one(ring), -(j as i64), prec))
            .collect(),
        3 => (0..n)
            .map(|j| Laurent::from_scalar(ring, Scalar::from_int(ring, j as i64 + 1), prec))
            .collect(),
        k => {
            // Seeded sparse fallback: reproducible across runs.
            let mut rng = SplitMix64::new(0xC1C1_1C00 + k as u64);
            let mut v: Vec<Laurent> = (0..n)
                .map(|_| {
                    let coeff = rng.int_in(-3, 3);
                    let shift = rng.int_in(0, 2);
                    if coeff == 0 {
                        Laurent::zero(ring, prec)
                    } else {
                        Laurent::monomial(ring, Scalar::from_int(ring, coeff), shift, prec)
                    }
                })
                .collect();
            if v.iter().all(Laurent::is_zero) {
                v[0] = Laurent::one(ring, prec);
            }
            v
        }
    }
}

/// Maximum number of cyclic-vector candidates tried before giving up.
const CYCLIC_ATTEMPTS: usize = 64;

/// Finds a cyclic vector for `τ = ∇(h·∂_t)` and the coefficients of the
/// relation `τⁿe = Σ a_i·τⁱe`, trying coordinate vectors first, then
/// fixed deterministic combinations, then seeded sparse vectors.
pub fn cyclic_vector(c: &Connection, h: &Laurent) -> Result<CyclicData> {
    let ring = c.ring.join(h.ring())?;
    let h = h.promote_to(ring)?;
    let prec = c.a_t[0][0].prec().min(h.prec());
    let n = c.rank;
    for attempt in 0..CYCLIC_ATTEMPTS {
        let e: Vec<Laurent> = cyclic_candidate(ring, n, prec, attempt)
            .into_iter()
            .map(|v| v.promote_to(ring).expect("same ring"))
            .collect();
        // Columns e, τe, …, τ^{n−1}e and the target τⁿe.
        let mut cols: Vec<Vec<Laurent>> = vec![e.clone()];
        for _ in 0..n {
            let next = tau_apply(c, &h, cols.last().expect("nonempty"))?;
            cols.push(next);
        }
        let target = cols.pop().expect("nonempty");
        // Solve [e | τe | …]·a = τⁿe; failure just means this candidate
        // generates a proper submodule.
        let m: Vec<Vec<Laurent>> = (0..n)
            .map(|r| (0..n).map(|ccol| cols[ccol][r].clone()).collect())
            .collect();
        match mat_solve(&m, &target) {
            Ok(a) => return Ok(CyclicData { e, a }),
            Err(Error::NotInvertible(_)) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(Error::CyclicSearchFailed(format!(
        "no cyclic vector among {CYCLIC_ATTEMPTS} candidates; consider raising precision"
    )))
}

/// Irregularity `i(∇) = max(0, max_i −v(a_i))` read off a cyclic vector
/// for `τ = t∂_t`.
pub fn irregularity(c: &Connection) -> Result<i64> {
    let prec = c.a_t[0][0].prec();
    let data = cyclic_vector(c, &Laurent::t(c.ring, prec))?;
    let mut irr = 0i64;
    for a in &data.a {
        if a.is_zero() {
            continue;
        }
        irr = irr.max(-a.val()?);
    }
    Ok(irr)
}

/// Degree of the ε-line: `i(∇) + (v(ν)+1)·n`, for `ν = w·dt` given by
/// its unit coefficient `w`.  The same integer is computable as the
/// Fredholm index of `∇(τ_ν)` (see [`tau_nu_operator`]); the two routes
/// are kept independent and compared in the test batteries.
pub fn epsilon_degree(c: &Connection, nu: &Laurent) -> Result<i64> {
    let v = nu.val()?;
    let irr = irregularity(c)?;
    Ok(irr + (v + 1) * c.rank as i64)
}

/// The banded operator `∇(τ_ν) = w⁻¹·(∂_t + A_t)` for `ν = w·dt` — the
/// independent index route to the ε-degree.
pub fn tau_nu_operator(c: &Connection, nu: &Laurent) -> Result<BandedOperator> {
    let ring = c.ring.join(nu.ring())?;
    let h = nu.promote_to(ring)?.inv()?;
    let a = c
        .a_t
        .iter()
        .map(|row| row.iter().map(|e| e.promote_to(ring)).collect())
        .collect::<Result<Vec<Vec<Laurent>>>>()?;
    Ok(BandedOperator::ConnTau { h, a })
}

/// Pole order bookkeeping: the lowest exponent with a nonzero
/// coefficient across all matrix entries, or `None` for the zero matrix.
fn mat_low_exp(m: &[Vec<Laurent>]) -> Option<i64> {
    let mut low: Option<i64> = None;
    for row in m {
        for e in row {
            if e.is_zero() {
                continue;
            }
            low = Some(match low {
                Some(l) => l.min(e.low_exp()),
                None => e.low_exp(),
            });
        }
    }
    low
}

/// Checks the admissible shape in the stored basis: `A_t = g·t^{−m}`
/// with `m ≥ 2`, `g` over `O`, `g(0)` invertible, and `A_x = η·t^{−m+1}`
/// with `η` over `O`.
pub fn detect_admissible(c: &Connection) -> Result<AdmissibleData> {
    let Some(a_x) = &c.a_x else {
        return Err(Error::NotAdmissible(
            "connection has no absolute (dx) part".into(),
        ));
    };
    let m = match mat_low_exp(&c.a_t) {
        Some(low) => -low,
        None => {
            return Err(Error::NotAdmissible(
                "A_t is zero; no pole order m ≥ 2 exists".into(),
            ))
        }
    };
    if m < 2 {
        return Err(Error::NotAdmissible(format!(
            "vertical pole order m = {m} is below the required m ≥ 2"
        )));
    }
    if let Some(low) = mat_low_exp(a_x) {
        if low < 1 - m {
            return Err(Error::NotAdmissible(format!(
                "A_x has pole order {} but admissibility caps it at m−1 = {}",
                -low,
                m - 1
            )));
        }
    }
    let g: Vec<Vec<Laurent>> = c
        .a_t
        .iter()
        .map(|row| row.iter().map(|e| e.shift(m)).collect())
        .collect();
    let eta: Vec<Vec<Laurent>> = a_x
        .iter()
        .map(|row| row.iter().map(|e| e.shift(m - 1)).collect())
        .collect();
    // g(0) must be invertible over the coefficient ring.
    let n = c.rank;
    let mut g0 = SMat::zeros(c.ring, n, n);
    for (i, row) in g.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            if e.prec() < 1 {
                return Err(Error::PrecisionExhausted(
                    "admissibility needs the constant term of t^m·A_t".into(),
                ));
            }
            g0.set(i, j, e.coeff(0));
        }
    }
    if g0.solve_square(&SMat::identity(c.ring, n)).is_err() {
        return Err(Error::NotAdmissible(
            "constant term g(0) of t^m·A_t is not invertible".into(),
        ));
    }
    Ok(AdmissibleData { m, g, eta })
}

/// Reads off regular-singular data in the stored basis: requires
/// `A_t` with pole order ≤ 1 and (when present) `A_x` over `O`.
pub fn regular_singular_data(c: &Connection) -> Result<RegularSingularData> {
    if let Some(low) = mat_low_exp(&c.a_t) {
        if low < -1 {
            return Err(Error::NotRegularSingularInBasis(format!(
                "A_t has pole order {} > 1 in the stored basis",
                -low
            )));
        }
    }
    if let Some(a_x) = &c.a_x {
        if let Some(low) = mat_low_exp(a_x) {
            if low < 0 {
                return Err(Error::NotRegularSingularInBasis(
                    "A_x has a pole; the stored lattice is not horizontally stable".into(),
                ));
            }
        }
    }
    let n = c.rank;
    let coeff_at = |e: &Laurent, k: i64| -> Result<Scalar> {
        if e.prec() <= k {
            return Err(Error::PrecisionExhausted(format!(
                "regular-singular data needs the t^{k} coefficient"
            )));
        }
        Ok(e.coeff(k))
    };
    let mut kappa = Vec::with_capacity(n);
    let mut eta0 = Vec::with_capacity(n);
    let mut tail = Vec::with_capacity(n);
    for i in 0..n {
        let mut krow = Vec::with_capacity(n);
        let mut erow = Vec::with_capacity(n);
        let mut trow = Vec::with_capacity(n);
        for j in 0..n {
            let k = coeff_at(&c.a_t[i][j], -1)?;
            let res_part = Laurent::monomial(c.ring, k.clone(), -1, c.a_t[i][j].prec());
            trow.push(c.a_t[i][j].sub(&res_part)?);
            krow.push(k);
            erow.push(match &c.a_x {
                Some(ax) => coeff_at(&ax[i][j], 0)?,
                None => Scalar::zero(c.ring),
            });
        }
        kappa.push(krow);
        eta0.push(erow);
        tail.push(trow);
    }
    Ok(RegularSingularData { kappa, eta0, tail })
}

/// Ramified pullback along `t = s^e`: exponents stretch by `e` and the
/// `dt`-part picks up the Jacobian `dt = e·s^{e−1}·ds`.
pub fn pullback_ramified(c: &Connection, e: u32) -> Result<Connection> {
    if e == 0 {
        return Err(Error::DomainViolation("ramification degree must be ≥ 1".into()));
    }
    let jac = Scalar::from_int(c.ring, e as i64);
    let a_t = c
        .a_t
        .iter()
        .map(|row| {
            row.iter()
                .map(|entry| entry.stretch(e).shift(e as i64 - 1).scale(&jac))
                .collect()
        })
        .collect::<Result<Vec<Vec<Laurent>>>>()?;
    let a_x = c
        .a_x
        .as_ref()
        .map(|ax| {
            ax.iter()
                .map(|row| row.iter().map(|entry| entry.stretch(e)).collect())
                .collect::<Vec<Vec<Laurent>>>()
        });
    Connection::new(a_t, a_x)
}

/// Pushforward along `t = s^e` of a connection over `K((s))`: the target
/// has rank `n·e` over `K((t))` in the basis `{sʲ·v_k : 0 ≤ j < e}`
/// (index `j·n + k`), with `∇(∂_t) = (e·s^{e−1})⁻¹·∇(∂_s)`.
pub fn pushforward(c: &Connection, e: u32) -> Result<Connection> {
    if e == 0 {
        return Err(Error::DomainViolation("ramification degree must be ≥ 1".into()));
    }
    let ee = e as i64;
    let n = c.rank;
    let big = n * e as usize;
    let prec_s = c.a_t[0][0].prec();
    let prec_t = prec_s.div_euclid(ee).max(2);
    let inv_e = Scalar::from_ratio(c.ring, 1, ee);
    let mut a_t: Vec<Vec<Laurent>> =
        vec![vec![Laurent::zero(c.ring, prec_t); big]; big];
    let mut a_x: Option<Vec<Vec<Laurent>>> = c
        .a_x
        .as_ref()
        .map(|_| vec![vec![Laurent::zero(c.ring, prec_t); big]; big]);
    for j in 0..ee {
        for k in 0..n {
            let col = (j as usize) * n + k;
            // (1/e)·j·t⁻¹ on the diagonal: ∂_t(sʲ) = (j/e)·sʲ/t.
            if j != 0 {
                let diag = Laurent::monomial(
                    c.ring,
                    inv_e.mul(&Scalar::from_int(c.ring, j))?,
                    -1,
                    prec_t,
                );
                a_t[col][col] = a_t[col][col].add(&diag)?;
            }
            for l in 0..n {
                // s^{j−e+1}·(A_s)_{l,k} distributed over residue classes.
                let w = c.a_t[l][k].shift(j + 1 - ee);
                for r in 0..e {
                    let comp = w.unstretch(e, r).scale(&inv_e)?;
                    if comp.is_zero() {
                        continue;
                    }
                    let row = (r as usize) * n + l;
                    a_t[row][col] = a_t[row][col].add(&comp)?;
                }
                if let (Some(out), Some(ax)) = (a_x.as_mut(), c.a_x.as_ref()) {
                    let wx = ax[l][k].shift(j);
                    for r in 0..e {
                        let comp = wx.unstretch(e, r);
                        if comp.is_zero() {
                            continue;
                        }
                        let row = (r as usize) * n + l;
                        out[row][col] = out[row][col].add(&comp)?;
                    }
                }
            }
        }
    }
    Connection::new(a_t, a_x)
}

/// Block-diagonal direct sum.  The absolute part is kept only when both
/// summands carry one.
pub fn direct_sum(c1: &Connection, c2: &Connection) -> Result<Connection> {
    let ring = c1.ring.join(c2.ring)?;
    let n = c1.rank + c2.rank;
    let prec = c1.a_t[0][0].prec().min(c2.a_t[0][0].prec());
    let embed = |m1: &Vec<Vec<Laurent>>, m2: &Vec<Vec<Laurent>>| -> Result<Vec<Vec<Laurent>>> {
        let mut out = vec![vec![Laurent::zero(ring, prec); n]; n];
        for (i, row) in m1.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out[i][j] = e.promote_to(ring)?;
            }
        }
        for (i, row) in m2.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out[c1.rank + i][c1.rank + j] = e.promote_to(ring)?;
            }
        }
        Ok(out)
    };
    let a_t = embed(&c1.a_t, &c2.a_t)?;
    let a_x = match (&c1.a_x, &c2.a_x) {
        (Some(x1), Some(x2)) => Some(embed(x1, x2)?),
        _ => None,
    };
    Connection::new(a_t, a_x)
}

/// Dual connection: `A ↦ −Aᵀ` in both components.
pub fn dual(c: &Connection) -> Result<Connection> {
    let flip = |m: &Vec<Vec<Laurent>>| -> Vec<Vec<Laurent>> {
        (0..m.len())
            .map(|i| (0..m.len()).map(|j| m[j][i].neg()).collect())
            .collect()
    };
    Connection::new(flip(&c.a_t), c.a_x.as_ref().map(flip))
}

/// Tensor product: `A = A₁⊗I + I⊗A₂` on the basis `v_i ⊗ w_k` with
/// index `i·n₂ + k`.  The absolute part is kept only when both factors
/// carry one.
pub fn tensor(c1: &Connection, c2: &Connection) -> Result<Connection> {
    let ring = c1.ring.join(c2.ring)?;
    let (n1, n2) = (c1.rank, c2.rank);
    let n = n1 * n2;
    let prec = c1.a_t[0][0].prec().min(c2.a_t[0][0].prec());
    let combine = |m1: &Vec<Vec<Laurent>>, m2: &Vec<Vec<Laurent>>| -> Result<Vec<Vec<Laurent>>> {
        let mut out = vec![vec![Laurent::zero(ring, prec); n]; n];
        for i in 0..n1 {
            for j in 0..n1 {
                for k in 0..n2 {
                    for l in 0..n2 {
                        let (row, col) = (i * n2 + k, j * n2 + l);
                        let mut acc = out[row][col].clone();
                        if i == j {
                            acc = acc.add(&m2[k][l].promote_to(ring)?)?;
                        }
                        if k == l {
                            acc = acc.add(&m1[i][j].promote_to(ring)?)?;
                        }
                        out[row][col] = acc;
                    }
                }
            }
        }
        Ok(out)
    };
    let a_t = combine(&c1.a_t, &c2.a_t)?;
    let a_x = match (&c1.a_x, &c2.a_x) {
        (Some(x1), Some(x2)) => Some(combine(x1, x2)?),
        _ => None,
    };
    Connection::new(a_t, a_x)
}

// ---- matrix helpers over Laurent series ------------------------------

pub(crate) fn mat_d_dt(m: &[Vec<Laurent>]) -> Vec<Vec<Laurent>> {
    m.iter()
        .map(|row| row.iter().map(Laurent::d_dt).collect())
        .collect()
}

fn mat_d_dx(m: &[Vec<Laurent>]) -> Vec<Vec<Laurent>> {
    m.iter()
        .map(|row| row.iter().map(Laurent::d_dx).collect())
        .collect()
}

fn mat_add(a: &[Vec<Laurent>], b: &[Vec<Laurent>]) -> Result<Vec<Vec<Laurent>>> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.add(y)).collect())
        .collect()
}

fn mat_sub(a: &[Vec<Laurent>], b: &[Vec<Laurent>]) -> Result<Vec<Vec<Laurent>>> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.sub(y)).collect())
        .collect()
}

pub(crate) fn mat_mul(a: &[Vec<Laurent>], b: &[Vec<Laurent>]) -> Result<Vec<Vec<Laurent>>> {
    let n = a.len();
    let mut ring = Ring::Q;
    let mut prec = i64::MAX;
    for m in [a, b] {
        for row in m {
            for e in row {
                ring = ring.join(e.ring())?;
                prec = prec.min(e.prec());
            }
        }
    }
    let mut out = vec![vec![Laurent::zero(ring, prec); n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = Laurent::zero(ring, prec);
            for (k, bk) in b.iter().enumerate() {
                if a[i][k].is_zero() || bk[j].is_zero() {
                    continue;
                }
                acc = acc.add(&a[i][k].mul(&bk[j])?)?;
            }
            out[i][j] = acc;
        }
    }
    Ok(out)
}

/// Gaussian elimination with minimal-valuation pivots; `NotInvertible`
/// when a column has no pivot with a visible unit.
fn mat_solve(a: &[Vec<Laurent>], rhs: &[Laurent]) -> Result<Vec<Laurent>> {
    let n = a.len();
    let mut m: Vec<Vec<Laurent>> = a.to_vec();
    let mut b: Vec<Laurent> = rhs.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot: Option<(usize, i64)> = None;
        for (r, row) in m.iter().enumerate().skip(col) {
            if row[col].is_zero() {
                continue;
            }
            if let Ok(v) = row[col].val() {
                if pivot.map_or(true, |(_, best)| v < best) {
                    pivot = Some((r, v));
                }
            }
        }
        let Some((p, _)) = pivot else {
            return Err(Error::NotInvertible(format!(
                "no unit pivot in column {col} of the cyclic frame"
            )));
        };
        m.swap(col, p);
        b.swap(col, p);
        perm.swap(col, p);
        let inv = m[col][col].inv()?;
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].mul(&inv)?;
            for cc in col..n {
                let delta = factor.mul(&m[col][cc])?;
                m[r][cc] = m[r][cc].sub(&delta)?;
            }
            b[r] = b[r].sub(&factor.mul(&b[col])?)?;
        }
    }
    let mut out = Vec::with_capacity(n);
    for r in 0..n {
        out.push(m[r][r].inv()?.mul(&b[r])?);
    }
    Ok(out)
}

/// Matrix inverse over `R((t))` via columnwise solves.
pub(crate) fn mat_inv(a: &[Vec<Laurent>]) -> Result<Vec<Vec<Laurent>>> {
    let n = a.len();
    let mut ring = Ring::Q;
    let mut prec = i64::MAX;
    for row in a {
        for e in row {
            ring = ring.join(e.ring())?;
            prec = prec.min(e.prec());
        }
    }
    let mut cols: Vec<Vec<Laurent>> = Vec::with_capacity(n);
    for j in 0..n {
        let rhs: Vec<Laurent> = (0..n)
            .map(|i| {
                if i == j {
                    Laurent::one(ring, prec)
                } else {
                    Laurent::zero(ring, prec)
                }
            })
            .collect();
        cols.push(mat_solve(a, &rhs)?);
    }
    Ok((0..n)
        .map(|i| (0..n).map(|j| cols[j][i].clone()).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tate;

    fn lt(terms: &[(i64, i64)]) -> Laurent {
        let ts: Vec<(i64, Scalar)> = terms
            .iter()
            .map(|&(k, c)| (k, Scalar::from_int(Ring::Q, c)))
            .collect();
        Laurent::from_terms(Ring::Q, &ts, 32)
    }

    fn lx(terms: &[(i64, i64)]) -> Laurent {
        // coefficient c·x at exponent k
        let x = Scalar::x(Ring::Qx);
        let ts: Vec<(i64, Scalar)> = terms
            .iter()
            .map(|&(k, c)| {
                (
                    k,
                    x.mul(&Scalar::from_int(Ring::Qx, c)).unwrap(),
                )
            })
            .collect();
        Laurent::from_terms(Ring::Qx, &ts, 32)
    }

    fn rank1(a_t: Laurent) -> Connection {
        Connection::new(vec![vec![a_t]], None).unwrap()
    }

    #[test]
    fn gauge_examples() {
        // Identity gauge leaves the connection unchanged.
        let c = rank1(lt(&[(-1, 2)]));
        let id = vec![vec![Laurent::one(Ring::Q, 32)]];
        let g = gauge(&c, &id).unwrap();
        assert!(g.a_t()[0][0].sub(&c.a_t()[0][0]).unwrap().is_zero());

        // A_t = 0 gauged by G = t picks up −dt/t.
        let zero = rank1(Laurent::zero(Ring::Q, 32));
        let by_t = gauge(&zero, &[vec![Laurent::t(Ring::Q, 32)]]).unwrap();
        let expect = Laurent::monomial(Ring::Q, Scalar::from_int(Ring::Q, -1), -1, 31);
        assert_eq!(by_t.a_t()[0][0].coeff(-1), expect.coeff(-1));
        assert!(by_t.a_t()[0][0].sub(&expect).unwrap().is_zero());

        // Gauge by G then by G⁻¹ returns the original (rank 2).
        let c2 = Connection::new(
            vec![
                vec![lt(&[(-1, 1)]), lt(&[(0, 1)])],
                vec![lt(&[(1, 2)]), lt(&[(-2, 3)])],
            ],
            None,
        )
        .unwrap();
        let g2 = vec![
            vec![lt(&[(0, 1), (1, 1)]), lt(&[(2, 1)])],
            vec![Laurent::zero(Ring::Q, 32), lt(&[(0, 1)])],
        ];
        let g2_inv = mat_inv(&g2).unwrap();
        let round = gauge(&gauge(&c2, &g2).unwrap(), &g2_inv).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    round.a_t()[i][j].sub(&c2.a_t()[i][j]).unwrap().is_zero(),
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn cyclic_vector_examples() {
        // Rank 1: e = e₁ and a₀ = the sole entry of ∇(τ).
        let c = rank1(lt(&[(-1, 2)]));
        let data = cyclic_vector(&c, &Laurent::t(Ring::Q, 32)).unwrap();
        assert!(data.e[0].sub(&Laurent::one(Ring::Q, 32)).unwrap().is_zero());
        // τe = t·(2t⁻¹)·e = 2e.
        assert!(data.a[0]
            .sub(&Laurent::from_scalar(Ring::Q, Scalar::from_int(Ring::Q, 2), 30))
            .unwrap()
            .is_zero());

        // Diagonal rank 2 with distinct exponents: e₁+e₂ is cyclic and
        // the relation is (τ−1)(τ−2) = τ² − 3τ + 2.
        let c2 = Connection::new(
            vec![
                vec![lt(&[(-1, 1)]), Laurent::zero(Ring::Q, 32)],
                vec![Laurent::zero(Ring::Q, 32), lt(&[(-1, 2)])],
            ],
            None,
        )
        .unwrap();
        let data = cyclic_vector(&c2, &Laurent::t(Ring::Q, 32)).unwrap();
        assert!(data.a[0]
            .sub(&Laurent::from_scalar(Ring::Q, Scalar::from_int(Ring::Q, -2), 28))
            .unwrap()
            .is_zero());
        assert!(data.a[1]
            .sub(&Laurent::from_scalar(Ring::Q, Scalar::from_int(Ring::Q, 3), 28))
            .unwrap()
            .is_zero());

        // Companion form: e₁ is cyclic immediately.
        let comp = Connection::new(
            vec![
                vec![Laurent::zero(Ring::Q, 32), lt(&[(-2, 1)])],
                vec![lt(&[(0, 1)]), Laurent::zero(Ring::Q, 32)],
            ],
            None,
        )
        .unwrap();
        let data = cyclic_vector(&comp, &Laurent::t(Ring::Q, 32)).unwrap();
        assert!(data.e[0].sub(&Laurent::one(Ring::Q, 32)).unwrap().is_zero());
        assert!(data.e[1].is_zero());
    }

    #[test]
    fn irregularity_examples() {
        // ∇ = d + x·dt/t² over K = ℚ(x) → 1.
        let c = rank1(lx(&[(-2, 1)]));
        assert_eq!(irregularity(&c).unwrap(), 1);
        // Regular singular κ·dt/t → 0.
        let rs = rank1(Laurent::monomial(
            Ring::Q,
            Scalar::from_ratio(Ring::Q, 5, 2),
            -1,
            32,
        ));
        assert_eq!(irregularity(&rs).unwrap(), 0);
        // d + dt/t³ → 2.
        assert_eq!(irregularity(&rank1(lt(&[(-3, 1)]))).unwrap(), 2);
        // Nonsingular → 0.
        assert_eq!(irregularity(&rank1(lt(&[(0, 4)]))).unwrap(), 0);
    }

    #[test]
    fn epsilon_degree_formula_and_index_agree() {
        let window = (-8, 8);
        // (d + x·dt/t², ν = dt) → 1 + 1 = 2.
        let c = rank1(lx(&[(-2, 1)]));
        let nu = Laurent::one(Ring::Qx, 32);
        assert_eq!(epsilon_degree(&c, &nu).unwrap(), 2);
        assert_eq!(
            tate::index(&tau_nu_operator(&c, &nu).unwrap(), window).unwrap(),
            2
        );

        // Nonsingular rank 2, ν = dt/t → 0.
        let c2 = Connection::new(
            vec![
                vec![lt(&[(0, 1)]), lt(&[(1, 1)])],
                vec![Laurent::zero(Ring::Q, 32), lt(&[(0, -1)])],
            ],
            None,
        )
        .unwrap();
        let nu_t = Laurent::monomial(Ring::Q, Scalar::one(Ring::Q), -1, 32);
        assert_eq!(epsilon_degree(&c2, &nu_t).unwrap(), 0);
        assert_eq!(
            tate::index(&tau_nu_operator(&c2, &nu_t).unwrap(), window).unwrap(),
            0
        );

        // Regular singular rank 2, ν = dt → 0 + 2 = 2.
        let rs2 = Connection::new(
            vec![
                vec![lt(&[(-1, 1)]), lt(&[(-1, 1)])],
                vec![Laurent::zero(Ring::Q, 32), lt(&[(-1, 2)])],
            ],
            None,
        )
        .unwrap();
        let nu1 = Laurent::one(Ring::Q, 32);
        assert_eq!(epsilon_degree(&rs2, &nu1).unwrap(), 2);
        assert_eq!(
            tate::index(&tau_nu_operator(&rs2, &nu1).unwrap(), window).unwrap(),
            2
        );
    }

    #[test]
    fn admissibility_detection() {
        // ∇ = d − dx/t + x·dt/t²: admissible with m = 2, g = x, η = −1.
        let c = Connection::new(
            vec![vec![lx(&[(-2, 1)])]],
            Some(vec![vec![Laurent::monomial(
                Ring::Qx,
                Scalar::from_int(Ring::Qx, -1),
                -1,
                32,
            )]]),
        )
        .unwrap();
        assert!(c.is_flat().unwrap());
        let data = detect_admissible(&c).unwrap();
        assert_eq!(data.m, 2);
        assert_eq!(data.g[0][0].coeff(0), Scalar::x(Ring::Qx));
        assert_eq!(data.eta[0][0].coeff(0), Scalar::from_int(Ring::Qx, -1));

        // Pole order 1 is not admissible.
        let rs = Connection::new(
            vec![vec![lt(&[(-1, 3)])]],
            Some(vec![vec![Laurent::zero(Ring::Q, 32)]]),
        )
        .unwrap();
        assert!(matches!(
            detect_admissible(&rs),
            Err(Error::NotAdmissible(_))
        ));

        // A_x pole as deep as m violates the horizontal cap.
        let deep = Connection::new(
            vec![vec![lt(&[(-2, 1)])]],
            Some(vec![vec![lt(&[(-2, 1)])]]),
        )
        .unwrap();
        assert!(matches!(
            detect_admissible(&deep),
            Err(Error::NotAdmissible(_))
        ));

        // g(0) must be invertible: diag(t⁻², t⁻¹) has g(0) = diag(1, 0).
        let sing = Connection::new(
            vec![
                vec![lt(&[(-2, 1)]), Laurent::zero(Ring::Q, 32)],
                vec![Laurent::zero(Ring::Q, 32), lt(&[(-1, 1)])],
            ],
            Some(vec![
                vec![Laurent::zero(Ring::Q, 32), Laurent::zero(Ring::Q, 32)],
                vec![Laurent::zero(Ring::Q, 32), Laurent::zero(Ring::Q, 32)],
            ]),
        )
        .unwrap();
        assert!(matches!(
            detect_admissible(&sing),
            Err(Error::NotAdmissible(_))
        ));
    }

    #[test]
    fn regular_singular_detection() {
        // Rank 1, A_t = 2/t, A_x = 1 → κ = 2, η₀ = 1.
        let c = Connection::new(
            vec![vec![lt(&[(-1, 2)])]],
            Some(vec![vec![Laurent::one(Ring::Q, 32)]]),
        )
        .unwrap();
        let data = regular_singular_data(&c).unwrap();
        assert_eq!(data.kappa[0][0], Scalar::from_int(Ring::Q, 2));
        assert_eq!(data.eta0[0][0], Scalar::one(Ring::Q));
        assert!(data.tail[0][0].is_zero());

        // Nonsingular → κ = 0.
        let ns = rank1(lt(&[(0, 3), (1, 1)]));
        let data = regular_singular_data(&ns).unwrap();
        assert_eq!(data.kappa[0][0], Scalar::zero(Ring::Q));
        assert!(!data.tail[0][0].is_zero());

        // Rank 2 upper triangular t⁻¹·[[1,1],[0,1]].
        let up = Connection::new(
            vec![
                vec![lt(&[(-1, 1)]), lt(&[(-1, 1)])],
                vec![Laurent::zero(Ring::Q, 32), lt(&[(-1, 1)])],
            ],
            None,
        )
        .unwrap();
        let data = regular_singular_data(&up).unwrap();
        assert_eq!(data.kappa[0][0], Scalar::one(Ring::Q));
        assert_eq!(data.kappa[0][1], Scalar::one(Ring::Q));
        assert_eq!(data.kappa[1][0], Scalar::zero(Ring::Q));
        assert_eq!(data.eta0[0][0], Scalar::zero(Ring::Q));

        // An irregular matrix is rejected.
        assert!(matches!(
            regular_singular_data(&rank1(lt(&[(-2, 1)]))),
            Err(Error::NotRegularSingularInBasis(_))
        ));
    }

    #[test]
    fn pullback_and_pushforward() {
        // e = 1 is the identity.
        let c = rank1(lt(&[(-1, 1)]));
        let same = pullback_ramified(&c, 1).unwrap();
        assert!(same.a_t()[0][0].sub(&c.a_t()[0][0]).unwrap().is_zero());

        // d + dt/t pulled back along t = s² becomes d + 2ds/s.
        let pulled = pullback_ramified(&c, 2).unwrap();
        assert_eq!(pulled.a_t()[0][0].coeff(-1), Scalar::from_int(Ring::Q, 2));
        assert_eq!(pulled.a_t()[0][0].low_exp(), -1);

        // Pushforward of d + ds/s² along e = 2: rank 2 with
        // irregularity 1.
        let up = rank1(lt(&[(-2, 1)]));
        let pushed = pushforward(&up, 2).unwrap();
        assert_eq!(pushed.rank(), 2);
        assert_eq!(irregularity(&pushed).unwrap(), 1);
        // The ε-degree via the index route agrees with the formula.
        let nu = Laurent::one(Ring::Q, 16);
        assert_eq!(epsilon_degree(&pushed, &nu).unwrap(), 1 + 2);
        assert_eq!(
            tate::index(&tau_nu_operator(&pushed, &nu).unwrap(), (-8, 8)).unwrap(),
            3
        );

        // Pullback after pushforward keeps irregularity readable:
        // the pullback of `pushed` along e = 2 contains the original
        // plus a regular twist; its irregularity stays 2·i − (e−1)·0.
        let back = pullback_ramified(&pushed, 2).unwrap();
        assert_eq!(back.rank(), 2);
        assert!(irregularity(&back).unwrap() >= irregularity(&up).unwrap());
    }

    #[test]
    fn structure_invariants() {
        // Gauge invariance of irregularity (G over O, G(0) invertible).
        let c = Connection::new(
            vec![
                vec![lt(&[(-2, 1)]), lt(&[(-1, 1)])],
                vec![Laurent::zero(Ring::Q, 32), lt(&[(-2, 3)])],
            ],
            None,
        )
        .unwrap();
        let base = irregularity(&c).unwrap();
        let g = vec![
            vec![lt(&[(0, 1), (1, 2)]), lt(&[(1, 1)])],
            vec![lt(&[(2, 1)]), lt(&[(0, 1)])],
        ];
        assert_eq!(irregularity(&gauge(&c, &g).unwrap()).unwrap(), base);
        // … and for diagonal t-power gauges.
        let gd = vec![
            vec![Laurent::t(Ring::Q, 32), Laurent::zero(Ring::Q, 32)],
            vec![Laurent::zero(Ring::Q, 32), lt(&[(-2, 1)])],
        ];
        assert_eq!(irregularity(&gauge(&c, &gd).unwrap()).unwrap(), base);

        // Additivity under direct sum.
        let c1 = rank1(lt(&[(-3, 1)]));
        let c2 = rank1(lt(&[(-1, 5)]));
        let both = direct_sum(&c1, &c2).unwrap();
        assert_eq!(
            irregularity(&both).unwrap(),
            irregularity(&c1).unwrap() + irregularity(&c2).unwrap()
        );

        // Dual and tensor plumbing: dual negates κ, tensor adds ranks'
        // products and irregularities stack along the factors.
        let d = dual(&c2).unwrap();
        assert_eq!(
            regular_singular_data(&d).unwrap().kappa[0][0],
            Scalar::from_int(Ring::Q, -5)
        );
        let t = tensor(&c2, &c2).unwrap();
        assert_eq!(t.rank(), 1);
        assert_eq!(
            regular_singular_data(&t).unwrap().kappa[0][0],
            Scalar::from_int(Ring::Q, 10)
        );

        // Flatness is preserved by gauge.
        let flat = Connection::new(
            vec![vec![lx(&[(-2, 1)])]],
            Some(vec![vec![Laurent::monomial(
                Ring::Qx,
                Scalar::from_int(Ring::Qx, -1),
                -1,
                32,
            )]]),
        )
        .unwrap();
        assert!(flat.is_flat().unwrap());
        let gx = vec![vec![lt(&[(0, 1), (1, 3)])]];
        assert!(gauge(&flat, &gx).unwrap().is_flat().unwrap());
    }
}
