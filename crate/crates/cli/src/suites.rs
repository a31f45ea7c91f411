//! Seeded verification suites.
//!
//! Each suite draws its inputs from a deterministic generator, runs one
//! family of exact identities, and reports every computed value in a
//! precision-independent `digest` so that re-runs at a different working
//! precision can be compared verbatim.  A failing suite names the first
//! counterexamples with their full inputs.

use epsdr_core::connect::{self, Connection};
use epsdr_core::epsilon::{self, NuChoice};
use epsdr_core::error::Error as CoreError;
use epsdr_core::globalcurve;
use epsdr_core::kforms::{dlog_x, AbsForm};
use epsdr_core::laurent::Laurent;
use epsdr_core::rng::SplitMix64;
use epsdr_core::scalars::{Ring, Scalar};
use epsdr_core::symbol::{
    cc_symbol, lie_compatibility, residue_pairing, residue_theorem_check, weil_reciprocity_check,
    SplitRational,
};
use epsdr_core::tate::{index, symbol_oracle, BandedOperator};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

/// Inputs shared by every suite.
#[derive(Clone, Copy, Debug)]
pub struct SuiteParams {
    /// Seed for the deterministic input generator.
    pub seed: u64,
    /// Working precision for series construction.
    pub precision: i64,
}

/// Outcome of one suite.
#[derive(Serialize, Clone, Debug)]
pub struct SuiteReport {
    /// Suite name as accepted by `verify --suite`.
    pub name: String,
    /// Number of checked cases.
    pub cases: usize,
    /// Whether every case held.
    pub pass: bool,
    /// First few counterexamples, with their inputs.
    pub failures: Vec<String>,
    /// Stringified computed values; independent of the working
    /// precision, so robustness re-runs can compare them verbatim.
    pub digest: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> SuiteReport {
        SuiteReport {
            name: name.to_string(),
            cases: 0,
            pass: true,
            failures: Vec::new(),
            digest: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.pass = false;
            if self.failures.len() < 8 {
                self.failures.push(detail());
            }
        }
    }

    fn note(&mut self, line: String) {
        self.digest.push(line);
    }
}

// ---- deterministic input generators ----------------------------------------

fn rat(ring: Ring, p: i64, q: i64) -> Scalar {
    Scalar::from_ratio(ring, p, q)
}

fn rand_q(rng: &mut SplitMix64, ring: Ring) -> Scalar {
    rat(ring, rng.nonzero_in(9), rng.int_in(1, 4))
}

fn rand_q_any(rng: &mut SplitMix64, ring: Ring) -> Scalar {
    rat(ring, rng.int_in(-6, 6), rng.int_in(1, 4))
}

/// A random series unit: bounded valuation, unit lead, short tail, and
/// (over nilpotent rings) a nilpotent term below the valuation.
fn rand_unit(rng: &mut SplitMix64, ring: Ring, prec: i64) -> Laurent {
    let d = rng.int_in(-2, 2);
    let mut terms: Vec<(i64, Scalar)> = vec![(d, rand_q(rng, ring))];
    for k in 0..rng.int_in(0, 3) {
        terms.push((d + 1 + k, rand_q_any(rng, ring)));
    }
    if let Some(eps) = Scalar::eps(ring) {
        let c = eps.mul(&rat(ring, rng.int_in(-3, 3), 1)).unwrap();
        terms.push((d - 1 - rng.int_in(0, 1), c));
    }
    Laurent::from_terms(ring, &terms, d + prec)
}

/// A random series with poles allowed and no unit constraint.
fn rand_any(rng: &mut SplitMix64, ring: Ring, prec: i64, lo: i64, hi: i64) -> Laurent {
    let mut terms: Vec<(i64, Scalar)> = Vec::new();
    for _ in 0..rng.int_in(1, 4) {
        terms.push((rng.int_in(lo, hi), rand_q_any(rng, ring)));
    }
    Laurent::from_terms(ring, &terms, hi + prec)
}

/// A random split rational function of `t`.
fn rand_split(rng: &mut SplitMix64) -> SplitRational {
    let lead = rand_q(rng, Ring::Q);
    let nfac = rng.int_in(1, 3);
    let mut factors: Vec<(BigRational, i64)> = Vec::new();
    for _ in 0..nfac {
        let root = BigRational::new(BigInt::from(rng.int_in(-5, 5)), BigInt::from(rng.int_in(1, 3)));
        if factors.iter().any(|(r, _)| *r == root) {
            continue;
        }
        factors.push((root, rng.nonzero_in(3)));
    }
    SplitRational::from_factors(lead, &factors).expect("lead is a unit by construction")
}

/// A random flat rank-1 connection over ℚ(x) with its vertical pole
/// order pinned to `pole`: `A_t = p(t) + x·q(t)`, `A_x = ∫q·dt + c·x`,
/// which satisfies `∂_x A_t = ∂_t A_x` exactly.
fn flat_rank1(rng: &mut SplitMix64, pole: i64, prec: i64) -> Connection {
    let ring = Ring::Qx;
    let mut p_terms: Vec<(i64, Scalar)> = Vec::new();
    if pole > 0 {
        p_terms.push((-pole, rand_q(rng, ring)));
    }
    for _ in 0..2 {
        p_terms.push((rng.int_in((-pole + 1).min(0), 1), rand_q_any(rng, ring)));
    }
    let p = Laurent::from_terms(ring, &p_terms, prec);

    let mut q_terms: Vec<(i64, Scalar)> = Vec::new();
    for _ in 0..rng.int_in(0, 2) {
        let k = rng.int_in((-pole).max(-2), 0);
        if k != -1 {
            q_terms.push((k, rand_q_any(rng, ring)));
        }
    }
    let q = Laurent::from_terms(ring, &q_terms, prec);

    let a_t = p.add(&q.scale(&Scalar::x(ring)).unwrap()).unwrap();
    let int_q: Vec<(i64, Scalar)> = q_terms
        .iter()
        .map(|(k, c)| (k + 1, c.mul(&rat(ring, 1, k + 1)).unwrap()))
        .collect();
    let a_x = Laurent::from_terms(ring, &int_q, prec)
        .add(&Laurent::from_scalar(
            ring,
            Scalar::x(ring).mul(&rat(ring, rng.int_in(-3, 3), 1)).unwrap(),
            prec,
        ))
        .unwrap();
    Connection::new(vec![vec![a_t]], Some(vec![vec![a_x]])).expect("flat by construction")
}

/// A random unit series whose constant term may depend on `x`.
fn rand_nu_unit(rng: &mut SplitMix64, x_dependent: bool, prec: i64) -> Laurent {
    let ring = Ring::Qx;
    let u0 = if x_dependent {
        let c = rand_q_any(rng, ring);
        let d = rat(ring, rng.nonzero_in(3), 1);
        c.add(&Scalar::x(ring).mul(&d).unwrap()).unwrap()
    } else {
        rand_q(rng, ring)
    };
    let mut terms = vec![(0i64, u0)];
    for k in 0..rng.int_in(0, 2) {
        terms.push((k + 1, rand_q_any(rng, ring)));
    }
    Laurent::from_terms(ring, &terms, prec)
}

fn monomial_q(k: i64, prec: i64) -> Laurent {
    Laurent::monomial(Ring::Q, Scalar::one(Ring::Q), k, k + prec)
}

// ---- suites -----------------------------------------------------------------

/// Closed-form symbol values: `(t^m, t^n) ↦ (−1)^{mn}` and
/// `(r, t^m) ↦ r^{−m}` for constants `r`.
pub fn suite_closed_forms(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("closed-forms");
    let prec = p.precision;
    for m in -4..=4 {
        for n in -4..=4 {
            let f = monomial_q(m, prec);
            let g = monomial_q(n, prec);
            match cc_symbol(&f, &g) {
                Ok(s) => {
                    let want = rat(Ring::Q, if (m * n) % 2 == 0 { 1 } else { -1 }, 1);
                    rep.note(format!("(t^{m},t^{n}) -> {s}"));
                    rep.check(s == want, || {
                        format!("(t^{m}, t^{n}): got {s}, want {want}")
                    });
                }
                Err(e) => rep.check(false, || format!("(t^{m}, t^{n}): {e}")),
            }
        }
    }
    for (num, den) in [(2, 1), (-3, 1), (5, 2), (-7, 3), (1, 2)] {
        let r = rat(Ring::Q, num, den);
        for m in -4..=4 {
            let f = Laurent::from_scalar(Ring::Q, r.clone(), prec);
            let g = monomial_q(m, prec);
            match cc_symbol(&f, &g) {
                Ok(s) => {
                    let want = r.pow(-m).unwrap();
                    rep.note(format!("({r},t^{m}) -> {s}"));
                    rep.check(s == want, || format!("({r}, t^{m}): got {s}, want {want}"));
                }
                Err(e) => rep.check(false, || format!("({r}, t^{m}): {e}")),
            }
        }
    }
    rep
}

/// Closed-form symbol versus the compression-determinant oracle on
/// seeded unit pairs over ℚ and ℚ[ε]/(ε³), including the nilpotent
/// deformation pair `(1 − a·t, 1 − b·t⁻¹) ↦ 1 + ab`.
pub fn suite_oracle(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("oracle");
    let window = 20;
    for (salt, ring) in [(0x51u64, Ring::Q), (0x52, Ring::QNil(3))] {
        let mut rng = SplitMix64::new(p.seed ^ salt);
        for k in 0..102 {
            let f = rand_unit(&mut rng, ring, p.precision);
            let g = rand_unit(&mut rng, ring, p.precision);
            let closed = cc_symbol(&f, &g);
            let oracle = symbol_oracle(&f, &g, window);
            match (closed, oracle) {
                (Ok(c), Ok(o)) => {
                    rep.note(format!("{ring:?}#{k} -> {c}"));
                    rep.check(c == o, || {
                        format!("{ring:?} pair #{k}: f = {f}, g = {g}: closed {c} vs oracle {o}")
                    });
                }
                (c, o) => rep.check(false, || {
                    format!("{ring:?} pair #{k}: f = {f}, g = {g}: {c:?} vs {o:?}")
                }),
            }
        }
    }
    // Nilpotent deformation pairs (1 − a·t, 1 − b·t⁻¹) with ab² = 0.
    let ring = Ring::QNil(3);
    let eps = Scalar::eps(ring).unwrap();
    let eps2 = eps.mul(&eps).unwrap();
    let mut rng = SplitMix64::new(p.seed ^ 0x53);
    for k in 0..8 {
        let (a, b) = if k % 2 == 0 {
            (rand_q(&mut rng, ring), eps2.mul(&rand_q(&mut rng, ring)).unwrap())
        } else {
            (
                eps.mul(&rand_q(&mut rng, ring)).unwrap(),
                eps.mul(&rand_q(&mut rng, ring)).unwrap(),
            )
        };
        let one = Laurent::one(ring, p.precision);
        let f = one
            .sub(&Laurent::monomial(ring, a.clone(), 1, p.precision))
            .unwrap();
        let g = one
            .sub(&Laurent::monomial(ring, b.clone(), -1, p.precision))
            .unwrap();
        let want = Scalar::one(ring).add(&a.mul(&b).unwrap()).unwrap();
        match (cc_symbol(&f, &g), symbol_oracle(&f, &g, window)) {
            (Ok(c), Ok(o)) => {
                rep.note(format!("nil#{k} -> {c}"));
                rep.check(c == want && o == want, || {
                    format!("nil pair #{k}: a = {a}, b = {b}: got {c} / oracle {o}, want {want}")
                });
            }
            (c, o) => rep.check(false, || format!("nil pair #{k}: {c:?} vs {o:?}")),
        }
    }
    rep
}

/// Weil reciprocity and the residue theorem over ℙ¹ for seeded split
/// rational pairs.
pub fn suite_reciprocity(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("reciprocity");
    let mut rng = SplitMix64::new(p.seed ^ 0x71);
    for k in 0..52 {
        let f = rand_split(&mut rng);
        let g = rand_split(&mut rng);
        match weil_reciprocity_check(&f, &g) {
            Ok(r) => {
                rep.note(format!("weil#{k} -> {}", r.product));
                rep.check(r.product.is_one(), || {
                    format!("weil #{k}: f = {f}, g = {g}: product {}", r.product)
                });
            }
            Err(e) => rep.check(false, || format!("weil #{k}: f = {f}, g = {g}: {e}")),
        }
        match residue_theorem_check(&f, &g) {
            Ok(total) => {
                rep.note(format!("res#{k} -> {total}"));
                rep.check(total.is_zero(), || {
                    format!("residues #{k}: f = {f}, g = {g}: sum {total}")
                });
            }
            Err(e) => rep.check(false, || format!("residues #{k}: f = {f}, g = {g}: {e}")),
        }
    }
    rep
}

/// Lie-level pairing: `{f, exp(εa)} − 1 = ε·Res(a·dlog f)`, plus the
/// residue-pairing table `[t^m, t^n] = m·δ_{m,−n}`.
pub fn suite_lie(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("lie");
    for m in -3..=3 {
        for n in -3..=3 {
            let a = monomial_q(m, p.precision);
            let b = monomial_q(n, p.precision);
            match residue_pairing(&a, &b) {
                Ok(v) => {
                    let want = rat(Ring::Q, if m + n == 0 { m } else { 0 }, 1);
                    rep.note(format!("[t^{m},t^{n}] -> {v}"));
                    rep.check(v == want, || {
                        format!("[t^{m}, t^{n}]: got {v}, want {want}")
                    });
                }
                Err(e) => rep.check(false, || format!("[t^{m}, t^{n}]: {e}")),
            }
        }
    }
    let mut rng = SplitMix64::new(p.seed ^ 0x91);
    let nil = Ring::QNil(2);
    let eps = Scalar::eps(nil).unwrap();
    for k in 0..52 {
        let f = rand_unit(&mut rng, Ring::Q, p.precision);
        let a = rand_any(&mut rng, Ring::Q, p.precision, -4, 4);
        let run = || -> Result<(Scalar, Scalar), CoreError> {
            let got = lie_compatibility(&f, &a)?;
            let res = a.mul(&f.dlog_t()?)?.res_t()?;
            let want = eps.mul(&res.promote_to(nil)?)?;
            Ok((got, want))
        };
        match run() {
            Ok((got, want)) => {
                rep.note(format!("lie#{k} -> {got}"));
                rep.check(got == want, || {
                    format!("lie #{k}: f = {f}, a = {a}: got {got}, want {want}")
                });
            }
            Err(e) => rep.check(false, || format!("lie #{k}: f = {f}, a = {a}: {e}")),
        }
    }
    rep
}

/// One battery item for the degree suite.
fn degree_item(rep: &mut SuiteReport, label: &str, c: &Connection, ell: i64) {
    let ring = c.ring();
    let nu = Laurent::monomial(ring, Scalar::one(ring), ell, ell + 24);
    let formula = match connect::epsilon_degree(c, &nu) {
        Ok(d) => d,
        Err(e) => {
            rep.check(false, || format!("{label}: degree formula failed: {e}"));
            return;
        }
    };
    let op = match connect::tau_nu_operator(c, &nu) {
        Ok(op) => op,
        Err(e) => {
            rep.check(false, || format!("{label}: operator build failed: {e}"));
            return;
        }
    };
    let mut idx = None;
    let mut last_err = None;
    for w in [12i64, 18, 26] {
        match index(&op, (-w, w)) {
            Ok(v) => {
                idx = Some(v);
                break;
            }
            Err(CoreError::WindowTooSmall(m)) => last_err = Some(m),
            Err(e) => {
                rep.check(false, || format!("{label}: index failed: {e}"));
                return;
            }
        }
    }
    match idx {
        Some(v) => {
            rep.note(format!("{label} -> {formula}"));
            rep.check(v == formula, || {
                format!("{label}: formula {formula} vs index {v}")
            });
        }
        None => rep.check(false, || {
            format!("{label}: window exhausted: {}", last_err.unwrap_or_default())
        }),
    }
}

/// Determinant-degree formula versus the Fredholm index of the
/// compressed operator, across ranks, lattice shapes, block sums, and
/// ramified pushforwards.
pub fn suite_degree(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("degree");
    let mut rng = SplitMix64::new(p.seed ^ 0xA1);
    let prec = p.precision;

    // Rank 1, regular singular and nonsingular.
    for k in 0..6 {
        let c = flat_rank1(&mut rng, 1, prec);
        degree_item(&mut rep, &format!("rs1#{k}"), &c, rng.int_in(-2, 2));
    }
    for k in 0..2 {
        let c = flat_rank1(&mut rng, 0, prec);
        degree_item(&mut rep, &format!("ns1#{k}"), &c, rng.int_in(-2, 2));
    }
    // Rank 1, admissible pole orders 2, 3, 4.
    for (k, m) in [(0, 2), (1, 3), (2, 4), (3, 2), (4, 3), (5, 4)] {
        let c = flat_rank1(&mut rng, m, prec);
        degree_item(&mut rep, &format!("adm1#{k}(m{m})"), &c, rng.int_in(-2, 2));
    }
    // Block sums of mixed shapes, ranks 2 and 3.
    for k in 0..8 {
        let c1 = flat_rank1(&mut rng, rng.int_in(0, 3), prec);
        let c2 = flat_rank1(&mut rng, rng.int_in(0, 3), prec);
        let mut c = connect::direct_sum(&c1, &c2).unwrap();
        if k % 3 == 0 {
            let c3 = flat_rank1(&mut rng, rng.int_in(0, 2), prec);
            c = connect::direct_sum(&c, &c3).unwrap();
        }
        degree_item(&mut rep, &format!("sum#{k}(r{})", c.rank()), &c, rng.int_in(-2, 2));
    }
    // Coupled upper-triangular rank 2 over ℚ (vertical data only).
    for k in 0..4 {
        let m = rng.int_in(1, 3);
        let mk = |rng: &mut SplitMix64, lead: bool| -> Laurent {
            let mut terms = vec![(
                -m,
                if lead {
                    rand_q(rng, Ring::Q)
                } else {
                    rand_q_any(rng, Ring::Q)
                },
            )];
            terms.push((1 - m, rand_q_any(rng, Ring::Q)));
            Laurent::from_terms(Ring::Q, &terms, prec)
        };
        let a = mk(&mut rng, true);
        let b = mk(&mut rng, false);
        let d = mk(&mut rng, true);
        let z = Laurent::zero(Ring::Q, prec);
        let c = Connection::new(vec![vec![a, b], vec![z, d]], None).unwrap();
        degree_item(&mut rep, &format!("ut2#{k}(m{m})"), &c, rng.int_in(-1, 1));
    }
    // Ramified pushforwards.
    for k in 0..6 {
        let up = flat_rank1(&mut rng, rng.int_in(0, 2), prec);
        let e = 2 + (k % 2) as u32;
        match connect::pushforward(&up, e) {
            Ok(down) => degree_item(
                &mut rep,
                &format!("push#{k}(e{e})"),
                &down,
                rng.int_in(-1, 1),
            ),
            Err(err) => rep.check(false, || format!("push#{k}(e{e}): {err}")),
        }
    }
    rep
}

/// The trivialization-change identity: for every connection, unit `u`,
/// and twist ℓ,
/// `class(∇, t^ℓdt) − class(∇, u·t^ℓdt) = change_of_ν(χ, u, n, ℓ)` with
/// `χ = Tr𝒜 − deg·dt/t`.
pub fn suite_coherence(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("coherence");
    let mut rng = SplitMix64::new(p.seed ^ 0xB1);
    let prec = p.precision;
    for k in 0..22 {
        let base = flat_rank1(&mut rng, rng.int_in(0, 3), prec);
        let c = if k % 4 == 3 {
            let other = flat_rank1(&mut rng, rng.int_in(0, 3), prec);
            connect::direct_sum(&base, &other).unwrap()
        } else {
            base
        };
        let ell = rng.int_in(-2, 2);
        let u = rand_nu_unit(&mut rng, k % 2 == 0, prec);
        let run = || -> Result<(String, bool), CoreError> {
            let ring = c.ring();
            let nu_plain = NuChoice::new(ell, Laurent::one(ring, prec))?;
            let nu_u = NuChoice::new(ell, u.clone())?;
            let (b1, e1) = epsilon::eps_class(&c, &nu_plain)?;
            let (b2, e2) = epsilon::eps_class(&c, &nu_u)?;
            let chi = epsilon::trace_form(&c)?.add(&AbsForm::from_dt(Laurent::monomial(
                ring,
                Scalar::from_int(ring, -e1.degree),
                -1,
                prec,
            )))?;
            let expected = epsilon::change_of_nu(&chi, &u, c.rank(), ell)?;
            let got = e1.form.sub(&e2.form)?;
            let ok = b1 == b2
                && e1.degree == e2.degree
                && got.sub(&expected)?.is_zero();
            Ok((format!("{got}"), ok))
        };
        match run() {
            Ok((line, ok)) => {
                rep.note(format!("coh#{k} -> {line}"));
                rep.check(ok, || {
                    format!("coherence #{k}: rank {}, ell {ell}, u = {u}", c.rank())
                });
            }
            Err(e) => rep.check(false, || {
                format!("coherence #{k}: rank {}, ell {ell}, u = {u}: {e}", c.rank())
            }),
        }
    }
    rep
}

/// Additivity of the ε-class (degree and form) over direct sums.
pub fn suite_additivity(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("additivity");
    let mut rng = SplitMix64::new(p.seed ^ 0xC1);
    let prec = p.precision;
    for k in 0..22 {
        // Keep the two vertical pole orders compatible: equal orders
        // always; a regular-singular / nonsingular mix every third case.
        let (m1, m2) = match k % 3 {
            0 => {
                let m = rng.int_in(2, 3);
                (m, m)
            }
            1 => (1, 1),
            _ => (1, 0),
        };
        let c1 = flat_rank1(&mut rng, m1, prec);
        let c2 = flat_rank1(&mut rng, m2, prec);
        let ell = rng.int_in(-2, 2);
        let u = if k % 5 == 0 {
            rand_nu_unit(&mut rng, true, prec)
        } else {
            Laurent::one(Ring::Qx, prec)
        };
        let run = || -> Result<(String, bool), CoreError> {
            let sum = connect::direct_sum(&c1, &c2)?;
            let nu = NuChoice::new(ell, u.clone())?;
            let (_, e1) = epsilon::eps_class(&c1, &nu)?;
            let (_, e2) = epsilon::eps_class(&c2, &nu)?;
            let (_, es) = epsilon::eps_class(&sum, &nu)?;
            let ok = es.degree == e1.degree + e2.degree
                && es.form.sub(&e1.form.add(&e2.form)?)?.is_zero();
            Ok((format!("{} deg {}", es.form, es.degree), ok))
        };
        match run() {
            Ok((line, ok)) => {
                rep.note(format!("add#{k} -> {line}"));
                rep.check(ok, || {
                    format!("additivity #{k}: poles ({m1},{m2}), ell {ell}, u = {u}")
                });
            }
            Err(e) => rep.check(false, || {
                format!("additivity #{k}: poles ({m1},{m2}), ell {ell}, u = {u}: {e}")
            }),
        }
    }
    rep
}

/// Isotypical reduction: `class(L ⊗ P) = n·class(L) + correction(P)`
/// as implemented by the rank-1 twist comparison.
pub fn suite_twist(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("twist");
    let prec = p.precision;
    let ring = Ring::Qx;
    let zero = || Laurent::zero(ring, prec);
    let lser = |terms: &[(i64, Scalar)]| Laurent::from_terms(ring, terms, prec);
    let x = Scalar::x(ring);

    // Twisting lines: admissible (m = 2, 3) and regular singular.
    let l_adm2 = Connection::new(
        vec![vec![lser(&[(-2, x.clone())])]],
        Some(vec![vec![lser(&[(-1, rat(ring, -1, 1))])]]),
    )
    .unwrap();
    let l_adm3 = Connection::new(
        vec![vec![lser(&[(-3, x.clone())])]],
        Some(vec![vec![lser(&[(-2, rat(ring, -1, 2))])]]),
    )
    .unwrap();
    let l_rs = Connection::new(
        vec![vec![lser(&[(-1, rat(ring, 1, 2))])]],
        Some(vec![vec![zero()]]),
    )
    .unwrap();

    // Unipotent blocks: nilpotent residues in ranks 2 and 3.
    let one_over_t = lser(&[(-1, Scalar::one(ring))]);
    let p2 = Connection::new(
        vec![
            vec![zero(), one_over_t.clone()],
            vec![zero(), zero()],
        ],
        Some(vec![vec![zero(), zero()], vec![zero(), zero()]]),
    )
    .unwrap();
    let p2b = Connection::new(
        vec![
            vec![zero(), lser(&[(-1, rat(ring, 2, 1)), (0, rat(ring, 1, 1))])],
            vec![zero(), zero()],
        ],
        Some(vec![vec![zero(), zero()], vec![zero(), zero()]]),
    )
    .unwrap();
    let p3 = Connection::new(
        vec![
            vec![zero(), one_over_t.clone(), zero()],
            vec![zero(), zero(), one_over_t.clone()],
            vec![zero(), zero(), zero()],
        ],
        Some(vec![
            vec![zero(), zero(), zero()],
            vec![zero(), zero(), zero()],
            vec![zero(), zero(), zero()],
        ]),
    )
    .unwrap();

    let cases: Vec<(&str, &Connection, &Connection, i64)> = vec![
        ("adm2*u2", &l_adm2, &p2, 0),
        ("adm2*u2b", &l_adm2, &p2b, 0),
        ("adm3*u2", &l_adm3, &p2, 0),
        ("rs*u2", &l_rs, &p2, 0),
        ("adm2*u3", &l_adm2, &p3, 0),
        ("adm2*u3(l-1)", &l_adm2, &p3, -1),
        ("adm3*u3", &l_adm3, &p3, 1),
    ];
    for (label, l, pc, ell) in cases {
        let run = || -> Result<bool, CoreError> {
            let v = connect::tensor(l, pc)?;
            let nu = NuChoice::new(ell, Laurent::one(ring, prec))?;
            epsilon::rank1_twist_check(&v, l, pc, &nu)
        };
        match run() {
            Ok(ok) => {
                rep.note(format!("{label} -> {ok}"));
                rep.check(ok, || format!("twist {label}: comparison failed"));
            }
            Err(e) => rep.check(false, || format!("twist {label}: {e}")),
        }
    }
    rep
}

const FAMILY_KLOOSTERMAN: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../examples/kloosterman.json"));
const FAMILY_KUMMER: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../examples/kummer.json"));
const FAMILY_TRIVIAL: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../examples/trivial.json"));
const FAMILY_RANK2: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../examples/rank2_tensor.json"));

/// The local–global product comparison on the curated family battery.
pub fn suite_product(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("product");
    let battery: [(&str, &str, &str); 4] = [
        ("kloosterman", FAMILY_KLOOSTERMAN, "dt"),
        ("kummer", FAMILY_KUMMER, "dt/t"),
        ("trivial", FAMILY_TRIVIAL, "dt/t"),
        ("rank2-tensor", FAMILY_RANK2, "dt"),
    ];
    for (label, json, nu_src) in battery {
        let run = || -> crate::Result<globalcurve::ProductFormulaReport> {
            let (fam, _) = crate::family::family_from_str(json)?;
            let nu = crate::parse::parse_nu_ratt(nu_src)?;
            globalcurve::product_formula_check(&fam, &nu, p.precision).map_err(crate::CliError::Core)
        };
        match run() {
            Ok(r) => {
                rep.note(format!(
                    "{label}: lhs {} rhs {} diff {} witness {} degsum {} h0 {} h1 {}",
                    r.lhs,
                    r.rhs,
                    r.difference,
                    r.witness
                        .as_ref()
                        .map(|w| w.to_string())
                        .unwrap_or_else(|| "-".into()),
                    r.local_degree_sum,
                    r.dim_h0,
                    r.dim_h1
                ));
                rep.check(r.pass, || {
                    format!(
                        "product {label}: is_dlog {} degrees_match {} (diff {})",
                        r.is_dlog, r.degrees_match, r.difference
                    )
                });
                if label == "kloosterman" {
                    // Pinned by direct substitution: the two sides differ
                    // by dlog(x⁻²).
                    let want = dlog_x(&Scalar::x(Ring::Qx))
                        .and_then(|f| f.scale_int(-2))
                        .unwrap();
                    rep.check(r.difference.sub(&want).map(|d| d.is_zero()).unwrap_or(false), || {
                        format!("product {label}: difference {} should be -2·dx/x", r.difference)
                    });
                }
            }
            Err(e) => rep.check(false, || format!("product {label}: {e}")),
        }
    }
    rep
}

/// Rank-1 duality: the class of the dual at `−ν` mirrors the class at
/// `ν` up to a logarithmic form, and the degrees sum to the forced
/// value.
pub fn suite_duality(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("duality");
    let mut rng = SplitMix64::new(p.seed ^ 0xD1);
    let prec = p.precision;
    for k in 0..7 {
        let pole = rng.int_in(0, 3);
        let c = flat_rank1(&mut rng, pole, prec);
        let ell = rng.int_in(-1, 1);
        let u = if k % 3 == 2 {
            rand_nu_unit(&mut rng, true, prec)
        } else {
            Laurent::one(Ring::Qx, prec)
        };
        let run = || -> Result<(String, bool), CoreError> {
            let nu = NuChoice::new(ell, u.clone())?;
            let d = epsilon::duality_class(&c, &nu)?;
            let mut ok = d.is_dlog_class && d.degree_sum == d.expected_degree_sum;
            if let Some(w) = &d.dlog_witness {
                ok = ok && dlog_x(w)?.sub(&d.form_sum)?.is_zero();
            }
            Ok((format!("{} degsum {}", d.form_sum, d.degree_sum), ok))
        };
        match run() {
            Ok((line, ok)) => {
                rep.note(format!("dual#{k} -> {line}"));
                rep.check(ok, || format!("duality #{k}: pole {pole}, ell {ell}, u = {u}"));
            }
            Err(e) => rep.check(false, || {
                format!("duality #{k}: pole {pole}, ell {ell}, u = {u}: {e}")
            }),
        }
    }
    rep
}

/// Precision robustness: every suite re-run at precision 48 must agree
/// verbatim with the base run, and the failure modes for starved
/// precision or windows must surface as typed errors.
pub fn suite_robustness(p: SuiteParams) -> SuiteReport {
    let mut rep = SuiteReport::new("robustness");
    let hi = SuiteParams {
        seed: p.seed,
        precision: 48,
    };
    let suites: [(&str, fn(SuiteParams) -> SuiteReport); 10] = [
        ("closed-forms", suite_closed_forms),
        ("oracle", suite_oracle),
        ("reciprocity", suite_reciprocity),
        ("lie", suite_lie),
        ("degree", suite_degree),
        ("coherence", suite_coherence),
        ("additivity", suite_additivity),
        ("twist", suite_twist),
        ("product", suite_product),
        ("duality", suite_duality),
    ];
    for (name, f) in suites {
        let lo = f(p);
        let re = f(hi);
        rep.note(format!("{name}: {} values", lo.digest.len()));
        rep.check(lo.pass, || format!("{name} failed at precision {}", p.precision));
        rep.check(re.pass, || format!("{name} failed at precision 48"));
        let same = lo.digest == re.digest;
        rep.check(same, || {
            let line = lo
                .digest
                .iter()
                .zip(re.digest.iter())
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("'{a}' vs '{b}'"))
                .unwrap_or_else(|| "digest lengths differ".into());
            format!("{name}: precision 48 changed a value: {line}")
        });
    }

    // Deliberate starvation: typed errors, not wrong answers.
    let starved = Laurent::zero(Ring::Q, 4).val();
    rep.check(
        matches!(starved, Err(CoreError::PrecisionExhausted(_))),
        || format!("valuation of an all-unknown series gave {starved:?}"),
    );
    rep.note("starved val -> PrecisionExhausted".into());

    let f = monomial_q(0, 3);
    let g = Laurent::one(Ring::Q, 3);
    let shallow = cc_symbol(&Laurent::zero(Ring::Q, 2), &g);
    rep.check(
        matches!(shallow, Err(CoreError::PrecisionExhausted(_))),
        || format!("symbol of an all-unknown series gave {shallow:?}"),
    );
    rep.note("starved symbol -> PrecisionExhausted".into());
    drop(f);

    let deep = BandedOperator::Mult {
        f: monomial_q(-6, 16),
        rank: 1,
    };
    let tiny = index(&deep, (-2, 2));
    rep.check(
        matches!(tiny, Err(CoreError::WindowTooSmall(_))),
        || format!("index over a 2-window of a 6-band operator gave {tiny:?}"),
    );
    rep.note("tiny index window -> WindowTooSmall".into());

    let fu = rand_unit(&mut SplitMix64::new(p.seed ^ 0xE1), Ring::Q, p.precision);
    let gu = monomial_q(-4, p.precision);
    let narrow = symbol_oracle(&fu, &gu, 2);
    rep.check(
        matches!(narrow, Err(CoreError::WindowTooSmall(_))),
        || format!("oracle with window 2 gave {narrow:?}"),
    );
    rep.note("narrow oracle window -> WindowTooSmall".into());
    rep
}

/// Names accepted by `verify --suite`, in execution order.
pub const SUITE_NAMES: [&str; 11] = [
    "closed-forms",
    "oracle",
    "reciprocity",
    "lie",
    "degree",
    "coherence",
    "additivity",
    "twist",
    "product",
    "duality",
    "robustness",
];

/// Runs one suite by name.
pub fn run_suite(name: &str, p: SuiteParams) -> Option<SuiteReport> {
    match name {
        "closed-forms" => Some(suite_closed_forms(p)),
        "oracle" => Some(suite_oracle(p)),
        "reciprocity" => Some(suite_reciprocity(p)),
        "lie" => Some(suite_lie(p)),
        "degree" => Some(suite_degree(p)),
        "coherence" => Some(suite_coherence(p)),
        "additivity" => Some(suite_additivity(p)),
        "twist" => Some(suite_twist(p)),
        "product" => Some(suite_product(p)),
        "duality" => Some(suite_duality(p)),
        "robustness" => Some(suite_robustness(p)),
        _ => None,
    }
}

/// Runs every suite.
pub fn run_all(p: SuiteParams) -> Vec<SuiteReport> {
    SUITE_NAMES
        .iter()
        .map(|name| run_suite(name, p).expect("listed suite exists"))
        .collect()
}
