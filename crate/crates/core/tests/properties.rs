//! Randomized algebraic invariants of the exact tower: every identity
//! here must hold *exactly* (no tolerance), for inputs drawn over ℚ,
//! ℚ(x), and the nilpotent extensions.

use epsdr_core::connect::{self, Connection};
use epsdr_core::epsilon::{self, NuChoice};
use epsdr_core::kforms::{dlog_class_test, dlog_x, res_wedge, AbsForm, KForm};
use epsdr_core::laurent::Laurent;
use epsdr_core::scalars::{Ring, Scalar};
use epsdr_core::symbol::cc_symbol;
use epsdr_core::tate::{index, symbol_oracle, BandedOperator};

use proptest::prelude::*;

const P: i64 = 32;
/// Shorter window for the connection-level batteries, which run
/// matrix-valued series arithmetic over ℚ(x).
const CP: i64 = 24;

fn nz(c: i64) -> i64 {
    if c == 0 {
        1
    } else {
        c
    }
}

fn rat(ring: Ring, p: i64, q: i64) -> Scalar {
    Scalar::from_ratio(ring, p, nz(q))
}

/// A scalar exercising every generator the ring offers: rational part,
/// an `x`-linear part when the ring has `x`, and nilpotent parts when
/// it has `ε`.
fn scalar_in(ring: Ring, a: (i64, i64), b: i64, c: i64) -> Scalar {
    let mut s = rat(ring, a.0, a.1);
    if matches!(ring, Ring::Qx | Ring::QxNil(_)) {
        let xterm = Scalar::x(ring).mul(&rat(ring, b, 1)).unwrap();
        s = s.add(&xterm).unwrap();
    }
    if let Some(eps) = Scalar::eps(ring) {
        let nterm = eps.mul(&rat(ring, c, 1)).unwrap();
        s = s.add(&nterm).unwrap();
    }
    s
}

fn ring_of(tag: u8) -> Ring {
    match tag % 4 {
        0 => Ring::Q,
        1 => Ring::Qx,
        2 => Ring::QNil(3),
        _ => Ring::QxNil(2),
    }
}

/// A series unit: valuation `d`, unit constant term, a short tail, and
/// (in nilpotent rings) a nilpotent deep-negative part.
fn unit_series(ring: Ring, d: i64, lead: (i64, i64), tail: &[i64], nil: i64) -> Laurent {
    let mut terms: Vec<(i64, Scalar)> = vec![(d, rat(ring, nz(lead.0), lead.1))];
    for (k, c) in tail.iter().enumerate() {
        terms.push((d + 1 + k as i64, rat(ring, *c, 1)));
    }
    if let Some(eps) = Scalar::eps(ring) {
        let c = eps.mul(&rat(ring, nil, 1)).unwrap();
        terms.push((d - 2, c));
    }
    Laurent::from_terms(ring, &terms, d + P)
}

fn laurent_eq(a: &Laurent, b: &Laurent) -> bool {
    a.sub(b).unwrap().is_zero()
}

fn scalar_eq(a: &Scalar, b: &Scalar) -> bool {
    a.sub(b).unwrap().is_zero()
}

fn kform_eq(a: &KForm, b: &KForm) -> bool {
    a.sub(b).unwrap().is_zero()
}

// ---- scalars ------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn scalar_ring_axioms(
        tag in 0u8..4,
        a in ((-9i64..10), (1i64..7), -4i64..5, -4i64..5),
        b in ((-9i64..10), (1i64..7), -4i64..5, -4i64..5),
        c in ((-9i64..10), (1i64..7), -4i64..5, -4i64..5),
    ) {
        let ring = ring_of(tag);
        let a = scalar_in(ring, (a.0, a.1), a.2, a.3);
        let b = scalar_in(ring, (b.0, b.1), b.2, b.3);
        let c = scalar_in(ring, (c.0, c.1), c.2, c.3);
        // Associativity of + and ·, distributivity.
        let l = a.add(&b).unwrap().add(&c).unwrap();
        let r = a.add(&b.add(&c).unwrap()).unwrap();
        prop_assert!(scalar_eq(&l, &r));
        let l = a.mul(&b).unwrap().mul(&c).unwrap();
        let r = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert!(scalar_eq(&l, &r));
        let l = a.mul(&b.add(&c).unwrap()).unwrap();
        let r = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        prop_assert!(scalar_eq(&l, &r));
    }

    #[test]
    fn scalar_unit_inverse(
        tag in 0u8..4,
        a in ((1i64..10), (1i64..7), -4i64..5, -4i64..5),
        neg in any::<bool>(),
    ) {
        let ring = ring_of(tag);
        let mut s = scalar_in(ring, (a.0, a.1), a.2, a.3);
        if neg {
            s = s.neg();
        }
        prop_assume!(s.is_unit());
        let prod = s.mul(&s.inv().unwrap()).unwrap();
        prop_assert!(prod.is_one());
    }

    #[test]
    fn scalar_leibniz(
        tag in 1u8..3,
        a in ((-9i64..10), (1i64..7), -4i64..5, -4i64..5),
        b in ((-9i64..10), (1i64..7), -4i64..5, -4i64..5),
        pole in -5i64..6,
    ) {
        // Rings with x: ℚ(x) and ℚ(x)[ε]/(ε²).
        let ring = if tag == 1 { Ring::Qx } else { Ring::QxNil(2) };
        let mut a = scalar_in(ring, (a.0, a.1), a.2, a.3);
        let b = scalar_in(ring, (b.0, b.1), b.2, b.3);
        // Mix in a genuine denominator on one side: a / (x − pole).
        let den = Scalar::x(ring).sub(&rat(ring, pole, 1)).unwrap();
        a = a.mul(&den.inv().unwrap()).unwrap();
        let l = a.mul(&b).unwrap().d_dx();
        let r = a.mul(&b.d_dx()).unwrap().add(&b.mul(&a.d_dx()).unwrap()).unwrap();
        prop_assert!(scalar_eq(&l, &r));
    }
}

// ---- laurent --------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decompose_round_trip(
        nilring in any::<bool>(),
        d in -3i64..4,
        lead in ((-6i64..7), (1i64..5)),
        tail in prop::collection::vec(-4i64..5, 0..4),
        nil in -3i64..4,
    ) {
        let ring = if nilring { Ring::QNil(3) } else { Ring::Q };
        let f = unit_series(ring, d, lead, &tail, nil);
        let (deg, r, fp, fm) = f.decompose().unwrap();
        prop_assert_eq!(deg, d);
        let back = Laurent::from_scalar(ring, r, f.prec() - d)
            .mul(&fp).unwrap()
            .mul(&fm).unwrap()
            .shift(deg);
        prop_assert!(laurent_eq(&back, &f));
        // f₊ ∈ 1 + t·R[[t]]; f₋ ∈ 1 + nilpotent negative part.
        prop_assert!(fp.coeff(0).is_one());
        prop_assert_eq!(fp.low_exp(), 0);
        prop_assert!(fm.coeff(0).is_one());
        for (k, c) in fm.terms() {
            prop_assert!(k <= 0);
            if k < 0 {
                prop_assert!(c.is_nilpotent());
            }
        }
    }

    #[test]
    fn residue_of_exact_form_vanishes(
        tag in 0u8..4,
        v0 in -4i64..2,
        coeffs in prop::collection::vec(((-6i64..7), (1i64..5)), 1..6),
    ) {
        let ring = ring_of(tag);
        let cs: Vec<Scalar> = coeffs.iter().map(|&(p, q)| rat(ring, p, q)).collect();
        let f = Laurent::from_coeff_range(ring, v0, cs, v0 + P);
        prop_assert!(f.d_dt().res_t().unwrap().is_zero());
    }

    #[test]
    fn valuation_is_additive_on_units(
        nilring in any::<bool>(),
        d1 in -3i64..4, d2 in -3i64..4,
        l1 in ((-6i64..7), (1i64..5)), l2 in ((-6i64..7), (1i64..5)),
        t1 in prop::collection::vec(-4i64..5, 0..3),
        t2 in prop::collection::vec(-4i64..5, 0..3),
        n1 in -3i64..4, n2 in -3i64..4,
    ) {
        let ring = if nilring { Ring::QNil(3) } else { Ring::Q };
        let f = unit_series(ring, d1, l1, &t1, n1);
        let g = unit_series(ring, d2, l2, &t2, n2);
        let fg = f.mul(&g).unwrap();
        prop_assert_eq!(fg.val().unwrap(), d1 + d2);
    }
}

// ---- symbol ---------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cc_symbol_bimultiplicative(
        nilring in any::<bool>(),
        d in (-2i64..3, -2i64..3, -2i64..3),
        l in (((1i64..7), (1i64..5)), ((1i64..7), (1i64..5)), ((1i64..7), (1i64..5))),
        t in (
            prop::collection::vec(-3i64..4, 0..3),
            prop::collection::vec(-3i64..4, 0..3),
            prop::collection::vec(-3i64..4, 0..3),
        ),
        n in (-2i64..3, -2i64..3, -2i64..3),
    ) {
        let ring = if nilring { Ring::QNil(3) } else { Ring::Q };
        let f1 = unit_series(ring, d.0, l.0, &t.0, n.0);
        let f2 = unit_series(ring, d.1, l.1, &t.1, n.1);
        let g = unit_series(ring, d.2, l.2, &t.2, n.2);
        let lhs = cc_symbol(&f1.mul(&f2).unwrap(), &g).unwrap();
        let rhs = cc_symbol(&f1, &g).unwrap().mul(&cc_symbol(&f2, &g).unwrap()).unwrap();
        prop_assert!(scalar_eq(&lhs, &rhs));
        // Second slot via inverse symmetry is tested separately; do it
        // directly here as well.
        let lhs = cc_symbol(&g, &f1.mul(&f2).unwrap()).unwrap();
        let rhs = cc_symbol(&g, &f1).unwrap().mul(&cc_symbol(&g, &f2).unwrap()).unwrap();
        prop_assert!(scalar_eq(&lhs, &rhs));
    }

    #[test]
    fn cc_symbol_inverse_symmetry_and_self_pairing(
        nilring in any::<bool>(),
        d in (-2i64..3, -2i64..3),
        l in (((1i64..7), (1i64..5)), ((1i64..7), (1i64..5))),
        t in (
            prop::collection::vec(-3i64..4, 0..3),
            prop::collection::vec(-3i64..4, 0..3),
        ),
        n in (-2i64..3, -2i64..3),
    ) {
        let ring = if nilring { Ring::QNil(3) } else { Ring::Q };
        let f = unit_series(ring, d.0, l.0, &t.0, n.0);
        let g = unit_series(ring, d.1, l.1, &t.1, n.1);
        let prod = cc_symbol(&f, &g).unwrap().mul(&cc_symbol(&g, &f).unwrap()).unwrap();
        prop_assert!(prod.is_one());
        let self_pair = cc_symbol(&f, &f).unwrap();
        let expect = rat(ring, if d.0 % 2 == 0 { 1 } else { -1 }, 1);
        prop_assert!(scalar_eq(&self_pair, &expect));
    }

    #[test]
    fn cc_symbol_steinberg(
        d in -2i64..3,
        lead in ((1i64..7), (2i64..5)),
        tail in prop::collection::vec(-3i64..4, 0..3),
    ) {
        // Field case: f and 1 − f units in ℚ((t)).
        let f = unit_series(Ring::Q, d, lead, &tail, 0);
        let one = Laurent::one(Ring::Q, f.prec().min(P));
        let omf = one.sub(&f.truncate(one.prec())).unwrap();
        prop_assume!(omf.val().is_ok());
        prop_assume!(omf.coeff(omf.val().unwrap()).is_unit());
        let s = cc_symbol(&f, &omf).unwrap();
        prop_assert!(s.is_one());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cc_symbol_matches_toeplitz_oracle(
        nilring in any::<bool>(),
        d in (-2i64..3, -2i64..3),
        l in (((1i64..7), (1i64..5)), ((1i64..7), (1i64..5))),
        t in (
            prop::collection::vec(-3i64..4, 0..3),
            prop::collection::vec(-3i64..4, 0..3),
        ),
        n in (-2i64..3, -2i64..3),
    ) {
        let ring = if nilring { Ring::QNil(3) } else { Ring::Q };
        let f = unit_series(ring, d.0, l.0, &t.0, n.0);
        let g = unit_series(ring, d.1, l.1, &t.1, n.1);
        let closed = cc_symbol(&f, &g).unwrap();
        let oracle = symbol_oracle(&f, &g, 24).unwrap();
        prop_assert!(scalar_eq(&closed, &oracle));
    }
}

// ---- tate -------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn index_additive_under_composition(
        d in (-2i64..3, -2i64..3),
        l in (((1i64..7), (1i64..5)), ((1i64..7), (1i64..5))),
        t in (
            prop::collection::vec(-3i64..4, 0..3),
            prop::collection::vec(-3i64..4, 0..3),
        ),
    ) {
        let f = unit_series(Ring::Q, d.0, l.0, &t.0, 0);
        let g = unit_series(Ring::Q, d.1, l.1, &t.1, 0);
        let mf = BandedOperator::Mult { f: f.clone(), rank: 1 };
        let mg = BandedOperator::Mult { f: g.clone(), rank: 1 };
        let comp = BandedOperator::Compose(Box::new(mf.clone()), Box::new(mg.clone()));
        let w = (-10, 10);
        let i_f = index(&mf, w).unwrap();
        let i_g = index(&mg, w).unwrap();
        let i_c = index(&comp, w).unwrap();
        prop_assert_eq!(i_c, i_f + i_g);
        // Multiplication by a unit of valuation v has index n·v.
        prop_assert_eq!(i_f, d.0);
    }

    #[test]
    fn index_stable_under_finite_rank_overrides(
        d in -2i64..3,
        lead in ((1i64..7), (1i64..5)),
        tail in prop::collection::vec(-3i64..4, 0..3),
        slot in 0i64..3,
        col in prop::collection::vec((-2i64..5, -5i64..6), 1..4),
    ) {
        let f = unit_series(Ring::Q, d, lead, &tail, 0);
        let base = BandedOperator::Mult { f, rank: 1 };
        let column: Vec<Laurent> = vec![Laurent::from_terms(
            Ring::Q,
            &col.iter().map(|&(k, c)| (k, rat(Ring::Q, c, 1))).collect::<Vec<_>>(),
            16,
        )];
        let pert = BandedOperator::FiniteRank {
            base: Box::new(base.clone()),
            overrides: vec![((slot, 0), column)],
        };
        let w = (-10, 10);
        prop_assert_eq!(index(&base, w).unwrap(), index(&pert, w).unwrap());
    }
}

// ---- kforms -----------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dlog_witness_round_trip(
        c in ((1i64..9), (1i64..5)),
        neg in any::<bool>(),
        factors in prop::collection::vec((-5i64..6, -3i64..4), 1..5),
    ) {
        // h = c · Π (x − aᵢ)^{eᵢ} with distinct aᵢ.
        let ring = Ring::Qx;
        let mut h = rat(ring, if neg { -c.0 } else { c.0 }, c.1);
        let mut seen = Vec::new();
        for &(a, e) in &factors {
            if seen.contains(&a) || e == 0 {
                continue;
            }
            seen.push(a);
            let lin = Scalar::x(ring).sub(&rat(ring, a, 1)).unwrap();
            let piece = if e > 0 { lin.clone() } else { lin.inv().unwrap() };
            for _ in 0..e.abs() {
                h = h.mul(&piece).unwrap();
            }
        }
        let psi = dlog_x(&h).unwrap();
        let (ok, witness) = dlog_class_test(&psi).unwrap();
        prop_assert!(ok);
        let w = witness.unwrap();
        prop_assert!(kform_eq(&dlog_x(&w).unwrap(), &psi));
    }

    #[test]
    fn dlog_classes_are_closed_under_sums(
        a1 in -5i64..6, e1 in 1i64..4,
        a2 in -5i64..6, e2 in 1i64..4,
        s1 in any::<bool>(), s2 in any::<bool>(),
    ) {
        let ring = Ring::Qx;
        let build = |a: i64, e: i64, invert: bool| -> KForm {
            let lin = Scalar::x(ring).sub(&rat(ring, a, 1)).unwrap();
            let mut h = Scalar::one(ring);
            let piece = if invert { lin.inv().unwrap() } else { lin };
            for _ in 0..e {
                h = h.mul(&piece).unwrap();
            }
            dlog_x(&h).unwrap()
        };
        let p1 = build(a1, e1, s1);
        let p2 = build(a2, e2, s2);
        let sum = p1.add(&p2).unwrap();
        let (ok, witness) = dlog_class_test(&sum).unwrap();
        prop_assert!(ok);
        prop_assert!(kform_eq(&dlog_x(&witness.unwrap()).unwrap(), &sum));
    }

    #[test]
    fn res_wedge_bilinear_and_alternating(
        at in prop::collection::vec((-3i64..4, -5i64..6), 1..4),
        ax in prop::collection::vec((-3i64..4, -5i64..6), 1..4),
        bt in prop::collection::vec((-3i64..4, -5i64..6), 1..4),
        bx in prop::collection::vec((-3i64..4, -5i64..6), 1..4),
        c in ((-5i64..6), (1i64..5)),
    ) {
        let ring = Ring::Qx;
        let mk = |spec: &Vec<(i64, i64)>| -> Laurent {
            let terms: Vec<(i64, Scalar)> =
                spec.iter().map(|&(k, v)| (k, rat(ring, v, 1))).collect();
            Laurent::from_terms(ring, &terms, 16)
        };
        let alpha = AbsForm::new(mk(&at), mk(&ax));
        let beta = AbsForm::new(mk(&bt), mk(&bx));
        let scale = rat(ring, c.0, c.1);
        // Alternating.
        prop_assert!(res_wedge(&alpha, &alpha).unwrap().is_zero());
        // Antisymmetric.
        let lhs = res_wedge(&alpha, &beta).unwrap();
        let rhs = res_wedge(&beta, &alpha).unwrap().neg();
        prop_assert!(kform_eq(&lhs, &rhs));
        // Linear in the first slot.
        let scaled = alpha.scale(&scale).unwrap();
        let l = res_wedge(&scaled, &beta).unwrap();
        let r = res_wedge(&alpha, &beta).unwrap().scale(&scale).unwrap();
        prop_assert!(kform_eq(&l, &r));
        let gamma = AbsForm::new(mk(&bt), mk(&ax));
        let l = res_wedge(&alpha.add(&gamma).unwrap(), &beta).unwrap();
        let r = res_wedge(&alpha, &beta).unwrap().add(&res_wedge(&gamma, &beta).unwrap()).unwrap();
        prop_assert!(kform_eq(&l, &r));
    }
}

// ---- connect ----------------------------------------------------------------

/// A flat rank-1 connection over ℚ(x): `A_t = p(t) + x·q(t)`,
/// `A_x = ∫q·dt + r(x)` — flatness `∂_x A_t = ∂_t A_x` holds exactly
/// provided `q` has no `t⁻¹` term.
fn flat_rank1(
    p_terms: &[(i64, i64)],
    q_terms: &[(i64, i64)],
    r_coeff: i64,
    with_x_part: bool,
) -> Connection {
    let ring = Ring::Qx;
    let pt: Vec<(i64, Scalar)> = p_terms
        .iter()
        .map(|&(k, c)| (k, rat(ring, c, 1)))
        .collect();
    let p = Laurent::from_terms(ring, &pt, CP);
    let qt: Vec<(i64, Scalar)> = q_terms
        .iter()
        .filter(|&&(k, _)| k != -1)
        .map(|&(k, c)| (k, rat(ring, c, 1)))
        .collect();
    let q = Laurent::from_terms(ring, &qt, CP);
    let a_t = p
        .add(&q.scale(&Scalar::x(ring)).unwrap())
        .unwrap();
    let a_x = if with_x_part {
        // ∫ q dt, term by term (no t⁻¹ term by construction).
        let int_q: Vec<(i64, Scalar)> = qt
            .iter()
            .map(|(k, c)| (k + 1, c.mul(&Scalar::from_ratio(ring, 1, k + 1)).unwrap()))
            .collect();
        let base = Laurent::from_terms(ring, &int_q, CP);
        Some(vec![vec![base
            .add(&Laurent::from_scalar(
                ring,
                Scalar::x(ring).mul(&rat(ring, r_coeff, 1)).unwrap(),
                P,
            ))
            .unwrap()]])
    } else {
        None
    };
    Connection::new(vec![vec![a_t]], a_x).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn irregularity_is_gauge_invariant(
        p1 in prop::collection::vec((-3i64..2, -5i64..6), 1..4),
        q1 in prop::collection::vec((-3i64..2, -5i64..6), 0..3),
        p2 in prop::collection::vec((-3i64..2, -5i64..6), 1..4),
        g_entries in prop::collection::vec(-3i64..4, 4),
        k1 in -2i64..3, k2 in -2i64..3,
    ) {
        let ring = Ring::Qx;
        let c1 = flat_rank1(&p1, &q1, 0, true);
        let c2 = flat_rank1(&p2, &[], 0, true);
        let c = connect::direct_sum(&c1, &c2).unwrap();
        let base_irr = connect::irregularity(&c).unwrap();

        // G = I + t·M with M constant: G(0) = I is invertible.
        let mut g = vec![vec![Laurent::zero(ring, CP); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let m = Laurent::monomial(ring, rat(ring, g_entries[2 * i + j], 1), 1, CP);
                let id = if i == j {
                    Laurent::one(ring, CP)
                } else {
                    Laurent::zero(ring, CP)
                };
                g[i][j] = id.add(&m).unwrap();
            }
        }
        let gauged = connect::gauge(&c, &g).unwrap();
        prop_assert_eq!(connect::irregularity(&gauged).unwrap(), base_irr);

        // G = diag(t^{k₁}, t^{k₂}).
        let g = vec![
            vec![Laurent::monomial(ring, Scalar::one(ring), k1, CP), Laurent::zero(ring, CP)],
            vec![Laurent::zero(ring, CP), Laurent::monomial(ring, Scalar::one(ring), k2, CP)],
        ];
        let gauged = connect::gauge(&c, &g).unwrap();
        prop_assert_eq!(connect::irregularity(&gauged).unwrap(), base_irr);
    }

    #[test]
    fn irregularity_adds_over_direct_sums(
        p1 in prop::collection::vec((-3i64..2, -5i64..6), 1..4),
        p2 in prop::collection::vec((-3i64..2, -5i64..6), 1..4),
    ) {
        let c1 = flat_rank1(&p1, &[], 0, true);
        let c2 = flat_rank1(&p2, &[], 0, true);
        let sum = connect::direct_sum(&c1, &c2).unwrap();
        prop_assert_eq!(
            connect::irregularity(&sum).unwrap(),
            connect::irregularity(&c1).unwrap() + connect::irregularity(&c2).unwrap()
        );
    }

    #[test]
    fn gauge_preserves_flatness(
        p in prop::collection::vec((-3i64..2, -5i64..6), 1..4),
        q in prop::collection::vec((-3i64..2, -5i64..6), 0..3),
        r in -3i64..4,
        m in -3i64..4,
    ) {
        let ring = Ring::Qx;
        let c = flat_rank1(&p, &q, r, true);
        prop_assert!(c.is_flat().unwrap());
        // Rank 1, G = x·(1 + m·t): an x-dependent unit gauge.
        let g = Laurent::one(ring, CP)
            .add(&Laurent::monomial(ring, rat(ring, m, 1), 1, CP))
            .unwrap()
            .scale(&Scalar::x(ring))
            .unwrap();
        let gauged = connect::gauge(&c, &[vec![g]]).unwrap();
        prop_assert!(gauged.is_flat().unwrap());
    }

    #[test]
    fn pushforward_preserves_epsilon_degree(
        p in prop::collection::vec((-3i64..2, -5i64..6), 1..4),
        e in 2u32..4,
        ell in -2i64..2,
    ) {
        // Upstairs: rank-1 over K((s)); downstairs ν = t^ℓ·dt pulls
        // back to e·s^{eℓ+e−1}·ds.
        let ring = Ring::Qx;
        let up = flat_rank1(&p, &[], 0, true);
        let down = connect::pushforward(&up, e).unwrap();
        prop_assert_eq!(down.rank(), e as usize);
        let nu_down = Laurent::monomial(ring, Scalar::one(ring), ell, CP);
        let nu_up = Laurent::monomial(
            ring,
            Scalar::from_int(ring, e as i64),
            (e as i64) * ell + (e as i64) - 1,
            P,
        );
        prop_assert_eq!(
            connect::epsilon_degree(&down, &nu_down).unwrap(),
            connect::epsilon_degree(&up, &nu_up).unwrap()
        );
    }
}

// ---- epsilon -----------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn epsilon_class_is_additive(
        p1 in prop::collection::vec((-3i64..2, -5i64..6), 1..4),
        p2 in prop::collection::vec((-3i64..2, -5i64..6), 1..4),
        q in prop::collection::vec((-3i64..2, -5i64..6), 0..3),
        pole in prop::sample::select(vec![1i64, 2, 3]),
        lead in 1i64..5,
        ell in -2i64..2,
    ) {
        // Force both summands into the same branch by pinning the
        // leading pole order.
        let mut p1 = p1;
        let mut p2 = p2;
        p1.push((-pole, lead));
        p2.push((-pole, lead + 1));
        let c1 = flat_rank1(&p1, &q, 0, true);
        let c2 = flat_rank1(&p2, &[], 1, true);
        let sum = connect::direct_sum(&c1, &c2).unwrap();
        let ring = Ring::Qx;
        let nu = NuChoice::new(
            ell,
            Laurent::one(ring, CP),
        ).unwrap();
        let (b1, e1) = epsilon::eps_class(&c1, &nu).unwrap();
        let (b2, e2) = epsilon::eps_class(&c2, &nu).unwrap();
        prop_assume!(b1 == b2);
        let (_, es) = epsilon::eps_class(&sum, &nu).unwrap();
        prop_assert_eq!(es.degree, e1.degree + e2.degree);
        prop_assert!(kform_eq(&es.form, &e1.form.add(&e2.form).unwrap()));
    }

    #[test]
    fn coherence_pins_the_wedge_orientation(
        p in prop::collection::vec((-3i64..2, -5i64..6), 1..4),
        q in prop::collection::vec((-3i64..2, -5i64..6), 0..3),
        u0 in prop::sample::select(vec![(1i64, 0i64), (2, 0), (1, 1), (0, 1), (0, 2), (-1, 1)]),
        u_tail in prop::collection::vec(-3i64..4, 0..3),
        ell in -2i64..3,
    ) {
        // Random flat rank-1 connection, random unit u with
        // x-dependent u₀ (the orientation-sensitive case), random ℓ:
        //   class(∇, t^ℓdt) − class(∇, u·t^ℓdt)
        //     = change_of_nu(Tr𝒜 − deg·dt/t, u, n, ℓ).
        let ring = Ring::Qx;
        let c = flat_rank1(&p, &q, 0, true);
        let u0s = rat(ring, u0.0, 1)
            .add(&Scalar::x(ring).mul(&rat(ring, u0.1, 1)).unwrap())
            .unwrap();
        prop_assume!(u0s.is_unit());
        let mut terms = vec![(0i64, u0s)];
        for (k, c) in u_tail.iter().enumerate() {
            terms.push((k as i64 + 1, rat(ring, *c, 1)));
        }
        let u = Laurent::from_terms(ring, &terms, CP);

        let nu_plain = NuChoice::new(ell, Laurent::one(ring, CP)).unwrap();
        let nu_u = NuChoice::new(ell, u.clone()).unwrap();
        let (b1, e1) = epsilon::eps_class(&c, &nu_plain).unwrap();
        let (b2, e2) = epsilon::eps_class(&c, &nu_u).unwrap();
        prop_assert_eq!(b1, b2);

        let chi = epsilon::trace_form(&c).unwrap().add(&AbsForm::from_dt(
            Laurent::monomial(ring, Scalar::from_int(ring, -e1.degree), -1, CP),
        )).unwrap();
        let expected = epsilon::change_of_nu(&chi, &u, c.rank(), ell).unwrap();
        let got = e1.form.sub(&e2.form).unwrap();
        prop_assert!(kform_eq(&got, &expected));
        prop_assert_eq!(e1.degree, e2.degree);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn epsilon_degree_triple_agreement(
        p in prop::collection::vec((-3i64..2, -5i64..6), 1..4),
        pole in prop::sample::select(vec![1i64, 2, 3]),
        lead in 1i64..5,
        ell in -2i64..2,
    ) {
        // Class degree = cyclic-vector formula = Fredholm index.
        let mut p = p;
        p.push((-pole, lead));
        let c = flat_rank1(&p, &[], 0, true);
        let ring = Ring::Qx;
        let nu = NuChoice::new(ell, Laurent::one(ring, CP)).unwrap();
        let (_, cls) = epsilon::eps_class(&c, &nu).unwrap();
        let series = nu.series();
        prop_assert_eq!(cls.degree, connect::epsilon_degree(&c, &series).unwrap());
        let op = connect::tau_nu_operator(&c, &series).unwrap();
        prop_assert_eq!(cls.degree, index(&op, (-8, 8)).unwrap());
        prop_assert_eq!(cls.parity as i64, cls.degree.rem_euclid(2));
    }
}
