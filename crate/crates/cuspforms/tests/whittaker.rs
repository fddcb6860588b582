use cuspforms::arith::{gcd, ipow, vp, DirichletCharacter, RootOfUnity};
use cuspforms::cusp_oracle::{expand_at_cusp, OracleOptions};
use cuspforms::cusps::{d_pi_exponent, enumerate_cusps, parse_cusp, Cusp};
use cuspforms::modform::{load_builtin, Builtin, NewformData};
use cuspforms::whittaker::*;
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::LazyLock;

static LEVEL11: LazyLock<NewformData> = LazyLock::new(|| load_builtin(Builtin::Level11).unwrap());
static LEVEL9CHI: LazyLock<NewformData> = LazyLock::new(|| load_builtin(Builtin::Level9Chi).unwrap());

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn known_epsilon(lp: LocalParams, eps: f64) -> LocalParams {
    lp.with_epsilon(c(eps), ParamStatus::Known)
}

/// Test-side Hecke recursion at a good prime.
fn hecke_lambda(f: &NewformData, p: u64, r: usize) -> Vec<Complex64> {
    let lp = f.lambda(p).unwrap();
    let chi = f.character().value(p as i64);
    let mut out = vec![c(1.0), lp];
    while out.len() <= r {
        let j = out.len();
        out.push(lp * out[j - 1] - chi * out[j - 2]);
    }
    out
}

#[test]
fn spherical_values() {
    let delta = load_builtin(Builtin::Delta).unwrap();
    let lp = LocalParams::from_form(&delta, 2).unwrap();
    assert_eq!(spherical_value(&lp, 0), Some(c(1.0)));
    let w = spherical_value(&lp, 1).unwrap();
    assert!((w - c(-24.0 / 64.0)).norm() < 1e-15, "{w}");

    let f = load_builtin(Builtin::Level9Chi).unwrap();
    for p in [2u64, 5, 7] {
        let lp = LocalParams::from_form(&f, p as i64).unwrap();
        let rec = hecke_lambda(&f, p, 5);
        for r in 0..=5u32 {
            let expect = rec[r as usize] * (p as f64).powf(-(r as f64) / 2.0);
            let got = spherical_value(&lp, r).unwrap();
            assert!((got - expect).norm() < 1e-12 * expect.norm().max(1.0), "p={p} r={r}");
        }
    }
}

#[test]
fn lemma_l_ge_np_trivial_cases() {
    let f = load_builtin(Builtin::Level11).unwrap();
    let lp = LocalParams::from_form(&f, 11).unwrap();
    // t + 2l = 0: a unimodular value.
    for v in [1, 2, 5, 10] {
        let w = value_l_ge_np(&lp, MatrixArg::new(11, 1, -2, 1, v).unwrap());
        assert_eq!(w.provenance, Provenance::LemmaLGeNp);
        assert!((w.value.unwrap().norm() - 1.0).abs() < 1e-15);
    }
    // t + l >= 0 makes ψ trivial; trivial χ leaves p^{-r/2} λ(p^r).
    let w = value_l_ge_np(&lp, MatrixArg::new(11, 1, 0, 2, 3).unwrap()).value.unwrap();
    let expect = spherical_value(&lp, 4).unwrap();
    assert!((w - expect).norm() < 1e-15);
    // Below the range of the lemma it declines.
    let w = value_l_ge_np(&lp, MatrixArg::new(11, 1, 0, 0, 3).unwrap());
    assert_eq!(w.provenance, Provenance::Unavailable);
    assert!(w.value.is_none());
}

#[test]
fn lemma_l_eq_0_cases() {
    let f = load_builtin(Builtin::Level11).unwrap();
    let lp = LocalParams::from_form(&f, 11).unwrap();
    // Root number not yet known: nothing is fabricated.
    let w = value_l_eq_0(&lp, MatrixArg::new(11, 1, -1, 0, 1).unwrap());
    assert!(w.value.is_none() && w.reason.is_some());

    let lp = known_epsilon(lp, -1.0);
    let w = value_l_eq_0(&lp, MatrixArg::new(11, 1, -1, 0, 4).unwrap());
    assert_eq!(w.value, Some(c(-1.0)));
    assert_eq!(w.provenance, Provenance::LemmaLEq0);
    let w = value_l_eq_0(&lp, MatrixArg::new(11, 1, -3, 0, 4).unwrap());
    assert_eq!(w.value, Some(c(0.0)));
    // Independent of v.
    let a = value_l_eq_0(&lp, MatrixArg::new(11, 1, 2, 0, 1).unwrap()).value;
    let b = value_l_eq_0(&lp, MatrixArg::new(11, 1, 2, 0, 7).unwrap()).value;
    assert_eq!(a, b);
}

#[test]
fn level11_root_number_is_unimodular() {
    let f = load_builtin(Builtin::Level11).unwrap();
    let r = fit_and_check(&f, &parse_cusp(11, "0").unwrap(), 30, Some(1)).unwrap();
    // At cusp 0 the only unknown is ε(1/2, π_11), so the fit is that number.
    assert!(r.constant_modulus_error < 1e-10);
    assert!((r.constant - c(-1.0)).norm() < 1e-10, "{}", r.constant);
}

#[test]
fn contragredient_at_the_edges() {
    for (which, p, eps) in [(Builtin::Level11, 11, -1.0), (Builtin::Level9Chi, 3, 1.0)] {
        let f = load_builtin(which).unwrap();
        let lp = known_epsilon(LocalParams::from_form(&f, p).unwrap(), eps);
        let n = lp.n_p;
        for t in -6..=3 {
            for v in [1, 2, 4, 5, 7] {
                if gcd(v, p) != 1 {
                    continue;
                }
                // l = N_p reflects to l' = 0.
                let arg = MatrixArg::new(p, n, t, n, v).unwrap();
                let direct = value_l_ge_np(&lp, arg).value.unwrap();
                let via = value_contragredient(&lp, arg).value.unwrap();
                assert!((direct - via).norm() < 1e-12, "{} t={t} v={v}: {direct} {via}", f.name());
                // l = 0 reflects to l' = N_p.
                let arg = MatrixArg::new(p, n, t, 0, v).unwrap();
                let direct = value_l_eq_0(&lp, arg).value.unwrap();
                let via = value_contragredient(&lp, arg).value.unwrap();
                assert!((direct - via).norm() < 1e-12, "{} t={t} v={v}", f.name());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflecting_twice_is_the_identity(t in -8i64..4, l in 0u32..=2, v in 1i64..1000, phase in 0.0f64..1.0) {
        for (f, p) in [(&*LEVEL11, 11), (&*LEVEL9CHI, 3)] {
            prop_assume!(gcd(v, p) == 1);
            let lp = LocalParams::from_form(f, p).unwrap()
                .with_epsilon(Complex64::from_polar(1.0, std::f64::consts::TAU * phase), ParamStatus::Fitted);
            prop_assume!(l <= lp.n_p);
            // Past this depth ψ sees digits of v that the matrix class forgets.
            let m = ipow(p, lp.n_p + l.min(lp.n_p - l));
            prop_assume!(ipow(p, (-(t + l as i64)).max(0) as u32) <= m);
            let arg = MatrixArg::new(p, lp.n_p, t, l, v).unwrap();
            let (c1, arg2) = reflect(&lp, arg).unwrap();
            let dual = lp.dual();
            let (c2, arg3) = reflect(&dual, arg2).unwrap();
            // v only survives modulo the coarser of the two moduli.
            prop_assert_eq!((arg3.t, arg3.l), (arg.t, arg.l));
            prop_assert_eq!((arg3.v - arg.v).rem_euclid(m), 0);
            prop_assert!((c1 * c2 - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn values_see_v_only_modulo_p_to_the_np_plus_l(t in -6i64..3, l in 0u32..4, v in 1i64..500, j in 1i64..20) {
        let mut lp = known_epsilon(LocalParams::from_form(&LEVEL9CHI, 3).unwrap(), 1.0);
        if let Some(ps) = lp.principal_series.as_mut() {
            ps.status = ParamStatus::Fitted;
        }
        prop_assume!(v % 3 != 0);
        let a = local_value(&lp, MatrixArg::new(3, 2, t, l, v).unwrap());
        let b = local_value(&lp, MatrixArg::new(3, 2, t, l, v + j * ipow(3, 2 + l)).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn the_two_unit_expressions_agree(
        e2 in 0u32..4, e3 in 0u32..3, e5 in 0u32..2,
        m_pick in 0usize..8, q_pick in 0usize..64, a_raw in 1i64..5000, n_raw in 1i64..5000, n_pow in 0u32..4,
    ) {
        let level = ipow(2, e2) * ipow(3, e3) * ipow(5, e5);
        prop_assume!(level > 1);
        let divisors: Vec<i64> = (1..=level).filter(|d| level % d == 0).collect();
        let q = divisors[q_pick % divisors.len()];
        let m = divisors[m_pick % divisors.len()];
        let a = (0..).map(|j| a_raw + j).find(|&x| gcd(x, level) == 1).unwrap();
        let n = n_raw * ipow(2, n_pow);
        let delta = extended_width_of(level, m, q);
        for p in [2, 3, 5] {
            let n_p = vp(level, p).unwrap();
            if n_p == 0 {
                continue;
            }
            let q_p = vp(q, p).unwrap();
            let d = d_pi_exponent(n_p, vp(m, p).unwrap(), q_p);
            let modulus = ipow(p, n_p.max(q_p));
            prop_assert_eq!(
                u_p(a, n, q, delta, p, d - q_p, modulus),
                u_p_inline(a, n, q, delta, p, modulus)
            );
        }
    }
}

#[test]
fn principal_series_support_and_modulus() {
    let f = load_builtin(Builtin::Level9Chi).unwrap();
    let mut lp = LocalParams::from_form(&f, 3).unwrap();
    assert!(principal_series_value(&lp, MatrixArg::new(3, 2, -3, 1, 1).unwrap()).value.is_none());
    let ps = lp.principal_series.as_mut().unwrap();
    ps.b_chi = 1;
    ps.status = ParamStatus::Fitted;
    // u ≡ -b⁻¹ = 2 (mod 3) is the support.
    for u in [1, 2, 4, 5, 7, 8] {
        let w = principal_series_value(&lp, MatrixArg::new(3, 2, -3, 1, u).unwrap());
        assert_eq!(w.provenance, Provenance::PrincipalSeriesExplicit);
        let m = w.value.unwrap().norm();
        if u % 3 == 2 {
            assert!((m - 3f64.sqrt()).abs() < 1e-14);
        } else {
            assert_eq!(m, 0.0);
        }
    }
}

#[test]
fn omega_is_trivial_for_trivial_character_or_q_one() {
    let trivial = DirichletCharacter::trivial(36);
    for q in [1, 2, 3, 4, 6, 9, 12, 18, 36] {
        let delta = extended_width_of(36, 1, q);
        assert!(omega_constant(&trivial, 36, q, delta).is_one());
    }
    let f = load_builtin(Builtin::Level9Chi).unwrap();
    assert!(omega_constant(f.character(), 9, 1, extended_width_of(9, 9, 1)).is_one());
    let eta12 = load_builtin(Builtin::Eta12).unwrap();
    assert!(omega_constant(eta12.character(), 12, 1, extended_width_of(12, 3, 1)).is_one());
    // Nontrivial in general.
    let o = omega_constant(f.character(), 9, 3, extended_width_of(9, 9, 3));
    assert_eq!(o, RootOfUnity::new(1, 1));
}

#[test]
fn formula_at_infinity_reproduces_the_coefficients() {
    for which in [Builtin::Level11, Builtin::Level9Chi, Builtin::Eta12, Builtin::Eta36] {
        let f = load_builtin(which).unwrap();
        let locals = local_data(&f).unwrap();
        let sigma = formula_scaling(&Cusp::infinity(f.level()));
        for n in 1..=300 {
            let fv = product_formula(&locals, &f, &sigma, n).unwrap();
            let a = f.coefficient(n as u64).unwrap();
            let v = fv.value.expect("every prime is covered at infinity");
            assert!((v - a).norm() <= 1e-12 * a.norm().max(1.0), "{} n={n}: {v} vs {a}", f.name());
            assert!(fv.local.iter().all(|t| t.value.provenance == Provenance::LemmaLGeNp));
        }
    }
}

#[test]
fn formula_matches_the_oracle_after_one_fit() {
    let cases = [
        (Builtin::Level11, vec!["0", "oo"]),
        (Builtin::Level9Chi, vec!["1/1", "1/3", "2/3", "oo"]),
    ];
    for (which, cusps) in cases {
        let f = load_builtin(which).unwrap();
        for cusp in cusps {
            let cusp = parse_cusp(f.level(), cusp).unwrap();
            let r = fit_and_check(&f, &cusp, 30, None).unwrap();
            assert_eq!(r.available(), 30, "{} at {cusp}", f.name());
            assert!(r.passes(1e-6, 1e-8), "{} at {cusp}: {} {}", f.name(), r.max_residual, r.constant);
        }
    }
}

#[test]
fn auxiliary_forms_where_covered() {
    for which in Builtin::AUXILIARY {
        let f = load_builtin(which).unwrap();
        for cusp in enumerate_cusps(f.level()).unwrap() {
            let r = fit_and_check(&f, &cusp, 20, None).unwrap();
            if r.available() == 0 {
                let d = r.rows[0].diagnosis.as_deref().unwrap();
                assert!(d.contains("no covering statement"), "{d}");
            } else {
                assert!(r.passes(1e-6, 1e-8), "{} at {cusp}: {}", f.name(), r.max_residual);
            }
        }
    }
    // 1/2 at level 12: 0 < q_2 < N_2 at a non-principal-series prime.
    let f = load_builtin(Builtin::Eta12).unwrap();
    let r = fit_and_check(&f, &parse_cusp(12, "1/2").unwrap(), 5, None).unwrap();
    assert_eq!(r.available(), 0);
    assert!(r.rows[0].diagnosis.as_deref().unwrap().starts_with("p=2"));
}

#[test]
fn principal_series_cusps_have_narrow_support() {
    let f = load_builtin(Builtin::Level9Chi).unwrap();
    let (k, h, delta): (f64, f64, f64) = (3.0, 2.0, 3.0);
    let predicted: f64 = 3f64.powf(h / 4.0) / delta.powf(k / 2.0);
    assert!((predicted - 9f64.powf(-(k - 1.0) / 4.0)).abs() < 1e-15);
    for cusp in ["1/3", "2/3"] {
        let cusp = parse_cusp(9, cusp).unwrap();
        let e = expand_at_cusp(&f, &cusp, &OracleOptions::new(50)).unwrap();
        let max = (1..=50).map(|n| e.coefficient(n).unwrap().norm()).fold(0.0, f64::max);
        let support: Vec<i64> = (1..=50).filter(|&n| e.coefficient(n).unwrap().norm() >= 1e-8 * max).collect();
        let class = support[0] % 3;
        assert!(support.iter().all(|n| n % 3 == class));
        // The formula's moduli need no fit at all.
        let locals = local_data(&f).unwrap();
        let r = fit_and_check(&f, &cusp, 50, None).unwrap();
        for &n in &support {
            let ratio = e.coefficient(n).unwrap().norm() / f.coefficient(n as u64).unwrap().norm();
            assert!((ratio - predicted).abs() < 1e-6 * predicted, "n={n}: {ratio}");
            let row = &r.rows[(n - 1) as usize];
            let unfit = row.formula.unwrap().norm();
            assert!((unfit - e.coefficient(n).unwrap().norm()).abs() < 1e-8 * max);
        }
        drop(locals);
    }
}

#[test]
fn partner_cusps() {
    let f = load_builtin(Builtin::Level11).unwrap();
    let locals = local_data(&f).unwrap();
    let zero = parse_cusp(11, "0").unwrap();
    let none = al_partner(&locals, &f, &[], &zero).unwrap();
    assert_eq!((none.q_s, none.eta), (1, Some(c(1.0))));
    assert_eq!(none.a_s % none.a_s_modulus, none.a % none.a_s_modulus);
    let p = al_partner(&locals, &f, &[11], &Cusp::infinity(11)).unwrap();
    assert_eq!(p.q_s, 1);
    assert_eq!(p.partner_cusp, "1/1");
    assert_eq!(p.delta * p.q, p.delta_s * p.q_s);

    let f = load_builtin(Builtin::Eta12).unwrap();
    let locals = local_data(&f).unwrap();
    let p = al_partner(&locals, &f, &[2], &parse_cusp(12, "1/2").unwrap()).unwrap();
    assert_eq!(p.q_s, 2);
    let p = al_partner(&locals, &f, &[2], &parse_cusp(12, "1/3").unwrap()).unwrap();
    assert_eq!(p.q_s, 12);
    assert!(al_partner(&locals, &f, &[5], &Cusp::infinity(12)).is_err());
}

#[test]
fn atkin_lehner_relations() {
    for (which, s) in [(Builtin::Level11, 11), (Builtin::Level9Chi, 3)] {
        let f = load_builtin(which).unwrap();
        for cusp in enumerate_cusps(f.level()).unwrap() {
            let r = verify_al_relation(&f, &[s], &cusp, 30).unwrap();
            assert!(r.partner_cusp_matches, "{} at {cusp}", f.name());
            assert!(r.max_residual < 1e-6, "{} at {cusp}: {}", f.name(), r.max_residual);
            assert!(r.constant_modulus_error < 1e-8);
            // The explicit prefactor agrees up to a translate of the partner's
            // scaling matrix, and its power of p is inverted.
            assert!(r.stated_phase_drift.is_some());
            assert!((r.stated_scale * r.transform.scale.abs() - 1.0).abs() < 1e-12);
        }
    }
    let f = load_builtin(Builtin::Level9Chi).unwrap();
    let r = verify_al_relation(&f, &[3], &parse_cusp(9, "1/3").unwrap(), 30).unwrap();
    assert_eq!(r.partner_form, "level9chi-conj");
    assert_eq!(r.partner.partner_cusp, "2/3");
    let r = verify_al_relation(&f, &[], &Cusp::infinity(9), 10).unwrap();
    assert!(r.max_residual < 1e-12 && (r.constant - 1.0).norm() < 1e-12);
}

#[test]
fn applying_the_relation_twice_is_the_identity() {
    let f = load_builtin(Builtin::Level11).unwrap();
    for cusp in enumerate_cusps(11).unwrap() {
        let r = al_double_application(&f, &[11], &cusp, 30).unwrap();
        assert!(r.composite_is_constant);
        assert!(r.deviation < 1e-12, "{cusp}: {}", r.deviation);
    }
    let f = load_builtin(Builtin::Level9Chi).unwrap();
    for cusp in enumerate_cusps(9).unwrap() {
        let r = al_double_application(&f, &[3], &cusp, 30).unwrap();
        assert!(r.composite_is_constant && r.deviation < 1e-10, "{cusp}: {}", r.deviation);
    }
}

#[test]
fn partial_twists_are_declined() {
    let f = load_builtin(Builtin::Eta12).unwrap();
    // χ is ramified only at 3, so S = {3} asks for f̄ and S = {2} for f.
    assert_eq!(partner_form(&f, &[3]).unwrap().name(), "eta12-conj");
    assert_eq!(partner_form(&f, &[2]).unwrap().name(), "eta12");
    let delta = load_builtin(Builtin::Delta).unwrap();
    assert!(verify_al_relation(&delta, &[2], &Cusp::infinity(1), 5).is_err());
}
