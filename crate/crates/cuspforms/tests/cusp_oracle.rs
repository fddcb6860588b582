use std::f64::consts::PI;

use cuspforms::arith::ext_gcd;
use cuspforms::cusp_oracle::{
    expand_at_cusp, verify_periodicity, verify_scaling_skew, OracleCoefficient, OracleOptions,
};
use cuspforms::cusps::{enumerate_cusps, parse_cusp, Cusp, Mat2};
use cuspforms::modform::{load_builtin, Builtin};
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn infinity_reproduces_the_input_coefficients() {
    for which in Builtin::ALL {
        let f = load_builtin(which).unwrap();
        let e = expand_at_cusp(&f, &Cusp::infinity(f.level()), &OracleOptions::new(50)).unwrap();
        assert_eq!(e.delta, 1);
        let scale = (1..=50).map(|n| f.coefficient(n).unwrap().norm()).fold(0.0, f64::max);
        for n in 1..=50 {
            let a = f.coefficient(n as u64).unwrap();
            let b = e.coefficient(n).unwrap();
            // Relative to the coefficient itself, or to the largest one when it vanishes.
            let tol = 1e-9 * if a.norm() > 0.0 { a.norm() } else { scale };
            assert!((a - b).norm() < tol, "{} n={n}: {a} vs {b}", f.name());
        }
    }
}

#[test]
fn level11_at_zero_has_scaled_moduli() {
    let f = load_builtin(Builtin::Level11).unwrap();
    let zero = parse_cusp(11, "0").unwrap();
    let e = expand_at_cusp(&f, &zero, &OracleOptions::new(30)).unwrap();
    assert_eq!(e.delta, 11);
    for n in 1..=30 {
        let expected = f.coefficient(n as u64).unwrap().norm() / 11.0;
        assert!((e.coefficient(n).unwrap().norm() - expected).abs() < 1e-9, "n = {n}");
    }
}

#[test]
fn level9chi_at_denominator_three_is_supported_on_one_class() {
    let f = load_builtin(Builtin::Level9Chi).unwrap();
    for (cusp, class) in [("1/3", 1), ("2/3", 2)] {
        let c = parse_cusp(9, cusp).unwrap();
        let e = expand_at_cusp(&f, &c, &OracleOptions::new(50)).unwrap();
        let max = (1..=50).map(|n| e.coefficient(n).unwrap().norm()).fold(0.0, f64::max);
        for n in 1..=50 {
            let v = e.coefficient(n).unwrap().norm();
            if n % 3 == class {
                assert!(v > 1e-3 * max || f.coefficient(n as u64).unwrap().norm() < 1e-9, "{cusp} n={n}");
            } else {
                assert!(v < 1e-8 * max, "{cusp} n={n}: {v}");
            }
        }
    }
}

#[test]
fn periods_are_minimal_at_every_cusp() {
    for which in [Builtin::Level9Chi, Builtin::Level11, Builtin::Eta12, Builtin::Eta36] {
        let f = load_builtin(which).unwrap();
        for c in enumerate_cusps(f.level()).unwrap() {
            let r = verify_periodicity(&f, &c, None).unwrap();
            assert!(r.passed, "{} at {c}: {:?}", f.name(), r.checks);
        }
    }
    let f = load_builtin(Builtin::Level9Chi).unwrap();
    let r = verify_periodicity(&f, &parse_cusp(9, "1/3").unwrap(), None).unwrap();
    assert_eq!(r.delta, 3);
    assert_eq!(r.checks.iter().map(|c| (c.period, c.periodic)).collect::<Vec<_>>(), [(1, false), (3, true)]);
    let r = verify_periodicity(&f, &Cusp::infinity(9), None).unwrap();
    assert_eq!(r.delta, 1);
}

#[test]
fn coefficients_vanish_off_the_lattice() {
    let f = load_builtin(Builtin::Level11).unwrap();
    let zero = parse_cusp(11, "0").unwrap();
    for c in [2, 3] {
        let opts = OracleOptions { period_multiple: c, ..OracleOptions::new(30) };
        let e = expand_at_cusp(&f, &zero, &opts).unwrap();
        assert_eq!(e.period, 11 * c);
        let max = (1..=30).map(|n| e.coefficient(n).unwrap().norm()).fold(0.0, f64::max);
        for n in 1..=30 {
            if n % c != 0 {
                assert!(e.coefficient(n).unwrap().norm() < 1e-9 * max, "c={c} n={n}");
            }
        }
    }
}

#[test]
fn heights_agree_and_no_constant_or_negative_terms() {
    for which in Builtin::ALL {
        let f = load_builtin(which).unwrap();
        for c in enumerate_cusps(f.level()).unwrap() {
            let e1 = expand_at_cusp(&f, &c, &OracleOptions::new(20)).unwrap();
            let e2 = expand_at_cusp(&f, &c, &OracleOptions::new(20).with_height(1.4 * e1.y)).unwrap();
            assert!(e1.constant_term <= e1.noise_floor(), "{} {c}", f.name());
            assert!(e1.negative_mass <= e1.noise_floor(), "{} {c}", f.name());
            let scale = (1..=20).map(|n| e1.coefficient(n).unwrap().norm()).fold(0.0, f64::max);
            for n in 1..=20 {
                let (a, b) = (e1.coefficient(n).unwrap(), e2.coefficient(n).unwrap());
                assert!((a - b).norm() < 1e-7 * a.norm().max(1e-3 * scale), "{} {c} n={n}: {a} {b}", f.name());
            }
        }
    }
}

#[test]
fn tiny_kernels_are_flagged_not_divided() {
    let f = load_builtin(Builtin::Level11).unwrap();
    let e = expand_at_cusp(&f, &Cusp::infinity(11), &OracleOptions::new(30).with_height(0.5)).unwrap();
    // e^{-2π n/2} < 1e-13 from n = 10 on.
    assert_eq!(e.unresolved(), (10..=30).collect::<Vec<_>>());
    assert!(matches!(e.coefficients[9].1, OracleCoefficient::Unresolved { .. }));
    assert!(e.coefficient(9).is_some());
}

#[test]
fn undersampling_is_detected() {
    let f = load_builtin(Builtin::Level11).unwrap();
    let opts = OracleOptions { samples: Some(64), ..OracleOptions::new(20) };
    let e = expand_at_cusp(&f, &Cusp::infinity(11), &opts).unwrap();
    assert!(e.alias_estimate > 1e-6 * e.sample_scale, "{}", e.alias_estimate);
    assert!(e.residual > 1e-6 * e.sample_scale);
    let good = expand_at_cusp(&f, &Cusp::infinity(11), &OracleOptions::new(20)).unwrap();
    assert!(good.alias_estimate < 1e-12 * good.sample_scale);
}

#[test]
fn trivial_skews() {
    let f = load_builtin(Builtin::Level9Chi).unwrap();
    let c = parse_cusp(9, "1/3").unwrap();
    assert!(verify_scaling_skew(&f, &c, Mat2::IDENTITY, 0).unwrap().passed);
    assert!(verify_scaling_skew(&f, &c, Mat2::IDENTITY, 3).unwrap().passed);
}

fn gamma0(level: i64, j: i64, d: i64) -> Option<Mat2> {
    let c = level * j;
    let (g, x, y) = ext_gcd(d, c);
    (g == 1).then(|| Mat2::new(x, -y, c, d))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn random_skews(which in 0usize..2, j in -2i64..3, d in -9i64..10, m in -3i64..4) {
        let (which, cusp) = [(Builtin::Level11, "0"), (Builtin::Level9Chi, "1/3")][which];
        let f = load_builtin(which).unwrap();
        let Some(g) = gamma0(f.level(), j, d) else { return Ok(()) };
        let c = parse_cusp(f.level(), cusp).unwrap();
        let r = verify_scaling_skew(&f, &c, g, m).unwrap();
        prop_assert!(r.passed, "{:?}", r);
    }
}

#[test]
fn sampled_line_is_reconstructed() {
    // The expansion reproduces f|σ⁻¹ at a point off the sample grid.
    let f = load_builtin(Builtin::Level9Chi).unwrap();
    let c = parse_cusp(9, "0").unwrap();
    let e = expand_at_cusp(&f, &c, &OracleOptions::new(400)).unwrap();
    // High enough that the series truncated at 400 has converged.
    let z = Complex64::new(1.2345, 12.0 * e.y);
    let direct = f.slash(e.sigma_inv, z).unwrap().value;
    let series: Complex64 = (1..=400)
        .map(|n| {
            e.coefficient(n).unwrap()
                * (-2.0 * PI * n as f64 * z.im / e.delta as f64).exp()
                * Complex64::from_polar(1.0, 2.0 * PI * n as f64 * z.re / e.delta as f64)
        })
        .sum();
    assert!((direct - series).norm() < 1e-8 * direct.norm(), "{direct} vs {series}");
}
