//! The acceptance checks, grouped by criterion.

use std::collections::HashMap;

use cuspforms::arith::{divisors, euler_phi, gcd, is_prime};
use cuspforms::cusp_oracle::{expand_at_cusp, verify_periodicity, OracleOptions};
use cuspforms::cusps::{enumerate_cusps, parse_cusp, width, Mat2};
use cuspforms::modform::{load_builtin, Builtin, NewformData};
use cuspforms::voronoi::{
    average_bound_experiment, closed_form_identity, default_bound_grid, hankel, hankel_with, verify_voronoi,
    CoefficientSource, HankelKind, Provenance, QuadratureRule, TestFunction,
};
use cuspforms::whittaker::{al_double_application, fit_and_check, verify_al_relation};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::report::{Check, VerificationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

impl Level {
    fn name(self) -> &'static str {
        match self {
            Level::Quick => "quick",
            Level::Full => "full",
        }
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "cusp combinatorics"),
    (2, "oracle fidelity at infinity"),
    (3, "periodicity and extended width"),
    (4, "product formula against the oracle"),
    (5, "principal-series support and modulus"),
    (6, "Voronoi equality"),
    (7, "closed-form identity"),
    (8, "Atkin-Lehner relation"),
    (9, "mean-square growth exponent"),
    (10, "Hankel transform self-checks"),
];

pub fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::Input => "input",
        Provenance::Oracle => "oracle",
        Provenance::ProductFormula => "product_formula",
        Provenance::ClosedForm => "closed_form",
    }
}

pub fn run_suite(level: Level) -> VerificationReport {
    let checks: Vec<Check> = (1..=10u8)
        .into_par_iter()
        .flat_map_iter(|c| criterion(c, level).into_iter().map(move |k| k.criterion(c)))
        .collect();
    VerificationReport::new(level.name(), checks)
}

pub fn criterion(c: u8, level: Level) -> Vec<Check> {
    match c {
        1 => cusp_combinatorics(level),
        2 => oracle_fidelity(),
        3 => periodicity(level),
        4 => product_formula(level),
        5 => principal_series(),
        6 => voronoi(level),
        7 => identity(level),
        8 => atkin_lehner(level),
        9 => mean_square(level),
        10 => hankel_checks(level),
        _ => Vec::new(),
    }
}

fn form(which: Builtin) -> Result<NewformData, String> {
    load_builtin(which).map_err(|e| format!("could not load {}: {e}", which.name()))
}

/// Runs `body` on a loaded form, turning load errors into failed checks.
fn with_form(which: Builtin, id: &str, contract: &str, body: impl FnOnce(&NewformData, Check) -> Check) -> Check {
    let check = Check::new(id, contract, json!({"form": which.name()}));
    match form(which) {
        Ok(f) => body(&f, check),
        Err(e) => check.failed(e),
    }
}

/// Orbits of Γ₀(N) on the bottom rows `(c : d)` of SL₂(Z), modulo the
/// translations `d ↦ d + c` on the right.
fn brute_force_cusp_count(n: i64) -> usize {
    let nu = n as usize;
    let idx = |c: i64, d: i64| (c.rem_euclid(n) as usize) * nu + d.rem_euclid(n) as usize;
    let mut parent: Vec<usize> = (0..nu * nu).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let union = |p: &mut Vec<usize>, i: usize, j: usize| {
        let (a, b) = (find(p, i), find(p, j));
        p[a] = b;
    };
    // Primes below N that are units, and -1, generate (Z/N)^×.
    let mut gens: Vec<i64> = (2..n.max(2)).filter(|&p| is_prime(p as u64) && n % p != 0).collect();
    gens.push(-1);
    let mut live = vec![false; nu * nu];
    for c in 0..n {
        for d in 0..n {
            if gcd(gcd(c, d), n) != 1 {
                continue;
            }
            live[idx(c, d)] = true;
            union(&mut parent, idx(c, d), idx(c, d + c));
            for &u in &gens {
                union(&mut parent, idx(c, d), idx(u * c, u * d));
            }
        }
    }
    let mut roots: Vec<usize> = (0..nu * nu).filter(|&i| live[i]).map(|i| find(&mut parent, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

fn cusp_combinatorics(level: Level) -> Vec<Check> {
    let top = if level == Level::Quick { 60 } else { 200 };
    let mut bad = Vec::new();
    for n in 1..=top {
        let formula: u64 = divisors(n as u64).iter().map(|&q| euler_phi(gcd(q as i64, n / q as i64) as u64)).sum();
        let listed = enumerate_cusps(n).map(|c| c.len()).unwrap_or(0);
        let brute = brute_force_cusp_count(n);
        if listed as u64 != formula || brute as u64 != formula {
            bad.push(format!("N={n}: formula {formula}, listed {listed}, orbits {brute}"));
        }
    }
    let counts = Check::new(
        "c01.counts",
        "number of cusps = sum over q | N of phi((q, N/q)) = number of P1(Z/N) orbits",
        json!({"levels": [1, top]}),
    )
    .residual(bad.len() as f64)
    .provenance(["exact"]);
    let counts = if bad.is_empty() { counts.passed(true) } else { counts.failed(bad.join("; ")) };

    let mut bad = Vec::new();
    for n in 1..=60i64 {
        for c in enumerate_cusps(n).unwrap_or_default() {
            let s = c.scaling_matrix();
            let brute = (1..=n)
                .find(|&m| (s.sigma_inv() * Mat2::translation(m) * s.sigma()).in_gamma0(n))
                .unwrap_or(0);
            if width(n, c.denominator()).ok() != Some(brute) {
                bad.push(format!("N={n} {c}: brute {brute}"));
            }
        }
    }
    let widths = Check::new("c01.widths", "width = least m with sigma^-1 T^m sigma in Gamma0(N)", json!({"levels": [1, 60]}))
        .residual(bad.len() as f64)
        .provenance(["exact"]);
    let widths = if bad.is_empty() { widths.passed(true) } else { widths.failed(bad.join("; ")) };
    vec![counts, widths]
}

fn oracle_fidelity() -> Vec<Check> {
    Builtin::ALL
        .par_iter()
        .map(|&which| {
            with_form(which, &format!("c02.{}", which.name()), "oracle at infinity = input, n <= 50, rel 1e-9", |f, check| {
                let e = match expand_at_cusp(f, &parse_cusp(f.level(), "oo").expect("oo parses"), &OracleOptions::new(50)) {
                    Ok(e) => e,
                    Err(err) => return check.failed(err),
                };
                let scale = (1..=50).filter_map(|n| f.coefficient(n)).map(|c| c.norm()).fold(0.0, f64::max);
                let mut worst = 0.0f64;
                for n in 1..=50u64 {
                    let (Some(a), Some(b)) = (f.coefficient(n), e.coefficient(n as i64)) else {
                        return check.failed(format!("coefficient {n} unavailable"));
                    };
                    let r = (a - b).norm() / if a.norm() > 0.0 { a.norm() } else { scale };
                    worst = worst.max(r);
                }
                check.residual(worst).provenance(["input", "oracle"]).passed(worst < 1e-9)
            })
        })
        .collect()
}

fn periodicity(level: Level) -> Vec<Check> {
    let forms: &[Builtin] = match level {
        Level::Quick => &[Builtin::Level11],
        Level::Full => &[Builtin::Level9Chi, Builtin::Level11, Builtin::Eta12, Builtin::Eta36],
    };
    let mut out = Vec::new();
    for &which in forms {
        let f = match form(which) {
            Ok(f) => f,
            Err(e) => {
                out.push(Check::new(format!("c03.{}", which.name()), "load", json!({})).failed(e));
                continue;
            }
        };
        let cusps = enumerate_cusps(f.level()).unwrap_or_default();
        out.extend(cusps.par_iter().map(|c| {
            let check = Check::new(
                format!("c03.{}.{c}", f.name()),
                "delta is a period and no proper divisor is (threshold 1e-8)",
                json!({"form": f.name(), "cusp": c.to_string()}),
            )
            .provenance(["oracle"]);
            match verify_periodicity(&f, c, None) {
                Ok(r) => {
                    let at_delta = r.checks.iter().find(|k| k.period == r.delta).map(|k| k.max_relative_error);
                    let check = check.residual(at_delta.unwrap_or(f64::NAN)).note(format!("delta {}", r.delta));
                    check.passed(r.passed)
                }
                Err(e) => check.failed(e),
            }
        }).collect::<Vec<_>>());
    }
    out
}

fn product_formula(level: Level) -> Vec<Check> {
    let (cases, n_max): (Vec<(Builtin, Vec<&str>)>, i64) = match level {
        Level::Quick => (vec![(Builtin::Level11, vec!["0", "oo"])], 20),
        Level::Full => (
            vec![(Builtin::Level11, vec!["0", "oo"]), (Builtin::Level9Chi, vec!["1/1", "1/3", "2/3", "oo"])],
            30,
        ),
    };
    let mut out = Vec::new();
    for (which, cusps) in cases {
        for cusp in cusps {
            let id = format!("c04.{}.{cusp}", which.name());
            out.push(with_form(which, &id, "formula = oracle for n <= 30 after one unimodular fit (rel 1e-6, |c| = 1 +- 1e-8)", |f, check| {
                let cusp = parse_cusp(f.level(), cusp).expect("fixed cusp list");
                let check = check.provenance(["oracle", "product_formula"]);
                match fit_and_check(f, &cusp, n_max, None) {
                    Ok(r) if r.available() == 0 => check.skipped(
                        r.rows.first().and_then(|row| row.diagnosis.clone()).unwrap_or_else(|| "formula unavailable".into()),
                    ),
                    Ok(r) => check
                        .residual(r.max_residual)
                        .note(format!(
                            "constant {:.12}{:+.12}i, |c|-1 = {:.1e}, {} of {n_max} available",
                            r.constant.re,
                            r.constant.im,
                            r.constant_modulus_error,
                            r.available()
                        ))
                        .passed(r.passes(1e-6, 1e-8)),
                    Err(e) => check.failed(e),
                }
            }));
        }
    }
    out
}

fn principal_series() -> Vec<Check> {
    ["1/3", "2/3"]
        .iter()
        .map(|&cusp| {
            with_form(Builtin::Level9Chi, &format!("c05.level9chi.{cusp}"), "support on one class mod 3; constant modulus ratio 9^(-(k-1)/4) (rel 1e-6)", |f, check| {
                let c = parse_cusp(9, cusp).expect("fixed cusp");
                let e = match expand_at_cusp(f, &c, &OracleOptions::new(50)) {
                    Ok(e) => e,
                    Err(err) => return check.failed(err),
                };
                let vals: Vec<f64> = (1..=50).map(|n| e.coefficient(n).map_or(f64::NAN, |v| v.norm())).collect();
                let max = vals.iter().cloned().fold(0.0, f64::max);
                let support: Vec<i64> = (1..=50).filter(|&n| vals[n as usize - 1] >= 1e-8 * max).collect();
                let Some(&first) = support.first() else {
                    return check.failed("no support");
                };
                let one_class = support.iter().all(|n| n % 3 == first % 3);
                let predicted = 9f64.powf(-(f.weight() as f64 - 1.0) / 4.0);
                let worst = support
                    .iter()
                    .map(|&n| {
                        let ratio = vals[n as usize - 1] / f.coefficient(n as u64).map_or(f64::NAN, |a| a.norm());
                        (ratio - predicted).abs() / predicted
                    })
                    .fold(0.0, f64::max);
                check
                    .residual(worst)
                    .provenance(["input", "oracle"])
                    .note(format!("support class {} mod 3, predicted ratio {predicted:.15}", first % 3))
                    .passed(one_class && worst < 1e-6)
            })
        })
        .collect()
}

fn voronoi(level: Level) -> Vec<Check> {
    let bs: &[i64] = match level {
        Level::Quick => &[3],
        Level::Full => &[2, 3, 5, 11, 22],
    };
    let test = TestFunction::bump(1.0, 100.0);
    bs.iter()
        .map(|&b| {
            with_form(Builtin::Level11, &format!("c06.level11.1_{b}"), "|LHS - RHS| < 1e-6 |LHS| (or 1e-9)", |f, check| {
                let mut check = check;
                check.inputs = json!({"form": f.name(), "twist": format!("1/{b}"), "cusp": "oo", "bump": [1.0, 100.0]});
                match verify_voronoi(f, 1, b, &parse_cusp(11, "oo").expect("oo"), &test, CoefficientSource::Auto) {
                    Ok(r) => check
                        .residual(r.rel_residual)
                        .provenance([provenance_name(r.lhs_provenance), provenance_name(r.rhs_provenance)])
                        .note(format!(
                            "dual cusp {} (delta {}), {} dual terms, tail {:.1e}",
                            r.dual.dual_cusp, r.dual.delta_b, r.rhs_terms, r.tail_bound
                        ))
                        .passed(r.passes),
                    Err(e) => check.failed(e),
                }
            })
        })
        .collect()
}

fn identity(level: Level) -> Vec<Check> {
    let grid: Vec<(Builtin, i64, f64)> = match level {
        Level::Quick => vec![(Builtin::Level11, 3, 0.5)],
        Level::Full => [Builtin::Level11, Builtin::Delta]
            .into_iter()
            .flat_map(|w| [2i64, 3, 11].into_iter().flat_map(move |b| [0.3, 0.5, 1.0].map(|y| (w, b, y))))
            .collect(),
    };
    grid.into_iter()
        .map(|(which, b, y)| {
            let id = format!("c07.{}.1_{b}.y{y}", which.name());
            with_form(which, &id, "f(a/b + iy) = dual expansion with closed-form transform (rel 1e-8)", |f, check| {
                let mut check = check;
                check.inputs = json!({"form": f.name(), "twist": format!("1/{b}"), "y": y});
                match closed_form_identity(f, 1, b, y, CoefficientSource::Auto) {
                    Ok(r) => check
                        .residual(r.rel_residual)
                        .provenance([
                            provenance_name(r.direct_provenance),
                            provenance_name(r.dual_provenance),
                            provenance_name(r.hankel_provenance),
                        ])
                        .note(format!("dual cusp {}, {} terms", r.dual_cusp, r.dual_terms))
                        .passed(r.passes),
                    Err(e) => check.failed(e),
                }
            })
        })
        .collect()
}

fn atkin_lehner(level: Level) -> Vec<Check> {
    let cases: &[(Builtin, i64)] = match level {
        Level::Quick => &[(Builtin::Level11, 11)],
        Level::Full => &[(Builtin::Level11, 11), (Builtin::Level9Chi, 3)],
    };
    let mut out = Vec::new();
    for &(which, p) in cases {
        let f = match form(which) {
            Ok(f) => f,
            Err(e) => {
                out.push(Check::new(format!("c08.{}", which.name()), "load", json!({})).failed(e));
                continue;
            }
        };
        for cusp in enumerate_cusps(f.level()).unwrap_or_default() {
            let check = Check::new(
                format!("c08.{}.S{p}.{cusp}", f.name()),
                "oracle at a = transformed partner oracle, n <= 30, rel 1e-6 after one unimodular fit",
                json!({"form": f.name(), "set": [p], "cusp": cusp.to_string()}),
            )
            .provenance(["oracle"]);
            out.push(match verify_al_relation(&f, &[p], &cusp, 30) {
                Ok(r) => check
                    .residual(r.max_residual)
                    .note(format!("partner {} at {}", r.partner_form, r.partner.partner_cusp))
                    .passed(r.partner_cusp_matches && r.max_residual < 1e-6 && r.constant_modulus_error < 1e-8),
                Err(e) => check.failed(e),
            });
            if f.character().is_trivial() {
                let check = Check::new(
                    format!("c08.{}.S{p}.{cusp}.twice", f.name()),
                    "applying the relation twice is the identity (1e-12)",
                    json!({"form": f.name(), "set": [p], "cusp": cusp.to_string()}),
                )
                .provenance(["oracle"]);
                out.push(match al_double_application(&f, &[p], &cusp, 30) {
                    Ok(r) => check.residual(r.deviation).passed(r.composite_is_constant && r.deviation < 1e-12),
                    Err(e) => check.failed(e),
                });
            }
        }
    }
    out
}

fn mean_square(level: Level) -> Vec<Check> {
    let forms: Vec<Builtin> = match level {
        Level::Quick => vec![Builtin::Level11],
        Level::Full => Builtin::ALL.into_iter().chain(Builtin::AUXILIARY).collect(),
    };
    let grid = default_bound_grid();
    let mut out = Vec::new();
    for which in forms {
        let f = match form(which) {
            Ok(f) => f,
            Err(e) => {
                out.push(Check::new(format!("c09.{}", which.name()), "load", json!({})).failed(e));
                continue;
            }
        };
        for cusp in enumerate_cusps(f.level()).unwrap_or_default() {
            let check = Check::new(
                format!("c09.{}.{cusp}", f.name()),
                "log-log slope of sum |a(n)|^2 over X in [500, 5000] lies in [k - 0.75, k + 0.25]",
                json!({"form": f.name(), "cusp": cusp.to_string(), "x": grid}),
            );
            out.push(match average_bound_experiment(&f, &cusp, &grid, CoefficientSource::Auto) {
                Ok(r) => {
                    let last = r.rows.last().expect("nonempty grid");
                    let check = check
                        .provenance([provenance_name(r.provenance)])
                        .residual(r.slope.unwrap_or(f64::NAN) - f.weight() as f64)
                        .note(format!(
                            "slope {:.4}, S(5000) / bound = {:.3e} (theta = 7/64, constant 1; informational)",
                            r.slope.unwrap_or(f64::NAN),
                            last.ratio
                        ));
                    check.passed(r.slope_in_window)
                }
                Err(e) => check.failed(e),
            });
        }
    }
    out
}

fn hankel_checks(level: Level) -> Vec<Check> {
    let cases = if level == Level::Quick { 10 } else { 50 };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let draws: Vec<(f64, f64, f64, u32)> = (0..cases)
        .map(|_| {
            let a = rng.gen_range(0.05..5.0);
            let b = a + rng.gen_range(0.3..20.0);
            let y = rng.gen_range(0.01..50.0);
            let k = [2u32, 3, 12][rng.gen_range(0..3)];
            (a, b, y, k)
        })
        .collect();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for &(a, b, y, k) in &draws {
        let f = TestFunction::bump(a, b);
        let kind = HankelKind::Holomorphic { weight: k };
        let gl = hankel_with(&f, &kind, y, QuadratureRule::GaussLegendrePanels);
        let ts = hankel_with(&f, &kind, y, QuadratureRule::TanhSinhPanels);
        match (gl, ts) {
            (Ok(g), Ok(t)) => worst = worst.max((g.value - t.value).norm()),
            (Err(e), _) | (_, Err(e)) => failures.push(format!("[{a}, {b}] y={y}: {e}")),
        }
    }
    let dual = Check::new(
        "c10.dual_quadrature",
        "Gauss-Legendre and tanh-sinh panels agree to 1e-9",
        json!({"cases": cases, "seed": 0x5eed}),
    )
    .residual(worst)
    .provenance(["quadrature"]);
    let dual = if failures.is_empty() { dual.passed(worst < 1e-9) } else { dual.failed(failures.join("; ")) };

    let mut nonzero = Vec::new();
    for &(a, b, y, k) in draws.iter().take(10) {
        match hankel(&TestFunction::bump(a, b), &HankelKind::Holomorphic { weight: k }, -y) {
            Ok(v) if v.value == Complex64::new(0.0, 0.0) => {}
            Ok(v) => nonzero.push(format!("y={}: {}", -y, v.value)),
            Err(e) => nonzero.push(e.to_string()),
        }
    }
    let negative = Check::new("c10.negative_argument", "holomorphic transform at y < 0 is exactly 0", json!({"cases": 10}))
        .residual(nonzero.len() as f64);
    let negative = if nonzero.is_empty() { negative.passed(true) } else { negative.failed(nonzero.join("; ")) };

    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for pair in draws.chunks(2).take(10) {
        let [(a1, b1, y, k), (a2, b2, _, _)] = [pair[0], pair[pair.len() - 1]];
        let kind = HankelKind::Holomorphic { weight: k };
        let (f, g) = (TestFunction::bump(a1, b1), TestFunction::bump(a2, b2));
        let (al, be) = (Complex64::new(0.7, -1.3), Complex64::new(-2.1, 0.4));
        let combo = TestFunction::Combination { terms: vec![(al, f.clone()), (be, g.clone())] };
        match (hankel(&combo, &kind, y), hankel(&f, &kind, y), hankel(&g, &kind, y)) {
            (Ok(h), Ok(hf), Ok(hg)) => worst = worst.max((h.value - (al * hf.value + be * hg.value)).norm()),
            _ => errors.push(format!("[{a1}, {b1}] + [{a2}, {b2}] at y={y}")),
        }
    }
    let linear = Check::new("c10.linearity", "H(aF + bG) = aH(F) + bH(G) to 1e-9", json!({"cases": 10})).residual(worst);
    let linear = if errors.is_empty() { linear.passed(worst < 1e-9) } else { linear.failed(errors.join("; ")) };
    vec![dual, negative, linear]
}

/// Worst residual and pass/fail per criterion.
pub fn by_criterion(report: &VerificationReport) -> HashMap<u8, (usize, usize, usize, f64)> {
    let mut out: HashMap<u8, (usize, usize, usize, f64)> = HashMap::new();
    for c in &report.checks {
        let Some(k) = c.criterion else { continue };
        let e = out.entry(k).or_insert((0, 0, 0, 0.0));
        match c.outcome {
            crate::report::Outcome::Pass => e.0 += 1,
            crate::report::Outcome::Fail => e.1 += 1,
            crate::report::Outcome::Skip => e.2 += 1,
        }
        if let Some(r) = c.residual {
            if r.is_finite() && k != 9 {
                e.3 = e.3.max(r.abs());
            }
        }
    }
    out
}
