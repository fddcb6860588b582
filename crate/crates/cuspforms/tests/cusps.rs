use std::collections::HashMap;

use cuspforms::arith::{gcd, mod_inv, DirichletCharacter, RootOfUnity};
use cuspforms::cusps::{
    bruhat_decompose, cusps_equivalent, enumerate_cusps, equivalence_witness, extended_width,
    reduce_to_standard_form, scaling_skew, width, Cusp, CuspPoint, Mat2, ScalingMatrix,
};
use proptest::prelude::*;

/// Orbits of Γ₀(N)\SL₂(Z)/±Γ_∞ realised on P¹(Z/N): the coset of γ is its
/// bottom row (c:d) up to units, and Γ_∞ acts by (c:d) ↦ (c:c+d).
struct P1Orbits {
    n: i64,
    canon: HashMap<(i64, i64), usize>,
    parent: Vec<usize>,
}

impl P1Orbits {
    fn new(n: i64) -> Self {
        let units: Vec<i64> = (1..=n).filter(|&u| gcd(u, n) == 1).collect();
        let canonical = |c: i64, d: i64| {
            units
                .iter()
                .map(|&u| ((u * c).rem_euclid(n), (u * d).rem_euclid(n)))
                .min()
                .unwrap()
        };
        let mut canon = HashMap::new();
        for c in 0..n {
            for d in 0..n {
                if gcd(gcd(c, d), n) == 1 {
                    let key = canonical(c, d);
                    let len = canon.len();
                    canon.entry(key).or_insert(len);
                }
            }
        }
        let mut me = P1Orbits {
            n,
            parent: (0..canon.len()).collect(),
            canon: HashMap::new(),
        };
        let mut full = HashMap::new();
        for c in 0..n {
            for d in 0..n {
                if gcd(gcd(c, d), n) == 1 {
                    full.insert((c, d), canon[&canonical(c, d)]);
                }
            }
        }
        me.canon = full;
        for (&(c, d), &i) in me.canon.clone().iter() {
            let j = me.canon[&(c, (c + d).rem_euclid(n))];
            me.union(i, j);
        }
        me
    }

    fn find(&mut self, i: usize) -> usize {
        let p = self.parent[i];
        if p == i {
            return i;
        }
        let r = self.find(p);
        self.parent[i] = r;
        r
    }

    fn union(&mut self, i: usize, j: usize) {
        let (a, b) = (self.find(i), self.find(j));
        self.parent[a] = b;
    }

    fn count(&mut self) -> usize {
        let mut roots: Vec<usize> = (0..self.parent.len()).map(|i| self.find(i)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Orbit of the cusp γ∞ = a/c, read off from the bottom row of γ.
    fn orbit_of(&mut self, x: CuspPoint) -> usize {
        let g = ScalingMatrix::from_point(x).sigma_inv();
        let key = (g.c.rem_euclid(self.n), g.d.rem_euclid(self.n));
        let i = self.canon[&key];
        self.find(i)
    }
}

fn sample_points() -> Vec<CuspPoint> {
    let mut pts = vec![CuspPoint::INFINITY];
    for c in 1..=40i64 {
        for a in -12..=40i64 {
            if gcd(a, c) == 1 {
                pts.push(CuspPoint::new(a, c));
            }
        }
    }
    pts
}

#[test]
fn cusp_counts_match_orbit_enumeration() {
    for n in 1..=200i64 {
        let cusps = enumerate_cusps(n).unwrap();
        let formula: i64 = (1..=n)
            .filter(|q| n % q == 0)
            .map(|q| cuspforms::arith::euler_phi(gcd(q, n / q) as u64) as i64)
            .sum();
        assert_eq!(cusps.len() as i64, formula, "N = {n}");
        assert_eq!(P1Orbits::new(n).count() as i64, formula, "N = {n}");
    }
}

#[test]
fn class_invariant_matches_orbits() {
    let pts = sample_points();
    for n in [1i64, 4, 8, 9, 11, 12, 16, 18, 25, 27, 36, 48, 50, 60] {
        let mut orbits = P1Orbits::new(n);
        let mut seen: HashMap<usize, Cusp> = HashMap::new();
        let mut by_cusp: HashMap<Cusp, usize> = HashMap::new();
        for &x in &pts {
            let o = orbits.orbit_of(x);
            let c = reduce_to_standard_form(n, x).unwrap();
            assert_eq!(*seen.entry(o).or_insert(c), c, "N={n} x={x}");
            assert_eq!(*by_cusp.entry(c).or_insert(o), o, "N={n} x={x}");
        }
        // Every enumerated cusp is hit and represents its own class.
        for c in enumerate_cusps(n).unwrap() {
            assert_eq!(orbits.orbit_of(c.point()), by_cusp[&c]);
            assert_eq!(reduce_to_standard_form(n, c.point()).unwrap(), c);
        }
    }
}

#[test]
fn widths_match_brute_force() {
    for n in 1..=60i64 {
        for c in enumerate_cusps(n).unwrap() {
            let s = c.scaling_matrix();
            let brute = (1..)
                .find(|&m| (s.sigma_inv() * Mat2::translation(m) * s.sigma()).in_gamma0(n))
                .unwrap();
            assert_eq!(c.width(), brute, "N={n} cusp={c}");
            assert_eq!(width(n, c.denominator()).unwrap(), brute);
        }
    }
}

#[test]
fn width_examples() {
    assert_eq!(width(12, 2), Ok(3));
    assert_eq!(width(7, 7), Ok(1));
    assert_eq!(width(7, 1), Ok(7));
    assert!(width(12, 5).is_err());
}

#[test]
fn extended_width_closed_forms_agree() {
    for n in 1..=200i64 {
        for m in (1..=n).filter(|m| n % m == 0) {
            for q in (1..=n).filter(|q| n % q == 0) {
                let w = extended_width(n, m, q).unwrap();
                let product: i64 = w
                    .d_pi_exponents
                    .iter()
                    .map(|&(p, e)| p.pow(e))
                    .product();
                assert_eq!(w.delta * q * q, product);
                let qw = q * w.width;
                assert_eq!(w.delta, w.width * m / gcd(qw, m));
                assert_eq!(w.delta % w.width, 0);
            }
        }
    }
}

fn order_six() -> DirichletCharacter {
    DirichletCharacter::from_generators(9, &[(2, RootOfUnity::new(1, 6))]).unwrap()
}

#[test]
fn extended_width_is_minimal_character_period() {
    // The period of f|σ⁻¹ is w·t with t least such that χ(1 + a q w t) = 1.
    let chars = [
        order_six(),
        DirichletCharacter::trivial(12),
        DirichletCharacter::from_generators(
            36,
            &[(5, RootOfUnity::new(-1, 6)), (19, RootOfUnity::one())],
        )
        .unwrap(),
        DirichletCharacter::from_generators(
            12,
            &[(5, RootOfUnity::new(1, 2)), (7, RootOfUnity::new(1, 2))],
        )
        .unwrap(),
    ];
    for chi in &chars {
        let n = chi.modulus();
        for c in enumerate_cusps(n).unwrap() {
            let s = c.scaling_matrix().sigma_inv();
            let w = c.width();
            let t = (1..)
                .find(|&t| chi.eval(1 + s.a * s.c * w * t).unwrap().is_one())
                .unwrap();
            let data = extended_width(n, chi.conductor(), c.denominator()).unwrap();
            assert_eq!(data.delta, w * t, "N={n} cusp={c}");
        }
    }
    let d = extended_width(9, 9, 3).unwrap();
    assert_eq!((d.width, d.delta), (1, 3));
}

#[test]
fn equivalence_examples() {
    let inf = CuspPoint::INFINITY;
    assert!(cusps_equivalent(11, CuspPoint::new(1, 11), inf).unwrap());
    assert!(!cusps_equivalent(11, CuspPoint::new(0, 1), inf).unwrap());
    assert!(cusps_equivalent(11, CuspPoint::new(3, 7), CuspPoint::new(3, 7)).unwrap());
}

#[test]
fn bruhat_factors_multiply_back() {
    for (n, a, q) in [(1, 0, 1), (12, 1, 2), (9, 1, 3), (9, 2, 3), (36, 5, 6), (11, 7, 1)] {
        let s = if a == 0 {
            ScalingMatrix::from_point(CuspPoint::new(0, 1))
        } else {
            Cusp::with_representative(n, a, q).unwrap().scaling_matrix()
        };
        let f = bruhat_decompose(&s).unwrap();
        assert_eq!(f.product(), s.sigma().to_rational());
    }
    let zero = bruhat_decompose(&ScalingMatrix::from_point(CuspPoint::new(0, 1))).unwrap();
    assert_eq!(zero.n_left, zero.n_right);
    assert_eq!(zero.z, zero.a);
    assert!(bruhat_decompose(&ScalingMatrix::identity()).is_err());
}

proptest! {
    #[test]
    fn scaling_matrix_maps_cusp_to_infinity(a in -300i64..300, c in 1i64..300) {
        prop_assume!(gcd(a, c) == 1);
        let x = CuspPoint::new(a, c);
        let s = ScalingMatrix::from_point(x);
        prop_assert_eq!(s.sigma_inv().det(), 1);
        prop_assert_eq!(s.sigma().act_point(x), CuspPoint::INFINITY);
        prop_assert!(s.sigma_inv().b >= 0 || a == 0);
    }

    #[test]
    fn reduction_is_idempotent_and_equivalent(n in 1i64..120, a in -200i64..200, c in 0i64..200) {
        prop_assume!(gcd(a, c) == 1);
        let x = CuspPoint::new(a, c);
        let r = reduce_to_standard_form(n, x).unwrap();
        prop_assert_eq!(n % r.denominator(), 0);
        prop_assert_eq!(gcd(r.numerator(), n), 1);
        prop_assert_eq!(reduce_to_standard_form(n, r.point()).unwrap(), r);
        prop_assert!(cusps_equivalent(n, x, r.point()).unwrap());
        let g = equivalence_witness(n, x, r.point()).unwrap();
        prop_assert!(g.in_gamma0(n));
        prop_assert_eq!(g.act_point(x), r.point());
    }

    #[test]
    fn witnesses_exist_only_for_equivalent_points(n in 1i64..80, a1 in -50i64..50, c1 in 0i64..60, a2 in -50i64..50, c2 in 0i64..60) {
        prop_assume!(gcd(a1, c1) == 1 && gcd(a2, c2) == 1);
        let (x, y) = (CuspPoint::new(a1, c1), CuspPoint::new(a2, c2));
        let eq = cusps_equivalent(n, x, y).unwrap();
        let w = equivalence_witness(n, x, y);
        prop_assert_eq!(eq, w.is_some());
        if let Some(g) = w {
            prop_assert_eq!(g.act_point(x), y);
        }
    }

    #[test]
    fn skew_relates_scaling_matrices(n in 1i64..80, a in -50i64..50, c in 1i64..60, t in -5i64..5) {
        prop_assume!(gcd(a, c) == 1);
        let x = CuspPoint::new(a, c);
        let sigma = reduce_to_standard_form(n, x).unwrap().scaling_matrix();
        // Another matrix sending ∞ to x, skewed by a translation.
        let tau = ScalingMatrix::from_sigma_inv(ScalingMatrix::from_point(x).sigma_inv() * Mat2::translation(t));
        let (gamma, m) = scaling_skew(n, &sigma, &tau).unwrap();
        prop_assert!(gamma.in_gamma0(n));
        prop_assert_eq!(gamma * sigma.sigma_inv() * Mat2::translation(m), tau.sigma_inv());
    }

    #[test]
    fn standard_representatives_satisfy_invariants(n in 1i64..200) {
        for c in enumerate_cusps(n).unwrap() {
            let q = c.denominator();
            let h = gcd(q, n / q);
            prop_assert_eq!(n % q, 0);
            prop_assert_eq!(gcd(c.numerator(), q), 1);
            prop_assert_eq!((c.numerator() * c.d_class() - 1).rem_euclid(h), 0);
            prop_assert_eq!(mod_inv(c.d_class(), h).is_ok(), true);
        }
    }
}
