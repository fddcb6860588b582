use cuspforms::arith::{
    crt, factor, gcd, omega_p, psi_p, DirichletCharacter, Rational, RootOfUnity,
};
use proptest::prelude::*;

fn corpus() -> Vec<DirichletCharacter> {
    let mut out = vec![
        DirichletCharacter::trivial(11),
        DirichletCharacter::from_generators(9, &[(2, RootOfUnity::new(1, 6))]).unwrap(),
        DirichletCharacter::from_generators(4, &[(3, RootOfUnity::new(1, 2))]).unwrap(),
    ];
    // chi_4 * chi_3 modulo 12, given on the generators 5 and 7.
    out.push(
        DirichletCharacter::from_generators(
            12,
            &[(5, RootOfUnity::new(1, 2)), (7, RootOfUnity::new(1, 2))],
        )
        .unwrap(),
    );
    // An imprimitive character mod 36 induced from conductor 9.
    out.push(
        DirichletCharacter::from_generators(
            36,
            &[(5, RootOfUnity::new(-1, 6)), (19, RootOfUnity::one())],
        )
        .unwrap(),
    );
    out
}

/// Conductor by brute force: the least d | M through which chi factors.
fn brute_conductor(chi: &DirichletCharacter) -> i64 {
    let m = chi.modulus();
    (1..=m)
        .filter(|d| m % d == 0)
        .find(|&d| {
            (1..m)
                .filter(|&x| gcd(x, m) == 1 && (x - 1) % d == 0)
                .all(|x| chi.eval(x).unwrap().is_one())
        })
        .unwrap()
}

#[test]
fn factorization_multiplies_back() {
    for n in 1..=10_000u64 {
        let f = factor(n);
        let prod: u64 = f.factors().iter().map(|&(p, e)| p.pow(e)).product();
        assert_eq!(prod, n);
        assert!(f.factors().windows(2).all(|w| w[0].0 < w[1].0));
    }
    let big = (1u64 << 62) - 57;
    let prod: u64 = factor(big).factors().iter().map(|&(p, e)| p.pow(e)).product();
    assert_eq!(prod, big);
}

#[test]
fn characters_are_multiplicative_exactly() {
    for chi in corpus() {
        let m = chi.modulus();
        for x in 0..m {
            for y in 0..m {
                match (chi.eval(x), chi.eval(y)) {
                    (Some(a), Some(b)) => assert_eq!(chi.eval(x * y), Some(a * b)),
                    _ => assert_eq!(chi.eval(x * y), None),
                }
            }
        }
        assert!(chi.eval(1).unwrap().is_one());
    }
}

#[test]
fn conductors_match_brute_force() {
    let expected = [1, 9, 4, 12, 9];
    for (chi, e) in corpus().iter().zip(expected) {
        assert_eq!(chi.conductor(), brute_conductor(chi));
        assert_eq!(chi.conductor(), e);
    }
}

#[test]
fn local_components_reconstruct_the_character() {
    for chi in corpus() {
        let m = chi.modulus();
        let primes = chi.conductor_primes();
        for p in &primes {
            let local = chi.local_component(*p);
            let c = cuspforms::arith::ipow(*p, cuspforms::arith::vp(chi.conductor(), *p).unwrap());
            assert_eq!(local.conductor(), c);
            assert!(local.is_primitive());
        }
        for n in (1..m).filter(|&n| gcd(n, m) == 1) {
            let prod: RootOfUnity = primes
                .iter()
                .map(|&p| chi.local_value(p, n).unwrap())
                .product();
            assert_eq!(Some(prod), chi.eval(n));
        }
    }
}

#[test]
fn twelve_splits_into_conductors_four_and_three() {
    let chi = &corpus()[3];
    assert_eq!(chi.local_component(2).conductor(), 4);
    assert_eq!(chi.local_component(3).conductor(), 3);
}

#[test]
fn generator_values_rebuild_the_character() {
    for chi in corpus() {
        let gens = chi.generator_values();
        let rebuilt = DirichletCharacter::from_generators(chi.modulus(), &gens).unwrap();
        assert_eq!(rebuilt, chi);
    }
}

#[test]
fn omega_is_a_character_of_q_cross() {
    // omega_p is multiplicative on Q^x and agrees with the inverse local
    // component on units; it is trivial on p-adic units for unramified p.
    for chi in corpus() {
        for p in [2i64, 3, 5, 11] {
            for (x, y) in [(2, 7), (9, 5), (18, 35), (-1, 13), (3, 4)] {
                let (x, y) = (Rational::from_integer(x), Rational::new(y, 5 * 7 + 2));
                let lhs = omega_p(&chi, p, x * y).unwrap();
                let rhs = omega_p(&chi, p, x).unwrap() * omega_p(&chi, p, y).unwrap();
                assert_eq!(lhs, rhs);
            }
            if !chi.conductor_primes().contains(&p) {
                for u in [1i64, 7, 13, 29].into_iter().filter(|u| u % p != 0) {
                    assert!(omega_p(&chi, p, Rational::from_integer(u)).unwrap().is_one());
                }
            }
        }
    }
}

#[test]
fn omega_product_formula_on_integers() {
    // Product over all places of the idelic character is trivial on Q^x:
    // for n prime to M, prod_{p | M} omega_p(n) = chi(n)^{-1}.
    for chi in corpus() {
        let m = chi.modulus();
        for n in (1..200).filter(|&n| gcd(n, m) == 1) {
            let prod: RootOfUnity = chi
                .conductor_primes()
                .iter()
                .map(|&p| omega_p(&chi, p, Rational::from_integer(n)).unwrap())
                .product();
            assert_eq!(prod, chi.eval(n).unwrap().inv());
        }
    }
}

proptest! {
    #[test]
    fn crt_solution_satisfies_congruences(r1 in -50i64..50, m1 in 1i64..40, r2 in -50i64..50, m2 in 1i64..40) {
        match crt(&[(r1, m1), (r2, m2)]) {
            Ok((x, m)) => {
                prop_assert_eq!((x - r1).rem_euclid(m1), 0);
                prop_assert_eq!((x - r2).rem_euclid(m2), 0);
                prop_assert_eq!(m, cuspforms::arith::lcm(m1, m2));
            }
            Err(_) => prop_assert_ne!((r1 - r2).rem_euclid(gcd(m1, m2)), 0),
        }
    }

    #[test]
    fn psi_is_additive(a in -200i64..200, b in 1i64..200, c in -200i64..200, d in 1i64..200) {
        for p in [2i64, 3, 5, 11] {
            let x = Rational::new(a, b);
            let y = Rational::new(c, d);
            prop_assert_eq!(psi_p(p, x + y), psi_p(p, x) * psi_p(p, y));
        }
    }

    #[test]
    fn psi_trivial_exactly_on_p_integers(a in -500i64..500, b in 1i64..500) {
        let x = Rational::new(a, b);
        for p in [2i64, 3, 7] {
            let integral = *x.denom() % p != 0;
            prop_assert_eq!(psi_p(p, x).is_one(), integral);
        }
    }
}
