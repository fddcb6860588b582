//! Exact integer arithmetic: gcd/CRT/factorization, p-adic valuations, the
//! standard additive character `psi_p`, roots of unity and Dirichlet characters.

mod character;
mod root;

pub use character::{omega_p, CharacterError, DirichletCharacter};
pub use root::RootOfUnity;

use num_integer::Integer;
use num_rational::Ratio;

/// Exact rationals used for matrix entries, p-adic units and phases.
pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArithError {
    #[error("valuation of zero is undefined")]
    ZeroValuation,
    #[error("{0} is not a prime")]
    NotPrime(i64),
    #[error("{a} is not invertible modulo {m}")]
    NotInvertible { a: i64, m: i64 },
    #[error("incompatible congruences")]
    CrtInconsistent,
    #[error("modulus must be positive, got {0}")]
    BadModulus(i64),
}

pub fn gcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

pub fn lcm(a: i64, b: i64) -> i64 {
    a.lcm(&b)
}

/// Returns `(g, x, y)` with `a*x + b*y = g = gcd(a, b)`.
pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let e = a.extended_gcd(&b);
    if e.gcd < 0 {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

/// Inverse of `a` modulo `m`, in `[0, m)`.
pub fn mod_inv(a: i64, m: i64) -> Result<i64, ArithError> {
    if m <= 0 {
        return Err(ArithError::BadModulus(m));
    }
    if m == 1 {
        return Ok(0);
    }
    let (g, x, _) = ext_gcd(a.rem_euclid(m), m);
    if g != 1 {
        return Err(ArithError::NotInvertible { a, m });
    }
    Ok(x.rem_euclid(m))
}

/// `b^e mod m` without overflow.
pub fn mod_pow(b: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut base = (b % m) as u128;
    let mut acc = 1u128;
    let m = m as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    acc as u64
}

pub fn ipow(b: i64, e: u32) -> i64 {
    b.checked_pow(e).expect("integer power overflow")
}

/// Largest `e` with `p^e | n`.
pub fn vp(n: i64, p: i64) -> Result<u32, ArithError> {
    if n == 0 {
        return Err(ArithError::ZeroValuation);
    }
    if p < 2 {
        return Err(ArithError::NotPrime(p));
    }
    let mut n = n;
    let mut e = 0;
    while n % p == 0 {
        n /= p;
        e += 1;
    }
    Ok(e)
}

/// p-adic valuation of a nonzero rational.
pub fn vp_rational(x: Rational, p: i64) -> Result<i32, ArithError> {
    if *x.numer() == 0 {
        return Err(ArithError::ZeroValuation);
    }
    Ok(vp(*x.numer(), p)? as i32 - vp(*x.denom(), p)? as i32)
}

/// The part of `n` coprime to every prime factor of `m`.
pub fn coprime_part(n: i64, m: i64) -> i64 {
    let mut n = n;
    loop {
        let g = gcd(n, m);
        if g == 1 {
            return n;
        }
        n /= g;
    }
}

/// `(n, m^∞)`: the largest divisor of `n` built from primes dividing `m`.
pub fn smooth_part(n: i64, m: i64) -> i64 {
    n / coprime_part(n, m)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    // Deterministic for all 64-bit inputs.
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = mod_pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_brent(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    for c in 1u64.. {
        let f = |x: u64| (mulmod(x, x) + c) % n;
        let (mut x, mut y, mut g, mut r, mut q) = (2u64, 2u64, 1u64, 1u64, 1u64);
        let mut ys = 2u64;
        const M: u64 = 128;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..M.min(r - k) {
                    y = f(y);
                    q = mulmod(q, x.abs_diff(y));
                }
                g = q.gcd(&n);
                k += M;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = x.abs_diff(ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
    }
    unreachable!()
}

/// A positive integer together with its prime factorization.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Factored {
    value: u64,
    factors: Vec<(u64, u32)>,
}

impl Factored {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn exponent_of(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    pub fn divisors(&self) -> Vec<u64> {
        let mut ds = vec![1u64];
        for &(p, e) in &self.factors {
            let len = ds.len();
            let mut pk = 1;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    ds.push(ds[i] * pk);
                }
            }
        }
        ds.sort_unstable();
        ds
    }
}

/// Canonical factorization (trial division, then Pollard–Brent).
pub fn factor(n: u64) -> Factored {
    assert!(n >= 1, "factor expects a positive integer");
    let mut primes = Vec::new();
    let mut m = n;
    for p in 2u64..1000 {
        if p * p > m {
            break;
        }
        while m % p == 0 {
            primes.push(p);
            m /= p;
        }
    }
    let mut stack = vec![m];
    while let Some(x) = stack.pop() {
        if x == 1 {
            continue;
        }
        if is_prime(x) {
            primes.push(x);
        } else {
            let d = pollard_brent(x);
            stack.push(d);
            stack.push(x / d);
        }
    }
    primes.sort_unstable();
    let mut factors: Vec<(u64, u32)> = Vec::new();
    for p in primes {
        match factors.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => factors.push((p, 1)),
        }
    }
    Factored { value: n, factors }
}

pub fn divisors(n: u64) -> Vec<u64> {
    factor(n).divisors()
}

pub fn euler_phi(n: u64) -> u64 {
    factor(n)
        .factors()
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

/// Solves `x ≡ r_i (mod m_i)`; moduli need not be coprime.  Returns the
/// residue in `[0, lcm)` and the lcm.
pub fn crt(congruences: &[(i64, i64)]) -> Result<(i64, i64), ArithError> {
    let mut r: i128 = 0;
    let mut m: i128 = 1;
    for &(ri, mi) in congruences {
        if mi <= 0 {
            return Err(ArithError::BadModulus(mi));
        }
        let (g, p, _) = ext_gcd(m as i64, mi);
        let diff = ri as i128 - r;
        if diff % g as i128 != 0 {
            return Err(ArithError::CrtInconsistent);
        }
        let step = mi as i128 / g as i128;
        let t = (diff / g as i128 % step * p as i128).rem_euclid(step);
        r += m * t;
        m *= step;
        r = r.rem_euclid(m);
    }
    Ok((r as i64, m as i64))
}

/// p-adic fractional part `{x}_p ∈ [0, 1)`, a rational with p-power denominator.
pub fn frac_p(p: i64, x: Rational) -> Rational {
    let den = *x.denom();
    let e = vp(den, p).expect("denominator is nonzero");
    if e == 0 {
        return Rational::from_integer(0);
    }
    let pe = ipow(p, e);
    let rest = den / pe;
    let inv = mod_inv(rest, pe).expect("unit part is invertible");
    let r = ((*x.numer() as i128).rem_euclid(pe as i128) * inv as i128 % pe as i128) as i64;
    Rational::new(r, pe)
}

/// The standard additive character of `Q_p`: `psi_p(x) = e(-{x}_p)`,
/// trivial exactly on `Z_p`.
pub fn psi_p(p: i64, x: Rational) -> RootOfUnity {
    let f = frac_p(p, x);
    RootOfUnity::new(-*f.numer(), *f.denom())
}
