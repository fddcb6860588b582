use std::path::PathBuf;
use std::str::FromStr;

use super::{ExactCoefficients, ModformError, NewformData};
use crate::arith::{DirichletCharacter, RootOfUnity};

/// Environment variable overriding the cache directory for builtin forms.
pub const CACHE_ENV_VAR: &str = "CUSPFORMS_DATA_DIR";

/// Version tag written into every newform file; caches with another tag are rebuilt.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// Ramanujan's Δ: level 1, weight 12.
    Delta,
    /// The weight-2 newform of the elliptic curve `y² + y = x³ − x²` (level 11).
    Level11,
    /// The weight-3 newform of level 9 with the odd character of order 6.
    Level9Chi,
    /// `η(2z)³η(6z)³`: level 12, weight 3, character `(−3/·)`.
    Eta12,
    /// `η(6z)⁴`: level 36, weight 2, trivial character.
    Eta36,
}

impl Builtin {
    /// The three forms every verification runs on.
    pub const ALL: [Builtin; 3] = [Builtin::Delta, Builtin::Level11, Builtin::Level9Chi];
    /// Small eta-quotient newforms used where other levels are needed.
    pub const AUXILIARY: [Builtin; 2] = [Builtin::Eta12, Builtin::Eta36];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Delta => "delta",
            Builtin::Level11 => "level11",
            Builtin::Level9Chi => "level9chi",
            Builtin::Eta12 => "eta12",
            Builtin::Eta36 => "eta36",
        }
    }

    /// Number of coefficients kept in the cache.
    pub fn default_n_max(self) -> usize {
        match self {
            Builtin::Delta => 20_000,
            // Twisted Voronoi sums with b = 9, 22 and the mean squares at
            // wide cusps need a long expansion.
            Builtin::Level11 | Builtin::Level9Chi | Builtin::Eta12 | Builtin::Eta36 => 200_000,
        }
    }

    pub fn level(self) -> i64 {
        match self {
            Builtin::Delta => 1,
            Builtin::Level11 => 11,
            Builtin::Level9Chi => 9,
            Builtin::Eta12 => 12,
            Builtin::Eta36 => 36,
        }
    }
}

impl FromStr for Builtin {
    type Err = ModformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "delta" | "δ" => Ok(Builtin::Delta),
            "level11" | "11a" => Ok(Builtin::Level11),
            "level9chi" | "9chi" => Ok(Builtin::Level9Chi),
            "eta12" => Ok(Builtin::Eta12),
            "eta36" => Ok(Builtin::Eta36),
            _ => Err(ModformError::UnknownBuiltin(s.to_string())),
        }
    }
}

/// The character mod 9 with `χ(2) = e(1/6)`.
pub(crate) fn chi9() -> DirichletCharacter {
    DirichletCharacter::from_generators(9, &[(2, RootOfUnity::new(1, 6))]).expect("2 generates (Z/9)^x")
}

/// Generates the coefficients `a(1..=n_max)` from scratch.
pub fn generate_builtin(which: Builtin, n_max: usize) -> NewformData {
    let n_max = n_max.max(1);
    let result = match which {
        Builtin::Delta => NewformData::from_exact(
            "delta",
            1,
            12,
            DirichletCharacter::trivial(1),
            ExactCoefficients::Integer(delta_coefficients(n_max)),
        ),
        Builtin::Level11 => NewformData::from_exact(
            "level11",
            11,
            2,
            DirichletCharacter::trivial(11),
            ExactCoefficients::Integer(level11_coefficients(n_max)),
        ),
        Builtin::Level9Chi => NewformData::from_exact(
            "level9chi",
            9,
            3,
            chi9(),
            ExactCoefficients::Eisenstein(level9chi_coefficients(n_max)),
        ),
        Builtin::Eta12 => NewformData::from_exact(
            "eta12",
            12,
            3,
            DirichletCharacter::from_generators(12, &[(5, RootOfUnity::new(1, 2)), (7, RootOfUnity::one())])
                .expect("5 and 7 generate (Z/12)^x"),
            ExactCoefficients::Integer(eta_product(&[(2, 3), (6, 3)], n_max)),
        ),
        Builtin::Eta36 => NewformData::from_exact(
            "eta36",
            36,
            2,
            DirichletCharacter::trivial(36),
            ExactCoefficients::Integer(eta_product(&[(6, 4)], n_max)),
        ),
    };
    result.expect("builtin generators produce valid newforms")
}

fn cache_dir() -> PathBuf {
    if let Some(d) = std::env::var_os(CACHE_ENV_VAR) {
        return PathBuf::from(d);
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(d).join("cuspforms");
    }
    if let Some(h) = std::env::var_os("HOME") {
        return PathBuf::from(h).join(".cache").join("cuspforms");
    }
    std::env::temp_dir().join("cuspforms")
}

/// Path of the cache file for `which`.
pub fn cache_path(which: Builtin) -> PathBuf {
    cache_dir().join(format!("{}.json", which.name()))
}

/// Loads a builtin form from the cache, generating (and caching) it when the
/// cache is missing, stale, corrupt or too short.
pub fn load_builtin(which: Builtin) -> Result<NewformData, ModformError> {
    let path = cache_path(which);
    if let Ok(f) = super::load_newform(&path) {
        if f.n_max() >= which.default_n_max() && f.exact().is_some() {
            return Ok(f);
        }
    }
    let f = generate_builtin(which, which.default_n_max());
    // A read-only cache location is not fatal: the data is still usable.
    if let Err(e) = super::save_newform(&f, &path) {
        eprintln!("warning: could not write cache {}: {e}", path.display());
    }
    Ok(f)
}

/// Smallest prime factor table for `0..=n`.
fn spf_table(n: usize) -> Vec<u32> {
    let mut spf = vec![0u32; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

/// Fills a multiplicative sequence from its prime-power values.
/// `prime_power(p, r, prev)` receives `a(p^{r-1})` and `a(p^{r-2})`.
fn extend_multiplicatively<T: Copy>(
    n_max: usize,
    one: T,
    mut at_prime: impl FnMut(usize) -> T,
    mut prime_power: impl FnMut(usize, T, T, T) -> T,
    mul: impl Fn(T, T) -> T,
) -> Vec<T> {
    let spf = spf_table(n_max);
    let mut a = vec![one; n_max + 1];
    for n in 2..=n_max {
        let p = spf[n] as usize;
        let mut m = n;
        let mut pr = 1;
        while m % p == 0 {
            m /= p;
            pr *= p;
        }
        a[n] = if m > 1 {
            mul(a[pr], a[m])
        } else if pr == p {
            at_prime(p)
        } else {
            prime_power(p, a[p], a[pr / p], a[pr / p / p])
        };
    }
    a
}

/// τ(n) from `q ∏ (1 − q^n)^24`: the pentagonal expansion of `∏(1 − q^n)`
/// raised to the 24th power with the power-series recurrence
/// `n g_n = Σ_k ((α+1)k − n) e_k g_{n−k}`.
fn delta_coefficients(n_max: usize) -> Vec<i128> {
    let len = n_max; // g_0..g_{n_max-1}
    let mut e = vec![0i128; len];
    for k in 0i64.. {
        let mut any = false;
        for m in [k, -k - 1] {
            let pent = (m * (3 * m - 1) / 2) as usize;
            if pent < len {
                e[pent] = if m.rem_euclid(2) == 0 { 1 } else { -1 };
                any = true;
            }
        }
        if !any {
            break;
        }
    }
    let support: Vec<usize> = (1..len).filter(|&k| e[k] != 0).collect();
    let mut g = vec![0i128; len];
    g[0] = 1;
    for n in 1..len {
        let mut s = 0i128;
        for &k in support.iter().take_while(|&&k| k <= n) {
            s += (25 * k as i128 - n as i128) * e[k] * g[n - k];
        }
        debug_assert_eq!(s % n as i128, 0);
        g[n] = s / n as i128;
    }
    let mut tau = vec![0i128; n_max + 1];
    tau[1..].copy_from_slice(&g);
    tau
}

/// Coefficients of `q ∏_s ∏_n (1 − q^{sn})^{e_s}` for factors `(s, e_s)` with
/// `Σ s e_s = 24`, multiplying in one sparse pentagonal series at a time.
fn eta_product(factors: &[(usize, u32)], n_max: usize) -> Vec<i128> {
    debug_assert_eq!(factors.iter().map(|&(s, e)| s * e as usize).sum::<usize>(), 24);
    let len = n_max; // series index i ↔ q^{i+1}
    let mut pentagonal = Vec::new();
    for k in 0i64.. {
        let terms: Vec<(usize, i128)> = [k, -k - 1]
            .into_iter()
            .map(|m| ((m * (3 * m - 1) / 2) as usize, if m.rem_euclid(2) == 0 { 1 } else { -1 }))
            .collect();
        if terms.iter().all(|t| t.0 >= len) {
            break;
        }
        pentagonal.extend(terms.into_iter().filter(|t| t.0 < len));
    }
    pentagonal.sort_unstable();
    let mut c = vec![0i128; len];
    c[0] = 1;
    for &(s, e) in factors {
        for _ in 0..e {
            for i in (0..len).rev() {
                let mut acc = 0;
                for &(p, sign) in &pentagonal {
                    let shift = p * s;
                    if shift > i {
                        break;
                    }
                    acc += sign * c[i - shift];
                }
                c[i] = acc;
            }
        }
    }
    let mut a = vec![0i128; n_max + 1];
    a[1..].copy_from_slice(&c);
    a
}

/// `a_p = p + 1 − #E(F_p)` for `E: y² + y = x³ − x²`.
pub(crate) fn level11_ap(p: u64) -> i64 {
    if p == 2 {
        let mut affine = 0;
        for x in 0..2u64 {
            for y in 0..2u64 {
                if (y * y + y) % 2 == (x * x * x + x * x) % 2 {
                    affine += 1;
                }
            }
        }
        return 2 + 1 - (affine + 1);
    }
    // (2y+1)² = 4x³ − 4x² + 1: count square roots via a table of squares.
    let mut is_square = vec![false; p as usize];
    for t in 0..p {
        is_square[(t * t % p) as usize] = true;
    }
    let mut s: i64 = 0;
    for x in 0..p {
        let v = ((4 * x % p * x % p * x + 4 * (p - x * x % p) + 1) % p) as usize;
        s += match (v, is_square[v]) {
            (0, _) => 0,
            (_, true) => 1,
            _ => -1,
        };
    }
    -s
}

fn level11_coefficients(n_max: usize) -> Vec<i128> {
    let mut a = extend_multiplicatively(
        n_max,
        1i128,
        |p| level11_ap(p as u64) as i128,
        |p, ap, prev, prev2| {
            if p == 11 {
                ap * prev
            } else {
                ap * prev - p as i128 * prev2
            }
        },
        |x, y| x * y,
    );
    a[0] = 0;
    a
}

/// Elements `u + vω` of `Z[ω]`, `ω² = −1 − ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct Eis(pub i128, pub i128);

impl Eis {
    const ZERO: Eis = Eis(0, 0);
    const ONE: Eis = Eis(1, 0);

    /// `e(j/6)` for integral `j`.
    fn sixth_root(j: i64) -> Eis {
        match j.rem_euclid(6) {
            0 => Eis(1, 0),
            1 => Eis(1, 1),
            2 => Eis(0, 1),
            3 => Eis(-1, 0),
            4 => Eis(-1, -1),
            _ => Eis(0, -1),
        }
    }

    fn scale(self, k: i128) -> Eis {
        Eis(self.0 * k, self.1 * k)
    }

    fn conj(self) -> Eis {
        Eis(self.0 - self.1, -self.1)
    }

    fn norm(self) -> i128 {
        self.0 * self.0 - self.0 * self.1 + self.1 * self.1
    }

    /// Exact quotient, or `None` when `other` does not divide `self`.
    fn div_exact(self, other: Eis) -> Option<Eis> {
        let n = other.norm();
        let t = self * other.conj();
        (n != 0 && t.0 % n == 0 && t.1 % n == 0).then(|| Eis(t.0 / n, t.1 / n))
    }
}

impl std::ops::Add for Eis {
    type Output = Eis;
    fn add(self, o: Eis) -> Eis {
        Eis(self.0 + o.0, self.1 + o.1)
    }
}

impl std::ops::Sub for Eis {
    type Output = Eis;
    fn sub(self, o: Eis) -> Eis {
        Eis(self.0 - o.0, self.1 - o.1)
    }
}

impl std::ops::Mul for Eis {
    type Output = Eis;
    fn mul(self, o: Eis) -> Eis {
        let bd = self.1 * o.1;
        Eis(self.0 * o.0 - bd, self.0 * o.1 + self.1 * o.0 - bd)
    }
}

/// `χ(n)` for the order-6 character mod 9 as an element of `Z[ω]`.
fn chi9_eis(chi: &DirichletCharacter, n: i64) -> Eis {
    match chi.eval(n) {
        None => Eis::ZERO,
        Some(r) => Eis::sixth_root(r.num() * 6 / r.den()),
    }
}

/// The newform is cut out of `E · G`, where `E` is the weight-1 Eisenstein
/// series for χ and `G = E₂(z) − 3E₂(3z)`, by killing the two weight-3
/// Eisenstein eigenspaces with `(T₂ − λ)`; both factors are exact over `Z[ω]`.
fn level9chi_coefficients(n_max: usize) -> Vec<(i128, i128)> {
    let chi = chi9();
    let len = 4 * n_max.max(2) + 1;
    // 18 E₁ = −Σ χ(a) a + 18 Σ_n (Σ_{d|n} χ(d)) q^n.
    let mut e = vec![Eis::ZERO; len];
    for d in 1..len {
        let c = chi9_eis(&chi, d as i64);
        if c != Eis::ZERO {
            for m in (d..len).step_by(d) {
                e[m] = e[m] + c.scale(18);
            }
        }
    }
    e[0] = (1..9).fold(Eis::ZERO, |acc, a| acc - chi9_eis(&chi, a).scale(a as i128));
    let mut sigma = vec![0i128; len];
    for d in 1..len {
        for m in (d..len).step_by(d) {
            sigma[m] += d as i128;
        }
    }
    let g_weight2: Vec<i128> = (0..len)
        .map(|m| match m {
            0 => -2,
            m if m % 3 == 0 => -24 * sigma[m] + 72 * sigma[m / 3],
            m => -24 * sigma[m],
        })
        .collect();
    let product = |m: usize| -> Eis {
        (0..=m).fold(Eis::ZERO, |acc, i| acc + e[i].scale(g_weight2[m - i]))
    };
    let c2 = chi9_eis(&chi, 2);
    let lambda_a = Eis::ONE + c2.scale(4);
    let lambda_b = c2 + Eis(4, 0);
    // h1 = (T₂ − λ_a) g, h2 = (T₂ − λ_b) h1 with (T₂h)(n) = h(2n) + 4χ(2) h(n/2).
    let h1 = |m: usize| -> Eis {
        let half = if m % 2 == 0 { c2.scale(4) * product(m / 2) } else { Eis::ZERO };
        product(2 * m) + half - lambda_a * product(m)
    };
    let h2 = |n: usize| -> Eis {
        let half = if n % 2 == 0 { c2.scale(4) * h1(n / 2) } else { Eis::ZERO };
        h1(2 * n) + half - lambda_b * h1(n)
    };
    let h2_one = h2(1);
    assert_ne!(h2_one, Eis::ZERO, "Hecke projection annihilated the cusp form");
    let coefficient = |n: usize| -> Eis {
        h2(n)
            .div_exact(h2_one)
            .expect("newform coefficients are Eisenstein integers")
    };
    let a = extend_multiplicatively(
        n_max,
        Eis::ONE,
        coefficient,
        |p, ap, prev, prev2| {
            if p == 3 {
                ap * prev
            } else {
                ap * prev - chi9_eis(&chi, p as i64) * prev2.scale((p * p) as i128)
            }
        },
        |x, y| x * y,
    );
    a.into_iter()
        .enumerate()
        .map(|(n, z)| if n == 0 { (0, 0) } else { (z.0, z.1) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eisenstein_arithmetic() {
        let w = Eis(0, 1);
        assert_eq!(w * w, Eis(-1, -1));
        assert_eq!(w * w * w, Eis::ONE);
        for j in 0..6 {
            assert_eq!(Eis::sixth_root(j) * Eis::sixth_root(1), Eis::sixth_root(j + 1));
        }
        let x = Eis(3, -7);
        let y = Eis(2, 5);
        assert_eq!((x * y).div_exact(y), Some(x));
        assert_eq!(Eis(1, 0).div_exact(Eis(2, 0)), None);
    }

    #[test]
    fn small_generators() {
        let d = delta_coefficients(10);
        assert_eq!(&d[1..], &[1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920]);
        let a = level11_coefficients(12);
        assert_eq!(&a[1..], &[1, -2, -1, 2, 1, 2, -2, 0, -2, -2, 1, -2]);
        assert_eq!(eta_product(&[(1, 2), (11, 2)], 12), a);
        assert_eq!(eta_product(&[(1, 24)], 10), delta_coefficients(10));
    }
}
