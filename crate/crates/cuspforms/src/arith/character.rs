use std::collections::VecDeque;

use num_complex::Complex64;

use super::{crt, divisors, gcd, ipow, vp, vp_rational, ArithError, Rational, RootOfUnity};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CharacterError {
    #[error("modulus must be positive, got {0}")]
    BadModulus(i64),
    #[error("generator {0} is not a unit modulo {1}")]
    NotAUnit(i64, i64),
    #[error("generator values are inconsistent at residue {0}")]
    Inconsistent(i64),
    #[error("the given elements do not generate (Z/{0})^x")]
    DoesNotGenerate(i64),
}

/// The primitive character mod `p^c` attached to a prime `p` dividing the conductor.
#[derive(Debug, Clone, PartialEq, Eq)]
struct LocalPart {
    p: i64,
    modulus: i64,
    values: Vec<Option<RootOfUnity>>,
}

impl LocalPart {
    fn value(&self, n: i64) -> Option<RootOfUnity> {
        self.values[n.rem_euclid(self.modulus) as usize]
    }
}

/// A Dirichlet character with exact values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirichletCharacter {
    modulus: i64,
    values: Vec<Option<RootOfUnity>>,
    conductor: i64,
    locals: Vec<LocalPart>,
}

impl DirichletCharacter {
    pub fn trivial(modulus: i64) -> Self {
        assert!(modulus >= 1, "modulus must be positive");
        let values = (0..modulus)
            .map(|x| (gcd(x, modulus) == 1).then(RootOfUnity::one))
            .collect();
        Self::from_table(modulus, values)
    }

    /// Builds the character from its values on a set of generators of
    /// `(Z/modulus)^x`, each value given as `e(num/den)`.
    pub fn from_generators(
        modulus: i64,
        generators: &[(i64, RootOfUnity)],
    ) -> Result<Self, CharacterError> {
        if modulus < 1 {
            return Err(CharacterError::BadModulus(modulus));
        }
        let m = modulus as usize;
        let mut values: Vec<Option<RootOfUnity>> = vec![None; m];
        values[1 % m] = Some(RootOfUnity::one());
        for &(g, _) in generators {
            if gcd(g, modulus) != 1 {
                return Err(CharacterError::NotAUnit(g, modulus));
            }
        }
        let mut queue = VecDeque::from([1 % modulus]);
        while let Some(x) = queue.pop_front() {
            let vx = values[x as usize].expect("queued residues carry values");
            for &(g, vg) in generators {
                let y = (x * g).rem_euclid(modulus);
                let vy = vx * vg;
                match values[y as usize] {
                    None => {
                        values[y as usize] = Some(vy);
                        queue.push_back(y);
                    }
                    Some(old) if old != vy => return Err(CharacterError::Inconsistent(y)),
                    Some(_) => {}
                }
            }
        }
        for x in 0..modulus {
            if (gcd(x, modulus) == 1) != values[x as usize].is_some() {
                return Err(CharacterError::DoesNotGenerate(modulus));
            }
        }
        Ok(Self::from_table(modulus, values))
    }

    fn from_table(modulus: i64, values: Vec<Option<RootOfUnity>>) -> Self {
        let conductor = divisors(modulus as u64)
            .into_iter()
            .map(|d| d as i64)
            .find(|&d| {
                (0..modulus).all(|x| match values[x as usize] {
                    Some(v) => (x - 1) % d != 0 || v.is_one(),
                    None => true,
                })
            })
            .expect("the modulus itself always qualifies");
        let mut chi = DirichletCharacter {
            modulus,
            values,
            conductor,
            locals: Vec::new(),
        };
        chi.locals = super::factor(conductor as u64)
            .factors()
            .iter()
            .map(|&(p, c)| chi.build_local(p as i64, c))
            .collect();
        chi
    }

    fn build_local(&self, p: i64, c: u32) -> LocalPart {
        let pc = ipow(p, c);
        let pm = ipow(p, vp(self.modulus, p).unwrap_or(0));
        let rest = self.modulus / pm;
        let values = (0..pc)
            .map(|x| {
                if x % p == 0 {
                    return None;
                }
                let (lift, _) = crt(&[(x, pm), (1, rest)]).expect("coprime moduli");
                self.eval(lift)
            })
            .collect();
        LocalPart {
            p,
            modulus: pc,
            values,
        }
    }

    pub fn modulus(&self) -> i64 {
        self.modulus
    }

    pub fn conductor(&self) -> i64 {
        self.conductor
    }

    pub fn is_trivial(&self) -> bool {
        self.conductor == 1
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor == self.modulus
    }

    /// `chi(n)`, or `None` when `gcd(n, modulus) > 1`.
    pub fn eval(&self, n: i64) -> Option<RootOfUnity> {
        self.values[n.rem_euclid(self.modulus) as usize]
    }

    /// `chi(n)` as a complex number (zero off the unit group).
    pub fn value(&self, n: i64) -> Complex64 {
        self.eval(n).map_or(Complex64::new(0.0, 0.0), RootOfUnity::to_complex)
    }

    /// Whether `chi(-1) = -1`.
    pub fn is_odd(&self) -> bool {
        !self.eval(-1).expect("-1 is a unit").is_one()
    }

    pub fn conj(&self) -> Self {
        let values = self.values.iter().map(|v| v.map(RootOfUnity::inv)).collect();
        Self::from_table(self.modulus, values)
    }

    /// The primitive component `chi^(p)` of conductor `p^{v_p(cond)}`; the
    /// product of all components, evaluated via CRT, recovers `chi`.
    pub fn local_component(&self, p: i64) -> DirichletCharacter {
        match self.locals.iter().find(|l| l.p == p) {
            Some(l) => Self::from_table(l.modulus, l.values.clone()),
            None => Self::trivial(1),
        }
    }

    /// `chi^(p)(n)` for `n` prime to `p`; 1 when `p` does not divide the conductor.
    pub fn local_value(&self, p: i64, n: i64) -> Option<RootOfUnity> {
        match self.locals.iter().find(|l| l.p == p) {
            Some(l) => l.value(n),
            None => (n % p != 0).then(RootOfUnity::one),
        }
    }

    /// Primes dividing the conductor.
    pub fn conductor_primes(&self) -> Vec<i64> {
        self.locals.iter().map(|l| l.p).collect()
    }

    /// A generating set of `(Z/modulus)^x` with the character values on it,
    /// chosen greedily in increasing order (deterministic).
    pub fn generator_values(&self) -> Vec<(i64, RootOfUnity)> {
        let m = self.modulus;
        let mut in_group = vec![false; m as usize];
        in_group[(1 % m) as usize] = true;
        let mut gens = Vec::new();
        for g in 2..m {
            if gcd(g, m) != 1 || in_group[g as usize] {
                continue;
            }
            gens.push((g, self.eval(g).expect("unit")));
            // Close the subgroup under multiplication by the new generator.
            let mut changed = true;
            while changed {
                changed = false;
                for x in 0..m {
                    if in_group[x as usize] {
                        let y = (x * g) % m;
                        if !in_group[y as usize] {
                            in_group[y as usize] = true;
                            changed = true;
                        }
                    }
                }
            }
        }
        gens
    }

    /// Least common multiple of the value orders.
    pub fn order(&self) -> i64 {
        self.values
            .iter()
            .flatten()
            .fold(1, |acc, v| super::lcm(acc, v.order()))
    }
}

/// The `p`-component of the idelic character attached to `chi`, evaluated at
/// a nonzero rational: for `x = p^e u` with `u` a p-adic unit,
/// `omega_p(x) = [prod_{l != p} chi^(l)(p)]^e * chi^(p)(u)^{-1}`.
pub fn omega_p(chi: &DirichletCharacter, p: i64, x: Rational) -> Result<RootOfUnity, ArithError> {
    let e = vp_rational(x, p)?;
    let unramified: RootOfUnity = chi
        .locals
        .iter()
        .filter(|l| l.p != p)
        .map(|l| l.value(p).expect("p is prime to the other local moduli"))
        .product();
    let mut r = unramified.pow(e as i64);
    if let Some(l) = chi.locals.iter().find(|l| l.p == p) {
        let pe = ipow(p, e.unsigned_abs());
        let (num, den) = if e >= 0 {
            (*x.numer() / pe, *x.denom())
        } else {
            (*x.numer(), *x.denom() / pe)
        };
        let num_v = l.value(num).ok_or(ArithError::NotInvertible { a: num, m: p })?;
        let den_v = l.value(den).ok_or(ArithError::NotInvertible { a: den, m: p })?;
        r = r * num_v.inv() * den_v;
    }
    Ok(r)
}
