use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use num_integer::Integer;

/// An exact root of unity `e(num/den)`, kept reduced with `0 <= num < den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct RootOfUnity {
    num: i64,
    den: i64,
}

impl RootOfUnity {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "root of unity with zero denominator");
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        let num = num.rem_euclid(den);
        let g = num.gcd(&den);
        RootOfUnity {
            num: num / g,
            den: den / g,
        }
    }

    pub const fn one() -> Self {
        RootOfUnity { num: 0, den: 1 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    /// Multiplicative order.
    pub fn order(&self) -> i64 {
        self.den
    }

    pub fn is_one(&self) -> bool {
        self.num == 0
    }

    pub fn inv(self) -> Self {
        RootOfUnity::new(-self.num, self.den)
    }

    pub fn pow(self, e: i64) -> Self {
        let n = (self.num as i128 * e as i128).rem_euclid(self.den as i128);
        RootOfUnity::new(n as i64, self.den)
    }

    pub fn to_complex(self) -> Complex64 {
        // Reduce to (-1/2, 1/2] turns so quarter turns come out exact-ish.
        let mut t = self.num as f64 / self.den as f64;
        if t > 0.5 {
            t -= 1.0;
        }
        match (self.num * 4).checked_rem(self.den) {
            Some(0) => match self.num * 4 / self.den {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            },
            _ => {
                let (s, c) = (2.0 * std::f64::consts::PI * t).sin_cos();
                Complex64::new(c, s)
            }
        }
    }
}

impl Default for RootOfUnity {
    fn default() -> Self {
        Self::one()
    }
}

impl Mul for RootOfUnity {
    type Output = RootOfUnity;

    fn mul(self, rhs: RootOfUnity) -> RootOfUnity {
        let l = self.den.lcm(&rhs.den);
        let n = self.num as i128 * (l / self.den) as i128 + rhs.num as i128 * (l / rhs.den) as i128;
        RootOfUnity::new((n % l as i128) as i64, l)
    }
}

impl std::iter::Product for RootOfUnity {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(RootOfUnity::one(), |a, b| a * b)
    }
}

impl fmt::Display for RootOfUnity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e({}/{})", self.num, self.den)
    }
}
