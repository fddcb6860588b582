//! Cusps of Γ₀(N): enumeration, canonical classes, widths, extended widths,
//! scaling matrices and changes of scaling matrix.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use num_complex::Complex64;

use crate::arith::{divisors, factor, gcd, ipow, lcm, mod_inv, vp, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CuspError {
    #[error("{q} does not divide the level {level}")]
    NotADivisor { q: i64, level: i64 },
    #[error("conductor {m} does not divide the level {level}")]
    BadConductor { m: i64, level: i64 },
    #[error("{a}/{q} is not a valid cusp representative at level {level}")]
    BadRepresentative { a: i64, q: i64, level: i64 },
    #[error("level must be positive, got {0}")]
    BadLevel(i64),
    #[error("cannot parse cusp {0:?}; expected a/q, an integer or oo")]
    Parse(String),
    #[error("the cusp at infinity has no Bruhat cell")]
    NoBruhatCell,
}

/// An integral 2×2 matrix `(a b; c d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Mat2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1, 0, 0, 1);

    pub const fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Mat2 { a, b, c, d }
    }

    /// The translation `n(x) = (1 x; 0 1)`.
    pub const fn translation(x: i64) -> Self {
        Mat2::new(1, x, 0, 1)
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    /// Inverse of a determinant-one matrix.
    pub fn inverse(&self) -> Mat2 {
        debug_assert_eq!(self.det(), 1);
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn in_gamma0(&self, level: i64) -> bool {
        self.det() == 1 && self.c % level == 0
    }

    /// Möbius action on the upper half-plane.
    pub fn act(&self, z: Complex64) -> Complex64 {
        (z * self.a as f64 + self.b as f64) / (z * self.c as f64 + self.d as f64)
    }

    /// Möbius action on P¹(Q).
    pub fn act_point(&self, x: CuspPoint) -> CuspPoint {
        CuspPoint::new(
            self.a * x.num + self.b * x.den,
            self.c * x.num + self.d * x.den,
        )
    }

    pub fn to_rational(self) -> RatMat2 {
        let r = Rational::from_integer;
        RatMat2::new(r(self.a), r(self.b), r(self.c), r(self.d))
    }
}

impl std::ops::Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

/// A 2×2 matrix with exact rational entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatMat2 {
    pub a: Rational,
    pub b: Rational,
    pub c: Rational,
    pub d: Rational,
}

impl RatMat2 {
    pub fn new(a: Rational, b: Rational, c: Rational, d: Rational) -> Self {
        RatMat2 { a, b, c, d }
    }

    pub fn det(&self) -> Rational {
        self.a * self.d - self.b * self.c
    }
}

impl std::ops::Mul for RatMat2 {
    type Output = RatMat2;

    fn mul(self, o: RatMat2) -> RatMat2 {
        RatMat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

/// A point of P¹(Q) in lowest terms with nonnegative denominator; ∞ is `1/0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CuspPoint {
    num: i64,
    den: i64,
}

impl CuspPoint {
    pub const INFINITY: CuspPoint = CuspPoint { num: 1, den: 0 };

    pub fn new(num: i64, den: i64) -> Self {
        assert!(num != 0 || den != 0, "0/0 is not a point of P1(Q)");
        let g = gcd(num, den);
        let (mut num, mut den) = (num / g, den / g);
        if den < 0 || (den == 0 && num < 0) {
            num = -num;
            den = -den;
        }
        CuspPoint { num, den }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn is_infinity(&self) -> bool {
        self.den == 0
    }
}

impl fmt::Display for CuspPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinity() {
            write!(f, "oo")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for CuspPoint {
    type Err = CuspError;

    fn from_str(s: &str) -> Result<Self, CuspError> {
        let t = s.trim();
        if matches!(t, "oo" | "inf" | "infinity" | "∞") {
            return Ok(CuspPoint::INFINITY);
        }
        let err = || CuspError::Parse(s.to_string());
        let (num, den) = match t.split_once('/') {
            Some((n, d)) => (
                n.trim().parse::<i64>().map_err(|_| err())?,
                d.trim().parse::<i64>().map_err(|_| err())?,
            ),
            None => (t.parse::<i64>().map_err(|_| err())?, 1),
        };
        if num == 0 && den == 0 {
            return Err(err());
        }
        Ok(CuspPoint::new(num, den))
    }
}

/// A cusp of Γ₀(N): the class `[q : d]` together with a representative `a/q`.
///
/// Equality and hashing only look at `(level, q, d_class)`; the representative
/// `a` may be any integer prime to `q` in the class.
#[derive(Debug, Clone, Copy)]
pub struct Cusp {
    level: i64,
    q: i64,
    d_class: i64,
    a: i64,
}

impl PartialEq for Cusp {
    fn eq(&self, o: &Self) -> bool {
        (self.level, self.q, self.d_class) == (o.level, o.q, o.d_class)
    }
}

impl Eq for Cusp {}

impl Hash for Cusp {
    fn hash<H: Hasher>(&self, h: &mut H) {
        (self.level, self.q, self.d_class).hash(h)
    }
}

/// Smallest positive representative of `x` modulo `h` (so classes mod 1 are `1`).
fn positive_residue(x: i64, h: i64) -> i64 {
    (x - 1).rem_euclid(h) + 1
}

impl Cusp {
    /// The cusp `a/q` with `q | N` and `gcd(a, q) = 1`.
    pub fn with_representative(level: i64, a: i64, q: i64) -> Result<Self, CuspError> {
        if level < 1 {
            return Err(CuspError::BadLevel(level));
        }
        if q < 1 || level % q != 0 {
            return Err(CuspError::NotADivisor { q, level });
        }
        if gcd(a, q) != 1 {
            return Err(CuspError::BadRepresentative { a, q, level });
        }
        let h = gcd(q, level / q);
        let d_class = positive_residue(mod_inv(a, h).expect("a is prime to h"), h);
        Ok(Cusp { level, q, d_class, a })
    }

    /// The standard representative of the class containing `x`: denominator
    /// `q = gcd(den, N)` and the least positive numerator prime to `N`.
    pub fn from_point(level: i64, x: CuspPoint) -> Result<Self, CuspError> {
        if level < 1 {
            return Err(CuspError::BadLevel(level));
        }
        let g0 = gcd(x.den, level);
        let h = gcd(g0, level / g0);
        // The class invariant of a/c is a * (c/g0) mod (g0, N/g0).
        let class = (x.num as i128 * (x.den / g0) as i128).rem_euclid(h as i128) as i64;
        let d_class = positive_residue(mod_inv(class, h).expect("class is a unit"), h);
        Ok(Self::standard(level, g0, d_class))
    }

    fn standard(level: i64, q: i64, d_class: i64) -> Self {
        let h = gcd(q, level / q);
        let target = mod_inv(d_class, h).expect("d is a unit");
        let a = (1..)
            .find(|&a| (a - target) % h == 0 && gcd(a, level) == 1)
            .expect("Dirichlet: some residue is prime to N");
        Cusp { level, q, d_class, a }
    }

    pub fn infinity(level: i64) -> Self {
        Cusp {
            level,
            q: level,
            d_class: 1,
            a: 1,
        }
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    pub fn denominator(&self) -> i64 {
        self.q
    }

    pub fn d_class(&self) -> i64 {
        self.d_class
    }

    pub fn numerator(&self) -> i64 {
        self.a
    }

    pub fn is_infinity(&self) -> bool {
        self.q == self.level
    }

    /// The cusp as a point of P¹(Q) (`∞` for the class of `1/N`).
    pub fn point(&self) -> CuspPoint {
        if self.is_infinity() {
            CuspPoint::INFINITY
        } else {
            CuspPoint::new(self.a, self.q)
        }
    }

    /// The same class with the standard (least) representative.
    pub fn standardized(&self) -> Cusp {
        Self::standard(self.level, self.q, self.d_class)
    }

    pub fn scaling_matrix(&self) -> ScalingMatrix {
        if self.is_infinity() {
            ScalingMatrix::identity()
        } else {
            ScalingMatrix::from_point(self.point())
        }
    }

    pub fn width(&self) -> i64 {
        width(self.level, self.q).expect("q divides the level")
    }
}

impl fmt::Display for Cusp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinity() {
            write!(f, "oo")
        } else {
            write!(f, "{}/{}", self.a, self.q)
        }
    }
}

/// Parses `a/q`, an integer or `oo` into a cusp at the given level.  A
/// fraction whose denominator divides `N` keeps its numerator as representative
/// (when prime to `N`); anything else is reduced to the standard representative.
pub fn parse_cusp(level: i64, s: &str) -> Result<Cusp, CuspError> {
    let x: CuspPoint = s.parse()?;
    if x.is_infinity() {
        return Ok(Cusp::infinity(level));
    }
    if x.den >= 1 && level % x.den == 0 && x.den != level && gcd(x.num, level) == 1 {
        return Cusp::with_representative(level, x.num, x.den);
    }
    Cusp::from_point(level, x)
}

/// The scaling matrix σ of a cusp, stored through σ⁻¹ = `(a b; q d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ScalingMatrix {
    sigma_inv: Mat2,
}

impl ScalingMatrix {
    pub fn identity() -> Self {
        ScalingMatrix {
            sigma_inv: Mat2::IDENTITY,
        }
    }

    /// Completes the point `a/c` to `σ⁻¹ = (a b; c d)` with the least
    /// nonnegative `b` (for `0/1`, `σ⁻¹ = (0 -1; 1 0)`).
    pub fn from_point(x: CuspPoint) -> Self {
        let (a, c) = (x.num, x.den);
        let sigma_inv = if c == 0 {
            Mat2::IDENTITY
        } else if a == 0 {
            Mat2::new(0, -1, 1, 0)
        } else {
            let b = (-mod_inv(c, a.abs()).expect("coprime")).rem_euclid(a.abs());
            let num = 1 + b as i128 * c as i128;
            debug_assert_eq!(num % a as i128, 0);
            Mat2::new(a, b, c, (num / a as i128) as i64)
        };
        ScalingMatrix { sigma_inv }
    }

    /// Wraps an arbitrary determinant-one matrix as σ⁻¹.
    pub fn from_sigma_inv(sigma_inv: Mat2) -> Self {
        assert_eq!(sigma_inv.det(), 1, "scaling matrices have determinant one");
        ScalingMatrix { sigma_inv }
    }

    pub fn sigma_inv(&self) -> Mat2 {
        self.sigma_inv
    }

    /// σ = `(d -b; -q a)`.
    pub fn sigma(&self) -> Mat2 {
        self.sigma_inv.inverse()
    }

    pub fn cusp_point(&self) -> CuspPoint {
        self.sigma_inv.act_point(CuspPoint::INFINITY)
    }
}

pub fn width(level: i64, q: i64) -> Result<i64, CuspError> {
    if q < 1 || level % q != 0 {
        return Err(CuspError::NotADivisor { q, level });
    }
    Ok(level / gcd(q * q, level))
}

/// `d_π(q_p) = max(2 q_p, M_p + q_p, N_p)`.
pub fn d_pi_exponent(n_p: u32, m_p: u32, q_p: u32) -> u32 {
    (2 * q_p).max(m_p + q_p).max(n_p)
}

/// Width, extended width and the local exponents `d_π(q_p)` of a cusp with
/// denominator `q` for a form of level `N` whose character has conductor `M`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct WidthData {
    pub width: i64,
    pub delta: i64,
    pub d_pi_exponents: Vec<(i64, u32)>,
}

pub fn extended_width(level: i64, conductor: i64, q: i64) -> Result<WidthData, CuspError> {
    let w = width(level, q)?;
    if conductor < 1 || level % conductor != 0 {
        return Err(CuspError::BadConductor {
            m: conductor,
            level,
        });
    }
    let d_pi_exponents: Vec<(i64, u32)> = factor(level as u64)
        .factors()
        .iter()
        .map(|&(p, n_p)| {
            let p = p as i64;
            let m_p = vp(conductor, p).unwrap_or(0);
            let q_p = vp(q, p).unwrap_or(0);
            (p, d_pi_exponent(n_p, m_p, q_p))
        })
        .collect();
    let delta = lcm(lcm(conductor * q, q * q), level) / (q * q);
    debug_assert_eq!(
        delta,
        d_pi_exponents.iter().map(|&(p, e)| ipow(p, e)).product::<i64>() / (q * q)
    );
    Ok(WidthData {
        width: w,
        delta,
        d_pi_exponents,
    })
}

/// All cusps of Γ₀(N), ordered by denominator and then class.
pub fn enumerate_cusps(level: i64) -> Result<Vec<Cusp>, CuspError> {
    if level < 1 {
        return Err(CuspError::BadLevel(level));
    }
    let mut out = Vec::new();
    for q in divisors(level as u64).into_iter().map(|q| q as i64) {
        let h = gcd(q, level / q);
        for d in 1..=h {
            if gcd(d, h) == 1 {
                out.push(Cusp::standard(level, q, d));
            }
        }
    }
    Ok(out)
}

pub fn reduce_to_standard_form(level: i64, x: CuspPoint) -> Result<Cusp, CuspError> {
    Cusp::from_point(level, x)
}

pub fn cusps_equivalent(level: i64, x: CuspPoint, y: CuspPoint) -> Result<bool, CuspError> {
    Ok(Cusp::from_point(level, x)? == Cusp::from_point(level, y)?)
}

/// Solves `a m ≡ b (mod n)` for the least nonnegative `m`.
fn solve_linear(a: i64, b: i64, n: i64) -> Option<i64> {
    let a = a.rem_euclid(n);
    let b = b.rem_euclid(n);
    let g = gcd(a, n);
    if b % g != 0 {
        return None;
    }
    let n_g = n / g;
    let inv = mod_inv(a / g, n_g).ok()?;
    Some(((b / g) as i128 * inv as i128 % n_g as i128) as i64)
}

/// Finds `(γ, m)` with `γ ∈ Γ₀(N)` and `τ⁻¹ = γ σ⁻¹ n(m)`, provided both
/// matrices send ∞ to Γ₀(N)-equivalent points.  Then
/// `a_f(n; τ) = χ(γ) e(n m / δ) a_f(n; σ)`.
pub fn scaling_skew(level: i64, sigma: &ScalingMatrix, tau: &ScalingMatrix) -> Option<(Mat2, i64)> {
    let s = sigma.sigma_inv;
    let t = tau.sigma_inv;
    // Lower-left entry of τ⁻¹ n(m') σ is t.c (s.d - m' s.c) - t.d s.c.
    let m_prime = solve_linear(t.c * s.c, t.c * s.d - t.d * s.c, level)?;
    let gamma = t * Mat2::translation(m_prime) * s.inverse();
    debug_assert!(gamma.in_gamma0(level));
    Some((gamma, -m_prime))
}

/// Some `γ ∈ Γ₀(N)` with `γ x = y`, if the points are equivalent.
pub fn equivalence_witness(level: i64, x: CuspPoint, y: CuspPoint) -> Option<Mat2> {
    let sx = ScalingMatrix::from_point(x);
    let sy = ScalingMatrix::from_point(y);
    scaling_skew(level, &sx, &sy).map(|(gamma, _)| gamma)
}

/// The five exact factors of `σ = z(q) n(-d/q) a(1/q²) w n(-a/q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruhatFactors {
    pub z: RatMat2,
    pub n_left: RatMat2,
    pub a: RatMat2,
    pub w: RatMat2,
    pub n_right: RatMat2,
}

impl BruhatFactors {
    pub fn product(&self) -> RatMat2 {
        self.z * self.n_left * self.a * self.w * self.n_right
    }
}

pub fn bruhat_decompose(sigma: &ScalingMatrix) -> Result<BruhatFactors, CuspError> {
    let Mat2 { a, c: q, d, .. } = sigma.sigma_inv;
    if q == 0 {
        return Err(CuspError::NoBruhatCell);
    }
    let r = Rational::from_integer;
    let zero = r(0);
    let one = r(1);
    let n = |x: Rational| RatMat2::new(one, x, zero, one);
    Ok(BruhatFactors {
        z: RatMat2::new(r(q), zero, zero, r(q)),
        n_left: n(Rational::new(-d, q)),
        a: RatMat2::new(Rational::new(1, q * q), zero, zero, one),
        w: RatMat2::new(zero, one, -one, zero),
        n_right: n(Rational::new(-a, q)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_twelve_has_six_cusps() {
        let cs = enumerate_cusps(12).unwrap();
        assert_eq!(cs.len(), 6);
        assert!(cs.last().unwrap().is_infinity());
    }

    #[test]
    fn scaling_matrices() {
        assert_eq!(Cusp::infinity(11).scaling_matrix().sigma_inv(), Mat2::IDENTITY);
        let s = ScalingMatrix::from_point(CuspPoint::new(8, 3));
        assert_eq!(s.sigma_inv(), Mat2::new(8, 5, 3, 2));
        let s = ScalingMatrix::from_point(CuspPoint::new(0, 1));
        assert_eq!(s.sigma_inv(), Mat2::new(0, -1, 1, 0));
        assert_eq!(s.cusp_point(), CuspPoint::new(0, 1));
    }

    #[test]
    fn classes_of_level_twenty_five() {
        // 1/10 and 2/5 lie in the same class at level 25.
        let a = Cusp::from_point(25, CuspPoint::new(1, 10)).unwrap();
        let b = Cusp::with_representative(25, 2, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn widths() {
        assert_eq!(width(12, 2), Ok(3));
        assert_eq!(width(11, 11), Ok(1));
        assert_eq!(width(11, 1), Ok(11));
        let w = extended_width(9, 9, 3).unwrap();
        assert_eq!((w.width, w.delta), (1, 3));
        assert_eq!(w.d_pi_exponents, vec![(3, 3)]);
    }

    #[test]
    fn parse() {
        assert_eq!("oo".parse::<CuspPoint>().unwrap(), CuspPoint::INFINITY);
        assert_eq!("-2/4".parse::<CuspPoint>().unwrap(), CuspPoint::new(-1, 2));
        assert!("1/0/2".parse::<CuspPoint>().is_err());
        let c = parse_cusp(9, "8/3").unwrap();
        assert_eq!((c.numerator(), c.denominator(), c.d_class()), (8, 3, 2));
        assert_eq!(parse_cusp(9, "0").unwrap(), Cusp::with_representative(9, 1, 1).unwrap());
    }
}
