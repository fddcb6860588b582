//! Hankel transforms and numerical checks of additively twisted Voronoi
//! summation, the closed-form exponential-kernel identity and the mean-square
//! growth of coefficients at a cusp.
//!
//! For a cusp `𝔞` with scaling matrix `σ_𝔞`, a twist `a/b` and
//! `g = (δ(𝔞), b)`, write `a' = a δ(𝔞)/g`, `b' = b/g` and `ā'` for an inverse
//! of `a'` modulo `b'`.  With `D = (ā' (1 - a'ā')/b'; -b' a')` the dual cusp is
//! `𝔟 = (D σ_𝔞)⁻¹ ∞` and its coefficients are taken with respect to `D σ_𝔞`
//! itself.  The identity checked is
//!
//! ```text
//! Σ e(na/b) a(n;𝔞) (n/δ(𝔞))^{-(k-1)/2} F(n/δ(𝔞))
//!     = b'⁻¹ Σ e(-n ā'/(δ(𝔟) b')) a(n;𝔟) (n/δ(𝔟))^{-(k-1)/2} H_f F(n/(δ(𝔟) b'²)).
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{gcd, mod_inv};
use crate::cusp_oracle::{delta_for, expand_within_data, OracleError, OracleOptions};
use crate::cusps::{reduce_to_standard_form, scaling_skew, Cusp, CuspError, Mat2, ScalingMatrix};
use crate::modform::{FormKind, ModformError, NewformData};
use crate::quadrature::{tanh_sinh, GaussLegendre};
use crate::special::{bessel_j, bessel_j_complex_order, bessel_k_imag_order};
use crate::whittaker::{fit_formula, WhittakerError};

/// The exponent towards Ramanujan used in the mean-square bound.
pub const RAMANUJAN_THETA: f64 = 7.0 / 64.0;

/// Sharpness of the default bump.  The Hankel transform of
/// `exp(-s/(1-u²))` decays roughly like `exp(-c√(sξ))`; `s = 4` keeps the dual
/// side of the `b = 22` twists near twenty thousand terms.
pub const DEFAULT_SHARPNESS: f64 = 4.0;

/// Dual sums stop once the estimated tail is below this.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// A block of Hankel values this far below the largest one is rounding noise.
const NOISE_FLOOR: f64 = 1e-14;

/// Hard cap on the number of dual terms.
pub const MAX_DUAL_TERMS: i64 = 400_000;

#[derive(Debug, thiserror::Error)]
pub enum VoronoiError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Cusp(#[from] CuspError),
    #[error(transparent)]
    Whittaker(#[from] WhittakerError),
    #[error(transparent)]
    Modform(#[from] ModformError),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Test functions on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `exp(-s/(1-u²))` with `u = (2x - A - B)/(B - A)`, zero outside `(A, B)`.
    SmoothBump { a: f64, b: f64, sharpness: f64 },
    /// `x^{(k-1)/2} e(ixy) = x^{(k-1)/2} e^{-2π x y}`; not compactly supported.
    ExpKernel { y: f64, weight: u32 },
    /// `Σ c_j F_j`.
    Combination { terms: Vec<(Complex64, TestFunction)> },
}

impl TestFunction {
    pub fn bump(a: f64, b: f64) -> Self {
        Self::bump_with_sharpness(a, b, DEFAULT_SHARPNESS)
    }

    pub fn bump_with_sharpness(a: f64, b: f64, sharpness: f64) -> Self {
        assert!(0.0 < a && a < b && sharpness > 0.0, "bump needs 0 < A < B and s > 0");
        TestFunction::SmoothBump { a, b, sharpness }
    }

    pub fn exp_kernel(y: f64, weight: u32) -> Self {
        assert!(y > 0.0, "the exponential kernel needs y > 0");
        TestFunction::ExpKernel { y, weight }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            TestFunction::SmoothBump { a, b, sharpness } => {
                if x <= *a || x >= *b {
                    return Complex64::new(0.0, 0.0);
                }
                let u = (2.0 * x - a - b) / (b - a);
                Complex64::new((-sharpness / (1.0 - u * u)).exp(), 0.0)
            }
            TestFunction::ExpKernel { y, weight } => {
                if x <= 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::new(x.powf((*weight as f64 - 1.0) / 2.0) * (-2.0 * PI * x * y).exp(), 0.0)
            }
            TestFunction::Combination { terms } => terms.iter().map(|(c, g)| c * g.eval(x)).sum(),
        }
    }

    /// `[A, B]` for compactly supported functions.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            TestFunction::SmoothBump { a, b, .. } => Some((*a, *b)),
            TestFunction::ExpKernel { .. } => None,
            TestFunction::Combination { terms } => terms.iter().try_fold((f64::INFINITY, 0.0f64), |acc, (_, g)| {
                let (a, b) = g.support()?;
                Some((acc.0.min(a), acc.1.max(b)))
            }),
        }
    }

    pub fn is_compact(&self) -> bool {
        self.support().is_some()
    }

    /// Where the function is numerically nonzero.
    fn effective_range(&self) -> (f64, f64) {
        match self {
            TestFunction::SmoothBump { a, b, .. } => (*a, *b),
            TestFunction::ExpKernel { y, weight } => (0.0, (60.0 + 4.0 * *weight as f64) / (2.0 * PI * y)),
            TestFunction::Combination { terms } => terms.iter().fold((f64::INFINITY, 0.0f64), |acc, (_, g)| {
                let (a, b) = g.effective_range();
                (acc.0.min(a), acc.1.max(b))
            }),
        }
    }
}

/// Which Bessel kernel the Hankel transform uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HankelKind {
    Holomorphic { weight: u32 },
    Maass { spectral_parameter: f64 },
}

impl HankelKind {
    pub fn of(f: &NewformData) -> Self {
        match f.kind() {
            FormKind::Holomorphic => HankelKind::Holomorphic { weight: f.weight() },
            FormKind::Maass { spectral_parameter, .. } => HankelKind::Maass { spectral_parameter },
        }
    }

    /// The kernel `K` with `H F(y) = ∫₀^∞ K(y, x) F(x) dx`.
    pub fn kernel(&self, y: f64, x: f64) -> Complex64 {
        let z = 4.0 * PI * (y.abs() * x).sqrt();
        match *self {
            HankelKind::Holomorphic { weight } => {
                if y <= 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::i().powu(weight) * (2.0 * PI * bessel_j(weight as i32 - 1, z))
            }
            HankelKind::Maass { spectral_parameter: t } => {
                if z == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                if y > 0.0 {
                    let nu = Complex64::new(0.0, 2.0 * t);
                    let diff = bessel_j_complex_order(nu, z) - bessel_j_complex_order(-nu, z);
                    Complex64::i() * PI / (PI * t).sinh() * diff
                } else {
                    Complex64::new(4.0 * (PI * t).cosh() * bessel_k_imag_order(2.0 * t, z), 0.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    GaussLegendrePanels,
    TanhSinhPanels,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HankelValue {
    pub value: Complex64,
    pub error_estimate: f64,
    pub rule: QuadratureRule,
    pub panels: usize,
}

/// Absolute accuracy requested from [`hankel`].
pub const HANKEL_TOLERANCE: f64 = 1e-11;

/// Panels in `t = √x` for about one oscillation of the kernel per panel.
fn base_panels(f: &TestFunction, y: f64) -> usize {
    let (lo, hi) = f.effective_range();
    let len = hi.sqrt() - lo.sqrt();
    ((len * (2.0 * y.abs().sqrt() + 1.0)).ceil() as usize).max(4)
}

/// `∫ K(y, t²) F(t²) 2t dt` by `panels` Gauss–Legendre panels.
fn gl_integral(f: &TestFunction, kind: &HankelKind, y: f64, panels: usize) -> Complex64 {
    let (lo, hi) = f.effective_range();
    GaussLegendre::standard().integrate(
        |t: f64| {
            let x = t * t;
            kind.kernel(y, x) * f.eval(x) * (2.0 * t)
        },
        lo.sqrt(),
        hi.sqrt(),
        panels,
    )
}

fn trivially_zero(kind: &HankelKind, y: f64) -> bool {
    matches!(kind, HankelKind::Holomorphic { .. }) && y <= 0.0
}

/// `H_f F(y)` by Gauss–Legendre panels in `t = √x`, doubling until two
/// successive values agree to [`HANKEL_TOLERANCE`].
pub fn hankel(f: &TestFunction, kind: &HankelKind, y: f64) -> Result<HankelValue, VoronoiError> {
    hankel_with(f, kind, y, QuadratureRule::GaussLegendrePanels)
}

pub fn hankel_with(
    f: &TestFunction,
    kind: &HankelKind,
    y: f64,
    rule: QuadratureRule,
) -> Result<HankelValue, VoronoiError> {
    if y == 0.0 {
        return Err(VoronoiError::Invalid("the Hankel transform is taken at y ≠ 0".into()));
    }
    if trivially_zero(kind, y) {
        return Ok(HankelValue {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            rule,
            panels: 0,
        });
    }
    let mut panels = base_panels(f, y);
    match rule {
        QuadratureRule::GaussLegendrePanels => {
            let mut prev = gl_integral(f, kind, y, panels);
            for _ in 0..8 {
                panels *= 2;
                let cur = gl_integral(f, kind, y, panels);
                let err = (cur - prev).norm();
                if err <= HANKEL_TOLERANCE {
                    return Ok(HankelValue {
                        value: cur,
                        error_estimate: err,
                        rule,
                        panels,
                    });
                }
                prev = cur;
            }
            Err(VoronoiError::Quadrature(format!("Gauss–Legendre at y = {y} with {panels} panels")))
        }
        QuadratureRule::TanhSinhPanels => {
            let (lo, hi) = f.effective_range();
            let (lo, hi) = (lo.sqrt(), hi.sqrt());
            let h = (hi - lo) / panels as f64;
            let integrand = |t: f64| {
                let x = t * t;
                kind.kernel(y, x) * f.eval(x) * (2.0 * t)
            };
            let mut value = Complex64::new(0.0, 0.0);
            let mut error_estimate = 0.0;
            for j in 0..panels {
                let a = lo + j as f64 * h;
                let r = tanh_sinh(integrand, a, a + h, HANKEL_TOLERANCE / panels as f64, 12);
                if !r.converged {
                    return Err(VoronoiError::Quadrature(format!("tanh-sinh at y = {y}, panel {j}")));
                }
                value += r.value;
                error_estimate += r.error_estimate;
            }
            Ok(HankelValue {
                value,
                error_estimate,
                rule,
                panels,
            })
        }
    }
}

/// `H_f F` in closed form where one is known: for the exponential kernel of
/// matching weight, `H_f F(ξ) = i^k ξ^{(k-1)/2} y^{-k} e^{-2πξ/y}` (ξ > 0).
pub fn hankel_closed_form(f: &TestFunction, kind: &HankelKind, xi: f64) -> Option<Complex64> {
    match (f, kind) {
        (TestFunction::ExpKernel { y, weight }, HankelKind::Holomorphic { weight: k }) if weight == k => {
            if xi <= 0.0 {
                return Some(Complex64::new(0.0, 0.0));
            }
            let k = *k as f64;
            Some(Complex64::i().powu(*weight) * (xi.powf((k - 1.0) / 2.0) * y.powf(-k) * (-2.0 * PI * xi / y).exp()))
        }
        (TestFunction::Combination { terms }, _) => terms
            .iter()
            .map(|(c, g)| hankel_closed_form(g, kind, xi).map(|h| c * h))
            .sum(),
        _ => None,
    }
}

/// Where coefficients come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// The stored `a_f(n)`, transported to the requested scaling matrix.
    Input,
    Oracle,
    ProductFormula,
    ClosedForm,
}

/// Requested coefficient source; `Auto` prefers exact data, then the
/// product formula, then the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    Auto,
    Oracle,
    ProductFormula,
}

/// `a_f(n; σ)` for `1 <= n <= n_max` with respect to a fixed scaling matrix.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub provenance: Provenance,
    pub sigma: ScalingMatrix,
    pub delta: i64,
    values: Vec<Complex64>,
}

impl CoefficientTable {
    pub fn n_max(&self) -> i64 {
        self.values.len() as i64
    }

    pub fn get(&self, n: i64) -> Option<Complex64> {
        (n >= 1).then(|| self.values.get((n - 1) as usize).copied()).flatten()
    }
}

/// The period of `f|σ⁻¹`.
pub fn delta_of(f: &NewformData, sigma: &ScalingMatrix) -> Result<i64, CuspError> {
    let cusp = reduce_to_standard_form(f.level(), sigma.cusp_point())?;
    Ok(delta_for(f, &cusp)?)
}

/// Transports `a(n; σ)` to `a(n; τ) = χ(γ) e(nm/δ) a(n; σ)`.
fn skew_multipliers(
    f: &NewformData,
    from: &ScalingMatrix,
    to: &ScalingMatrix,
    delta: i64,
) -> Result<impl Fn(i64) -> Complex64, VoronoiError> {
    let (gamma, m) = scaling_skew(f.level(), from, to)
        .ok_or_else(|| VoronoiError::Invalid("scaling matrices of inequivalent cusps".into()))?;
    let chi = f.character().value(gamma.d);
    Ok(move |n: i64| chi * Complex64::from_polar(1.0, 2.0 * PI * ((n * m).rem_euclid(delta)) as f64 / delta as f64))
}

pub fn coefficient_table(
    f: &NewformData,
    sigma: &ScalingMatrix,
    n_max: i64,
    source: CoefficientSource,
) -> Result<CoefficientTable, VoronoiError> {
    let level = f.level();
    let cusp = reduce_to_standard_form(level, sigma.cusp_point())?;
    let delta = delta_for(f, &cusp)?;
    let n_max = n_max.max(1);
    match source {
        CoefficientSource::Auto => {
            if cusp.is_infinity() && n_max as usize <= f.n_max() {
                return input_table(f, sigma, n_max);
            }
            match formula_table(f, &cusp, sigma, delta, n_max) {
                Ok(t) => Ok(t),
                Err(VoronoiError::Whittaker(WhittakerError::Unsupported(_))) => {
                    oracle_table(f, sigma, delta, n_max)
                }
                Err(e) => Err(e),
            }
        }
        CoefficientSource::Oracle => oracle_table(f, sigma, delta, n_max),
        CoefficientSource::ProductFormula => formula_table(f, &cusp, sigma, delta, n_max),
    }
}

fn input_table(f: &NewformData, sigma: &ScalingMatrix, n_max: i64) -> Result<CoefficientTable, VoronoiError> {
    let skew = skew_multipliers(f, &ScalingMatrix::identity(), sigma, 1)?;
    let values = (1..=n_max)
        .map(|n| {
            f.coefficient(n as u64)
                .map(|c| skew(n) * c)
                .ok_or(VoronoiError::Modform(ModformError::InsufficientCoefficients {
                    needed: n as usize,
                    available: f.n_max(),
                }))
        })
        .collect::<Result<_, _>>()?;
    Ok(CoefficientTable {
        provenance: Provenance::Input,
        sigma: *sigma,
        delta: 1,
        values,
    })
}

fn oracle_table(
    f: &NewformData,
    sigma: &ScalingMatrix,
    delta: i64,
    n_max: i64,
) -> Result<CoefficientTable, VoronoiError> {
    let e = expand_within_data(f, sigma, delta, "dual", &OracleOptions::new(n_max))?;
    let unresolved = e.unresolved();
    if let Some(n) = unresolved.first() {
        return Err(VoronoiError::Unsupported(format!(
            "oracle cannot resolve coefficient {n} ({} unresolved)",
            unresolved.len()
        )));
    }
    Ok(CoefficientTable {
        provenance: Provenance::Oracle,
        sigma: *sigma,
        delta,
        values: (1..=n_max).map(|n| e.coefficient(n).expect("resolved")).collect(),
    })
}

fn formula_table(
    f: &NewformData,
    cusp: &Cusp,
    sigma: &ScalingMatrix,
    delta: i64,
    n_max: i64,
) -> Result<CoefficientTable, VoronoiError> {
    let fitted = fit_formula(f, cusp, 30)?;
    debug_assert_eq!(fitted.delta, delta);
    let skew = skew_multipliers(f, &fitted.sigma, sigma, delta)?;
    let values = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            fitted.coefficient(f, n)?.map(|c| skew(n) * c).ok_or_else(|| {
                VoronoiError::Whittaker(WhittakerError::Unsupported(format!(
                    "product formula unavailable at {cusp} for n = {n}"
                )))
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(CoefficientTable {
        provenance: Provenance::ProductFormula,
        sigma: *sigma,
        delta,
        values,
    })
}

/// The combinatorial data of the dual side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualData {
    pub a: i64,
    pub b: i64,
    pub delta_a: i64,
    /// `(δ(𝔞), b)`.
    pub g: i64,
    pub a_prime: i64,
    pub b_prime: i64,
    /// The inverse `ā'` of `a'` modulo `b'` used in both the twist and `D`.
    pub a_prime_inv: i64,
    pub d_matrix: Mat2,
    /// `(D σ_𝔞)⁻¹`, whose first column is the unreduced dual cusp.
    pub sigma_b_inv: Mat2,
    pub dual_point: String,
    pub dual_cusp: String,
    pub delta_b: i64,
}

impl DualData {
    pub fn sigma_b(&self) -> ScalingMatrix {
        ScalingMatrix::from_sigma_inv(self.sigma_b_inv)
    }

    /// The dual twist `e(-n ā'/(δ(𝔟) b'))`.
    pub fn twist(&self, n: i64) -> Complex64 {
        let den = self.delta_b * self.b_prime;
        let num = (n as i128 * self.a_prime_inv as i128).rem_euclid(den as i128) as f64;
        Complex64::from_polar(1.0, -2.0 * PI * num / den as f64)
    }

    /// Argument of the Hankel transform in the `n`-th dual term.
    pub fn hankel_argument(&self, n: i64) -> f64 {
        n as f64 / (self.delta_b * self.b_prime * self.b_prime) as f64
    }
}

pub fn dual_data(f: &NewformData, a: i64, b: i64, sigma_a: &ScalingMatrix) -> Result<DualData, VoronoiError> {
    if b < 1 || gcd(a, b) != 1 {
        return Err(VoronoiError::Invalid(format!("twist {a}/{b} needs b >= 1 and (a, b) = 1")));
    }
    let delta_a = delta_of(f, sigma_a)?;
    let g = gcd(delta_a, b);
    let a_prime = a * (delta_a / g);
    let b_prime = b / g;
    let a_prime_inv = if b_prime == 1 {
        0
    } else {
        mod_inv(a_prime.rem_euclid(b_prime), b_prime).map_err(|e| VoronoiError::Invalid(e.to_string()))?
    };
    let upper = (1 - a_prime as i128 * a_prime_inv as i128) / b_prime as i128;
    let d_matrix = Mat2::new(a_prime_inv, upper as i64, -b_prime, a_prime);
    debug_assert_eq!(d_matrix.det(), 1);
    let sigma_b_inv = sigma_a.sigma_inv() * d_matrix.inverse();
    let sigma_b = ScalingMatrix::from_sigma_inv(sigma_b_inv);
    let point = sigma_b.cusp_point();
    let cusp = reduce_to_standard_form(f.level(), point)?;
    Ok(DualData {
        a,
        b,
        delta_a,
        g,
        a_prime,
        b_prime,
        a_prime_inv,
        d_matrix,
        sigma_b_inv,
        dual_point: format!("{}/{}", sigma_b_inv.a, sigma_b_inv.c),
        dual_cusp: cusp.to_string(),
        delta_b: delta_for(f, &cusp)?,
    })
}

fn normalised(k: u32, c: Complex64, n: i64, delta: i64) -> Complex64 {
    c * (n as f64 / delta as f64).powf(-(k as f64 - 1.0) / 2.0)
}

fn holomorphic_weight(f: &NewformData) -> Result<u32, VoronoiError> {
    if f.is_holomorphic() {
        Ok(f.weight())
    } else {
        Err(VoronoiError::Unsupported(
            "end-to-end Voronoi checks need a holomorphic form; only the Maaß Hankel kernel is provided".into(),
        ))
    }
}

/// A finite sum with its term count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SideValue {
    pub value: Complex64,
    pub terms: i64,
}

/// `Σ e(na/b) a(n;𝔞) (n/δ)^{-(k-1)/2} F(n/δ)` over the support of `F`.
pub fn voronoi_lhs(
    f: &NewformData,
    a: i64,
    b: i64,
    sigma_a: &ScalingMatrix,
    test: &TestFunction,
    source: CoefficientSource,
) -> Result<(SideValue, Provenance), VoronoiError> {
    let k = holomorphic_weight(f)?;
    let (_, hi) = test
        .support()
        .ok_or_else(|| VoronoiError::Invalid("the left side needs a compactly supported F".into()))?;
    let delta = delta_of(f, sigma_a)?;
    let n_hi = (hi * delta as f64).ceil() as i64;
    if n_hi < 1 {
        return Ok((SideValue { value: Complex64::new(0.0, 0.0), terms: 0 }, Provenance::Input));
    }
    let table = coefficient_table(f, sigma_a, n_hi, source)?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut terms = 0;
    for n in 1..=n_hi {
        let x = n as f64 / delta as f64;
        let fx = test.eval(x);
        if fx == Complex64::new(0.0, 0.0) {
            continue;
        }
        let twist = Complex64::from_polar(1.0, 2.0 * PI * ((n as i128 * a as i128).rem_euclid(b as i128)) as f64 / b as f64);
        value += twist * normalised(k, table.get(n).expect("in range"), n, delta) * fx;
        terms += 1;
    }
    Ok((SideValue { value, terms }, table.provenance))
}

/// Diagnostics of a truncated dual sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSum {
    pub value: Complex64,
    pub terms: i64,
    pub truncation: i64,
    /// Estimated size of the omitted tail.
    pub tail_bound: f64,
    /// Whether the tail estimate reached [`TAIL_TOLERANCE`] before the cap.
    pub converged: bool,
    /// Observed growth constant `C` in `|a(n)|(n/δ)^{-(k-1)/2} <= C n^{1/4}`.
    pub growth_constant: f64,
    /// Largest quadrature error estimate seen in spot checks.
    pub quadrature_error: f64,
    pub provenance: Provenance,
}

/// Hankel transform values along `ξ_n = n·scale`, stopping once a block of
/// `block` consecutive values times the coefficient envelope is negligible.
fn hankel_profile(
    test: &TestFunction,
    kind: &HankelKind,
    scale: f64,
    block: i64,
    growth: f64,
    closed_form: bool,
) -> Result<(Vec<Complex64>, f64, bool, f64), VoronoiError> {
    let eval = |n: i64| -> Result<(Complex64, f64), VoronoiError> {
        let xi = n as f64 * scale;
        if closed_form {
            hankel_closed_form(test, kind, xi)
                .map(|v| (v, 0.0))
                .ok_or_else(|| VoronoiError::Unsupported("no closed form for this test function".into()))
        } else {
            // One doubling past the base rule; spot checks below bound its error.
            Ok((gl_integral(test, kind, xi, 2 * base_panels(test, xi)), 0.0))
        }
    };
    let mut values = Vec::new();
    let mut peak = 0.0f64;
    let mut start = 1i64;
    loop {
        let end = (start + block - 1).min(MAX_DUAL_TERMS);
        let chunk: Vec<(Complex64, f64)> = (start..=end).into_par_iter().map(eval).collect::<Result<_, _>>()?;
        let envelope = chunk
            .iter()
            .enumerate()
            .map(|(j, (h, _))| h.norm() * growth * ((start + j as i64) as f64).powf(0.25))
            .fold(0.0, f64::max);
        let block_max = chunk.iter().map(|(h, _)| h.norm()).fold(0.0, f64::max);
        values.extend(chunk.into_iter().map(|(h, _)| h));
        peak = peak.max(block_max);
        let tail = envelope * block as f64;
        // Past the quadrature's noise floor further terms carry no information.
        let at_noise = block_max <= NOISE_FLOOR * peak;
        if tail < TAIL_TOLERANCE || at_noise {
            // Spot-check the fixed rule against the adaptive one.
            let mut qerr = 0.0f64;
            if !closed_form {
                let len = values.len() as i64;
                for n in [1, len / 4, len / 2, len].into_iter().filter(|&n| n >= 1) {
                    let adaptive = hankel(test, kind, n as f64 * scale)?;
                    qerr = qerr.max((adaptive.value - values[(n - 1) as usize]).norm() + adaptive.error_estimate);
                }
            }
            return Ok((values, tail, true, qerr));
        }
        if end >= MAX_DUAL_TERMS {
            return Ok((values, tail, false, f64::NAN));
        }
        start = end + 1;
    }
}

/// Growth constant of the normalised coefficients from a short prefix.
fn growth_constant(table: &CoefficientTable, k: u32) -> f64 {
    (1..=table.n_max())
        .map(|n| normalised(k, table.get(n).unwrap(), n, table.delta).norm() / (n as f64).powf(0.25))
        .fold(0.0, f64::max)
        .max(1.0)
}

/// `Σ_{n ≥ 1} twist(n) a(n;τ)(n/δ)^{-(k-1)/2} H_f F(n·scale)` for a holomorphic
/// form, truncated by the decay of `H_f F`.  Negative `n` contribute nothing
/// because `H_f F` vanishes on `y < 0`.
#[allow(clippy::too_many_arguments)]
fn dual_sum(
    f: &NewformData,
    tau: &ScalingMatrix,
    twist: impl Fn(i64) -> Complex64,
    scale: f64,
    test: &TestFunction,
    source: CoefficientSource,
    closed_form: bool,
) -> Result<DualSum, VoronoiError> {
    let k = holomorphic_weight(f)?;
    let kind = HankelKind::of(f);
    let prefix = coefficient_table(f, tau, 100, source)?;
    let growth = growth_constant(&prefix, k);
    let block = ((1.0 / scale).ceil() as i64).max(16);
    let (profile, tail, converged, qerr) = hankel_profile(test, &kind, scale, block, growth, closed_form)?;
    let truncation = profile.len() as i64;
    let table = if truncation <= prefix.n_max() {
        prefix
    } else {
        coefficient_table(f, tau, truncation, source)?
    };
    let delta = table.delta;
    let mut value = Complex64::new(0.0, 0.0);
    for (j, h) in profile.iter().enumerate() {
        let n = j as i64 + 1;
        value += twist(n) * normalised(k, table.get(n).expect("in range"), n, delta) * h;
    }
    Ok(DualSum {
        value,
        terms: truncation,
        truncation,
        tail_bound: tail,
        converged,
        growth_constant: growth,
        quadrature_error: qerr,
        provenance: table.provenance,
    })
}

/// The dual side `b'⁻¹ Σ e(-nā'/(δ(𝔟)b')) a(n;𝔟)(n/δ(𝔟))^{-(k-1)/2} H_f F(n/(δ(𝔟)b'²))`.
pub fn voronoi_rhs(
    f: &NewformData,
    a: i64,
    b: i64,
    sigma_a: &ScalingMatrix,
    test: &TestFunction,
    source: CoefficientSource,
) -> Result<(DualSum, DualData), VoronoiError> {
    let dual = dual_data(f, a, b, sigma_a)?;
    let sum = dual_sum(
        f,
        &dual.sigma_b(),
        |n| dual.twist(n),
        dual.hankel_argument(1),
        test,
        source,
        false,
    )?;
    let value = sum.value / dual.b_prime as f64;
    Ok((DualSum { value, ..sum }, dual))
}

/// The right side with the normalisation `δ(𝔞)^{1/2}/b` and argument
/// `n/(δ(𝔟)b²)` written in the general statement; it differs from
/// [`voronoi_rhs`] only when `δ(𝔞) > 1`.
pub fn voronoi_rhs_as_stated(
    f: &NewformData,
    dual: &DualData,
    test: &TestFunction,
    source: CoefficientSource,
) -> Result<Complex64, VoronoiError> {
    let scale = 1.0 / (dual.delta_b * dual.b * dual.b) as f64;
    let sum = dual_sum(f, &dual.sigma_b(), |n| dual.twist(n), scale, test, source, false)?;
    Ok(sum.value * (dual.delta_a as f64).sqrt() / dual.b as f64)
}

/// Outcome of one Voronoi check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoronoiReport {
    pub form: String,
    pub cusp: String,
    pub test_function: TestFunction,
    pub dual: DualData,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub lhs_terms: i64,
    pub lhs_provenance: Provenance,
    pub rhs_terms: i64,
    pub rhs_provenance: Provenance,
    pub tail_bound: f64,
    pub tail_converged: bool,
    pub quadrature_error: f64,
    pub growth_constant: f64,
    /// The general statement's normalisation, when it differs and shares the
    /// dual sum (`δ(𝔞) > 1`, `g = 1`).
    pub stated_rhs: Option<Complex64>,
    pub stated_rel_residual: Option<f64>,
    pub passes: bool,
}

/// Relative tolerance of the Voronoi equality.
pub const VORONOI_TOLERANCE: f64 = 1e-6;
/// Absolute fallback when the left side nearly vanishes.
pub const VORONOI_ABS_TOLERANCE: f64 = 1e-9;

pub fn verify_voronoi(
    f: &NewformData,
    a: i64,
    b: i64,
    cusp: &Cusp,
    test: &TestFunction,
    source: CoefficientSource,
) -> Result<VoronoiReport, VoronoiError> {
    verify_voronoi_at(f, a, b, &cusp.scaling_matrix(), &cusp.to_string(), test, source)
}

pub fn verify_voronoi_at(
    f: &NewformData,
    a: i64,
    b: i64,
    sigma_a: &ScalingMatrix,
    label: &str,
    test: &TestFunction,
    source: CoefficientSource,
) -> Result<VoronoiReport, VoronoiError> {
    let (lhs, lhs_provenance) = voronoi_lhs(f, a, b, sigma_a, test, source)?;
    let (rhs, dual) = voronoi_rhs(f, a, b, sigma_a, test, source)?;
    let abs_residual = (lhs.value - rhs.value).norm();
    let rel_residual = abs_residual / lhs.value.norm();
    // With g = 1 both normalisations share one dual sum; otherwise the
    // stated one needs its own (see `voronoi_rhs_as_stated`).
    let stated_rhs = (dual.delta_a > 1 && dual.g == 1).then(|| rhs.value * (dual.delta_a as f64).sqrt());
    let stated_rel_residual = stated_rhs.map(|s| (lhs.value - s).norm() / lhs.value.norm());
    Ok(VoronoiReport {
        form: f.name().to_string(),
        cusp: label.to_string(),
        test_function: test.clone(),
        lhs: lhs.value,
        rhs: rhs.value,
        abs_residual,
        rel_residual,
        lhs_terms: lhs.terms,
        lhs_provenance,
        rhs_terms: rhs.terms,
        rhs_provenance: rhs.provenance,
        tail_bound: rhs.tail_bound,
        tail_converged: rhs.converged,
        quadrature_error: rhs.quadrature_error,
        growth_constant: rhs.growth_constant,
        stated_rhs,
        stated_rel_residual,
        passes: rhs.converged
            && (abs_residual <= VORONOI_TOLERANCE * lhs.value.norm() || abs_residual <= VORONOI_ABS_TOLERANCE),
        dual,
    })
}

/// The classical dual side for `(a, N) = 1`:
/// `χ(b) η/(b√N) Σ e(-n·\overline{aN}/b) a_f̃(n) n^{-(k-1)/2} H_f F(n/(b²N))`,
/// with `f̃` the conjugate form and `η` supplied by the caller.
pub fn rhs_coprime_to_level(
    f: &NewformData,
    a: i64,
    b: i64,
    test: &TestFunction,
    eta: Complex64,
) -> Result<DualSum, VoronoiError> {
    let level = f.level();
    if gcd(a, level) != 1 || gcd(a, b) != 1 {
        return Err(VoronoiError::Invalid(format!("need (a, N) = (a, b) = 1, got a = {a}, b = {b}")));
    }
    let dual_form = f.conjugate();
    let inv = if b == 1 {
        0
    } else {
        mod_inv((a * level).rem_euclid(b), b).map_err(|_| VoronoiError::Invalid(format!("(N, b) must be 1 for b = {b}")))?
    };
    let twist = |n: i64| Complex64::from_polar(1.0, -2.0 * PI * ((n as i128 * inv as i128).rem_euclid(b as i128)) as f64 / b as f64);
    let scale = 1.0 / (b * b * level) as f64;
    // a_f̃(n) n^{-(k-1)/2} is the normalisation with δ = 1.
    let sum = dual_sum(&dual_form, &ScalingMatrix::identity(), twist, scale, test, CoefficientSource::Auto, false)?;
    let factor = f.character().value(b) * eta / (b as f64 * (level as f64).sqrt());
    Ok(DualSum {
        value: sum.value * factor,
        ..sum
    })
}

/// The classical dual side for `N | b`:
/// `χ̄(a)/b Σ e(-nā/b) a_f(n) n^{-(k-1)/2} H_f F(n/b²)`.
pub fn rhs_level_divides(f: &NewformData, a: i64, b: i64, test: &TestFunction) -> Result<DualSum, VoronoiError> {
    if b % f.level() != 0 || gcd(a, b) != 1 {
        return Err(VoronoiError::Invalid(format!("need N | b and (a, b) = 1, got a = {a}, b = {b}")));
    }
    let inv = if b == 1 { 0 } else { mod_inv(a.rem_euclid(b), b).expect("coprime") };
    let twist = |n: i64| Complex64::from_polar(1.0, -2.0 * PI * ((n as i128 * inv as i128).rem_euclid(b as i128)) as f64 / b as f64);
    let scale = 1.0 / (b * b) as f64;
    let sum = dual_sum(f, &ScalingMatrix::identity(), twist, scale, test, CoefficientSource::Auto, false)?;
    let factor = f.character().value(a).conj() / b as f64;
    Ok(DualSum {
        value: sum.value * factor,
        ..sum
    })
}

/// `f(a/b + iy)` against its dual expansion at `𝔟 = a/b` with the
/// closed-form Hankel transform of `x^{(k-1)/2} e(ixy)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub form: String,
    pub a: i64,
    pub b: i64,
    pub y: f64,
    pub dual_cusp: String,
    pub delta_b: i64,
    /// `f(a/b + iy)` from the stored expansion.
    pub direct: Complex64,
    /// The dual side with the closed-form transform.
    pub dual: Complex64,
    pub rel_residual: f64,
    pub dual_terms: i64,
    pub dual_provenance: Provenance,
    pub direct_provenance: Provenance,
    pub hankel_provenance: Provenance,
    pub passes: bool,
}

pub const IDENTITY_TOLERANCE: f64 = 1e-8;

pub fn closed_form_identity(
    f: &NewformData,
    a: i64,
    b: i64,
    y: f64,
    source: CoefficientSource,
) -> Result<IdentityReport, VoronoiError> {
    let k = holomorphic_weight(f)?;
    if y <= 0.0 {
        return Err(VoronoiError::Invalid("y must be positive".into()));
    }
    let test = TestFunction::exp_kernel(y, k);
    let dual = dual_data(f, a, b, &ScalingMatrix::identity())?;
    let sum = dual_sum(
        f,
        &dual.sigma_b(),
        |n| dual.twist(n),
        dual.hankel_argument(1),
        &test,
        source,
        true,
    )?;
    let rhs = sum.value / b as f64;
    let z = Complex64::new(a as f64 / b as f64, y);
    let direct = f.evaluate_auto(z, 1e-15)?.value;
    let rel_residual = (direct - rhs).norm() / direct.norm();
    Ok(IdentityReport {
        form: f.name().to_string(),
        a,
        b,
        y,
        dual_cusp: dual.dual_cusp.clone(),
        delta_b: dual.delta_b,
        direct,
        dual: rhs,
        rel_residual,
        dual_terms: sum.terms,
        dual_provenance: sum.provenance,
        direct_provenance: Provenance::Input,
        hankel_provenance: Provenance::ClosedForm,
        passes: sum.converged && rel_residual < IDENTITY_TOLERANCE,
    })
}

/// One row of the mean-square table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub x: i64,
    /// `S(X) = Σ_{n ≤ X} |a(n;𝔞)|²`.
    pub sum: f64,
    /// `((k+1)²/δ^k)(X^{k+2θ} + X^{k-1/2}(q, N/q)^{k+2θ})`.
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub form: String,
    pub cusp: String,
    pub weight: u32,
    pub delta: i64,
    pub theta: f64,
    pub provenance: Provenance,
    pub rows: Vec<BoundRow>,
    /// Least-squares slope of `log S` against `log X` over rows with `S > 0`.
    pub slope: Option<f64>,
    pub slope_window: (f64, f64),
    pub slope_in_window: bool,
    pub first_support: Option<i64>,
}

/// Ten points spaced evenly in `log X` from 500 to 5000.
pub fn default_bound_grid() -> Vec<i64> {
    (0..10).map(|j| (500.0 * 10f64.powf(j as f64 / 9.0)).round() as i64).collect()
}

pub fn average_bound_experiment(
    f: &NewformData,
    cusp: &Cusp,
    xs: &[i64],
    source: CoefficientSource,
) -> Result<BoundReport, VoronoiError> {
    let k = f.weight();
    let x_max = xs.iter().copied().max().unwrap_or(0).max(1);
    let table = coefficient_table(f, &cusp.scaling_matrix(), x_max, source)?;
    let delta = table.delta;
    let level = f.level();
    let q = cusp.denominator();
    let kk = k as f64;
    let theta = RAMANUJAN_THETA;
    let qn = gcd(q, level / q) as f64;
    // Support is judged on the normalised size so that weight does not
    // drown out small n.
    let norm = |n: i64| table.values[(n - 1) as usize].norm() * (n as f64 / delta as f64).powf(-(kk - 1.0) / 2.0);
    let scale = (1..=x_max).map(norm).fold(0.0, f64::max);
    let mut prefix = vec![0.0f64; x_max as usize + 1];
    for n in 1..=x_max as usize {
        prefix[n] = prefix[n - 1] + table.values[n - 1].norm_sqr();
    }
    let first_support = (1..=x_max).find(|&n| norm(n) > 1e-8 * scale);
    let rows: Vec<BoundRow> = xs
        .iter()
        .map(|&x| {
            let xf = x as f64;
            let sum = prefix[x.max(0) as usize];
            let bound = (kk + 1.0).powi(2) / (delta as f64).powf(kk)
                * (xf.powf(kk + 2.0 * theta) + xf.powf(kk - 0.5) * qn.powf(kk + 2.0 * theta));
            BoundRow { x, sum, bound, ratio: sum / bound }
        })
        .collect();
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sum > 0.0 && r.x > 0)
        .map(|r| ((r.x as f64).ln(), r.sum.ln()))
        .collect();
    let slope = (points.len() >= 2).then(|| {
        let m = points.len() as f64;
        let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let (num, den) = points
            .iter()
            .fold((0.0, 0.0), |(n, d), (x, y)| (n + (x - mx) * (y - my), d + (x - mx) * (x - mx)));
        num / den
    });
    let window = (kk - 0.75, kk + 0.25);
    Ok(BoundReport {
        form: f.name().to_string(),
        cusp: cusp.to_string(),
        weight: k,
        delta,
        theta,
        provenance: table.provenance,
        rows,
        slope,
        slope_window: window,
        slope_in_window: slope.is_some_and(|s| window.0 <= s && s <= window.1),
        first_support,
    })
}
