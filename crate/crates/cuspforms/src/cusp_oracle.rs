//! Fourier coefficients at a cusp computed from first principles: sample
//! `f|_k σ⁻¹` along a horizontal line and take a discrete Fourier transform
//! over the period `δ(𝔞)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::cusps::{extended_width, Cusp, CuspError, Mat2, ScalingMatrix};
use crate::modform::{ModformError, NewformData};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Modform(#[from] ModformError),
    #[error(transparent)]
    Cusp(#[from] CuspError),
    #[error("invalid oracle parameters: {0}")]
    BadParameters(String),
}

/// Kernel values below this are refused as divisors.
pub const KERNEL_THRESHOLD: f64 = 1e-13;

/// The automatic height puts `κ_f(n_max y / δ)` at `e^{-α}`.  Larger α
/// tames the size of `f` near the real line (which grows like `y^{-k/2}`) at
/// the cost of amplifying noise in the top coefficients; those grow like
/// `n^{(k-1)/2}`, so higher weights can afford it.
fn auto_alpha(weight: u32, n_max: i64) -> f64 {
    (0.25 * (weight as f64 - 1.0) * (n_max as f64).ln()).max(2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Coefficients `1..=n_max` (and `-n_max..=-1`) are extracted.
    pub n_max: i64,
    /// Sampling height; chosen automatically when `None`.
    pub y: Option<f64>,
    /// Number of samples per period; chosen from the decay rate when `None`.
    pub samples: Option<usize>,
    /// Sample over `c δ` instead of `δ` (coefficient indices refer to `c δ`).
    pub period_multiple: i64,
}

impl OracleOptions {
    pub fn new(n_max: i64) -> Self {
        OracleOptions {
            n_max,
            y: None,
            samples: None,
            period_multiple: 1,
        }
    }

    pub fn with_height(mut self, y: f64) -> Self {
        self.y = Some(y);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OracleCoefficient {
    Resolved { value: [f64; 2] },
    /// The kernel `κ_f(n y / δ)` is too small to divide by at this height.
    Unresolved { raw: [f64; 2], kernel: f64 },
}

/// The expansion `(f|σ⁻¹)(x+iy) = Σ_n a_f(n;𝔞) κ_f(n y/δ) e(n x/δ)`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CuspExpansion {
    pub cusp: String,
    pub sigma_inv: Mat2,
    /// The sampled period (δ times the requested multiple).
    pub period: i64,
    pub delta: i64,
    pub y: f64,
    pub samples: usize,
    /// `(n, a_f(n;𝔞))` for `1 <= |n| <= n_max` (holomorphic: `n >= 1` only).
    pub coefficients: Vec<(i64, OracleCoefficient)>,
    /// Raw Fourier mass at frequency 0 (cuspidality).
    pub constant_term: f64,
    /// Largest raw Fourier mass at negative frequencies (holomorphic forms).
    pub negative_mass: f64,
    /// Interpolation error at the midpoints between the fitted samples.
    pub residual: f64,
    /// Disagreement between coefficients from one and two sample densities.
    pub alias_estimate: f64,
    /// `max |f|σ⁻¹|` over the samples.
    pub sample_scale: f64,
}

impl CuspExpansion {
    pub fn coefficient(&self, n: i64) -> Option<Complex64> {
        self.coefficients.iter().find(|c| c.0 == n).and_then(|c| match c.1 {
            OracleCoefficient::Resolved { value } => Some(Complex64::new(value[0], value[1])),
            OracleCoefficient::Unresolved { .. } => None,
        })
    }

    /// Error floor for the raw Fourier data: the larger of the residuals and
    /// the rounding level of the samples.
    pub fn noise_floor(&self) -> f64 {
        self.residual
            .max(self.alias_estimate)
            .max(64.0 * f64::EPSILON * self.sample_scale)
    }

    pub fn unresolved(&self) -> Vec<i64> {
        self.coefficients
            .iter()
            .filter(|c| matches!(c.1, OracleCoefficient::Unresolved { .. }))
            .map(|c| c.0)
            .collect()
    }
}

/// `(f|_k g)(z)` for `det g = 1`, using the height-raised evaluator.
pub fn slash_value(f: &NewformData, g: Mat2, z: Complex64) -> Result<Complex64, ModformError> {
    Ok(f.slash(g, z)?.value)
}

/// The extended width δ(𝔞) for `f` at `cusp`.
pub fn delta_for(f: &NewformData, cusp: &Cusp) -> Result<i64, CuspError> {
    Ok(extended_width(f.level(), f.conductor(), cusp.denominator())?.delta)
}

/// Expands `f` at `cusp` with its standard scaling matrix.
pub fn expand_at_cusp(f: &NewformData, cusp: &Cusp, opts: &OracleOptions) -> Result<CuspExpansion, OracleError> {
    let delta = delta_for(f, cusp)?;
    expand_with_scaling(f, &cusp.scaling_matrix(), delta, &cusp.to_string(), opts)
}

fn auto_height(f: &NewformData, period: i64, n_max: i64) -> f64 {
    period as f64 * auto_alpha(f.weight(), n_max) / (2.0 * PI * n_max as f64)
}

/// As [`expand_with_scaling`], but when the samples sit too close to a cusp
/// equivalent to ∞ for the stored coefficients, the line is raised until
/// they suffice.  Raising trades truncation for noise amplification in the
/// top coefficients, which the kernel threshold still polices.
pub fn expand_within_data(
    f: &NewformData,
    sigma: &ScalingMatrix,
    delta: i64,
    label: &str,
    opts: &OracleOptions,
) -> Result<CuspExpansion, OracleError> {
    let mut opts = *opts;
    for _ in 0..6 {
        match expand_with_scaling(f, sigma, delta, label, &opts) {
            Err(OracleError::Modform(ModformError::InsufficientCoefficients { needed, available })) => {
                let y = opts.y.unwrap_or_else(|| auto_height(f, delta * opts.period_multiple, opts.n_max));
                opts.y = Some(y * 1.25 * needed as f64 / available as f64);
            }
            other => return other,
        }
    }
    expand_with_scaling(f, sigma, delta, label, &opts)
}

/// Expands `f|σ⁻¹` for an arbitrary scaling matrix with period `δ`.
pub fn expand_with_scaling(
    f: &NewformData,
    sigma: &ScalingMatrix,
    delta: i64,
    label: &str,
    opts: &OracleOptions,
) -> Result<CuspExpansion, OracleError> {
    if opts.n_max < 1 || opts.period_multiple < 1 || delta < 1 {
        return Err(OracleError::BadParameters(format!(
            "n_max = {}, period multiple = {}, delta = {delta}",
            opts.n_max, opts.period_multiple
        )));
    }
    let period = delta * opts.period_multiple;
    let pf = period as f64;
    let n_max = opts.n_max;
    let y = opts.y.unwrap_or_else(|| auto_height(f, period, n_max));
    if !(y > 0.0 && y.is_finite()) {
        return Err(OracleError::BadParameters(format!("height {y} is not positive")));
    }
    // Frequency n contributes about e^{-2π n y / period}; choose J so the
    // first alias of n_max is below double precision relative to n_max itself.
    let decay = 2.0 * PI * y / pf;
    let samples = opts.samples.unwrap_or_else(|| {
        let needed = 2.0 * n_max as f64 + 40.0 / decay;
        (needed.ceil() as usize).next_power_of_two().max(64)
    });
    if samples < 2 * n_max as usize + 2 {
        return Err(OracleError::BadParameters(format!(
            "{samples} samples cannot resolve {n_max} frequencies"
        )));
    }
    let g = sigma.sigma_inv();
    // Twice as many samples: even ones are fitted, odd ones check the fit.
    let fine = 2 * samples;
    let values: Vec<Complex64> = (0..fine)
        .into_par_iter()
        .map(|j| {
            let z = Complex64::new(pf * j as f64 / fine as f64, y);
            slash_value(f, g, z)
        })
        .collect::<Result<_, _>>()?;
    let sample_scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let coarse: Vec<Complex64> = values.iter().step_by(2).copied().collect();
    let coarse_dft = dft(&coarse);
    let fine_dft = dft(&values);

    let half = (samples / 2) as i64;
    let at = |spectrum: &[Complex64], n: i64| spectrum[n.rem_euclid(spectrum.len() as i64) as usize];
    // Trigonometric interpolation at the unused midpoints: shift the
    // half-open band (-J/2, J/2] by half a sample and transform back.
    let mut shifted = vec![Complex64::new(0.0, 0.0); samples];
    for n in -half + 1..=half {
        let x = PI * n as f64 / samples as f64;
        shifted[n.rem_euclid(samples as i64) as usize] = at(&coarse_dft, n) * Complex64::from_polar(1.0, x);
    }
    FftPlanner::new().plan_fft_inverse(samples).process(&mut shifted);
    let residual = shifted
        .iter()
        .zip(values.iter().skip(1).step_by(2))
        .map(|(r, v)| (r - v).norm())
        .fold(0.0, f64::max);
    let raw = |n: i64| at(&coarse_dft, n);
    let alias_estimate = (-n_max..=n_max)
        .map(|n| (raw(n) - at(&fine_dft, n)).norm())
        .fold(0.0, f64::max);

    let kernel = f.kernel();
    let holomorphic = f.is_holomorphic();
    let mut coefficients = Vec::new();
    let range: Vec<i64> = if holomorphic {
        (1..=n_max).collect()
    } else {
        (-n_max..=n_max).filter(|&n| n != 0).collect()
    };
    for n in range {
        let k = kernel.eval(n as f64 * y / pf)?;
        let c = raw(n);
        coefficients.push((
            n,
            if k.abs() < KERNEL_THRESHOLD {
                OracleCoefficient::Unresolved { raw: [c.re, c.im], kernel: k }
            } else {
                let v = c / k;
                OracleCoefficient::Resolved { value: [v.re, v.im] }
            },
        ));
    }
    let negative_mass = if holomorphic {
        (1..=n_max).map(|n| raw(-n).norm()).fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(CuspExpansion {
        cusp: label.to_string(),
        sigma_inv: g,
        period,
        delta,
        y,
        samples,
        coefficients,
        constant_term: raw(0).norm(),
        negative_mass,
        residual,
        alias_estimate,
        sample_scale,
    })
}

/// `h ↦ ((1/J) Σ_j h_j e(-n j / J))_n` indexed by `n mod J`.
fn dft(h: &[Complex64]) -> Vec<Complex64> {
    let mut out = h.to_vec();
    FftPlanner::new().plan_fft_forward(h.len()).process(&mut out);
    let scale = 1.0 / h.len() as f64;
    out.iter_mut().for_each(|c| *c *= scale);
    out
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PeriodCheck {
    pub period: i64,
    pub max_relative_error: f64,
    pub periodic: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PeriodicityReport {
    pub cusp: String,
    pub delta: i64,
    pub y: f64,
    pub checks: Vec<PeriodCheck>,
    /// δ is a period and no proper divisor is.
    pub passed: bool,
}

/// Relative threshold for calling a shift a period.
pub const PERIOD_TOLERANCE: f64 = 1e-8;

/// Checks that δ(𝔞) is a period of `f|σ⁻¹` and that no proper divisor is,
/// at 32 points on the line of height `y`.
pub fn verify_periodicity(f: &NewformData, cusp: &Cusp, y: Option<f64>) -> Result<PeriodicityReport, OracleError> {
    let delta = delta_for(f, cusp)?;
    // Low enough that many frequencies contribute to every sample.
    let y = y.unwrap_or(delta as f64 / (2.0 * PI * 4.0));
    let g = cusp.scaling_matrix().sigma_inv();
    let points: Vec<Complex64> = (0..32)
        .map(|j| Complex64::new(delta as f64 * (j as f64 + 0.37) / 32.0, y))
        .collect();
    let base: Vec<Complex64> = points
        .iter()
        .map(|&z| slash_value(f, g, z))
        .collect::<Result<_, _>>()?;
    let scale = base.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut checks = Vec::new();
    for d in crate::arith::divisors(delta as u64).into_iter().map(|d| d as i64) {
        let mut err: f64 = 0.0;
        for (z, b) in points.iter().zip(&base) {
            let shifted = slash_value(f, g, z + d as f64)?;
            err = err.max((shifted - b).norm());
        }
        let rel = err / scale;
        checks.push(PeriodCheck {
            period: d,
            max_relative_error: rel,
            periodic: rel < PERIOD_TOLERANCE,
        });
    }
    let passed = checks.iter().all(|c| c.periodic == (c.period == delta));
    Ok(PeriodicityReport {
        cusp: cusp.to_string(),
        delta,
        y,
        checks,
        passed,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SkewReport {
    pub cusp: String,
    pub gamma: Mat2,
    pub m: i64,
    /// `(n, |a(n;τ) − χ(γ) e(nm/δ) a(n;σ)| / max_n |a(n;σ)|)`.
    pub residuals: Vec<(i64, f64)>,
    pub max_residual: f64,
    pub passed: bool,
}

/// Compares the expansion for `τ⁻¹ = γ σ⁻¹ n(m)` with the skewed expansion
/// for σ: `a_f(n;𝔞)_τ = χ(γ) e(nm/δ) a_f(n;𝔞)_σ`, for `1 <= n <= 20`.
pub fn verify_scaling_skew(f: &NewformData, cusp: &Cusp, gamma: Mat2, m: i64) -> Result<SkewReport, OracleError> {
    if gamma.det() != 1 || !gamma.in_gamma0(f.level()) {
        return Err(OracleError::BadParameters(format!("{gamma:?} is not in Γ₀({})", f.level())));
    }
    let delta = delta_for(f, cusp)?;
    let sigma = cusp.scaling_matrix();
    let tau = ScalingMatrix::from_sigma_inv(gamma * sigma.sigma_inv() * Mat2::translation(m));
    let opts = OracleOptions::new(20);
    let a = expand_with_scaling(f, &sigma, delta, &cusp.to_string(), &opts)?;
    let b = expand_with_scaling(f, &tau, delta, &cusp.to_string(), &opts)?;
    let chi = f.character().value(gamma.d);
    let scale = (1..=20)
        .filter_map(|n| a.coefficient(n))
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let mut residuals = Vec::new();
    for n in 1..=20 {
        if let (Some(x), Some(y)) = (a.coefficient(n), b.coefficient(n)) {
            let skew = chi * Complex64::from_polar(1.0, 2.0 * PI * (n * m) as f64 / delta as f64);
            residuals.push((n, (y - skew * x).norm() / scale));
        }
    }
    let max_residual = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(SkewReport {
        cusp: cusp.to_string(),
        gamma,
        m,
        residuals,
        max_residual,
        passed: max_residual < 1e-8,
    })
}
