//! Newforms given by their q-expansions: evaluation, the slash action,
//! data ingestion and the built-in coefficient generators.

mod builtin;
mod io;

pub use builtin::{generate_builtin, load_builtin, Builtin, CACHE_ENV_VAR, FORMAT_VERSION};
pub use io::{load_newform, parse_newform, save_newform, to_json};

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::arith::{gcd, ArithError, DirichletCharacter};
use crate::cusps::Mat2;
use crate::special::bessel_k_imag_order;

#[derive(Debug, thiserror::Error)]
pub enum ModformError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed newform file: {0}")]
    Parse(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("need coefficients up to {needed}, only {available} available")]
    InsufficientCoefficients { needed: usize, available: usize },
    #[error("imaginary part {y} too small for {terms} terms (need y * terms >= 3)")]
    HeightTooSmall { y: f64, terms: usize },
    #[error("unknown builtin form {0:?} (expected delta, level11 or level9chi)")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FormKind {
    Holomorphic,
    Maass { parity: u8, spectral_parameter: f64 },
}

/// The archimedean kernel κ_f with `f(x+iy) = Σ a_f(n) κ_f(ny) e(nx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaKernel(pub FormKind);

impl KappaKernel {
    /// Holomorphic: `e^{-2πy}` for `y > 0`, else 0.
    /// Maaß: `sgn(y)^m |y|^{1/2} K_{it}(2π|y|)`, undefined at `y = 0`.
    pub fn eval(&self, y: f64) -> Result<f64, ModformError> {
        match self.0 {
            FormKind::Holomorphic => Ok(if y > 0.0 { (-2.0 * PI * y).exp() } else { 0.0 }),
            FormKind::Maass {
                parity,
                spectral_parameter,
            } => {
                if y == 0.0 {
                    return Err(ModformError::Invariant("Maass kernel at y = 0".into()));
                }
                let sign = if y < 0.0 && parity % 2 == 1 { -1.0 } else { 1.0 };
                Ok(sign * y.abs().sqrt() * bessel_k_imag_order(spectral_parameter, 2.0 * PI * y.abs()))
            }
        }
    }
}

/// Exact coefficient data, kept alongside the floating-point values.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactCoefficients {
    /// Rational integers.
    Integer(Vec<i128>),
    /// Elements `u + v ω` of `Z[ω]`, `ω = e(1/3)`.
    Eisenstein(Vec<(i128, i128)>),
}

impl ExactCoefficients {
    fn to_complex(&self) -> Vec<Complex64> {
        let s3 = 3f64.sqrt() / 2.0;
        match self {
            ExactCoefficients::Integer(v) => v.iter().map(|&a| Complex64::new(a as f64, 0.0)).collect(),
            ExactCoefficients::Eisenstein(v) => v
                .iter()
                .map(|&(u, w)| Complex64::new(u as f64 - 0.5 * w as f64, s3 * w as f64))
                .collect(),
        }
    }
}

/// A cuspidal newform given by its Fourier coefficients at ∞.
#[derive(Debug, Clone)]
pub struct NewformData {
    name: String,
    level: i64,
    weight: u32,
    kind: FormKind,
    character: DirichletCharacter,
    /// `coefficients[n] = a_f(n)`, with index 0 unused.
    coefficients: Vec<Complex64>,
    exact: Option<ExactCoefficients>,
}

/// A truncated Fourier sum with its rigorous tail bound (holomorphic case).
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub value: Complex64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// Relative target for automatic truncation: the tail bound is kept below
/// this multiple of `Σ |a_f(n) κ(ny)|` over the retained terms.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-16;

impl NewformData {
    /// Assembles and validates a newform.  `coefficients[0]` is ignored.
    pub fn new(
        name: impl Into<String>,
        level: i64,
        weight: u32,
        kind: FormKind,
        character: DirichletCharacter,
        coefficients: Vec<Complex64>,
    ) -> Result<Self, ModformError> {
        let f = NewformData {
            name: name.into(),
            level,
            weight,
            kind,
            character,
            coefficients,
            exact: None,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn from_exact(
        name: impl Into<String>,
        level: i64,
        weight: u32,
        character: DirichletCharacter,
        exact: ExactCoefficients,
    ) -> Result<Self, ModformError> {
        let mut f = NewformData::new(
            name,
            level,
            weight,
            FormKind::Holomorphic,
            character,
            exact.to_complex(),
        )?;
        f.set_exact(exact)?;
        Ok(f)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn is_holomorphic(&self) -> bool {
        self.kind == FormKind::Holomorphic
    }

    pub fn kernel(&self) -> KappaKernel {
        KappaKernel(self.kind)
    }

    pub fn character(&self) -> &DirichletCharacter {
        &self.character
    }

    /// Conductor `M` of the nebentypus.
    pub fn conductor(&self) -> i64 {
        self.character.conductor()
    }

    pub fn exact(&self) -> Option<&ExactCoefficients> {
        self.exact.as_ref()
    }

    /// Attaches exact data and checks multiplicativity on it without rounding.
    fn set_exact(&mut self, exact: ExactCoefficients) -> Result<(), ModformError> {
        let len = match &exact {
            ExactCoefficients::Integer(v) => v.len(),
            ExactCoefficients::Eisenstein(v) => v.len(),
        };
        if len != self.coefficients.len() {
            return Err(ModformError::Invariant("exact data has the wrong length".into()));
        }
        let lim = self.n_max().min(100);
        for m in 2..=lim {
            for n in m..=lim {
                if m * n > self.n_max() || gcd(m as i64, n as i64) != 1 {
                    continue;
                }
                let ok = match &exact {
                    ExactCoefficients::Integer(v) => v[m].checked_mul(v[n]) == Some(v[m * n]),
                    ExactCoefficients::Eisenstein(v) => {
                        let (a, b, c, d) = (v[m].0, v[m].1, v[n].0, v[n].1);
                        (a * c - b * d, a * d + b * c - b * d) == v[m * n]
                    }
                };
                if !ok {
                    return Err(ModformError::Invariant(format!(
                        "exact multiplicativity fails: a({m})a({n}) != a({})",
                        m * n
                    )));
                }
            }
        }
        self.exact = Some(exact);
        Ok(())
    }

    /// Largest `n` with known `a_f(n)`.
    pub fn n_max(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// `a_f(n)` for `1 <= n <= n_max`.
    pub fn coefficient(&self, n: u64) -> Option<Complex64> {
        if n == 0 {
            return None;
        }
        self.coefficients.get(n as usize).copied()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Hecke-normalised `λ_f(n) = a_f(n) / n^{(k-1)/2}`.
    pub fn lambda(&self, n: u64) -> Option<Complex64> {
        let e = (self.weight as f64 - 1.0) / 2.0;
        self.coefficient(n).map(|a| a / (n as f64).powf(e))
    }

    /// The form with complex-conjugated coefficients and character: the
    /// newform attached to the contragredient representation.
    pub fn conjugate(&self) -> NewformData {
        NewformData {
            name: format!("{}-conj", self.name),
            level: self.level,
            weight: self.weight,
            kind: self.kind,
            character: self.character.conj(),
            coefficients: self.coefficients.iter().map(|a| a.conj()).collect(),
            exact: self.exact.as_ref().map(|e| match e {
                ExactCoefficients::Integer(v) => ExactCoefficients::Integer(v.clone()),
                // conj(u + vω) = (u - v) - vω
                ExactCoefficients::Eisenstein(v) => {
                    ExactCoefficients::Eisenstein(v.iter().map(|&(u, w)| (u - w, -w)).collect())
                }
            }),
        }
    }

    /// Checks every load-time invariant.
    pub fn validate(&self) -> Result<(), ModformError> {
        let bad = |m: String| Err(ModformError::Invariant(m));
        if self.level < 1 {
            return bad(format!("level {} is not positive", self.level));
        }
        if self.level % self.character.modulus() != 0 {
            return bad(format!(
                "character modulus {} does not divide the level {}",
                self.character.modulus(),
                self.level
            ));
        }
        if self.n_max() < 1 {
            return bad("no coefficients".into());
        }
        let a1 = self.coefficients[1];
        if (a1 - 1.0).norm() > 1e-9 {
            return bad(format!("a_f(1) = {a1} but newforms are normalised by a_f(1) = 1"));
        }
        match self.kind {
            FormKind::Holomorphic => {
                if self.weight == 0 {
                    return bad("holomorphic forms need positive weight".into());
                }
                let odd_char = self.character.is_odd();
                if odd_char != (self.weight % 2 == 1) {
                    return bad(format!(
                        "parity mismatch: chi(-1) = {} but weight {}",
                        if odd_char { -1 } else { 1 },
                        self.weight
                    ));
                }
            }
            FormKind::Maass {
                parity,
                spectral_parameter,
            } => {
                if self.weight != 0 {
                    return bad("Maass forms are supported in weight 0 only".into());
                }
                if parity > 1 {
                    return bad(format!("parity {parity} is not 0 or 1"));
                }
                if !spectral_parameter.is_finite() {
                    return bad("spectral parameter is not finite".into());
                }
                if self.character.is_odd() {
                    return bad("weight 0 needs an even character".into());
                }
            }
        }
        if self.coefficients.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return bad("non-finite coefficient".into());
        }
        let lim = self.n_max().min(100) as u64;
        for m in 2..=lim {
            for n in m..=lim {
                if m * n > self.n_max() as u64 || gcd(m as i64, n as i64) != 1 {
                    continue;
                }
                let (am, an, amn) = (self.coefficients[m as usize], self.coefficients[n as usize], self.coefficients[(m * n) as usize]);
                let scale = 1.0 + am.norm() * an.norm();
                if (am * an - amn).norm() > 1e-8 * scale {
                    return bad(format!("multiplicativity fails: a({m})a({n}) != a({})", m * n));
                }
            }
        }
        // Ramanujan–Petersson (Deligne) for holomorphic data, Kim–Sarnak for Maaß.
        let slack = match self.kind {
            FormKind::Holomorphic => |_p: f64| 2.0 + 1e-8,
            FormKind::Maass { .. } => |p: f64| 2.0 * p.powf(7.0 / 64.0) + 1e-8,
        };
        for p in (2..=self.n_max().min(1000) as u64).filter(|&p| crate::arith::is_prime(p)) {
            if self.level % p as i64 == 0 {
                continue;
            }
            let l = self.lambda(p).expect("in range");
            if l.norm() > slack(p as f64) {
                return bad(format!("|lambda_f({p})| = {} exceeds the Ramanujan bound", l.norm()));
            }
        }
        Ok(())
    }

    /// Truncated Fourier sum with `n_terms` terms, refusing `y * n_terms < 3`.
    pub fn evaluate(&self, z: Complex64, n_terms: usize) -> Result<Evaluation, ModformError> {
        if z.im <= 0.0 {
            return Err(ModformError::Invariant(format!("{z} is not in the upper half-plane")));
        }
        if n_terms > self.n_max() {
            return Err(ModformError::InsufficientCoefficients {
                needed: n_terms,
                available: self.n_max(),
            });
        }
        if z.im * (n_terms as f64) < 3.0 {
            return Err(ModformError::HeightTooSmall { y: z.im, terms: n_terms });
        }
        match self.kind {
            FormKind::Holomorphic => {
                let q = (Complex64::i() * 2.0 * PI * z).exp();
                let mut qn = Complex64::new(1.0, 0.0);
                let mut s = Complex64::new(0.0, 0.0);
                for n in 1..=n_terms {
                    qn *= q;
                    s += self.coefficients[n] * qn;
                }
                Ok(Evaluation {
                    value: s,
                    tail_bound: self.holomorphic_tail(z.im, n_terms),
                    terms: n_terms,
                })
            }
            FormKind::Maass { .. } => Ok(self.maass_sum(z, n_terms)),
        }
    }

    /// Bound for `Σ_{n>T} |a_f(n)| e^{-2πny}` from `|a_f(n)| <= d(n) n^{(k-1)/2} <= 2 n^{k/2}`.
    fn holomorphic_tail(&self, y: f64, t: usize) -> f64 {
        let half_k = self.weight as f64 / 2.0;
        let r = (-2.0 * PI * y).exp();
        let n1 = t as f64 + 1.0;
        let first = 2.0 * n1.powf(half_k) * r.powf(n1);
        let ratio = ((n1 + 1.0) / n1).powf(half_k) * r;
        if ratio >= 1.0 {
            f64::INFINITY
        } else {
            first / (1.0 - ratio)
        }
    }

    fn maass_sum(&self, z: Complex64, n_terms: usize) -> Evaluation {
        let FormKind::Maass { parity, spectral_parameter } = self.kind else {
            unreachable!()
        };
        let mut s = Complex64::new(0.0, 0.0);
        let sign = if parity == 1 { -1.0 } else { 1.0 };
        for n in 1..=n_terms {
            let nf = n as f64;
            let k = (nf * z.im).sqrt() * bessel_k_imag_order(spectral_parameter, 2.0 * PI * nf * z.im);
            let ph = Complex64::from_polar(1.0, 2.0 * PI * nf * z.re);
            s += self.coefficients[n] * k * (ph + sign * ph.conj());
        }
        // |K_{it}(x)| <= K_0(x) <= sqrt(π/2x) e^{-x}; |a(n)| <= 2 n^{1/2} (Kim–Sarnak slack).
        let t = n_terms as f64 + 1.0;
        let x = 2.0 * PI * t * z.im;
        let term = 2.0 * 2.0 * t.sqrt() * (t * z.im).sqrt() * (PI / (2.0 * x)).sqrt() * (-x).exp();
        let ratio = (-2.0 * PI * z.im).exp() * ((t + 1.0) / t);
        Evaluation {
            value: s,
            tail_bound: if ratio < 1.0 { term / (1.0 - ratio) } else { f64::INFINITY },
            terms: n_terms,
        }
    }

    /// Evaluates with as many terms as needed for the tail to fall below
    /// `rel_tol · Σ|a_f(n) q^n|`, without any height raising.
    pub fn evaluate_auto(&self, z: Complex64, rel_tol: f64) -> Result<Evaluation, ModformError> {
        if z.im <= 0.0 {
            return Err(ModformError::Invariant(format!("{z} is not in the upper half-plane")));
        }
        if !self.is_holomorphic() {
            let need = ((40.0 / (2.0 * PI * z.im)).ceil() as usize).max((3.0 / z.im).ceil() as usize);
            return self.evaluate(z, need.min(self.n_max()).max(1)).and_then(|e| {
                if need > self.n_max() {
                    Err(ModformError::InsufficientCoefficients { needed: need, available: self.n_max() })
                } else {
                    Ok(e)
                }
            });
        }
        let q = (Complex64::i() * 2.0 * PI * z).exp();
        let r = q.norm();
        let min_terms = (3.0 / z.im).ceil() as usize;
        let mut qn = Complex64::new(1.0, 0.0);
        let mut s = Complex64::new(0.0, 0.0);
        let mut abs_sum = 0.0f64;
        let mut n = 0;
        loop {
            if n >= min_terms {
                let tail = self.holomorphic_tail(z.im, n);
                if tail <= rel_tol * abs_sum.max(f64::MIN_POSITIVE) || tail < 1e-300 {
                    return Ok(Evaluation { value: s, tail_bound: tail, terms: n });
                }
            }
            n += 1;
            if n > self.n_max() {
                // Estimate how many terms would have been needed.
                let needed = (n as f64 + (1.0 / rel_tol).ln() / (-r.ln())) as usize;
                return Err(ModformError::InsufficientCoefficients {
                    needed,
                    available: self.n_max(),
                });
            }
            qn *= q;
            let t = self.coefficients[n] * qn;
            s += t;
            abs_sum += t.norm();
        }
    }

    /// Evaluates `f(z)` after moving `z` up by an element of Γ₀(N):
    /// `f(z) = χ̄(γ) (cz+d)^{-k} f(γz)`.
    pub fn evaluate_modular(&self, z: Complex64, rel_tol: f64) -> Result<Evaluation, ModformError> {
        let (gamma, w) = raise_height(self.level, z);
        let e = self.evaluate_auto(w, rel_tol)?;
        let chi = self.character.eval(gamma.d).expect("d is prime to N").inv().to_complex();
        let j = (z * gamma.c as f64 + gamma.d as f64).powi(-(self.weight as i32));
        let factor = chi * j;
        Ok(Evaluation {
            value: e.value * factor,
            tail_bound: e.tail_bound * factor.norm(),
            terms: e.terms,
        })
    }

    /// `(f|_k g)(z) = det(g)^{k/2} (cz+d)^{-k} f(gz)` for integral `g` with
    /// positive determinant (weight 0: `f(gz)`).
    pub fn slash(&self, g: Mat2, z: Complex64) -> Result<Evaluation, ModformError> {
        let det = g.det();
        if det <= 0 {
            return Err(ModformError::Invariant(format!("slash needs det > 0, got {det}")));
        }
        let gz = g.act(z);
        let e = self.evaluate_modular(gz, DEFAULT_RELATIVE_TOLERANCE)?;
        let k = self.weight as i32;
        let factor = (det as f64).powf(k as f64 / 2.0) * (z * g.c as f64 + g.d as f64).powi(-k);
        Ok(Evaluation {
            value: e.value * factor,
            tail_bound: e.tail_bound * factor.norm(),
            terms: e.terms,
        })
    }
}

/// Moves `z` as high as possible by elements of Γ₀(N): returns `(γ, γz)`
/// with `Im γz >= Im z`, `|Re γz| <= 1/2`.
pub fn raise_height(level: i64, z: Complex64) -> (Mat2, Complex64) {
    let mut gamma = Mat2::IDENTITY;
    let mut w = z;
    for _ in 0..10_000 {
        let shift = -(w.re + 0.5).floor() as i64;
        if shift != 0 {
            w += shift as f64;
            gamma = Mat2::translation(shift) * gamma;
        }
        let Some((c, d)) = best_denominator(level, w) else {
            return (gamma, w);
        };
        let (_, x, y) = crate::arith::ext_gcd(d, c);
        // a d - b c = 1 with a = x, b = -y.
        let g = Mat2::new(x, -y, c, d);
        debug_assert_eq!(g.det(), 1);
        w = g.act(w);
        gamma = g * gamma;
    }
    (gamma, w)
}

/// The bottom row `(c, d)`, `N | c > 0`, `(c, d) = 1`, minimising `|cw + d|`
/// if that is below 1.  Candidates are small combinations of a Lagrange-reduced
/// basis of the lattice `{(c/N, d)}` under `|cw + d|²`; the shortest primitive
/// rows are always among them, and a miss only costs extra terms later.
fn best_denominator(level: i64, w: Complex64) -> Option<(i64, i64)> {
    let norm = |(c1, d): (i64, i64)| (w * (c1 * level) as f64 + d as f64).norm_sqr();
    let dot = |u: (i64, i64), v: (i64, i64)| {
        let a = w * (u.0 * level) as f64 + u.1 as f64;
        let b = w * (v.0 * level) as f64 + v.1 as f64;
        a.re * b.re + a.im * b.im
    };
    let (mut u, mut v) = ((1i64, 0i64), (0i64, 1i64));
    for _ in 0..200 {
        if norm(u) < norm(v) {
            std::mem::swap(&mut u, &mut v);
        }
        let m = (dot(u, v) / norm(v)).round() as i64;
        if m == 0 {
            break;
        }
        u = (u.0 - m * v.0, u.1 - m * v.1);
    }
    const K: i64 = 4;
    let mut best: Option<(f64, i64, i64)> = None;
    for i in -K..=K {
        for j in -K..=K {
            let (c1, d) = (i * u.0 + j * v.0, i * u.1 + j * v.1);
            if c1 <= 0 || gcd(c1 * level, d) != 1 {
                continue;
            }
            let q = norm((c1, d));
            if q < 1.0 - 1e-12 && best.map_or(true, |(b, _, _)| q < b) {
                best = Some((q, c1 * level, d));
            }
        }
    }
    best.map(|(_, c, d)| (c, d))
}
