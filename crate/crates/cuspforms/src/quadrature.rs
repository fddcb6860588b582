//! Gauss–Legendre panels and tanh-sinh quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            // Newton iteration from the Tricomi initial guess.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// A shared 20-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(20))
    }

    /// Composite rule over `panels` equal panels of `[a, b]`.
    pub fn integrate<T, F>(&self, f: F, a: f64, b: f64, panels: usize) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: Fn(f64) -> T,
    {
        let h = (b - a) / panels as f64;
        let mut acc = T::default();
        for k in 0..panels {
            let mid = a + (k as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc = acc + f(mid + 0.5 * h * x) * (0.5 * h * w);
            }
        }
        acc
    }

    /// All abscissae and weights of the composite rule, in order.
    pub fn composite_nodes(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.nodes.len());
        for k in 0..panels {
            let mid = a + (k as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + 0.5 * h * x, 0.5 * h * w));
            }
        }
        out
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Tanh-sinh quadrature on a finite interval, halving the step until two
/// successive levels agree to `tol` (absolute).
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, tol: f64, max_level: u32) -> QuadResult<num_complex::Complex64>
where
    F: Fn(f64) -> num_complex::Complex64,
{
    use num_complex::Complex64;
    let r = 0.5 * (b - a);
    // Abscissa x = tanh(π/2 sinh t); truncate where the weight underflows.
    let t_max = 4.0;
    let eval = |t: f64| -> Complex64 {
        let s = 0.5 * PI * t.sinh();
        let ch = s.cosh();
        let x = s.tanh();
        let w = 0.5 * PI * t.cosh() / (ch * ch);
        // Distance to the nearer endpoint, computed without cancellation.
        let dist = r / (s.abs().exp() * ch);
        let u = if x >= 0.0 { b - dist } else { a + dist };
        if w < 1e-300 || u <= a || u >= b {
            return Complex64::new(0.0, 0.0);
        }
        f(u) * (w * r)
    };
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        sum += eval(k as f64 * h) + eval(-(k as f64) * h);
        k += 1;
    }
    let mut evals = 2 * k - 1;
    let mut prev = sum * h;
    for _ in 0..max_level {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            sum += eval(k as f64 * h) + eval(-(k as f64) * h);
            evals += 2;
            k += 2;
        }
        let cur = sum * h;
        let err = (cur - prev).norm();
        if err <= tol {
            return QuadResult {
                value: cur,
                error_estimate: err,
                evaluations: evals,
                converged: true,
            };
        }
        prev = cur;
    }
    QuadResult {
        value: prev,
        error_estimate: f64::INFINITY,
        evaluations: evals,
        converged: false,
    }
}
