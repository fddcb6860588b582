//! Bessel functions needed by the κ kernels and Hankel transforms.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::quadrature::GaussLegendre;

/// `J_n(x)` for integer order: Miller's backward recurrence in the
/// oscillatory-transition region, Hankel's asymptotic expansion beyond it.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        let v = bessel_j(-n, x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if x > 25.0 + 0.5 * nf * nf {
        bessel_j_asymptotic(nf, x)
    } else {
        bessel_j_miller(n as usize, x)
    }
}

fn bessel_j_miller(n: usize, x: f64) -> f64 {
    let top = (n as f64).max(x);
    let mut m = (top + 30.0 + (60.0 * top).sqrt()) as usize;
    m += m % 2;
    let (mut jp1, mut j) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    let mut result = 0.0;
    for k in (1..=m).rev() {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            result *= 1e-250;
        }
        // j now holds J_{k-1} (unnormalised).
        if k - 1 == n {
            result = j;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j;
        }
    }
    norm += j;
    result / norm
}

fn bessel_j_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        let mag = term.abs();
        if mag < 1e-17 || (mag > prev && odd * odd > mu) {
            break;
        }
        prev = mag;
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let phase = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * phase.cos() - q * phase.sin())
}

/// `K_{it}(x)` for real `t` and `x > 0` from
/// `K_{it}(x) = ∫₀^∞ e^{-x cosh u} cos(t u) du` by the trapezoid rule, which
/// converges geometrically for this even entire integrand.
///
/// For `x ≪ t` the value is of size `e^{-πt/2}` against an integrand of size
/// `e^{-x}`, so roughly `πt/(2 ln 10)` digits cancel.
pub fn bessel_k_imag_order(t: f64, x: f64) -> f64 {
    assert!(x > 0.0, "K-Bessel needs a positive argument");
    let u_max = (1.0 + 745.0 / x).acosh().max(1.0);
    let integrand = |u: f64| (-x * (u.cosh() - 1.0)).exp() * (t * u).cos();
    let trapezoid = |h: f64| {
        let mut s = 0.5 * integrand(0.0);
        let mut k = 1;
        loop {
            let u = k as f64 * h;
            if u > u_max {
                break;
            }
            s += integrand(u);
            k += 1;
        }
        s * h
    };
    let mut h = 0.25f64.min(1.0 / (1.0 + t.abs()));
    let mut prev = trapezoid(h);
    for _ in 0..12 {
        h *= 0.5;
        let cur = trapezoid(h);
        if (cur - prev).abs() <= 1e-14 * cur.abs().max(1e-300) {
            return cur * (-x).exp();
        }
        prev = cur;
    }
    prev * (-x).exp()
}

/// `J_ν(x)` for complex order and `x > 0`, from Schläfli's integral
/// `J_ν(x) = (1/π)∫₀^π cos(ντ − x sin τ)dτ − (sin νπ/π)∫₀^∞ e^{−x sinh s − νs} ds`.
pub fn bessel_j_complex_order(nu: Complex64, x: f64) -> Complex64 {
    assert!(x > 0.0, "complex-order J needs a positive argument");
    let gl = GaussLegendre::standard();
    let panels = (4.0 + (x + nu.norm()) / 2.0).ceil() as usize;
    let first: Complex64 = gl.integrate(|tau| (nu * tau - x * tau.sin()).cos(), 0.0, PI, panels);
    let sin_nu_pi = (nu * PI).sin();
    let second = if sin_nu_pi.norm() == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        // e^{-x sinh s} is below 1e-18 relative once x sinh s > 42 + |Re ν| s.
        let s_max = (45.0 / x).asinh() + 2.0;
        let panels = (8.0 + 4.0 * s_max * (1.0 + nu.im.abs())).ceil() as usize;
        gl.integrate(|s| (-(x * s.sinh()) - nu * s).exp(), 0.0, s_max, panels)
    };
    first / PI - sin_nu_pi / PI * second
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bessel's integral `J_n(x) = (1/π)∫₀^π cos(nτ − x sin τ) dτ`, whose
    /// trapezoid rule is spectrally accurate (periodic analytic integrand).
    fn bessel_integral(n: i32, x: f64) -> f64 {
        let m = (x.abs() + n.abs() as f64 + 64.0) as usize * 2;
        let h = PI / m as f64;
        let mut s = 0.5 * (1.0 + (n as f64 * PI).cos());
        for k in 1..m {
            let t = k as f64 * h;
            s += (n as f64 * t - x * t.sin()).cos();
        }
        s * h / PI
    }

    #[test]
    fn integer_order_matches_bessel_integral() {
        for n in [0, 1, 2, 5, 11] {
            for &x in &[0.001, 0.5, 1.0, 3.7, 10.0, 24.9, 25.6, 40.0, 84.0, 86.0, 150.0, 700.0] {
                let a = bessel_j(n, x);
                let b = bessel_integral(n, x);
                assert!((a - b).abs() < 2e-15 * (1.0 + x.sqrt()), "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn known_values() {
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 10.0) - 0.043_472_746_168_861_44).abs() < 1e-15);
        assert_eq!(bessel_j(3, 0.0), 0.0);
        assert!((bessel_j(-1, 2.0) + bessel_j(1, 2.0)).abs() < 1e-16);
    }

    #[test]
    fn k_bessel_real_order_zero() {
        // K_0(1) and K_0(2).
        assert!((bessel_k_imag_order(0.0, 1.0) - 0.421_024_438_240_708_3).abs() < 1e-15);
        assert!((bessel_k_imag_order(0.0, 2.0) - 0.113_893_872_749_533_4).abs() < 1e-15);
        assert!((bessel_k_imag_order(1.0, 1.0) - 0.289_428_037_025_992).abs() < 1e-14);
        assert!((bessel_k_imag_order(2.0, 0.5) - 0.016_502_018_949_481_4).abs() < 1e-14);
    }

    #[test]
    fn complex_order_reduces_to_integer_order() {
        for n in [0, 1, 3] {
            for x in [0.3, 2.0, 9.0] {
                let v = bessel_j_complex_order(Complex64::new(n as f64, 0.0), x);
                assert!((v.re - bessel_j(n, x)).abs() < 1e-13, "n={n} x={x}");
                assert!(v.im.abs() < 1e-13);
            }
        }
    }
}
