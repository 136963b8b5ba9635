//! Small deterministic quadrature helpers.

use crate::error::{invalid, Result};

/// Adaptive Simpson on `[a, b]` to relative tolerance `rel_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(invalid("integration bounds must be finite with a < b"));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Scale the tolerance by a coarse magnitude estimate so that it is
    // relative to the integral rather than to each panel.
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    let value = simpson_step(&f, a, b, fa, fm, fb, whole, rel_tol * scale, 60);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(invalid("integrand is not finite"))
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Standard normal upper tail `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// `n` equally spaced points spanning `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Trapezoid weights for `linspace(a, b, n)`.
pub fn trapezoid_weights(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![b - a; n];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomials_and_exponentials() {
        let v = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        let e = adaptive_simpson(f64::exp, 0.0, 1.0, 1e-10).unwrap();
        assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn normal_tail_values() {
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_sf(1.959_963_984_540_054) - 0.025).abs() < 1e-12);
    }

    #[test]
    fn linspace_endpoints() {
        let x = linspace(-6.0, 6.0, 41);
        assert_eq!(x[0], -6.0);
        assert_eq!(x[40], 6.0);
        assert!((x[20]).abs() < 1e-15);
        let w = trapezoid_weights(-6.0, 6.0, 41);
        assert!((w.iter().sum::<f64>() - 12.0).abs() < 1e-12);
    }
}
