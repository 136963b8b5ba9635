use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScalarPotentialSpec;
use crate::error::{invalid, Error, Result};
use crate::quadrature::{adaptive_simpson, linspace, trapezoid_weights};
use crate::region::BoxRegion;
use crate::rng::{domain, stream};
use crate::stats::Welford;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubquadraticReport {
    pub holds: bool,
    pub epsilon: f64,
    /// `max (|V₂(x)| − ε|x|²)` over the probe grid of the requested box.
    pub v_eps_estimate: f64,
    /// The same maximum over the box doubled about its centre.
    pub v_eps_doubled_box: f64,
    pub argmax: Vec<f64>,
}

/// Probe `|V₂(x)| ≤ ε|x|² + v_ε` on a tensor grid of `n_probe` points per
/// axis. The bound is reported as holding when the maximum is finite and
/// does not grow when the box is doubled.
pub fn check_subquadratic(
    spec: &ScalarPotentialSpec,
    epsilon: f64,
    sample_box: &BoxRegion,
    n_probe: usize,
) -> Result<SubquadraticReport> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(invalid("epsilon must be positive"));
    }
    if n_probe < 2 || sample_box.is_empty() {
        return Err(invalid("need at least two probes per axis and a non-empty box"));
    }
    if sample_box.lower.iter().chain(&sample_box.upper).any(|v| !v.is_finite()) {
        return Err(invalid("probe box must be bounded"));
    }
    spec.check_dimension(sample_box.dim())?;
    let (v_eps, argmax) = probe_max(spec, epsilon, sample_box, n_probe)?;
    let doubled = BoxRegion {
        lower: sample_box.lower.iter().zip(&sample_box.upper).map(|(l, u)| 1.5 * l - 0.5 * u).collect(),
        upper: sample_box.lower.iter().zip(&sample_box.upper).map(|(l, u)| 1.5 * u - 0.5 * l).collect(),
    };
    let (v_eps_doubled, _) = probe_max(spec, epsilon, &doubled, 2 * n_probe - 1)?;
    let grows = v_eps_doubled > v_eps + 1e-9 * (1.0 + v_eps.abs());
    Ok(SubquadraticReport {
        holds: v_eps.is_finite() && !grows,
        epsilon,
        v_eps_estimate: v_eps,
        v_eps_doubled_box: v_eps_doubled,
        argmax,
    })
}

fn probe_max(spec: &ScalarPotentialSpec, eps: f64, region: &BoxRegion, n: usize) -> Result<(f64, Vec<f64>)> {
    let axes: Vec<Vec<f64>> =
        region.lower.iter().zip(&region.upper).map(|(l, u)| linspace(*l, *u, n)).collect();
    let d = axes.len();
    let total = n.pow(d as u32);
    let mut best = f64::NEG_INFINITY;
    let mut argmax = vec![0.0; d];
    let mut x = vec![0.0; d];
    for flat in 0..total {
        let mut rest = flat;
        for k in (0..d).rev() {
            x[k] = axes[k][rest % n];
            rest /= n;
        }
        let v2 = spec.eval_v2(&x);
        if !v2.is_finite() {
            return Err(Error::NonFinite { what: "V₂", node: flat });
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let g = v2.abs() - eps * r2;
        if g > best {
            best = g;
            argmax.copy_from_slice(&x);
        }
    }
    Ok((best, argmax))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatoReport {
    /// Maximum over probes of the estimated double integral.
    pub value: f64,
    pub stderr: f64,
    pub argmax: Vec<f64>,
    pub per_probe: Vec<ProbeValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeValue {
    pub x: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
}

/// Estimate `κ_t(f) = sup_x ∫_0^t ds ∫ dξ e^{−|ξ|²} |f(x + ξ√s)|`, the sup
/// taken over `probes`.
///
/// The `s` integral is a trapezoid rule with `n_s` intervals; the `ξ`
/// integral is Monte Carlo with `ξ = Z/√2`, `Z` standard normal, weighted by
/// `π^{d/2}`. The same `ξ` draws are used for every probe and every `s`.
pub fn kato_kappa<F>(f: F, t: f64, n_s: usize, n_mc: usize, probes: &[Vec<f64>], seed: u64) -> Result<KatoReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTime(t));
    }
    if probes.is_empty() {
        return Err(invalid("probe set must be non-empty"));
    }
    if n_s == 0 || n_mc == 0 {
        return Err(invalid("n_s and n_mc must be positive"));
    }
    let d = probes[0].len();
    if d == 0 {
        return Err(invalid("probes must have dimension at least 1"));
    }
    if let Some(p) = probes.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.len() });
    }
    let s_nodes = linspace(0.0, t, n_s + 1);
    let s_weights = trapezoid_weights(0.0, t, n_s + 1);
    let norm = std::f64::consts::PI.powf(d as f64 / 2.0);

    let xis: Vec<Vec<f64>> = (0..n_mc as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, domain::KATO, j);
            (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2).collect()
        })
        .collect();

    let mut per_probe = Vec::with_capacity(probes.len());
    for x in probes {
        let samples: Vec<Result<f64>> = xis
            .par_iter()
            .enumerate()
            .map(|(j, xi)| {
                let mut point = vec![0.0; d];
                let mut acc = 0.0;
                for (s, w) in s_nodes.iter().zip(&s_weights) {
                    let rs = s.sqrt();
                    for k in 0..d {
                        point[k] = x[k] + xi[k] * rs;
                    }
                    let v = f(&point);
                    if !v.is_finite() {
                        return Err(Error::NonFinite { what: "f", node: j });
                    }
                    acc += w * v.abs();
                }
                Ok(norm * acc)
            })
            .collect();
        let mut w = Welford::new();
        for s in samples {
            w.push(s?);
        }
        per_probe.push(ProbeValue { x: x.clone(), value: w.mean(), stderr: w.stderr() });
    }
    let best = per_probe
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("non-empty probes");
    Ok(KatoReport { value: best.value, stderr: best.stderr, argmax: best.x.clone(), per_probe: per_probe.clone() })
}

/// `Υ(ξ) = ∫_0^1 dσ [1 − 4ξσ(1−σ)]^{−d/2}` for `0 ≤ ξ < 1`, to relative
/// tolerance 1e-8.
pub fn upsilon(xi: f64, dim: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&xi) {
        return Err(invalid(format!("upsilon needs 0 <= xi < 1, got {xi}")));
    }
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if xi == 0.0 {
        return Ok(1.0);
    }
    let p = -(dim as f64) / 2.0;
    let g = |s: f64| (1.0 - 4.0 * xi * s * (1.0 - s)).powf(p);
    // Symmetric about σ = ½ where the integrand peaks.
    let half = adaptive_simpson(g, 0.0, 0.5, 1e-10)?;
    Ok(2.0 * half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Part;

    #[test]
    fn subquadratic_power_law() {
        // max_r r^{1.5} − 0.1 r² sits at r = (1.5/0.2)² = 56.25.
        let v = ScalarPotentialSpec::power_law(-1.0, 1.5, 1.0, Part::V2);
        let b = BoxRegion::centered_cube(1, 100.0);
        let rep = check_subquadratic(&v, 0.1, &b, 2001).unwrap();
        let r: f64 = 56.25;
        let exact = r.powf(1.5) - 0.1 * r * r;
        assert!(rep.holds);
        assert!((rep.v_eps_estimate - exact).abs() < 1e-3, "{}", rep.v_eps_estimate);
        assert!((rep.argmax[0].abs() - r).abs() < 0.1);
    }

    #[test]
    fn subquadratic_zero() {
        let rep = check_subquadratic(&ScalarPotentialSpec::Zero, 0.5, &BoxRegion::centered_cube(2, 3.0), 11).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.v_eps_estimate, 0.0);
    }

    #[test]
    fn exactly_quadratic_fails() {
        let v = ScalarPotentialSpec::power_law(1.0, 2.0, 1.0, Part::V2);
        let rep = check_subquadratic(&v, 0.1, &BoxRegion::centered_cube(1, 10.0), 101).unwrap();
        assert!(!rep.holds);
        assert!(rep.v_eps_doubled_box > rep.v_eps_estimate);
    }

    #[test]
    fn subquadratic_rejects_bad_epsilon() {
        assert!(check_subquadratic(&ScalarPotentialSpec::Zero, 0.0, &BoxRegion::centered_cube(1, 1.0), 5).is_err());
    }

    #[test]
    fn kato_of_constants() {
        let probes = vec![vec![0.0, 0.0], vec![1.0, -3.0]];
        let one = kato_kappa(|_| 1.0, 0.7, 16, 64, &probes, 1).unwrap();
        assert!((one.value - 0.7 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(one.stderr, 0.0);
        let zero = kato_kappa(|_| 0.0, 0.7, 16, 64, &probes, 1).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn kato_indicator_matches_tensor_quadrature() {
        let t = 0.01;
        let f = |x: &[f64]| if x[0].abs() <= 1.0 { 1.0 } else { 0.0 };
        let rep = kato_kappa(f, t, 200, 100_000, &[vec![0.0]], 3).unwrap();
        // Deterministic midpoint tensor rule in (s, ξ).
        let (ns, nx, lx) = (400, 40_000, 12.0);
        let mut oracle = 0.0;
        for i in 0..ns {
            let s = (i as f64 + 0.5) * t / ns as f64;
            for j in 0..nx {
                let xi = -lx + (j as f64 + 0.5) * 2.0 * lx / nx as f64;
                if (xi * s.sqrt()).abs() <= 1.0 {
                    oracle += (-xi * xi).exp();
                }
            }
        }
        oracle *= (t / ns as f64) * (2.0 * lx / nx as f64);
        assert!((rep.value - oracle).abs() <= 3.0 * rep.stderr + 1e-6, "{} vs {oracle} ± {}", rep.value, rep.stderr);
    }

    #[test]
    fn kato_monotone_in_t() {
        let f = |x: &[f64]| (-x[0] * x[0]).exp();
        let probes = vec![vec![0.0], vec![0.5]];
        let mut last = 0.0;
        for t in [0.1, 0.2, 0.5, 1.0] {
            let r = kato_kappa(f, t, 32, 4000, &probes, 5).unwrap();
            assert!(r.value > last);
            last = r.value;
        }
    }

    #[test]
    fn kato_rejects_bad_input() {
        assert!(kato_kappa(|_| 1.0, 0.0, 4, 4, &[vec![0.0]], 0).is_err());
        assert!(kato_kappa(|_| 1.0, 1.0, 4, 4, &[], 0).is_err());
        assert!(kato_kappa(|_| f64::NAN, 1.0, 4, 4, &[vec![0.0]], 0).is_err());
    }

    fn riemann_upsilon(xi: f64, d: usize, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) * h;
                (1.0 - 4.0 * xi * s * (1.0 - s)).powf(-(d as f64) / 2.0)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn upsilon_values() {
        for d in 1..=3 {
            assert_eq!(upsilon(0.0, d).unwrap(), 1.0);
        }
        let v = upsilon(0.5, 1).unwrap();
        let oracle = riemann_upsilon(0.5, 1, 1_000_000);
        assert!(((v - oracle) / oracle).abs() < 1e-6, "{v} vs {oracle}");
        // Closed form in d = 1: asinh(√(ξ/(1−ξ)))/√ξ.
        let closed = (1.0f64).asinh() / 0.5f64.sqrt();
        assert!(((v - closed) / closed).abs() < 1e-8);
        for d in 1..=3 {
            for xi in [0.1, 0.5, 0.9, 0.99] {
                let o = riemann_upsilon(xi, d, 200_000);
                assert!(((upsilon(xi, d).unwrap() - o) / o).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn upsilon_monotone_and_bounded_below() {
        for d in 1..=3 {
            assert!(upsilon(0.3, d).unwrap() < upsilon(0.6, d).unwrap());
            let mut last = 1.0;
            for i in 1..20 {
                let v = upsilon(i as f64 / 20.0, d).unwrap();
                assert!(v > last);
                last = v;
            }
        }
        assert!(upsilon(1.0, 1).is_err());
        assert!(upsilon(-0.1, 1).is_err());
    }
}
