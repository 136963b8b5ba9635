//! Monte Carlo estimation of the semigroup kernel
//!
//! ```text
//! k_t(x, y) = e^{−|x−y|²/(2t)} / (2πt)^{d/2} · E_{x→y}[ e^{−S_t(A,V;b)} ]
//! ```
//!
//! over bridges pinned at `x` and `y`, plus kernel-level consistency checks
//! in [`checks`].

pub mod checks;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::action;
use crate::bridge::{dist_sq, sample_bridge, BridgePath, TimeGrid};
use crate::error::{invalid, Error, Result};
use crate::potentials::{ScalarPotentialSpec, VectorPotentialSpec};
use crate::rng::PathSeed;
use crate::stats::ComplexWelford;

pub use checks::{
    bound_envelope, diamagnetic_check, hermiticity_residual, semigroup_residual, truncation_convergence,
    BoundEnvelopeReport, DiamagneticReport, EnvelopeSample, HermiticityReport, SemigroupReport,
    TruncationPoint, TruncationReport, TruncationStatus,
};

/// Per-path summands above this magnitude abort the run.
pub const OVERFLOW_THRESHOLD: f64 = 1e300;

/// Fraction of largest summands inspected by the heavy-tail flag.
const HEAVY_TAIL_TOP: f64 = 1e-3;

/// Monte Carlo parameters shared by every estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McParams {
    pub n_samples: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl McParams {
    pub fn new(n_samples: usize, n_steps: usize, seed: u64) -> Self {
        Self { n_samples, n_steps, seed }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(invalid("n_samples must be at least 2"));
        }
        if self.n_steps == 0 {
            return Err(Error::ZeroSteps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub mean: Complex64,
    /// `sqrt(stderr_re² + stderr_im²)`.
    pub stderr: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_samples: usize,
    pub n_steps: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Free heat kernel `e^{−|x−y|²/(2t)}/(2πt)^{d/2}`.
    pub prefactor: f64,
    pub seed: u64,
    /// Set when the largest 0.1% of `|e^{−S}|` carry more than half of the
    /// total mass; the standard error is then unreliable.
    pub heavy_tail: bool,
}

/// Free heat kernel in `d = x.len()` dimensions.
pub fn free_kernel(x: &[f64], y: &[f64], t: f64) -> f64 {
    let d = x.len() as f64;
    (-dist_sq(x, y) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).powf(d / 2.0)
}

pub(crate) fn validate_points(x: &[f64], y: &[f64], t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTime(t));
    }
    if x.is_empty() {
        return Err(invalid("points must have dimension at least 1"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    Ok(())
}

/// Sample path `i` of the run and apply `f`, for every `i` in
/// `0..n_samples`. Output order is the path index order regardless of how
/// rayon schedules the work.
pub fn map_paths<T, F>(x: &[f64], y: &[f64], t: f64, params: &McParams, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &BridgePath) -> Result<T> + Sync,
{
    validate_points(x, y, t)?;
    params.validate()?;
    let grid = TimeGrid::new(t, params.n_steps)?;
    (0..params.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let path = sample_bridge(PathSeed::new(params.seed, i), x, y, &grid)?;
            f(i, &path)
        })
        .collect()
}

/// `e^{−S}` with the overflow policy applied.
pub(crate) fn weight(s: Complex64, seed: u64, path: u64) -> Result<Complex64> {
    let w = (-s).exp();
    let mag = w.norm();
    if !mag.is_finite() || mag > OVERFLOW_THRESHOLD {
        return Err(Error::Overflow { seed, path, value: mag });
    }
    Ok(w)
}

/// Reduce per-path weights `e^{−S}` to an estimate.
pub(crate) fn summarize(
    weights: &[Complex64],
    x: &[f64],
    y: &[f64],
    t: f64,
    params: &McParams,
) -> KernelEstimate {
    let acc: ComplexWelford = weights.iter().copied().collect();
    let prefactor = free_kernel(x, y, t);
    let se_re = prefactor * acc.re.stderr();
    let se_im = prefactor * acc.im.stderr();
    KernelEstimate {
        mean: acc.mean() * prefactor,
        stderr: se_re.hypot(se_im),
        stderr_re: se_re,
        stderr_im: se_im,
        n_samples: weights.len(),
        n_steps: params.n_steps,
        t,
        x: x.to_vec(),
        y: y.to_vec(),
        prefactor,
        seed: params.seed,
        heavy_tail: heavy_tail(weights),
    }
}

fn heavy_tail(weights: &[Complex64]) -> bool {
    let mut mags: Vec<f64> = weights.iter().map(|w| w.norm()).collect();
    let total: f64 = mags.iter().sum();
    if total == 0.0 {
        return false;
    }
    let top = ((mags.len() as f64 * HEAVY_TAIL_TOP).ceil() as usize).max(1);
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let top_mass: f64 = mags[..top].iter().sum();
    top_mass > 0.5 * total
}

/// Per-path weights `e^{−S_t(A,V;b_i)}`.
pub fn path_weights(
    x: &[f64],
    y: &[f64],
    t: f64,
    a: &VectorPotentialSpec,
    v: &ScalarPotentialSpec,
    params: &McParams,
) -> Result<Vec<Complex64>> {
    a.validate()?;
    v.validate()?;
    a.check_dimension(x.len())?;
    v.check_dimension(x.len())?;
    map_paths(x, y, t, params, |i, path| weight(action(path, a, v)?.value, params.seed, i))
}

/// Monte Carlo estimate of `k_t(x, y)`.
pub fn estimate_kernel(
    x: &[f64],
    y: &[f64],
    t: f64,
    a: &VectorPotentialSpec,
    v: &ScalarPotentialSpec,
    params: &McParams,
) -> Result<KernelEstimate> {
    let w = path_weights(x, y, t, a, v, params)?;
    Ok(summarize(&w, x, y, t, params))
}

/// Harmonic-oscillator kernel for `V = ½ω²|x|²` (Mehler's formula).
pub fn mehler_kernel(x: &[f64], y: &[f64], t: f64, omega: f64) -> f64 {
    let d = x.len() as f64;
    let (sh, ch) = ((omega * t).sinh(), (omega * t).cosh());
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (omega / (2.0 * std::f64::consts::PI * sh)).powf(d / 2.0) * (-omega * ((xx + yy) * ch - 2.0 * xy) / (2.0 * sh)).exp()
}

/// Diagonal of the two-dimensional constant-field kernel,
/// `B / (4π sinh(Bt/2))`.
pub fn landau_diagonal(b: f64, t: f64) -> f64 {
    if b == 0.0 {
        return 1.0 / (2.0 * std::f64::consts::PI * t);
    }
    b.abs() / (4.0 * std::f64::consts::PI * (b.abs() * t / 2.0).sinh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{truncate, Part};
    use crate::stats::Welford;

    #[test]
    fn free_kernel_is_exact_with_zero_stderr() {
        let est = estimate_kernel(&[0.0], &[0.0], 1.0, &VectorPotentialSpec::Zero, &ScalarPotentialSpec::Zero, &McParams::new(1000, 16, 1)).unwrap();
        assert_eq!(est.mean.re, 1.0 / (2.0 * std::f64::consts::PI).sqrt());
        assert_eq!(est.mean.im, 0.0);
        assert_eq!(est.stderr, 0.0);
        assert!(!est.heavy_tail);
    }

    #[test]
    fn constant_potential_scales_exactly() {
        let c = 0.75;
        let t = 1.3;
        let est = estimate_kernel(&[0.2, 0.1], &[-0.5, 1.0], t, &VectorPotentialSpec::Zero, &ScalarPotentialSpec::constant(c), &McParams::new(500, 32, 2)).unwrap();
        let expected = (-c * t).exp() * free_kernel(&[0.2, 0.1], &[-0.5, 1.0], t);
        assert!(((est.mean.re - expected) / expected).abs() < 1e-13);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn shift_by_constant_multiplies_by_exponential() {
        let params = McParams::new(2000, 64, 3);
        let v = ScalarPotentialSpec::harmonic(2, 1.0);
        let a = VectorPotentialSpec::uniform_field_2d(0.8);
        let (x, y, t) = ([0.3, -0.2], [0.0, 0.4], 0.9);
        let base = estimate_kernel(&x, &y, t, &a, &v, &params).unwrap();
        let c = -0.6;
        let shifted = estimate_kernel(&x, &y, t, &a, &v.clone().plus(ScalarPotentialSpec::constant(c)), &params).unwrap();
        let ratio = shifted.mean / base.mean;
        let expected = (-c * t).exp();
        assert!((ratio.re - expected).abs() < 1e-12 * expected && ratio.im.abs() < 1e-12);
    }

    #[test]
    fn positive_real_for_zero_vector_potential() {
        let v = ScalarPotentialSpec::harmonic(1, 1.0).plus(ScalarPotentialSpec::power_law(-1.0, 1.5, 0.1, Part::V2));
        let w = path_weights(&[0.5], &[-0.5], 1.0, &VectorPotentialSpec::Zero, &v, &McParams::new(500, 64, 4)).unwrap();
        assert!(w.iter().all(|z| z.re > 0.0 && z.im == 0.0));
    }

    #[test]
    fn pure_v1_truncation_is_bit_identical() {
        let v = ScalarPotentialSpec::harmonic(1, 1.0).plus(ScalarPotentialSpec::constant(0.3));
        let params = McParams::new(400, 64, 5);
        let base = estimate_kernel(&[0.0], &[0.5], 1.0, &VectorPotentialSpec::Zero, &v, &params).unwrap();
        for r in [0.5, 1.5, 4.0] {
            let tr = estimate_kernel(&[0.0], &[0.5], 1.0, &VectorPotentialSpec::Zero, &truncate(&v, r).unwrap(), &params).unwrap();
            assert_eq!(tr.mean, base.mean);
            assert_eq!(tr.stderr, base.stderr);
        }
    }

    #[test]
    fn overflow_aborts_with_seed() {
        let v = ScalarPotentialSpec::constant(-800.0);
        let err = estimate_kernel(&[0.0], &[0.0], 1.0, &VectorPotentialSpec::Zero, &v, &McParams::new(10, 4, 9)).unwrap_err();
        assert!(matches!(err, Error::Overflow { seed: 9, .. }));
    }

    #[test]
    fn input_validation() {
        let z = (VectorPotentialSpec::Zero, ScalarPotentialSpec::Zero);
        assert!(estimate_kernel(&[0.0], &[0.0], 0.0, &z.0, &z.1, &McParams::new(10, 4, 0)).is_err());
        assert!(estimate_kernel(&[0.0], &[0.0], 1.0, &z.0, &z.1, &McParams::new(1, 4, 0)).is_err());
        assert!(estimate_kernel(&[0.0], &[0.0, 1.0], 1.0, &z.0, &z.1, &McParams::new(10, 4, 0)).is_err());
        let a3 = VectorPotentialSpec::Constant { a: vec![1.0, 0.0, 0.0] };
        assert!(estimate_kernel(&[0.0, 0.0], &[0.0, 0.0], 1.0, &a3, &z.1, &McParams::new(10, 4, 0)).is_err());
    }

    #[test]
    fn heavy_tail_flag() {
        let mut w = vec![Complex64::new(1.0, 0.0); 10_000];
        assert!(!heavy_tail(&w));
        w[0] = Complex64::new(1e6, 0.0);
        assert!(heavy_tail(&w));
    }

    #[test]
    fn mehler_diagonal() {
        let k = mehler_kernel(&[0.0], &[0.0], 1.0, 1.0);
        assert!((k - (2.0 * std::f64::consts::PI * 1f64.sinh()).powf(-0.5)).abs() < 1e-15);
        assert!((k - 0.368_005_198_7).abs() < 1e-10);
        // Small t approaches the free kernel.
        let t = 1e-4;
        assert!((mehler_kernel(&[0.1], &[0.1], t, 1.0) / free_kernel(&[0.1], &[0.1], t) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn mehler_monte_carlo() {
        let v = ScalarPotentialSpec::harmonic(1, 1.0);
        let est = estimate_kernel(&[0.0], &[0.0], 1.0, &VectorPotentialSpec::Zero, &v, &McParams::new(100_000, 512, 6)).unwrap();
        let exact = mehler_kernel(&[0.0], &[0.0], 1.0, 1.0);
        assert!((est.mean.re - exact).abs() < 3.0 * est.stderr, "{} ± {} vs {exact}", est.mean.re, est.stderr);
        assert_eq!(est.mean.im, 0.0);
    }

    #[test]
    fn mehler_off_diagonal_monte_carlo() {
        let v = ScalarPotentialSpec::harmonic(1, 1.0);
        let est = estimate_kernel(&[0.5], &[-0.7], 0.8, &VectorPotentialSpec::Zero, &v, &McParams::new(50_000, 256, 7)).unwrap();
        let exact = mehler_kernel(&[0.5], &[-0.7], 0.8, 1.0);
        assert!((est.mean.re - exact).abs() < 3.0 * est.stderr + 1e-4, "{} ± {} vs {exact}", est.mean.re, est.stderr);
    }

    #[test]
    fn pure_gauge_kernel_picks_up_boundary_phase() {
        // A = ∇χ, χ(x) = ½ xᵀMx: k_t(x,y) = e^{−i(χ(y)−χ(x))} k⁰_t(x,y).
        let m = vec![vec![0.6, 0.2], vec![0.2, 0.0]];
        let a = VectorPotentialSpec::Linear { matrix: m.clone() };
        let chi = |p: &[f64]| 0.5 * (m[0][0] * p[0] * p[0] + 2.0 * m[0][1] * p[0] * p[1] + m[1][1] * p[1] * p[1]);
        let (x, y, t) = ([0.3, -0.4], [1.0, 0.2], 1.0);
        let est = estimate_kernel(&x, &y, t, &a, &ScalarPotentialSpec::Zero, &McParams::new(20_000, 1024, 8)).unwrap();
        let expected = Complex64::from_polar(free_kernel(&x, &y, t), -(chi(&y) - chi(&x)));
        assert!((est.mean - expected).norm() < 3.0 * est.stderr + 2e-3 * expected.norm(), "{} vs {expected}", est.mean);
    }

    #[test]
    fn ito_and_midpoint_weights_converge_under_refinement() {
        // Non-divergence-free A: compare E[e^{−i(Itô + ½∫∇·A)}] with
        // E[e^{−i·midpoint}] on the same paths.
        let a = VectorPotentialSpec::Linear { matrix: vec![vec![1.5, 0.0], vec![0.0, 1.0]] };
        let mut gaps = Vec::new();
        for n in [64usize, 256, 1024] {
            let params = McParams::new(4000, n, 10);
            let diffs = map_paths(&[0.0, 0.0], &[0.5, 0.5], 1.0, &params, |_, p| {
                let s = action(p, &a, &ScalarPotentialSpec::Zero)?;
                let strat = crate::action::stratonovich_line_integral(p, &a)?;
                Ok((-s.value).exp() - Complex64::new(0.0, -strat).exp())
            })
            .unwrap();
            let acc: ComplexWelford = diffs.into_iter().collect();
            gaps.push((acc.mean().norm(), acc.stderr()));
        }
        for w in gaps.windows(2) {
            assert!(w[1].0 <= w[0].0 + 3.0 * (w[0].1 + w[1].1), "{gaps:?}");
        }
    }

    #[test]
    fn divergence_free_stratonovich_minus_ito_vanishes() {
        let a = VectorPotentialSpec::uniform_field_2d(1.3);
        let w: Welford = (0..2000)
            .map(|i| {
                let p = sample_bridge(PathSeed::new(12, i), &[0.0, 0.0], &[1.0, 0.0], &TimeGrid::new(1.0, 256).unwrap()).unwrap();
                crate::action::stratonovich_line_integral(&p, &a).unwrap() - crate::action::ito_line_integral(&p, &a).unwrap()
            })
            .collect();
        // Poincaré gauge: Σ Δbᵀ B Δb = 0 termwise.
        assert!(w.mean().abs() < 1e-12);
    }
}
