//! Kernel-level consistency checks: Hermiticity, the semigroup property, the
//! Gaussian envelope, the diamagnetic inequality and convergence of the
//! truncated potentials `V_R`.
//!
//! Every comparison between two kernels that can share paths does so
//! (common random numbers), so the reported errors are those of the paired
//! difference rather than of two independent runs.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_kernel, free_kernel, map_paths, summarize, validate_points, weight, KernelEstimate, McParams};
use crate::action::{action, time_integral};
use crate::bridge::{dist_sq, norm};
use crate::error::{invalid, Error, Result};
use crate::potentials::{ScalarPotentialSpec, VectorPotentialSpec};
use crate::quadrature::{normal_sf, trapezoid_weights};
use crate::region::BoxRegion;
use crate::rng::derive_seed;
use crate::stats::{ls_slope, ComplexWelford};

/// Relative slack granted to comparisons whose statistical error is exactly
/// zero, covering floating-point reassociation.
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiticityReport {
    /// `k_t(x, y)`.
    pub forward: KernelEstimate,
    /// `k_t(y, x)` from the time-reversed paths of the forward run.
    pub backward: KernelEstimate,
    /// `|k_t(x,y) − conj(k_t(y,x))|`.
    pub residual: f64,
    /// Standard error of the paired difference.
    pub combined_stderr: f64,
    pub pass: bool,
}

/// Compare `k_t(x,y)` with `conj(k_t(y,x))`, estimating the latter on the
/// reversed forward paths.
pub fn hermiticity_residual(
    x: &[f64],
    y: &[f64],
    t: f64,
    a: &VectorPotentialSpec,
    v: &ScalarPotentialSpec,
    params: &McParams,
) -> Result<HermiticityReport> {
    a.validate()?;
    v.validate()?;
    a.check_dimension(x.len())?;
    v.check_dimension(x.len())?;
    let pairs = map_paths(x, y, t, params, |i, path| {
        let fwd = weight(action(path, a, v)?.value, params.seed, i)?;
        let bwd = weight(action(&path.reversed(), a, v)?.value, params.seed, i)?;
        Ok((fwd, bwd))
    })?;
    let fwd: Vec<Complex64> = pairs.iter().map(|p| p.0).collect();
    let bwd: Vec<Complex64> = pairs.iter().map(|p| p.1).collect();
    let diff: ComplexWelford = pairs.iter().map(|(f, b)| f - b.conj()).collect();
    let forward = summarize(&fwd, x, y, t, params);
    let backward = summarize(&bwd, y, x, t, params);
    let residual = (forward.mean - backward.mean.conj()).norm();
    let combined_stderr = forward.prefactor * diff.stderr();
    let pass = residual <= 3.0 * combined_stderr + ROUNDING_SLACK * forward.mean.norm();
    Ok(HermiticityReport { forward, backward, residual, combined_stderr, pass })
}

/// Error budget of the semigroup comparison; `total` is the plain sum of the
/// other components, with the two Monte Carlo parts combined in quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupBudget {
    /// Standard error of `k_{t+t'}(x,z)`.
    pub mc_lhs: f64,
    /// Propagated standard error of the quadrature sum.
    pub mc_rhs: f64,
    /// `|T_h − T_{2h}|` between the full and the every-other-node trapezoid.
    pub quadrature: f64,
    /// Gaussian-envelope bound on the integrand mass outside the box.
    pub tail: f64,
    pub rounding: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupReport {
    pub lhs: KernelEstimate,
    /// `Σ_y w_y k_t(x,y) k_{t'}(y,z)`.
    pub rhs: Complex64,
    pub residual: f64,
    pub budget: SemigroupBudget,
    /// `budget.total / |lhs|`.
    pub budget_fraction: f64,
    /// Largest `|k_t k_{t'}| / (k⁰_t k⁰_{t'})` over the quadrature nodes,
    /// used to scale the free Gaussian tail.
    pub domination_ratio: f64,
    pub quad_n: usize,
    pub pass: bool,
}

/// Tensor trapezoid weights on `quad_n^d` nodes, plus the weights of the
/// every-other-node rule on the same nodes (zero off the coarse grid).
fn tensor_rules(region: &BoxRegion, quad_n: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let d = region.dim();
    let fine: Vec<Vec<f64>> = (0..d).map(|k| trapezoid_weights(region.lower[k], region.upper[k], quad_n)).collect();
    let coarse: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let c = trapezoid_weights(region.lower[k], region.upper[k], quad_n.div_ceil(2));
            (0..quad_n).map(|i| if i % 2 == 0 { c[i / 2] } else { 0.0 }).collect()
        })
        .collect();
    let total = quad_n.pow(d as u32);
    let mut points = Vec::with_capacity(total);
    let mut wf = Vec::with_capacity(total);
    let mut wc = Vec::with_capacity(total);
    let step: Vec<f64> = (0..d).map(|k| (region.upper[k] - region.lower[k]) / (quad_n - 1) as f64).collect();
    for flat in 0..total {
        let mut rem = flat;
        let mut p = vec![0.0; d];
        let (mut f, mut c) = (1.0, 1.0);
        for k in 0..d {
            let i = rem % quad_n;
            rem /= quad_n;
            p[k] = if i == quad_n - 1 { region.upper[k] } else { region.lower[k] + step[k] * i as f64 };
            f *= fine[k][i];
            c *= coarse[k][i];
        }
        points.push(p);
        wf.push(f);
        wc.push(c);
    }
    (points, wf, wc)
}

/// Check `k_{t+t'}(x,z) = ∫ k_t(x,y) k_{t'}(y,z) dy` with a tensor trapezoid
/// rule over `quad_box` (`quad_n` nodes per axis, odd).
///
/// The box is rejected when the free Gaussian envelope of the integrand,
/// scaled by the largest observed ratio to that envelope, leaves more than
/// `tail_tolerance · |k_{t+t'}|` outside it. The ratio is measured on the
/// nodes, so this is a heuristic guard rather than a bound.
#[allow(clippy::too_many_arguments)]
pub fn semigroup_residual(
    x: &[f64],
    z: &[f64],
    t: f64,
    t_prime: f64,
    a: &VectorPotentialSpec,
    v: &ScalarPotentialSpec,
    quad_box: &BoxRegion,
    quad_n: usize,
    params: &McParams,
    tail_tolerance: f64,
) -> Result<SemigroupReport> {
    validate_points(x, z, t)?;
    validate_points(x, z, t_prime)?;
    let d = x.len();
    if quad_box.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: quad_box.dim() });
    }
    if quad_box.is_empty() || quad_box.lower.iter().chain(&quad_box.upper).any(|b| !b.is_finite()) {
        return Err(invalid("quadrature box must be finite and non-empty"));
    }
    if quad_n < 3 || quad_n.is_multiple_of(2) {
        return Err(invalid("quad_n must be odd and at least 3"));
    }

    let lhs = estimate_kernel(x, z, t + t_prime, a, v, &params.with_seed(derive_seed(params.seed, 0)))?;
    let (points, wf, wc) = tensor_rules(quad_box, quad_n);
    let left_seed = derive_seed(params.seed, 1);
    let right_seed = derive_seed(params.seed, 2);
    let factors = points
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let i = i as u64;
            let left = estimate_kernel(x, y, t, a, v, &params.with_seed(derive_seed(left_seed, i)))?;
            let right = estimate_kernel(y, z, t_prime, a, v, &params.with_seed(derive_seed(right_seed, i)))?;
            Ok((left, right))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rhs = Complex64::new(0.0, 0.0);
    let mut coarse = Complex64::new(0.0, 0.0);
    let mut var_rhs = 0.0;
    let mut abs_sum = 0.0;
    let mut ratio: f64 = 0.0;
    for ((l, r), (w, wc)) in factors.iter().zip(wf.iter().zip(&wc)) {
        let term = l.mean * r.mean;
        rhs += term * w;
        coarse += term * wc;
        let s = w * (r.mean.norm() * l.stderr).hypot(l.mean.norm() * r.stderr);
        var_rhs += s * s;
        abs_sum += (term * w).norm();
        let free = l.prefactor * r.prefactor;
        if free > 0.0 {
            ratio = ratio.max(term.norm() / free);
        }
    }

    // k⁰_t(x,y) k⁰_{t'}(y,z) = k⁰_{t+t'}(x,z) · N(y; c, σ² I).
    let center: Vec<f64> = x.iter().zip(z).map(|(xi, zi)| (t_prime * xi + t * zi) / (t + t_prime)).collect();
    let sigma = (t * t_prime / (t + t_prime)).sqrt();
    let outside: f64 = (0..d)
        .map(|k| normal_sf((quad_box.upper[k] - center[k]) / sigma) + normal_sf((center[k] - quad_box.lower[k]) / sigma))
        .sum::<f64>()
        .min(1.0);
    let tail = ratio * free_kernel(x, z, t + t_prime) * outside;
    let scale = lhs.mean.norm().max(f64::MIN_POSITIVE);
    if tail > tail_tolerance * scale {
        return Err(Error::QuadratureBoxTooSmall { tail: tail / scale, tolerance: tail_tolerance });
    }

    let mc_lhs = lhs.stderr;
    let mc_rhs = var_rhs.sqrt();
    let quadrature = (rhs - coarse).norm();
    let rounding = 64.0 * f64::EPSILON * (abs_sum + lhs.mean.norm());
    let total = mc_lhs.hypot(mc_rhs) + quadrature + tail + rounding;
    let residual = (lhs.mean - rhs).norm();
    Ok(SemigroupReport {
        budget_fraction: total / scale,
        pass: residual <= 3.0 * total,
        lhs,
        rhs,
        residual,
        budget: SemigroupBudget { mc_lhs, mc_rhs, quadrature, tail, rounding, total },
        domination_ratio: ratio,
        quad_n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `log|k_t(x,y)| + |x−y|²/(4t) − δ(|x|² + |y|²)`.
    pub statistic: f64,
    pub estimate: KernelEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEnvelopeReport {
    pub delta: f64,
    pub samples: Vec<EnvelopeSample>,
    pub max_observed: f64,
    pub argmax: usize,
    /// Whether the maximum sits on the samples of largest `|x|² + |y|²`,
    /// which would indicate that the envelope keeps growing outward.
    pub attained_on_outer_shell: bool,
    /// `exp(max_observed)`, an empirical stand-in for the envelope constant.
    pub a_t_fitted: f64,
    pub pass: bool,
}

/// Scan `log|k_t| + |x−y|²/(4t) − δ(|x|²+|y|²)` over `sample_points`.
pub fn bound_envelope(
    t: f64,
    delta: f64,
    a: &VectorPotentialSpec,
    v: &ScalarPotentialSpec,
    sample_points: &[(Vec<f64>, Vec<f64>)],
    params: &McParams,
) -> Result<BoundEnvelopeReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta must be positive"));
    }
    if sample_points.is_empty() {
        return Err(invalid("at least one sample point pair is required"));
    }
    let mut samples = Vec::with_capacity(sample_points.len());
    for (x, y) in sample_points {
        let est = estimate_kernel(x, y, t, a, v, params)?;
        let statistic = est.mean.norm().ln() + dist_sq(x, y) / (4.0 * t) - delta * (dist_sq(x, &vec![0.0; x.len()]) + dist_sq(y, &vec![0.0; y.len()]));
        samples.push(EnvelopeSample { x: x.clone(), y: y.clone(), statistic, estimate: est });
    }
    let (argmax, max_observed) = samples
        .iter()
        .map(|s| s.statistic)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    let radius = |s: &EnvelopeSample| norm(&s.x).powi(2) + norm(&s.y).powi(2);
    let outer = samples.iter().map(radius).fold(f64::NEG_INFINITY, f64::max);
    let attained_on_outer_shell = samples.len() > 1
        && samples.iter().any(|s| radius(s) < outer)
        && radius(&samples[argmax]) == outer;
    Ok(BoundEnvelopeReport {
        delta,
        pass: max_observed.is_finite() && !attained_on_outer_shell,
        a_t_fitted: max_observed.exp(),
        samples,
        max_observed,
        argmax,
        attained_on_outer_shell,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiamagneticReport {
    /// `|k_t(x,y; A, V)|`.
    pub lhs: f64,
    /// `k_t(x,y; 0, V)` on the same paths.
    pub rhs: f64,
    pub combined_stderr: f64,
    /// `lhs ≤ rhs + 3 σ`.
    pub pass: bool,
    /// `lhs < rhs − 3 σ`.
    pub strict: bool,
    pub magnetic: KernelEstimate,
    pub reference: KernelEstimate,
}

/// Compare `|k_t(x,y; A,V)|` with `k_t(x,y; 0,V)` using identical paths.
pub fn diamagnetic_check(
    x: &[f64],
    y: &[f64],
    t: f64,
    a: &VectorPotentialSpec,
    v: &ScalarPotentialSpec,
    params: &McParams,
) -> Result<DiamagneticReport> {
    let magnetic = estimate_kernel(x, y, t, a, v, params)?;
    let reference = estimate_kernel(x, y, t, &VectorPotentialSpec::Zero, v, params)?;
    let lhs = magnetic.mean.norm();
    let rhs = reference.mean.re;
    let combined_stderr = magnetic.stderr.hypot(reference.stderr);
    let slack = 3.0 * combined_stderr + ROUNDING_SLACK * rhs.abs();
    Ok(DiamagneticReport {
        lhs,
        rhs,
        combined_stderr,
        pass: lhs <= rhs + slack,
        strict: lhs < rhs - 3.0 * combined_stderr,
        magnetic,
        reference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPoint {
    pub radius: f64,
    /// `e^{ρ|x|² − ρ̃|y|²} |k_t(x,y) − k_t^{(R)}(x,y)|`.
    pub error: f64,
    /// Standard error of the weighted paired difference.
    pub noise: f64,
    /// `error > 5 · noise`.
    pub qualifies: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TruncationStatus {
    Fitted { slope: f64, n_points: usize },
    /// Fewer than two radii rise above five times their noise.
    RateIndistinguishableFromNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub points: Vec<TruncationPoint>,
    pub status: TruncationStatus,
    pub rho: f64,
    pub rho_tilde: f64,
    /// Largest `sup_s |b(s)|` among the sampled paths.
    pub max_excursion: f64,
}

impl TruncationReport {
    pub fn slope(&self) -> Option<f64> {
        match self.status {
            TruncationStatus::Fitted { slope, .. } => Some(slope),
            TruncationStatus::RateIndistinguishableFromNoise => None,
        }
    }
}

/// Weighted distance between `k_t` and the kernels of `V_R` for each radius
/// in `radii`, all evaluated on one shared set of paths, with a log-log slope
/// fitted over the radii whose error exceeds five times its noise.
#[allow(clippy::too_many_arguments)]
pub fn truncation_convergence(
    x: &[f64],
    y: &[f64],
    t: f64,
    a: &VectorPotentialSpec,
    v: &ScalarPotentialSpec,
    radii: &[f64],
    rho: f64,
    rho_tilde: f64,
    params: &McParams,
) -> Result<TruncationReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 1.0 && r.is_finite())) {
        return Err(invalid("radii must be finite and greater than 1"));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("radii must be strictly increasing"));
    }
    a.validate()?;
    v.validate()?;
    a.check_dimension(x.len())?;
    v.check_dimension(x.len())?;

    let per_path = map_paths(x, y, t, params, |i, path| {
        let base = action(path, a, v)?;
        let full = weight(base.value, params.seed, i)?;
        let magnetic = base.value - base.scalar_part;
        let mut diffs = Vec::with_capacity(radii.len());
        for &r in radii {
            // V_R = V₁ + Θ(R − |x|) V₂ with Θ(0) = 0.
            let s_r = time_integral(path, |p| {
                let v1 = v.eval_v1(p);
                if r - norm(p) > 0.0 {
                    v1 + v.eval_v2(p)
                } else {
                    v1
                }
            })?;
            let truncated = weight(magnetic + s_r, params.seed, i)?;
            diffs.push(full - truncated);
        }
        Ok((diffs, path.max_radius()))
    })?;

    let scale = (rho * dist_sq(x, &vec![0.0; x.len()]) - rho_tilde * dist_sq(y, &vec![0.0; y.len()])).exp() * free_kernel(x, y, t);
    let max_excursion = per_path.iter().map(|p| p.1).fold(0.0, f64::max);
    let points: Vec<TruncationPoint> = radii
        .iter()
        .enumerate()
        .map(|(j, &radius)| {
            let acc: ComplexWelford = per_path.iter().map(|p| p.0[j]).collect();
            let error = scale * acc.mean().norm();
            let noise = scale * acc.stderr();
            TruncationPoint { radius, error, noise, qualifies: error > 5.0 * noise }
        })
        .collect();

    let (lx, ly): (Vec<f64>, Vec<f64>) =
        points.iter().filter(|p| p.qualifies).map(|p| (p.radius.ln(), p.error.ln())).unzip();
    let status = match ls_slope(&lx, &ly) {
        Some(slope) => TruncationStatus::Fitted { slope, n_points: lx.len() },
        None => TruncationStatus::RateIndistinguishableFromNoise,
    };
    Ok(TruncationReport { points, status, rho, rho_tilde, max_excursion })
}
