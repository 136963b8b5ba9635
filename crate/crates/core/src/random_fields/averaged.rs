//! Disorder-averaged kernels and their bounds.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{double_trapezoid_covariance, FieldSampler, GaussianFieldSpec};
use crate::action::action;
use crate::bridge::{dist_sq, BridgePath};
use crate::error::{invalid, Result};
use crate::kernel::{estimate_kernel, free_kernel, map_paths, summarize, weight, HermiticityReport, KernelEstimate, McParams};
use crate::potentials::{FieldSample, ScalarPotentialSpec, VectorPotentialSpec};
use crate::rng::derive_seed;
use crate::stats::ComplexWelford;

/// Relative slack for comparisons that hold with equality up to rounding.
const ROUNDING_SLACK: f64 = 1e-12;

/// `e^{−S_t(A,0;b)} · exp{½ ∬ C(b(s) − b(s'))}` for one path.
fn averaged_weight(
    path: &BridgePath,
    a: &VectorPotentialSpec,
    spec: &GaussianFieldSpec,
    seed: u64,
    index: u64,
) -> Result<Complex64> {
    let s = action(path, a, &ScalarPotentialSpec::Zero)?.value;
    weight(s - 0.5 * double_trapezoid_covariance(path, spec), seed, index)
}

fn check_inputs(x: &[f64], a: &VectorPotentialSpec, spec: &GaussianFieldSpec) -> Result<()> {
    spec.validate()?;
    a.validate()?;
    a.check_dimension(x.len())
}

/// Bridge Monte Carlo for the disorder-averaged kernel `k̄_t(x, y)`.
pub fn averaged_kernel(
    x: &[f64],
    y: &[f64],
    t: f64,
    a: &VectorPotentialSpec,
    spec: &GaussianFieldSpec,
    params: &McParams,
) -> Result<KernelEstimate> {
    check_inputs(x, a, spec)?;
    let w = map_paths(x, y, t, params, |i, path| averaged_weight(path, a, spec, params.seed, i))?;
    Ok(summarize(&w, x, y, t, params))
}

/// Compare `k̄_t(x,y)` with `conj(k̄_t(y,x))` on reversed paths.
pub fn averaged_hermiticity_residual(
    x: &[f64],
    y: &[f64],
    t: f64,
    a: &VectorPotentialSpec,
    spec: &GaussianFieldSpec,
    params: &McParams,
) -> Result<HermiticityReport> {
    check_inputs(x, a, spec)?;
    let pairs = map_paths(x, y, t, params, |i, path| {
        Ok((
            averaged_weight(path, a, spec, params.seed, i)?,
            averaged_weight(&path.reversed(), a, spec, params.seed, i)?,
        ))
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

/// Regular grid `lower + i·spacing`, `i ∈ Π [0, shape_k)`, on which whole
/// field realizations are sampled for the two-stage estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub lower: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
}

impl FieldGrid {
    /// Grid covering `[−half_width, half_width]^d`.
    pub fn centered_cube(dim: usize, half_width: f64, spacing: f64) -> Self {
        let n = (2.0 * half_width / spacing).round() as usize + 1;
        Self { lower: vec![-half_width; dim], spacing, shape: vec![n; dim] }
    }

    /// Grid points, row-major with the last axis fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let d = self.shape.len();
        let total: usize = self.shape.iter().product();
        (0..total)
            .map(|flat| {
                let mut rem = flat;
                let mut p = vec![0.0; d];
                for k in (0..d).rev() {
                    p[k] = self.lower[k] + self.spacing * (rem % self.shape[k]) as f64;
                    rem /= self.shape[k];
                }
                p
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageEstimate {
    /// Field average of per-realization kernel estimates.
    pub mean: Complex64,
    /// Spread of the per-realization estimates over `√n_fields`; covers
    /// both the field and the path noise.
    pub stderr: f64,
    pub n_fields: usize,
    pub n_samples_per_field: usize,
    /// Diagonal regularization used when factorizing the grid covariance.
    pub jitter: f64,
}

/// `E_field[k_t(x,y; A, V)]` by sampling whole field realizations on `grid`
/// (multilinear interpolation in between) and running the bridge estimator
/// on each with fresh paths.
#[allow(clippy::too_many_arguments)]
pub fn two_stage_kernel(
    x: &[f64],
    y: &[f64],
    t: f64,
    a: &VectorPotentialSpec,
    spec: &GaussianFieldSpec,
    grid: &FieldGrid,
    n_fields: usize,
    params: &McParams,
) -> Result<TwoStageEstimate> {
    check_inputs(x, a, spec)?;
    if n_fields < 2 {
        return Err(invalid("n_fields must be at least 2"));
    }
    if grid.shape.len() != x.len() {
        return Err(invalid("field grid dimension differs from the points"));
    }
    let sampler = FieldSampler::new(&grid.points(), spec)?;
    let mut acc = ComplexWelford::default();
    for j in 0..n_fields as u64 {
        let values = sampler.sample(params.seed, j);
        let field = FieldSample::new(grid.lower.clone(), grid.spacing, grid.shape.clone(), values)?;
        let v = ScalarPotentialSpec::FieldSample(field);
        let est = estimate_kernel(x, y, t, a, &v, &params.with_seed(derive_seed(params.seed, j)))?;
        acc.push(est.mean);
    }
    Ok(TwoStageEstimate {
        mean: acc.mean(),
        stderr: acc.stderr(),
        n_fields,
        n_samples_per_field: params.n_samples,
        jitter: sampler.jitter(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedBoundReport {
    pub estimate: KernelEstimate,
    pub l_t: f64,
    /// `L_t · e^{−|x−y|²/(2t)} / (2πt)^{d/2}`.
    pub free_bound: f64,
    pub free_bound_pass: bool,
    /// `k̄_t(0,0)` with `A = 0`.
    pub origin_reference: KernelEstimate,
    /// `e^{−|x−y|²/(2t)} · k̄_t(0,0)|_{A=0}`.
    pub origin_bound: f64,
    pub origin_bound_stderr: f64,
    pub origin_bound_pass: bool,
}

/// Check `|k̄_t(x,y)| ≤ L_t k⁰_t(x,y)` and
/// `|k̄_t(x,y)| ≤ e^{−|x−y|²/(2t)} k̄_t(0,0)|_{A=0}`, each allowing three
/// combined standard errors. Both estimates use the same path seeds.
pub fn averaged_bound_checks(
    x: &[f64],
    y: &[f64],
    t: f64,
    spec: &GaussianFieldSpec,
    a: &VectorPotentialSpec,
    params: &McParams,
) -> Result<AveragedBoundReport> {
    let estimate = averaged_kernel(x, y, t, a, spec, params)?;
    let origin = vec![0.0; x.len()];
    let origin_reference = averaged_kernel(&origin, &origin, t, &VectorPotentialSpec::Zero, spec, params)?;
    let l_t = spec.l_t(t)?;
    let lhs = estimate.mean.norm();

    let free_bound = l_t * free_kernel(x, y, t);
    let free_bound_pass = lhs <= free_bound + 3.0 * estimate.stderr + ROUNDING_SLACK * free_bound;

    let decay = (-dist_sq(x, y) / (2.0 * t)).exp();
    let origin_bound = decay * origin_reference.mean.re;
    let origin_bound_stderr = estimate.stderr.hypot(decay * origin_reference.stderr);
    let origin_bound_pass = lhs <= origin_bound + 3.0 * origin_bound_stderr + ROUNDING_SLACK * origin_bound;

    Ok(AveragedBoundReport {
        estimate,
        l_t,
        free_bound,
        free_bound_pass,
        origin_reference,
        origin_bound,
        origin_bound_stderr,
        origin_bound_pass,
    })
}
