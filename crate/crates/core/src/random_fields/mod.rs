//! Homogeneous zero-mean Gaussian random potentials.
//!
//! A field is specified by its covariance `C(x) = E[V(x)V(0)]`. Values are
//! drawn exactly at a finite set of points by factorizing the covariance
//! matrix `M_ij = C(p_i − p_j)`; the disorder-averaged kernel uses the closed
//! form `E[e^{−∫V(b)}] = exp{½ ∬ C(b(s) − b(s')) ds ds'}` instead of sampling.

mod averaged;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{dist_sq, BridgePath};
use crate::error::{invalid, Error, Result};
use crate::kernel::OVERFLOW_THRESHOLD;
use crate::rng::{domain, stream};
use crate::stats::Welford;

pub use averaged::{
    averaged_bound_checks, averaged_hermiticity_residual, averaged_kernel, two_stage_kernel, AveragedBoundReport,
    FieldGrid, TwoStageEstimate,
};

/// Largest number of distinct points one factorization may cover.
pub const MAX_FIELD_POINTS: usize = 4096;

/// Diagonal jitter ladder, in units of `C(0)`.
const JITTER_LADDER: [f64; 4] = [0.0, 1e-14, 1e-12, 1e-10];

/// Radial covariance of a homogeneous Gaussian field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaussianFieldSpec {
    /// `C(r) = variance · exp(−|r|² / (2 length²))`. `variance = 0` is the
    /// deterministic zero field.
    SquaredExponential { variance: f64, length: f64 },
    /// `C` linearly interpolated in `|r|` from a table starting at `r = 0`,
    /// and zero beyond the last radius.
    TabulatedRadial { radii: Vec<f64>, values: Vec<f64> },
}

impl GaussianFieldSpec {
    pub fn squared_exponential(variance: f64, length: f64) -> Self {
        Self::SquaredExponential { variance, length }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::SquaredExponential { variance, length } => {
                if !(*variance >= 0.0 && variance.is_finite()) {
                    return Err(invalid("field variance must be finite and non-negative"));
                }
                if length.is_nan() || *length <= 0.0 {
                    return Err(invalid("correlation length must be positive"));
                }
            }
            Self::TabulatedRadial { radii, values } => {
                if radii.is_empty() || radii.len() != values.len() {
                    return Err(invalid("tabulated covariance needs equally long, non-empty radii and values"));
                }
                if radii[0] != 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("tabulated radii must start at 0 and increase strictly"));
                }
                if values.iter().chain(radii).any(|v| !v.is_finite()) || values[0] < 0.0 {
                    return Err(invalid("tabulated covariance must be finite with C(0) ≥ 0"));
                }
                if values.iter().any(|v| v.abs() > values[0]) {
                    return Err(invalid("tabulated covariance must satisfy |C(r)| ≤ C(0)"));
                }
            }
        }
        Ok(())
    }

    /// `C(0)`.
    pub fn variance(&self) -> f64 {
        match self {
            Self::SquaredExponential { variance, .. } => *variance,
            Self::TabulatedRadial { values, .. } => values[0],
        }
    }

    /// `C` as a function of the squared distance.
    pub fn covariance_sq(&self, r2: f64) -> f64 {
        match self {
            Self::SquaredExponential { variance, length } => variance * (-r2 / (2.0 * length * length)).exp(),
            Self::TabulatedRadial { radii, values } => {
                let r = r2.sqrt();
                let last = radii.len() - 1;
                if r > radii[last] {
                    return 0.0;
                }
                if r == radii[last] {
                    return values[last];
                }
                let i = radii.partition_point(|&ri| ri <= r) - 1;
                let u = (r - radii[i]) / (radii[i + 1] - radii[i]);
                values[i] + u * (values[i + 1] - values[i])
            }
        }
    }

    /// `C(p − q)`.
    pub fn covariance(&self, p: &[f64], q: &[f64]) -> f64 {
        self.covariance_sq(dist_sq(p, q))
    }

    /// `L_t = sup_x E[e^{−tV(x)}] = e^{t² C(0) / 2}`.
    pub fn l_t(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::NonPositiveTime(t));
        }
        Ok((0.5 * t * t * self.variance()).exp())
    }
}

/// Exact sampler for the field restricted to a fixed point set. The
/// covariance is factorized once; each draw then costs one triangular
/// matrix-vector product.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    /// For every input point, the index of its distinct representative.
    representative: Vec<usize>,
    n_unique: usize,
    /// Row-major lower-triangular Cholesky factor of the distinct points.
    factor: Vec<f64>,
    jitter: f64,
}

impl FieldSampler {
    pub fn new(points: &[Vec<f64>], spec: &GaussianFieldSpec) -> Result<Self> {
        spec.validate()?;
        if points.is_empty() {
            return Err(invalid("at least one point is required"));
        }
        let d = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: p.len() });
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("field points must be finite"));
        }

        // Coincident points would make the matrix exactly singular; they
        // share one value instead.
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&i, &j| {
            points[i].iter().zip(&points[j]).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut representative = vec![0usize; points.len()];
        let mut unique: Vec<&[f64]> = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            if pos == 0 || points[i] != points[order[pos - 1]] {
                unique.push(&points[i]);
            }
            representative[i] = unique.len() - 1;
        }
        let n = unique.len();
        if n > MAX_FIELD_POINTS {
            return Err(invalid(format!("{n} distinct field points exceed the limit of {MAX_FIELD_POINTS}")));
        }

        let c0 = spec.variance();
        if c0 == 0.0 {
            return Ok(Self { representative, n_unique: n, factor: vec![0.0; n * n], jitter: 0.0 });
        }
        let base = DMatrix::from_fn(n, n, |i, j| spec.covariance(unique[i], unique[j]));
        for rel in JITTER_LADDER {
            let jitter = rel * c0;
            let mut m = base.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = m.cholesky() {
                let l = ch.l();
                let mut factor = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..=i {
                        factor[i * n + j] = l[(i, j)];
                    }
                }
                return Ok(Self { representative, n_unique: n, factor, jitter });
            }
        }
        Err(Error::Factorization { jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * c0 })
    }

    pub fn n_points(&self) -> usize {
        self.representative.len()
    }

    pub fn n_unique(&self) -> usize {
        self.n_unique
    }

    /// Diagonal regularization that was needed, in absolute units.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// One realization at the input points.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.n_unique;
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let u: Vec<f64> = (0..n)
            .map(|i| self.factor[i * n..i * n + i + 1].iter().zip(&z).map(|(l, z)| l * z).sum())
            .collect();
        self.representative.iter().map(|&r| u[r]).collect()
    }

    /// Realization number `index` of stream `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> Vec<f64> {
        self.sample_with(&mut stream(seed, domain::FIELD, index))
    }
}

/// Exact joint sample of the field at `points`.
pub fn sample_on_points(points: &[Vec<f64>], spec: &GaussianFieldSpec, seed: u64) -> Result<Vec<f64>> {
    Ok(FieldSampler::new(points, spec)?.sample(seed, 0))
}

/// `∬_{[0,t]²} C(b(s) − b(s')) ds ds'` by the product trapezoid rule on the
/// path grid, summed as diagonal plus twice the strict upper triangle so the
/// result is exactly symmetric in `s ↔ s'`.
pub fn double_trapezoid_covariance(path: &BridgePath, spec: &GaussianFieldSpec) -> f64 {
    let grid = path.grid();
    let n = path.n_nodes();
    let w: Vec<f64> = (0..n).map(|k| grid.trapezoid_weight(k)).collect();
    let mut diag = 0.0;
    let mut upper = 0.0;
    for k in 0..n {
        let bk = path.node(k);
        diag += w[k] * w[k] * spec.covariance_sq(0.0);
        let row: f64 = (k + 1..n).map(|l| w[l] * spec.covariance_sq(dist_sq(bk, path.node(l)))).sum();
        upper += w[k] * row;
    }
    diag + 2.0 * upper
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianIdentityReport {
    /// Field average of `exp{∫ V(b(s)) ds}`.
    pub mc_value: f64,
    pub mc_stderr: f64,
    /// `exp{½ ∬ C(b(s) − b(s')) ds ds'}`.
    pub closed_form: f64,
    /// `|mc − closed| / closed`.
    pub residual: f64,
    /// `mc_stderr / closed`, on the scale of `residual`.
    pub relative_stderr: f64,
    pub n_field_samples: usize,
}

/// Monte Carlo check of `E[exp{∫V(b)}] = exp{½∬C(b − b')}` on one fixed
/// path, with the field sampled exactly at the path nodes.
pub fn gaussian_identity_residual(
    path: &BridgePath,
    spec: &GaussianFieldSpec,
    n_field_samples: usize,
    seed: u64,
) -> Result<GaussianIdentityReport> {
    if n_field_samples < 2 {
        return Err(invalid("n_field_samples must be at least 2"));
    }
    let points: Vec<Vec<f64>> = path.nodes().map(<[f64]>::to_vec).collect();
    let sampler = FieldSampler::new(&points, spec)?;
    let grid = path.grid();
    let w: Vec<f64> = (0..path.n_nodes()).map(|k| grid.trapezoid_weight(k)).collect();
    let values = (0..n_field_samples as u64)
        .into_par_iter()
        .map(|i| {
            let v = sampler.sample(seed, i);
            let s: f64 = v.iter().zip(&w).map(|(v, w)| v * w).sum();
            let e = s.exp();
            if !e.is_finite() || e > OVERFLOW_THRESHOLD {
                return Err(Error::Overflow { seed, path: i, value: e });
            }
            Ok(e)
        })
        .collect::<Result<Vec<f64>>>()?;
    let acc: Welford = values.into_iter().collect();
    let closed_form = (0.5 * double_trapezoid_covariance(path, spec)).exp();
    Ok(GaussianIdentityReport {
        mc_value: acc.mean(),
        mc_stderr: acc.stderr(),
        closed_form,
        residual: (acc.mean() - closed_form).abs() / closed_form,
        relative_stderr: acc.stderr() / closed_form,
        n_field_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::{sample_bridge, TimeGrid};
    use crate::rng::PathSeed;

    fn se() -> GaussianFieldSpec {
        GaussianFieldSpec::squared_exponential(0.8, 0.6)
    }

    #[test]
    fn covariance_values() {
        let s = se();
        assert_eq!(s.covariance(&[0.0], &[0.0]), 0.8);
        assert!((s.covariance(&[0.3, 0.0], &[0.0, 0.4]) - 0.8 * (-0.25f64 / 0.72).exp()).abs() < 1e-15);
        assert_eq!(s.covariance(&[1.0], &[2.0]), s.covariance(&[2.0], &[1.0]));
        let tab = GaussianFieldSpec::TabulatedRadial { radii: vec![0.0, 1.0, 2.0], values: vec![1.0, 0.5, 0.0] };
        tab.validate().unwrap();
        assert_eq!(tab.covariance_sq(0.25), 0.75);
        assert_eq!(tab.covariance_sq(9.0), 0.0);
        assert_eq!(tab.covariance_sq(4.0), 0.0);
    }

    #[test]
    fn validation() {
        assert!(GaussianFieldSpec::squared_exponential(-1.0, 1.0).validate().is_err());
        assert!(GaussianFieldSpec::squared_exponential(1.0, 0.0).validate().is_err());
        assert!(GaussianFieldSpec::TabulatedRadial { radii: vec![0.5], values: vec![1.0] }.validate().is_err());
        assert!(GaussianFieldSpec::TabulatedRadial { radii: vec![0.0, 1.0], values: vec![1.0, 2.0] }.validate().is_err());
    }

    #[test]
    fn l_t_values() {
        let s = GaussianFieldSpec::squared_exponential(1.0, 1.0);
        assert!((s.l_t(1.0).unwrap() - 1.648_721_270_700_128).abs() < 1e-14);
        assert!((s.l_t(1e-8).unwrap() - 1.0).abs() < 1e-15);
        assert!(s.l_t(0.5).unwrap() < s.l_t(1.0).unwrap());
        assert!(s.l_t(0.0).is_err());
    }

    #[test]
    fn single_point_variance() {
        let s = se();
        let sampler = FieldSampler::new(&[vec![0.3, 0.1]], &s).unwrap();
        let w: Welford = (0..100_000).map(|i| sampler.sample(1, i)[0].powi(2)).collect();
        assert!((w.mean() - 0.8).abs() < 3.0 * w.stderr(), "{} ± {}", w.mean(), w.stderr());
    }

    #[test]
    fn coincident_points_share_a_value() {
        let pts = vec![vec![0.5], vec![1.0], vec![0.5]];
        let sampler = FieldSampler::new(&pts, &se()).unwrap();
        assert_eq!(sampler.n_unique(), 2);
        for i in 0..10 {
            let v = sampler.sample(2, i);
            assert_eq!(v[0], v[2]);
            assert_ne!(v[0], v[1]);
        }
    }

    #[test]
    fn pair_covariance() {
        let s = se();
        let r = 0.5;
        let sampler = FieldSampler::new(&[vec![0.0], vec![r]], &s).unwrap();
        let w: Welford = (0..100_000)
            .map(|i| {
                let v = sampler.sample(3, i);
                v[0] * v[1]
            })
            .collect();
        let expected = s.covariance(&[0.0], &[r]);
        assert!((w.mean() - expected).abs() < 3.0 * w.stderr(), "{} ± {} vs {expected}", w.mean(), w.stderr());
    }

    #[test]
    fn sampling_is_deterministic() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1]).collect();
        assert_eq!(sample_on_points(&pts, &se(), 5).unwrap(), sample_on_points(&pts, &se(), 5).unwrap());
        assert_ne!(sample_on_points(&pts, &se(), 5).unwrap(), sample_on_points(&pts, &se(), 6).unwrap());
    }

    #[test]
    fn dense_smooth_points_need_jitter_but_factor() {
        let pts: Vec<Vec<f64>> = (0..400).map(|i| vec![i as f64 * 0.01]).collect();
        let sampler = FieldSampler::new(&pts, &GaussianFieldSpec::squared_exponential(1.0, 1.0)).unwrap();
        assert!(sampler.jitter() > 0.0 && sampler.jitter() <= 1e-10);
    }

    #[test]
    fn invalid_covariance_fails_to_factor() {
        // vᵀMv = 3 − 5.4 < 0 for v = (1, −1, 1) on three unit-spaced points.
        let bad = GaussianFieldSpec::TabulatedRadial { radii: vec![0.0, 1.0, 2.0], values: vec![1.0, 0.9, -0.9] };
        let pts: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64]).collect();
        assert!(matches!(FieldSampler::new(&pts, &bad), Err(Error::Factorization { .. })));
    }

    #[test]
    fn zero_variance_field_is_zero() {
        let s = GaussianFieldSpec::squared_exponential(0.0, 1.0);
        let v = sample_on_points(&[vec![0.0], vec![1.0]], &s, 1).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
        let p = sample_bridge(PathSeed::new(1, 0), &[0.0], &[1.0], &TimeGrid::new(1.0, 16).unwrap()).unwrap();
        let r = gaussian_identity_residual(&p, &s, 100, 1).unwrap();
        assert_eq!(r.mc_value, 1.0);
        assert_eq!(r.closed_form, 1.0);
    }

    #[test]
    fn double_integral_is_symmetric_and_saturates() {
        let p = sample_bridge(PathSeed::new(4, 0), &[0.0, 0.0], &[1.0, -1.0], &TimeGrid::new(1.5, 40).unwrap()).unwrap();
        let s = se();
        let q = double_trapezoid_covariance(&p, &s);
        let q_rev = double_trapezoid_covariance(&p.reversed(), &s);
        assert!((q - q_rev).abs() <= 1e-14 * q);
        // The full product-trapezoid matrix summed in the other order.
        let n = p.n_nodes();
        let g = p.grid();
        let mut full = 0.0;
        for l in (0..n).rev() {
            for k in (0..n).rev() {
                full += g.trapezoid_weight(k) * g.trapezoid_weight(l) * s.covariance(p.node(k), p.node(l));
            }
        }
        assert!((q - full).abs() <= 1e-13 * q);
        let flat = GaussianFieldSpec::squared_exponential(0.8, 1e12);
        assert!((double_trapezoid_covariance(&p, &flat) - 0.8 * 1.5 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn identity_on_a_point_path() {
        let t = 0.3;
        let p = sample_bridge(PathSeed::new(5, 0), &[0.2], &[0.2], &TimeGrid::new(t, 1).unwrap()).unwrap();
        let s = GaussianFieldSpec::squared_exponential(1.0, 1.0);
        let r = gaussian_identity_residual(&p, &s, 100_000, 6).unwrap();
        assert!((r.closed_form - (t * t / 2.0f64).exp()).abs() < 1e-15);
        assert!(r.residual <= 3.0 * r.relative_stderr, "{r:?}");
    }

    #[test]
    fn identity_on_a_bridge_path() {
        let p = sample_bridge(PathSeed::new(7, 3), &[0.0, 0.0], &[0.5, 0.5], &TimeGrid::new(1.0, 64).unwrap()).unwrap();
        let r = gaussian_identity_residual(&p, &se(), 100_000, 8).unwrap();
        assert!(r.residual <= 3.0 * r.relative_stderr, "{r:?}");
        assert!(r.closed_form > 1.0);
    }
}
