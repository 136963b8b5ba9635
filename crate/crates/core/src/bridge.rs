//! Discretised Brownian bridges pinned at `(x, 0)` and `(y, t)`.
//!
//! Paths are built from a standard Brownian path `W` with i.i.d. Gaussian
//! increments by removing its linear drift,
//!
//! ```text
//! b(s_k) = x + (y - x) s_k / t + W(s_k) - (s_k / t) W(t),
//! ```
//!
//! which reproduces the exact pinned-Gaussian law at the grid nodes: mean
//! `x + (y - x) s / t` and covariance `min(s, s') - s s' / t` per component,
//! components independent.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::BoxRegion;
use crate::rng::PathSeed;

/// Uniform grid `s_k = k t / n_steps`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t: f64, n_steps: usize) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        if n_steps == 0 {
            return Err(Error::ZeroSteps);
        }
        Ok(Self { t, n_steps })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        self.t / self.n_steps as f64
    }

    /// Node `k`; the last node is `t` exactly.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t
        } else {
            k as f64 * self.t / self.n_steps as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|k| self.node(k))
    }

    /// Trapezoid weight of node `k`.
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        let h = self.step();
        if k == 0 || k == self.n_steps {
            0.5 * h
        } else {
            h
        }
    }
}

/// A sampled bridge: one `d`-dimensional point per grid node, stored
/// node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath {
    dim: usize,
    grid: TimeGrid,
    positions: Vec<f64>,
}

impl BridgePath {
    /// Wrap explicit node positions. The first and last node must be the
    /// intended endpoints.
    pub fn from_positions(grid: TimeGrid, dim: usize, positions: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(crate::error::invalid("dimension must be at least 1"));
        }
        let expected = grid.n_nodes() * dim;
        if positions.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: positions.len() });
        }
        Ok(Self { dim, grid, positions })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.positions[k * self.dim..(k + 1) * self.dim]
    }

    pub fn start(&self) -> &[f64] {
        self.node(0)
    }

    pub fn end(&self) -> &[f64] {
        self.node(self.grid.n_steps())
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn nodes(&self) -> std::slice::ChunksExact<'_, f64> {
        self.positions.chunks_exact(self.dim)
    }

    /// The time-reversed path `s ↦ b(t - s)`, a bridge from `end` to `start`.
    pub fn reversed(&self) -> BridgePath {
        let positions = self.nodes().rev().flatten().copied().collect();
        BridgePath { dim: self.dim, grid: self.grid, positions }
    }

    /// Largest `|b(s_k)|` over the nodes.
    pub fn max_radius(&self) -> f64 {
        self.nodes().map(norm).fold(0.0, f64::max)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_endpoints(start: &[f64], end: &[f64]) -> Result<()> {
    if start.is_empty() {
        return Err(crate::error::invalid("points must have dimension at least 1"));
    }
    if start.len() != end.len() {
        return Err(Error::DimensionMismatch { expected: start.len(), found: end.len() });
    }
    Ok(())
}

/// Sample the bridge from `start` to `end` on `grid` using path stream `seed`.
pub fn sample_bridge(seed: PathSeed, start: &[f64], end: &[f64], grid: &TimeGrid) -> Result<BridgePath> {
    sample_bridge_with(&mut seed.rng(), start, end, grid)
}

/// As [`sample_bridge`], drawing from an arbitrary generator.
pub fn sample_bridge_with<R: Rng + ?Sized>(
    rng: &mut R,
    start: &[f64],
    end: &[f64],
    grid: &TimeGrid,
) -> Result<BridgePath> {
    check_endpoints(start, end)?;
    let dim = start.len();
    let n = grid.n_steps();
    let t = grid.t();
    let sqrt_h = grid.step().sqrt();

    // Standard Brownian path, node-major like the output.
    let mut w = vec![0.0; (n + 1) * dim];
    for k in 1..=n {
        for j in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            w[k * dim + j] = w[(k - 1) * dim + j] + sqrt_h * z;
        }
    }

    let mut positions = vec![0.0; (n + 1) * dim];
    positions[..dim].copy_from_slice(start);
    for k in 1..n {
        let frac = grid.node(k) / t;
        for j in 0..dim {
            let w_t = w[n * dim + j];
            positions[k * dim + j] =
                start[j] + (end[j] - start[j]) * frac + (w[k * dim + j] - frac * w_t);
        }
    }
    positions[n * dim..].copy_from_slice(end);

    Ok(BridgePath { dim, grid: *grid, positions })
}

/// Trapezoid approximation of `∫_0^t 1_Λ(b(s)) ds`; an empty box gives 0.
pub fn sojourn_time(path: &BridgePath, region: &BoxRegion) -> Result<f64> {
    if region.dim() != path.dim() {
        return Err(Error::DimensionMismatch { expected: path.dim(), found: region.dim() });
    }
    if region.is_empty() {
        return Ok(0.0);
    }
    let grid = path.grid();
    let total: f64 = path
        .nodes()
        .enumerate()
        .filter(|(_, x)| region.contains(x))
        .map(|(k, _)| grid.trapezoid_weight(k))
        .sum();
    Ok(total.clamp(0.0, grid.t()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Welford;

    fn node_moments(start: &[f64], end: &[f64], t: f64, n_steps: usize, k: usize, n: u64) -> (Welford, Welford) {
        let grid = TimeGrid::new(t, n_steps).unwrap();
        let mut first = Welford::new();
        let mut second = Welford::new();
        for i in 0..n {
            let p = sample_bridge(PathSeed::new(11, i), start, end, &grid).unwrap();
            first.push(p.node(k)[0]);
            second.push(p.node(k)[0].powi(2));
        }
        (first, second)
    }

    #[test]
    fn grid_validation() {
        assert_eq!(TimeGrid::new(0.0, 4), Err(Error::NonPositiveTime(0.0)));
        assert_eq!(TimeGrid::new(-1.0, 4), Err(Error::NonPositiveTime(-1.0)));
        assert_eq!(TimeGrid::new(1.0, 0), Err(Error::ZeroSteps));
        let g = TimeGrid::new(3.0, 7).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes[0], 0.0);
        assert_eq!(*nodes.last().unwrap(), 3.0);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let err = sample_bridge(PathSeed::new(0, 0), &[0.0], &[0.0, 1.0], &g).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 1, found: 2 });
    }

    #[test]
    fn single_step_is_just_the_endpoints() {
        let g = TimeGrid::new(2.0, 1).unwrap();
        let p = sample_bridge(PathSeed::new(5, 9), &[0.3, -1.0], &[2.0, 4.5], &g).unwrap();
        assert_eq!(p.positions(), &[0.3, -1.0, 2.0, 4.5]);
    }

    #[test]
    fn endpoints_are_pinned_bit_exactly() {
        let g = TimeGrid::new(0.7, 33).unwrap();
        let start = [0.1, 1.0 / 3.0, -2.7];
        let end = [1e-7, 5.0 / 7.0, 9.1];
        for i in 0..50 {
            let p = sample_bridge(PathSeed::new(1, i), &start, &end, &g).unwrap();
            assert_eq!(p.start(), &start);
            assert_eq!(p.end(), &end);
        }
    }

    #[test]
    fn same_seed_same_path() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let a = sample_bridge(PathSeed::new(3, 17), &[0.0, 0.0], &[1.0, 1.0], &g).unwrap();
        let b = sample_bridge(PathSeed::new(3, 17), &[0.0, 0.0], &[1.0, 1.0], &g).unwrap();
        let c = sample_bridge(PathSeed::new(3, 18), &[0.0, 0.0], &[1.0, 1.0], &g).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn midpoint_mean_matches_linear_interpolation() {
        // x=0, y=2, t=4: E[b(2)] = 1.
        let (m, _) = node_moments(&[0.0], &[2.0], 4.0, 8, 4, 100_000);
        assert!((m.mean() - 1.0).abs() < 3.0 * m.stderr(), "mean {} ± {}", m.mean(), m.stderr());
    }

    #[test]
    fn midpoint_variance_is_one_quarter() {
        // x=y=0, t=1: Var b(1/2) = 1/2 - 1/4.
        let (_, sq) = node_moments(&[0.0], &[0.0], 1.0, 2, 1, 100_000);
        assert!((sq.mean() - 0.25).abs() < 3.0 * sq.stderr(), "var {} ± {}", sq.mean(), sq.stderr());
    }

    #[test]
    fn node_moments_follow_bridge_law() {
        // Every node of a 5-step bridge, mean and second moment within 4 stderr.
        let (x, y, t) = (-1.0, 3.0, 2.0);
        let grid = TimeGrid::new(t, 5).unwrap();
        let n = 40_000u64;
        let mut first = [Welford::new(); 6];
        let mut second = [Welford::new(); 6];
        for i in 0..n {
            let p = sample_bridge(PathSeed::new(21, i), &[x], &[y], &grid).unwrap();
            for k in 0..6 {
                let v = p.node(k)[0];
                first[k].push(v);
                second[k].push(v * v);
            }
        }
        for k in 1..5 {
            let s = grid.node(k);
            let mean = x + (y - x) * s / t;
            let var = s - s * s / t;
            assert!((first[k].mean() - mean).abs() < 4.0 * first[k].stderr());
            assert!((second[k].mean() - (var + mean * mean)).abs() < 4.0 * second[k].stderr());
        }
    }

    #[test]
    fn reversal_matches_swapped_bridge_law() {
        let grid = TimeGrid::new(1.5, 6).unwrap();
        let (x, y) = (0.5, -2.0);
        let n = 40_000u64;
        let mut rev = [Welford::new(); 7];
        let mut fwd = [Welford::new(); 7];
        for i in 0..n {
            let a = sample_bridge(PathSeed::new(8, i), &[x], &[y], &grid).unwrap().reversed();
            let b = sample_bridge(PathSeed::new(9, i), &[y], &[x], &grid).unwrap();
            for k in 0..7 {
                rev[k].push(a.node(k)[0]);
                fwd[k].push(b.node(k)[0]);
            }
        }
        for k in 0..7 {
            let se = rev[k].stderr().hypot(fwd[k].stderr());
            assert!((rev[k].mean() - fwd[k].mean()).abs() <= 4.0 * se + 1e-15);
            let sv = (rev[k].variance() - fwd[k].variance()).abs();
            assert!(sv <= 0.04 * fwd[k].variance().max(1e-12) + 1e-15, "node {k}: {sv}");
        }
    }

    #[test]
    fn sojourn_trivial_regions() {
        let g = TimeGrid::new(2.5, 40).unwrap();
        let p = sample_bridge(PathSeed::new(2, 0), &[0.0, 0.0], &[1.0, 0.0], &g).unwrap();
        assert_eq!(sojourn_time(&p, &BoxRegion::whole_space(2)).unwrap(), 2.5);
        let far = BoxRegion::new(vec![100.0, 100.0], vec![101.0, 101.0]).unwrap();
        assert_eq!(sojourn_time(&p, &far).unwrap(), 0.0);
        let empty = BoxRegion::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(sojourn_time(&p, &empty).unwrap(), 0.0);
    }

    #[test]
    fn half_line_sojourn_has_mean_one_half() {
        // Interior nodes sit in [0, ∞) with probability 1/2 by symmetry; the
        // two pinned endpoints at 0 always count, adding h/2 in total.
        let n_steps = 1024;
        let g = TimeGrid::new(1.0, n_steps).unwrap();
        let region = BoxRegion::new(vec![0.0], vec![f64::INFINITY]).unwrap();
        let w: Welford = (0..100_000)
            .map(|i| {
                let p = sample_bridge(PathSeed::new(4, i), &[0.0], &[0.0], &g).unwrap();
                sojourn_time(&p, &region).unwrap()
            })
            .collect();
        let expected = 0.5 + 0.5 / n_steps as f64;
        assert!((w.mean() - expected).abs() < 3.0 * w.stderr(), "{} ± {}", w.mean(), w.stderr());
        assert!((w.mean() - 0.5).abs() < 3.0 * w.stderr() + 1e-3);
    }
}
