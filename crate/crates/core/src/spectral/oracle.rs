//! Lattice heat kernel at a single pair of points, evaluated by a Chebyshev
//! expansion of `e^{−tH}` applied to a site delta, with discretization
//! budgets measured by enlarging the box and refining the spacing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::GridHamiltonian;
use super::lattice::Lattice;
use crate::error::{invalid, Error, Result};
use crate::potentials::{ScalarPotentialSpec, VectorPotentialSpec};

/// `k_t(x, y) = ⟨δ_x, e^{−tH} δ_y⟩ / h^d` with unit `ℓ²` deltas.
///
/// The spectrum is enclosed by the Gershgorin interval
/// `[min V, max V + 2d/h²]`; coefficients come from Chebyshev-Gauss
/// interpolation of `e^{−tE}` on that interval and the series is cut once
/// the coefficients drop below `1e−17` of the leading one.
pub fn chebyshev_heat_kernel(ham: &GridHamiltonian, t: f64, x: usize, y: usize) -> Result<Complex64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTime(t));
    }
    let l = ham.lattice();
    l.check_site(x)?;
    l.check_site(y)?;
    let h = l.spacing();
    let vmin = ham.potential().iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = ham.potential().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = vmin;
    let hi = vmax + 2.0 * l.dim as f64 / (h * h);
    let center = 0.5 * (hi + lo);
    let radius = (0.5 * (hi - lo)).max(1e-12);

    let z = t * radius;
    let n_terms = (10.0 * z.sqrt() + 1.2 * z.min(50.0) + 40.0).ceil() as usize;
    let coeffs = chebyshev_coefficients(|u| (-t * (center + radius * u)).exp(), n_terms);
    let cut = coeffs[0].abs() * 1e-17;
    let used = coeffs.iter().rposition(|c| c.abs() > cut).map_or(1, |k| k + 1);

    let n = ham.n_sites();
    let scaled = |v: &[Complex64]| -> Vec<Complex64> {
        let hv = ham.apply(v);
        hv.iter().zip(v).map(|(a, b)| (a - b * center) / radius).collect()
    };
    let mut prev = vec![Complex64::new(0.0, 0.0); n];
    prev[y] = Complex64::new(1.0, 0.0);
    let mut value = prev[x] * coeffs[0];
    if used > 1 {
        let mut cur = scaled(&prev);
        value += cur[x] * coeffs[1];
        for c in &coeffs[2..used] {
            let s = scaled(&cur);
            let next: Vec<Complex64> = s.iter().zip(&prev).map(|(a, b)| a * 2.0 - b).collect();
            value += next[x] * c;
            prev = cur;
            cur = next;
        }
    }
    Ok(value / l.cell_volume())
}

/// Coefficients `c_k` with `f(u) ≈ Σ_k c_k T_k(u)` on `[−1, 1]`.
fn chebyshev_coefficients<F: Fn(f64) -> f64>(f: F, n: usize) -> Vec<f64> {
    let m = 2 * n;
    let theta: Vec<f64> = (0..m).map(|j| std::f64::consts::PI * (j as f64 + 0.5) / m as f64).collect();
    let fv: Vec<f64> = theta.iter().map(|th| f(th.cos())).collect();
    (0..n)
        .map(|k| {
            let s: f64 = theta.iter().zip(&fv).map(|(th, v)| v * (k as f64 * th).cos()).sum();
            let c = 2.0 * s / m as f64;
            if k == 0 {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

/// Lattice problem for the continuum oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleProblem {
    pub lattice: Lattice,
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Also evaluate on `2n + 1` sites per axis at the same spacing.
    pub box_doubling: bool,
    /// Also evaluate on `2n + 1` sites per axis at spacing `h/2`, a box
    /// larger by `h/2`, so every original site stays a site.
    pub spacing_halving: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: Complex64,
    /// `|k(2n+1 sites, same h) − k|`.
    pub boundary_budget: Option<f64>,
    /// `|k(2n+1 sites, h/2) − k|`.
    pub spacing_budget: Option<f64>,
    pub n_per_dim: usize,
    pub spacing: f64,
}

impl OracleValue {
    /// Sum of the measured budgets.
    pub fn budget(&self) -> f64 {
        self.boundary_budget.unwrap_or(0.0) + self.spacing_budget.unwrap_or(0.0)
    }
}

fn value_on(lattice: Lattice, a: &VectorPotentialSpec, v: &ScalarPotentialSpec, p: &OracleProblem) -> Result<Complex64> {
    let ham = GridHamiltonian::build(lattice, a, v)?;
    let xs = lattice.site_at(&p.x)?;
    let ys = lattice.site_at(&p.y)?;
    chebyshev_heat_kernel(&ham, p.t, xs, ys)
}

/// Continuum heat kernel approximated on a lattice, with optional
/// discretization budgets. `x` and `y` must be sites of every lattice used.
pub fn grid_oracle(a: &VectorPotentialSpec, v: &ScalarPotentialSpec, p: &OracleProblem) -> Result<OracleValue> {
    if p.x.len() != p.lattice.dim || p.y.len() != p.lattice.dim {
        return Err(invalid("oracle points must match the lattice dimension"));
    }
    let value = value_on(p.lattice, a, v, p)?;
    let n2 = 2 * p.lattice.n_per_dim + 1;
    let boundary_budget = if p.box_doubling {
        let big = Lattice::with_spacing(p.lattice.dim, n2, p.lattice.spacing())?;
        Some((value_on(big, a, v, p)? - value).norm())
    } else {
        None
    };
    let spacing_budget = if p.spacing_halving {
        let fine = Lattice::with_spacing(p.lattice.dim, n2, 0.5 * p.lattice.spacing())?;
        Some((value_on(fine, a, v, p)? - value).norm())
    } else {
        None
    };
    Ok(OracleValue { value, boundary_budget, spacing_budget, n_per_dim: p.lattice.n_per_dim, spacing: p.lattice.spacing() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{landau_diagonal, mehler_kernel};
    use crate::spectral::{heat_kernel, SpectralDecomposition};

    #[test]
    fn chebyshev_matches_eigensum() {
        let l = Lattice::new(2, 7, 4.0).unwrap();
        let ham = GridHamiltonian::build(l, &VectorPotentialSpec::uniform_field_2d(0.9), &ScalarPotentialSpec::harmonic(2, 0.7)).unwrap();
        let dec = SpectralDecomposition::new(ham.clone()).unwrap();
        for (t, x, y) in [(0.3, 24, 24), (1.0, 10, 30), (4.0, 0, 48)] {
            let a = chebyshev_heat_kernel(&ham, t, x, y).unwrap();
            let b = heat_kernel(&dec, t, x, y).unwrap();
            assert!((a - b).norm() < 1e-11 * (1.0 + b.norm()), "{a} vs {b}");
        }
    }

    #[test]
    fn harmonic_continuum_limit() {
        let p = OracleProblem {
            lattice: Lattice::new(1, 241, 12.0).unwrap(),
            t: 1.0,
            x: vec![0.0],
            y: vec![0.0],
            box_doubling: true,
            spacing_halving: true,
        };
        let r = grid_oracle(&VectorPotentialSpec::Zero, &ScalarPotentialSpec::harmonic(1, 1.0), &p).unwrap();
        let m = mehler_kernel(&[0.0], &[0.0], 1.0, 1.0);
        assert!((r.value.re - m).abs() < 0.01 * m);
        assert!(r.boundary_budget.unwrap() < 1e-10);
        assert!((r.value.re - m).abs() <= 3.0 * r.budget(), "{} vs {m}, budget {}", r.value.re, r.budget());
    }

    #[test]
    fn landau_continuum_limit() {
        let p = OracleProblem {
            lattice: Lattice::new(2, 41, 10.0).unwrap(),
            t: 1.0,
            x: vec![0.0, 0.0],
            y: vec![0.0, 0.0],
            box_doubling: false,
            spacing_halving: true,
        };
        let r = grid_oracle(&VectorPotentialSpec::uniform_field_2d(1.0), &ScalarPotentialSpec::Zero, &p).unwrap();
        let exact = landau_diagonal(1.0, 1.0);
        assert!(r.value.im.abs() < 1e-12);
        assert!((r.value.re - exact).abs() < 0.02 * exact, "{} vs {exact}", r.value.re);
        assert!((r.value.re - exact).abs() <= 3.0 * r.budget());
    }

    #[test]
    fn oracle_rejects_off_lattice_points() {
        let p = OracleProblem {
            lattice: Lattice::new(1, 10, 10.0).unwrap(),
            t: 1.0,
            x: vec![0.0],
            y: vec![0.0],
            box_doubling: false,
            spacing_halving: false,
        };
        assert!(grid_oracle(&VectorPotentialSpec::Zero, &ScalarPotentialSpec::Zero, &p).is_err());
    }
}
