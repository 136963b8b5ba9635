use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lattice::Lattice;
use crate::error::{invalid, Error, Result};
use crate::potentials::{ScalarPotentialSpec, VectorPotentialSpec};

/// Nearest-neighbour link from `from` to `to = from + e_axis`. The hopping
/// matrix element is `H[from][to] = −phase / (2h²)` and
/// `H[to][from] = −conj(phase) / (2h²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub axis: usize,
    pub phase: Complex64,
}

/// Dirichlet lattice discretization of `½ Σ_j (i∂_j + A_j)² + V`.
///
/// Kinetic part: diagonal `d/h²`, hopping `−1/(2h²)` per link carrying the
/// Peierls phase `exp(−i h A(midpoint)·e_j)`. With `A = ∇χ` this equals
/// `e^{iχ(from)} e^{−iχ(to)}` to second order, matching the continuum kernel
/// `e^{−i(χ(y)−χ(x))} k⁰_t(x,y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHamiltonian {
    lattice: Lattice,
    potential: Vec<f64>,
    links: Vec<Link>,
    real: bool,
}

impl GridHamiltonian {
    pub fn build(lattice: Lattice, a: &VectorPotentialSpec, v: &ScalarPotentialSpec) -> Result<Self> {
        v.validate()?;
        v.check_dimension(lattice.dim)?;
        let values: Vec<f64> = (0..lattice.n_sites()).map(|s| v.eval(&lattice.coordinates(s))).collect();
        Self::build_from_site_values(lattice, a, values)
    }

    /// As [`build`](Self::build) with the potential given per site.
    pub fn build_from_site_values(lattice: Lattice, a: &VectorPotentialSpec, values: Vec<f64>) -> Result<Self> {
        a.validate()?;
        a.check_dimension(lattice.dim)?;
        if values.len() != lattice.n_sites() {
            return Err(Error::DimensionMismatch { expected: lattice.n_sites(), found: values.len() });
        }
        if let Some(s) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("potential is not finite at site {s}")));
        }
        let h = lattice.spacing();
        let n = lattice.n_per_dim;
        let mut links = Vec::new();
        for from in 0..lattice.n_sites() {
            let idx = lattice.multi_index(from);
            for axis in 0..lattice.dim {
                if idx[axis] + 1 >= n {
                    continue;
                }
                let to = from + lattice.stride(axis);
                let phase = if a.is_zero() {
                    Complex64::new(1.0, 0.0)
                } else {
                    let mut mid = lattice.coordinates(from);
                    mid[axis] += 0.5 * h;
                    let a_mid = a.eval(&mid)[axis];
                    if !a_mid.is_finite() {
                        return Err(invalid(format!("vector potential is not finite at link {from}->{to}")));
                    }
                    Complex64::from_polar(1.0, -h * a_mid)
                };
                links.push(Link { from, to, axis, phase });
            }
        }
        let real = links.iter().all(|l| l.phase.im == 0.0);
        Ok(Self { lattice, potential: values, links, real })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Whether every link phase is real, so the matrix is real symmetric.
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites()
    }

    fn kinetic_scale(&self) -> (f64, f64) {
        let h2 = self.lattice.spacing().powi(2);
        (self.lattice.dim as f64 / h2, -0.5 / h2)
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.n_sites();
        let (diag, hop) = self.kinetic_scale();
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for (s, v) in self.potential.iter().enumerate() {
            m[(s, s)] = Complex64::new(diag + v, 0.0);
        }
        for l in &self.links {
            m[(l.from, l.to)] = l.phase * hop;
            m[(l.to, l.from)] = l.phase.conj() * hop;
        }
        m
    }

    /// The matrix when it is real.
    pub fn real_matrix(&self) -> Option<DMatrix<f64>> {
        if !self.real {
            return None;
        }
        let n = self.n_sites();
        let (diag, hop) = self.kinetic_scale();
        let mut m = DMatrix::zeros(n, n);
        for (s, v) in self.potential.iter().enumerate() {
            m[(s, s)] = diag + v;
        }
        for l in &self.links {
            m[(l.from, l.to)] = l.phase.re * hop;
            m[(l.to, l.from)] = l.phase.re * hop;
        }
        Some(m)
    }

    /// `H ψ` without forming the matrix.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let (diag, hop) = self.kinetic_scale();
        let mut out: Vec<Complex64> = psi.iter().zip(&self.potential).map(|(p, v)| p * (diag + v)).collect();
        for l in &self.links {
            out[l.from] += l.phase * hop * psi[l.to];
            out[l.to] += l.phase.conj() * hop * psi[l.from];
        }
        out
    }

    /// `max |H_ab − conj(H_ba)| / max |H_ab|` over the assembled matrix.
    pub fn hermiticity_residual(&self) -> f64 {
        let m = self.matrix();
        let n = m.nrows();
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Lattice gauge transformation `H → e^{iχ} H e^{−iχ}`, i.e. every link
    /// phase is multiplied by `e^{i(χ(from) − χ(to))}`.
    pub fn gauge_transform(&self, chi: &[f64]) -> Result<Self> {
        if chi.len() != self.n_sites() {
            return Err(Error::DimensionMismatch { expected: self.n_sites(), found: chi.len() });
        }
        let links: Vec<Link> = self
            .links
            .iter()
            .map(|l| Link { phase: l.phase * Complex64::from_polar(1.0, chi[l.from] - chi[l.to]), ..*l })
            .collect();
        let real = links.iter().all(|l| l.phase.im == 0.0);
        Ok(Self { lattice: self.lattice, potential: self.potential.clone(), links, real })
    }

    fn link_phase(&self, from: usize, axis: usize) -> Option<Complex64> {
        self.links.iter().find(|l| l.from == from && l.axis == axis).map(|l| l.phase)
    }

    /// Product of the hopping phases around the plaquette with lower corner
    /// `site` spanned by `axis_a` then `axis_b` (counter-clockwise for
    /// `axis_a < axis_b`). Equals `exp(−i ∮ A·dl)` for the continuum `A`.
    pub fn plaquette_phase(&self, site: usize, axis_a: usize, axis_b: usize) -> Result<Complex64> {
        self.lattice.check_site(site)?;
        let sa = self.lattice.stride(axis_a);
        let sb = self.lattice.stride(axis_b);
        let missing = || invalid("plaquette leaves the lattice");
        let p1 = self.link_phase(site, axis_a).ok_or_else(missing)?;
        let p2 = self.link_phase(site + sa, axis_b).ok_or_else(missing)?;
        let p3 = self.link_phase(site + sb, axis_a).ok_or_else(missing)?;
        let p4 = self.link_phase(site, axis_b).ok_or_else(missing)?;
        // Traversing a link backwards contributes the conjugate phase.
        Ok(p1 * p2 * p3.conj() * p4.conj())
    }

    /// Plain-text dump: a header line, one `site <index> <coords…> <value>`
    /// line per site and one `link <from> <to> <axis> <re> <im>` line per
    /// link, all numbers in round-trip precision.
    pub fn to_text(&self) -> String {
        let l = &self.lattice;
        let mut out = String::new();
        let _ = writeln!(out, "# lattice dim={} n_per_dim={} length={:?} spacing={:?}", l.dim, l.n_per_dim, l.length, l.spacing());
        for (s, v) in self.potential.iter().enumerate() {
            let coords: Vec<String> = l.coordinates(s).iter().map(|c| format!("{c:?}")).collect();
            let _ = writeln!(out, "site {s} {} {v:?}", coords.join(" "));
        }
        for k in &self.links {
            let _ = writeln!(out, "link {} {} {} {:?} {:?}", k.from, k.to, k.axis, k.phase.re, k.phase.im);
        }
        out
    }
}
