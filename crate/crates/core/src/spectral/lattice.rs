use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::region::BoxRegion;

/// Largest lattice handled by the dense oracle.
pub const MAX_SITES: usize = 8192;

/// Cell-centred lattice on the cube `[−L/2, L/2]^d`: `n` sites per axis at
/// `−L/2 + (i + ½) h`, `h = L/n`. Site indices are row-major with the last
/// axis fastest. An odd `n` puts a site at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub n_per_dim: usize,
    pub length: f64,
}

impl Lattice {
    pub fn new(dim: usize, n_per_dim: usize, length: f64) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(invalid("lattice dimension must be 1, 2 or 3"));
        }
        if n_per_dim == 0 {
            return Err(invalid("lattice needs at least one site per axis"));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(invalid("lattice box length must be positive"));
        }
        let sites = n_per_dim.checked_pow(dim as u32).unwrap_or(usize::MAX);
        if sites > MAX_SITES {
            return Err(Error::SiteCapExceeded { sites, cap: MAX_SITES });
        }
        Ok(Self { dim, n_per_dim, length })
    }

    /// Lattice with spacing `h` and `n` sites per axis, `L = n h`.
    pub fn with_spacing(dim: usize, n_per_dim: usize, spacing: f64) -> Result<Self> {
        Self::new(dim, n_per_dim, spacing * n_per_dim as f64)
    }

    pub fn n_sites(&self) -> usize {
        self.n_per_dim.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_per_dim as f64
    }

    /// Volume `h^d` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn axis_coordinate(&self, i: usize) -> f64 {
        -0.5 * self.length + (i as f64 + 0.5) * self.spacing()
    }

    pub fn multi_index(&self, site: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rem = site;
        for k in (0..self.dim).rev() {
            idx[k] = rem % self.n_per_dim;
            rem /= self.n_per_dim;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n_per_dim + i)
    }

    /// Stride of axis `k` in the flat index.
    pub fn stride(&self, axis: usize) -> usize {
        self.n_per_dim.pow((self.dim - 1 - axis) as u32)
    }

    pub fn coordinates(&self, site: usize) -> Vec<f64> {
        self.multi_index(site).into_iter().map(|i| self.axis_coordinate(i)).collect()
    }

    pub fn all_coordinates(&self) -> Vec<Vec<f64>> {
        (0..self.n_sites()).map(|s| self.coordinates(s)).collect()
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites() {
            return Err(Error::SiteOutOfRange { index: site, sites: self.n_sites() });
        }
        Ok(())
    }

    /// The site located at `point`, to within `1e-9 h` per axis.
    pub fn site_at(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: point.len() });
        }
        let h = self.spacing();
        let mut idx = Vec::with_capacity(self.dim);
        for &x in point {
            let u = (x + 0.5 * self.length) / h - 0.5;
            let i = u.round();
            if (u - i).abs() > 1e-9 || i < 0.0 || i >= self.n_per_dim as f64 {
                return Err(invalid(format!("point {point:?} is not a lattice site")));
            }
            idx.push(i as usize);
        }
        Ok(self.flat_index(&idx))
    }

    /// Sites whose centres lie in `region`.
    pub fn sites_in(&self, region: &BoxRegion) -> Vec<usize> {
        (0..self.n_sites()).filter(|&s| region.contains(&self.coordinates(s))).collect()
    }
}
