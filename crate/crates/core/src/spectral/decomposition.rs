use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::hamiltonian::GridHamiltonian;
use super::lattice::Lattice;
use crate::error::Result;

/// Full eigensystem of a [`GridHamiltonian`].
///
/// Eigenvalues ascend. The stored vectors `u_n` are orthonormal in `ℓ²`; the
/// continuum-normalized site functions are `φ_n = u_n / h^{d/2}`, so that
/// `Σ_x |φ_n(x)|² h^d = 1`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    hamiltonian: GridHamiltonian,
    eigenvalues: Vec<f64>,
    vectors: DMatrix<Complex64>,
    norm: f64,
}

impl SpectralDecomposition {
    pub fn new(hamiltonian: GridHamiltonian) -> Result<Self> {
        let (values, vectors) = match hamiltonian.real_matrix() {
            Some(m) => {
                let eig = SymmetricEigen::new(m);
                let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
                (eig.eigenvalues.as_slice().to_vec(), v)
            }
            None => {
                let eig = SymmetricEigen::new(hamiltonian.matrix());
                (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors)
            }
        };
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let n = values.len();
        let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let sorted = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
        let norm = hamiltonian.lattice().cell_volume().sqrt().recip();
        Ok(Self { hamiltonian, eigenvalues, vectors: sorted, norm })
    }

    pub fn hamiltonian(&self) -> &GridHamiltonian {
        &self.hamiltonian
    }

    pub fn lattice(&self) -> &Lattice {
        self.hamiltonian.lattice()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `ℓ²`-normalized eigenvector entries; column `n` is `u_n`.
    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    /// `φ_n(x)`.
    pub fn phi(&self, site: usize, n: usize) -> Complex64 {
        self.vectors[(site, n)] * self.norm
    }

    /// `Σ_n F(E_n) φ_n(x) φ_n*(y)`, summed in ascending energy order.
    pub fn spectral_sum<F: Fn(f64) -> f64>(&self, f: F, x: usize, y: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, &e) in self.eigenvalues.iter().enumerate() {
            let w = f(e);
            if w != 0.0 {
                acc += self.vectors[(x, n)] * self.vectors[(y, n)].conj() * w;
            }
        }
        acc * (self.norm * self.norm)
    }

    /// `max_{m,n} |⟨u_m, u_n⟩ − δ_mn|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.vectors.adjoint() * &self.vectors;
        let n = gram.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// `max_n ‖H u_n − E_n u_n‖ / max_n |E_n|`, with `H` applied link by
    /// link rather than through the factorized matrix.
    pub fn relative_residual(&self) -> f64 {
        let scale = self.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let mut worst: f64 = 0.0;
        for (n, &e) in self.eigenvalues.iter().enumerate() {
            let u: Vec<Complex64> = self.vectors.column(n).iter().copied().collect();
            let hu = self.hamiltonian.apply(&u);
            let r: f64 = hu.iter().zip(&u).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(r);
        }
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{ScalarPotentialSpec, VectorPotentialSpec};

    #[test]
    fn one_dimensional_free_spectrum_is_known() {
        // Dirichlet chain: E_k = (1 − cos(kπ/(n+1))) / h².
        let n = 20;
        let l = Lattice::new(1, n, 10.0).unwrap();
        let h = l.spacing();
        let dec = SpectralDecomposition::new(GridHamiltonian::build(l, &VectorPotentialSpec::Zero, &ScalarPotentialSpec::Zero).unwrap()).unwrap();
        for (k, e) in dec.eigenvalues().iter().enumerate() {
            let exact = (1.0 - ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos()) / (h * h);
            assert!((e - exact).abs() < 1e-12 * (1.0 + exact), "{e} vs {exact}");
        }
        assert!(dec.orthonormality_error() < 1e-10);
        assert!(dec.relative_residual() < 1e-8);
    }

    #[test]
    fn magnetic_decomposition_is_consistent() {
        let l = Lattice::new(2, 7, 3.5).unwrap();
        let ham = GridHamiltonian::build(l, &VectorPotentialSpec::uniform_field_2d(1.0), &ScalarPotentialSpec::harmonic(2, 0.5)).unwrap();
        let dec = SpectralDecomposition::new(ham).unwrap();
        assert!(dec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        assert!(dec.orthonormality_error() < 1e-10);
        assert!(dec.relative_residual() < 1e-8);
    }

    #[test]
    fn continuum_normalization() {
        let l = Lattice::new(1, 15, 6.0).unwrap();
        let dec = SpectralDecomposition::new(GridHamiltonian::build(l, &VectorPotentialSpec::Zero, &ScalarPotentialSpec::harmonic(1, 1.0)).unwrap()).unwrap();
        let h = l.spacing();
        for n in 0..dec.len() {
            let s: f64 = (0..15).map(|x| dec.phi(x, n).norm_sqr() * h).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gauge_transformation_preserves_spectrum() {
        let l = Lattice::new(2, 6, 3.0).unwrap();
        let ham = GridHamiltonian::build(l, &VectorPotentialSpec::uniform_field_2d(0.8), &ScalarPotentialSpec::harmonic(2, 1.0)).unwrap();
        let chi: Vec<f64> = (0..36).map(|i| (i as f64 * 1.7).sin() * 3.0).collect();
        let a = SpectralDecomposition::new(ham.clone()).unwrap();
        let b = SpectralDecomposition::new(ham.gauge_transform(&chi).unwrap()).unwrap();
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
