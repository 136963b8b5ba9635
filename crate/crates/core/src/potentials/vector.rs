use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

type FieldFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A vector potential given by closures, with its divergence supplied
/// analytically.
#[derive(Clone)]
pub struct CustomVectorPotential {
    dim: usize,
    field: Arc<FieldFn>,
    divergence: Arc<ScalarFn>,
}

impl CustomVectorPotential {
    pub fn new(
        dim: usize,
        field: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        divergence: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { dim, field: Arc::new(field), divergence: Arc::new(divergence) }
    }
}

impl fmt::Debug for CustomVectorPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomVectorPotential").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl PartialEq for CustomVectorPotential {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && Arc::ptr_eq(&self.field, &other.field)
            && Arc::ptr_eq(&self.divergence, &other.divergence)
    }
}

/// Declarative vector potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorPotentialSpec {
    Zero,
    /// `A ≡ a`.
    Constant { a: Vec<f64> },
    /// Constant magnetic field `B` in the Poincaré gauge,
    /// `A_k(x) = ½ Σ_j x_j B_jk`.
    ConstantField { b: Vec<Vec<f64>> },
    /// `A(x) = M x`, divergence `tr M`. A symmetric `M` is pure gauge.
    Linear { matrix: Vec<Vec<f64>> },
    #[serde(skip)]
    Custom(CustomVectorPotential),
}

/// Constant field in the Poincaré gauge; `b` must be exactly skew-symmetric.
pub fn poincare_gauge(b: Vec<Vec<f64>>) -> Result<VectorPotentialSpec> {
    let spec = VectorPotentialSpec::ConstantField { b };
    spec.validate()?;
    Ok(spec)
}

fn check_square(m: &[Vec<f64>]) -> Result<()> {
    let n = m.len();
    if n == 0 {
        return Err(invalid("matrix must be non-empty"));
    }
    for row in m {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
    }
    Ok(())
}

impl VectorPotentialSpec {
    /// Two-dimensional constant field of strength `b` (`B₁₂ = b`).
    pub fn uniform_field_2d(b: f64) -> Self {
        Self::ConstantField { b: vec![vec![0.0, b], vec![-b, 0.0]] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Zero | Self::Custom(_) => Ok(()),
            Self::Constant { a } => {
                if a.is_empty() || a.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("constant vector potential must be finite and non-empty"));
                }
                Ok(())
            }
            Self::ConstantField { b } => {
                check_square(b)?;
                for (j, row) in b.iter().enumerate() {
                    for (k, v) in row.iter().enumerate() {
                        if *v != -b[k][j] {
                            return Err(Error::NotSkewSymmetric { row: j, col: k });
                        }
                    }
                }
                Ok(())
            }
            Self::Linear { matrix } => check_square(matrix),
        }
    }

    pub fn dimension(&self) -> Option<usize> {
        match self {
            Self::Zero => None,
            Self::Constant { a } => Some(a.len()),
            Self::ConstantField { b } => Some(b.len()),
            Self::Linear { matrix } => Some(matrix.len()),
            Self::Custom(c) => Some(c.dim),
        }
    }

    pub fn check_dimension(&self, dim: usize) -> Result<()> {
        match self.dimension() {
            Some(d) if d != dim => Err(Error::DimensionMismatch { expected: dim, found: d }),
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// `A(x)`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Zero => vec![0.0; x.len()],
            Self::Constant { a } => a.clone(),
            Self::ConstantField { b } => (0..x.len())
                .map(|k| 0.5 * x.iter().zip(b).map(|(xj, row)| xj * row[k]).sum::<f64>())
                .collect(),
            Self::Linear { matrix } => matrix
                .iter()
                .map(|row| row.iter().zip(x).map(|(m, v)| m * v).sum())
                .collect(),
            Self::Custom(c) => (c.field)(x),
        }
    }

    /// `A(x) · v` without allocating for the catalog kinds.
    pub fn dot(&self, x: &[f64], v: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { a } => a.iter().zip(v).map(|(a, v)| a * v).sum(),
            Self::ConstantField { b } => {
                let mut acc = 0.0;
                for (j, row) in b.iter().enumerate() {
                    let mut inner = 0.0;
                    for (k, bjk) in row.iter().enumerate() {
                        inner += bjk * v[k];
                    }
                    acc += x[j] * inner;
                }
                0.5 * acc
            }
            Self::Linear { matrix } => matrix
                .iter()
                .zip(v)
                .map(|(row, vk)| vk * row.iter().zip(x).map(|(m, xj)| m * xj).sum::<f64>())
                .sum(),
            Self::Custom(c) => (c.field)(x).iter().zip(v).map(|(a, v)| a * v).sum(),
        }
    }

    /// `(∇·A)(x)`, analytic for every kind.
    pub fn divergence(&self, x: &[f64]) -> f64 {
        match self {
            Self::Zero | Self::Constant { .. } | Self::ConstantField { .. } => 0.0,
            Self::Linear { matrix } => (0..matrix.len()).map(|k| matrix[k][k]).sum(),
            Self::Custom(c) => (c.divergence)(x),
        }
    }

    /// Whether the divergence vanishes identically by construction.
    pub fn is_divergence_free(&self) -> bool {
        match self {
            Self::Zero | Self::Constant { .. } | Self::ConstantField { .. } => true,
            Self::Linear { matrix } => (0..matrix.len()).map(|k| matrix[k][k]).sum::<f64>() == 0.0,
            Self::Custom(_) => false,
        }
    }
}
