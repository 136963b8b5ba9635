use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed axis-aligned box `Π_k [lower_k, upper_k]`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.iter().chain(&upper).any(|v| v.is_nan()) {
            return Err(crate::error::invalid("box bounds must not be NaN"));
        }
        Ok(Self { lower, upper })
    }

    /// All of `ℝ^d`.
    pub fn whole_space(dim: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; dim], upper: vec![f64::INFINITY; dim] }
    }

    /// Cube `[-half_width, half_width]^d`.
    pub fn centered_cube(dim: usize, half_width: f64) -> Self {
        Self { lower: vec![-half_width; dim], upper: vec![half_width; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// A box with `lower_k > upper_k` on some axis contains nothing.
    pub fn is_empty(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(l, u)| l > u)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }
}
