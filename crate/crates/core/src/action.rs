//! The Euclidean action
//!
//! ```text
//! S_t(A, V; b) = i ∫ db·A(b)  +  (i/2) ∫ (∇·A)(b) ds  +  ∫ V(b) ds
//! ```
//!
//! evaluated on a discretised bridge. The line integral is the Itô
//! (left-endpoint) sum; the two Lebesgue integrals use the trapezoid rule on
//! the path grid. A midpoint (Stratonovich) line integral is provided as a
//! cross-check of the Itô-plus-divergence combination.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bridge::BridgePath;
use crate::error::{Error, Result};
use crate::potentials::{ScalarPotentialSpec, VectorPotentialSpec};

/// `value = ito_part + divergence_part + scalar_part`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionValue {
    pub value: Complex64,
    pub ito_part: Complex64,
    pub divergence_part: Complex64,
    pub scalar_part: f64,
}

impl ActionValue {
    fn new(ito: f64, divergence: f64, scalar: f64) -> Self {
        let ito_part = Complex64::new(0.0, ito);
        let divergence_part = Complex64::new(0.0, 0.5 * divergence);
        Self { value: ito_part + divergence_part + scalar, ito_part, divergence_part, scalar_part: scalar }
    }
}

fn check_dim(path: &BridgePath, a: &VectorPotentialSpec) -> Result<()> {
    a.check_dimension(path.dim())
}

/// Left-endpoint sum `Σ_k A(b_k)·(b_{k+1} − b_k)`.
pub fn ito_line_integral(path: &BridgePath, a: &VectorPotentialSpec) -> Result<f64> {
    check_dim(path, a)?;
    if a.is_zero() {
        return Ok(0.0);
    }
    let d = path.dim();
    let mut inc = vec![0.0; d];
    let mut acc = 0.0;
    for k in 0..path.grid().n_steps() {
        let x = path.node(k);
        let next = path.node(k + 1);
        for j in 0..d {
            inc[j] = next[j] - x[j];
        }
        let term = a.dot(x, &inc);
        if !term.is_finite() {
            return Err(Error::NonFinite { what: "vector potential", node: k });
        }
        acc += term;
    }
    Ok(acc)
}

/// Midpoint sum `Σ_k A((b_k + b_{k+1})/2)·(b_{k+1} − b_k)`.
pub fn stratonovich_line_integral(path: &BridgePath, a: &VectorPotentialSpec) -> Result<f64> {
    check_dim(path, a)?;
    if a.is_zero() {
        return Ok(0.0);
    }
    let d = path.dim();
    let mut inc = vec![0.0; d];
    let mut mid = vec![0.0; d];
    let mut acc = 0.0;
    for k in 0..path.grid().n_steps() {
        let x = path.node(k);
        let next = path.node(k + 1);
        for j in 0..d {
            inc[j] = next[j] - x[j];
            mid[j] = 0.5 * (next[j] + x[j]);
        }
        let term = a.dot(&mid, &inc);
        if !term.is_finite() {
            return Err(Error::NonFinite { what: "vector potential", node: k });
        }
        acc += term;
    }
    Ok(acc)
}

/// Trapezoid rule for `∫_0^t f(b(s)) ds`.
pub fn time_integral<F: Fn(&[f64]) -> f64>(path: &BridgePath, f: F) -> Result<f64> {
    let grid = path.grid();
    let n = grid.n_steps();
    let mut interior = 0.0;
    let mut ends = 0.0;
    for (k, x) in path.nodes().enumerate() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "integrand", node: k });
        }
        if k == 0 || k == n {
            ends += v;
        } else {
            interior += v;
        }
    }
    Ok(grid.step() * (interior + 0.5 * ends))
}

/// `∫_0^t V(b(s)) ds`.
pub fn scalar_integral(path: &BridgePath, v: &ScalarPotentialSpec) -> Result<f64> {
    v.check_dimension(path.dim())?;
    match v {
        ScalarPotentialSpec::Zero => Ok(0.0),
        _ => time_integral(path, |x| v.eval(x)),
    }
}

/// Full action with its three summands.
pub fn action(path: &BridgePath, a: &VectorPotentialSpec, v: &ScalarPotentialSpec) -> Result<ActionValue> {
    let ito = ito_line_integral(path, a)?;
    let divergence = if a.is_divergence_free() { 0.0 } else { time_integral(path, |x| a.divergence(x))? };
    let scalar = scalar_integral(path, v)?;
    Ok(ActionValue::new(ito, divergence, scalar))
}
