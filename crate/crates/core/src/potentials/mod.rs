//! Scalar and vector potential catalogs plus growth and regularity
//! diagnostics.

mod diagnostics;
mod scalar;
mod vector;

pub use diagnostics::{check_subquadratic, kato_kappa, upsilon, KatoReport, SubquadraticReport};
pub use scalar::{truncate, FieldSample, Part, ScalarPotentialSpec};
pub use vector::{poincare_gauge, CustomVectorPotential, VectorPotentialSpec};
