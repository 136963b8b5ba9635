//! Brute-force lattice oracle: magnetic Schrödinger operators on a finite
//! Dirichlet box, their full eigensystems, and the spectral kernels built
//! from them.

mod decomposition;
mod formulas;
mod hamiltonian;
mod ids;
mod lattice;
mod oracle;

pub use decomposition::SpectralDecomposition;
pub use formulas::{
    bounded_function_kernel, function_kernel, heat_kernel, hs_norm_check, initial_value_convergence,
    initial_value_residual, projection_diagonal_bounds, projection_kernel, trace_formula_check, BoundedFunctionReport,
    ComposedValue, EnergySet, IdentityReport, InitialValueReport, ProjectionBoundsReport, SpectralFunction,
    IDENTITY_TOLERANCE, TRACE_TOLERANCE,
};
pub use hamiltonian::{GridHamiltonian, Link};
pub use ids::{ids_two_ways, laplace_consistency, IdsCurve, IdsReport, IdsSetup, LaplacePoint, LaplaceReport};
pub use lattice::{Lattice, MAX_SITES};
pub use oracle::{chebyshev_heat_kernel, grid_oracle, OracleProblem, OracleValue};
