//! Integral kernels of magnetic Schrödinger semigroups `e^{-tH(A,V)}`.
//!
//! Two independent routes are provided:
//!
//! * [`kernel`]: Monte Carlo over pinned Brownian bridges, evaluating the
//!   Euclidean action (Itô line integral plus divergence correction plus the
//!   scalar potential) along each path.
//! * [`spectral`]: a dense lattice discretisation of
//!   `H = ½ Σ (i∂_j + A_j)² + V` with Peierls link phases, whose full
//!   eigensystem realises heat kernels, spectral projections, traces and the
//!   integrated density of states directly.
//!
//! [`random_fields`] adds homogeneous Gaussian random potentials and their
//! disorder-averaged kernels.

pub mod action;
pub mod bridge;
pub mod error;
pub mod kernel;
pub mod potentials;
pub mod quadrature;
pub mod random_fields;
pub mod region;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};

/// Library version, recorded in run provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use num_complex::Complex64;
