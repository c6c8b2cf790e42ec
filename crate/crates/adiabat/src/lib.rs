//! Numerical laboratory for adiabatic evolution with nearly spectral
//! projections, built around shape-resonance model problems on 1D/2D grids.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod lattice_hamiltonian;
pub mod linalg;
pub mod projection_factory;
pub mod propagators;
pub mod resonance_scenarios;
pub mod spectral_calculus;
pub mod verification_harness;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
