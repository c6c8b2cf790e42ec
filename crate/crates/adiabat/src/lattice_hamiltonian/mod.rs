//! Finite-difference magnetic Schrödinger operators on 1D/2D boxes, their
//! Dirichlet restrictions, s-derivatives and multiplier commutators.

mod export;
mod fields;
mod grid;
mod mask;
mod operator;

pub use export::{read_dense_dump, write_dense_dump, DumpSidecar};
pub use fields::{PotentialFamily, VectorPotentialField};
pub use grid::Grid;
pub use mask::DomainMask;
pub use operator::{
    build_hamiltonian, commutator_with_multiplier, potential_derivative_operator, restrict_dirichlet,
    DiscreteHamiltonian, Provenance,
};
