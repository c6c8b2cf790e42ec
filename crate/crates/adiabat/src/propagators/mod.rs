//! Exponential-midpoint evolution under the true and near-adiabatic
//! generators, the intertwining defect, the bound envelope, and the two
//! commutator decompositions.

mod bounds;
mod decompose;
mod evolve;

pub use bounds::{assemble_bounds, BoundComponents, BoundInputs, BoundTerms};
pub use decompose::{decompose_commutator, CommutatorDecomposition, CommutatorInputs, Variant, X1Path};
pub use evolve::{
    adiabatic_distance, bessel_j_sequence, block_distance, chebyshev_exp, evolve, intertwining_defect,
    EvolutionTrace, EvolveOptions, Generator, GeneratorKind, PropagatorBackend,
};
