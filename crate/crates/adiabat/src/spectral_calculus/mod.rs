//! Eigendecomposition, contour projectors, C⁴ plateau functions with their
//! triple norms, and Helffer–Sjöstrand functional calculus.

mod bump;
mod contour;
mod eigen;
mod hs;
pub mod quad;
mod resolvent;

pub use bump::{build_bump, triple_norm, triple_norm_with_tol, BumpFunction, Smoothstep, TripleNorm};
pub use contour::{contour_projection, contour_sum, Contour, ContourProjection};
pub use eigen::{eigensolve, eigensolve_dense, spectral_gap, spectral_gap_values, EigenDecomposition, GapReport};
pub use hs::{
    chunked_sum, function_of_operator_eig, hs_apply, hs_function_of_operator, HsNode, HsQuadrature, HsResult,
    QuasiAnalyticExtension, HS_CHUNK,
};
pub use resolvent::{resolvent, solve_shifted, Backend};
