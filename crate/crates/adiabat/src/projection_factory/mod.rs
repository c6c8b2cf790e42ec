//! Nearly spectral projections built from Dirichlet eigenprojections and a
//! boundary cutoff, with the measured δ, δ_smooth, δ' and closeness norms.

mod cutoff;
mod derivative;
mod frame;

pub use cutoff::{build_cutoff, sobolev_22, CutoffField};
pub use derivative::{
    aligned_stencil, closeness_check, delta_prime_estimate, delta_prime_estimate_hs, delta_smooth_estimate,
    fd_weights, projection_derivative, stencil_offsets, AlignedStencil, ClosenessRow, FrameFamily, FrameJet,
    OperatorFamily, SmoothDelta,
};
pub use frame::{
    build_interior_projection, build_interior_projection_contour, build_interior_projection_level, build_nearly_spectral, delta_estimate,
    shifted_action, FrameParent, ProjectionFrame,
};

use serde::Serialize;

/// Measured smallness parameters for one scenario run.
#[derive(Clone, Debug, Serialize)]
pub struct DeltaReport {
    pub delta: f64,
    pub delta_smooth: f64,
    pub delta_prime: f64,
    pub a: f64,
    pub s_grid: Vec<f64>,
    pub fd_step: f64,
}
