use std::f64::consts::PI;

use ndarray::Array2;
use serde::Serialize;

use super::resolvent::{resolvent, Backend};
use crate::error::{Error, Result};
use crate::lattice_hamiltonian::DiscreteHamiltonian;
use crate::linalg;
use crate::C64;

/// Circle |z − center| = radius sampled by the M-point trapezoid rule.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Contour {
    pub center: f64,
    pub radius: f64,
    pub m: usize,
}

impl Contour {
    pub fn new(center: f64, radius: f64, m: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Invalid(format!("contour radius {radius} must be positive")));
        }
        if m < 16 {
            return Err(Error::Invalid(format!("contour needs M >= 16, got {m}")));
        }
        Ok(Contour { center, radius, m })
    }

    pub fn node(&self, k: usize) -> C64 {
        self.center + self.radius * C64::from_polar(1.0, 2.0 * PI * k as f64 / self.m as f64)
    }
}

#[derive(Clone, Debug)]
pub struct ContourProjection {
    pub p: Array2<C64>,
    pub m: usize,
    pub idempotency: f64,
    pub hermiticity: f64,
    pub rank: usize,
}

/// −(1/2πi)∮(H − z)⁻¹dz with a fixed number of nodes.
pub fn contour_sum(h: &DiscreteHamiltonian, contour: &Contour, backend: Backend) -> Result<Array2<C64>> {
    let n = h.dim();
    let mut p = linalg::zeros(n, n);
    for k in 0..contour.m {
        let z = contour.node(k);
        let r = resolvent(h, 0.0, z, backend)?;
        let w = -(z - contour.center) / contour.m as f64;
        p.scaled_add(w, &r);
    }
    Ok(p)
}

/// Smallest distance from the spectrum to the circle's real crossings,
/// from the smallest singular value of H − x.
fn crossing_distance(h: &DiscreteHamiltonian, contour: &Contour) -> Result<f64> {
    let dense = h.to_dense();
    let mut best = f64::INFINITY;
    for x in [contour.center - contour.radius, contour.center + contour.radius] {
        let shifted = &dense - &linalg::identity(h.dim()).mapv(|z| z * x);
        let s = linalg::singular_values(&shifted)?;
        best = best.min(s.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(best)
}

/// Double M from `contour.m` until ‖P² − P‖_F < tol, up to `m_max` nodes.
pub fn contour_projection(
    h: &DiscreteHamiltonian,
    contour: &Contour,
    tol: f64,
    m_max: usize,
    backend: Backend,
) -> Result<ContourProjection> {
    let dist = crossing_distance(h, contour)?;
    if dist < 1e-8 {
        return Err(Error::EigenvalueOnContour { dist });
    }
    let mut c = *contour;
    let mut p = contour_sum(h, &c, backend)?;
    loop {
        let idem = linalg::frobenius(&(p.dot(&p) - &p));
        if idem < tol {
            let herm = linalg::frobenius(&(&p - &linalg::adjoint(&p)));
            let trace: f64 = (0..p.nrows()).map(|i| p[[i, i]].re).sum();
            return Ok(ContourProjection { p, m: c.m, idempotency: idem, hermiticity: herm, rank: trace.round() as usize });
        }
        if 2 * c.m > m_max {
            return Err(Error::NoConvergence(format!(
                "contour quadrature: ‖P²−P‖ = {idem:e} at M = {}",
                c.m
            )));
        }
        // Trapezoid refinement reuses the existing nodes: the new rule is the
        // mean of the old one and the rule on the interleaved midpoints.
        let mid = Contour { m: c.m, ..c };
        let mut extra = linalg::zeros(h.dim(), h.dim());
        for k in 0..mid.m {
            let z = mid.center + mid.radius * C64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / mid.m as f64);
            let r = resolvent(h, 0.0, z, backend)?;
            extra.scaled_add(-(z - mid.center) / mid.m as f64, &r);
        }
        p = (p + extra).mapv(|z| z * 0.5);
        c.m *= 2;
    }
}
