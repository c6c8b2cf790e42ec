use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice_hamiltonian::{DomainMask, Grid};
use crate::spectral_calculus::Smoothstep;

/// Smoothed indicator of ∂Ω: 1 within c/8 of the boundary, a degree-7
/// transition out to c/2, 0 beyond.
#[derive(Clone, Debug, Serialize)]
pub struct CutoffField {
    pub values: Vec<f64>,
    pub c: f64,
    /// Points where χ = 1.
    pub collar: DomainMask,
    /// Points farther than c/2 from ∂Ω, where χ = 0.
    pub exterior: DomainMask,
    /// Discrete (Σ hᵈ |(1 − Δ_h)χ|²)^{1/2}.
    pub sobolev_22: f64,
}

impl CutoffField {
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    /// c^{-2}, the reference size of the H² norm.
    pub fn sobolev_reference(&self) -> f64 {
        self.c.powi(-2)
    }
}

fn profile(d: f64, c: f64, step: &Smoothstep) -> f64 {
    let inner = c / 8.0;
    let outer = c / 2.0;
    if d <= inner {
        1.0
    } else if d >= outer {
        0.0
    } else {
        1.0 - step.eval((d - inner) / (outer - inner))
    }
}

/// Discrete H² norm with the 2d+1 point Laplacian and zero extension past the walls.
pub fn sobolev_22(values: &[f64], grid: &Grid) -> f64 {
    let h2 = grid.h * grid.h;
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let mut lap = -2.0 * grid.dim as f64 * values[i];
        for j in grid.neighbours(i) {
            lap += values[j];
        }
        let r = values[i] - lap / h2;
        acc += r * r;
    }
    (acc * grid.h.powi(grid.dim as i32)).sqrt()
}

pub fn build_cutoff(omega: &DomainMask, c: f64, grid: &Grid) -> Result<CutoffField> {
    omega.check_grid(grid)?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Invalid(format!("margin c = {c} must be positive")));
    }
    let boundary = omega.boundary(grid);
    if boundary.is_empty() {
        return Ok(CutoffField {
            values: vec![0.0; grid.len()],
            c,
            collar: DomainMask::empty(grid, "collar"),
            exterior: DomainMask::full(grid, "chi=0"),
            sobolev_22: 0.0,
        });
    }
    if 3.0 * c / 8.0 < grid.h {
        return Err(Error::Invalid(format!(
            "margin c = {c} leaves the cutoff transition unresolved at spacing {}",
            grid.h
        )));
    }
    let step = Smoothstep::new(3);
    let d = boundary.distance_field(grid);
    let values: Vec<f64> = d.iter().map(|&x| profile(x, c, &step)).collect();
    let collar = DomainMask {
        label: "collar".into(),
        inside: values.iter().map(|&x| x == 1.0).collect(),
    };
    let exterior = DomainMask {
        label: "chi=0".into(),
        inside: d.iter().map(|&x| x > c / 2.0).collect(),
    };
    if omega.intersect(&exterior).is_empty() {
        return Err(Error::Invalid(format!(
            "margin c = {c} too large: the cutoff covers all of {}",
            omega.label
        )));
    }
    let sobolev_22 = sobolev_22(&values, grid);
    Ok(CutoffField { values, c, collar, exterior, sobolev_22 })
}
