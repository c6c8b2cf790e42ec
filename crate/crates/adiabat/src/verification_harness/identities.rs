use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice_hamiltonian::{commutator_with_multiplier, restrict_dirichlet, DiscreteHamiltonian, DomainMask};
use crate::linalg;
use crate::spectral_calculus::{eigensolve, solve_shifted, Backend};
use crate::C64;

/// Masks and cutoff of one geometric-resolvent check. Θ is a grid function.
pub struct ResolventGeometry<'a> {
    pub omega: &'a DomainMask,
    pub lambda: &'a DomainMask,
    pub lambda1: &'a DomainMask,
    pub lambda2: &'a DomainMask,
    pub theta: &'a [f64],
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolventIdentityReport {
    pub z: (f64, f64),
    /// ‖χ₁R_Ω − χ₁R_ΛΘ − χ₁R_Λ[H,Θ]R_Ω‖ / ‖χ₁R_Ω‖
    pub residual: f64,
    /// Same with χ₂ on the right of every term.
    pub residual_sandwich: f64,
    pub lhs_norm: f64,
    pub lhs_sandwich_norm: f64,
    pub dim_omega: usize,
    pub dim_lambda: usize,
}

const THETA_TOL: f64 = 1e-14;

/// Support hypotheses in their lattice form; Λᶜ is taken inside Ω because
/// both restrictions share the Dirichlet walls of Ω.
pub fn check_resolvent_geometry(geo: &ResolventGeometry, h: &DiscreteHamiltonian) -> Result<()> {
    let grid = &h.grid;
    for m in [geo.omega, geo.lambda, geo.lambda1, geo.lambda2] {
        m.check_grid(grid)?;
        if m.is_empty() {
            return Err(Error::EmptyMask(m.label.clone()));
        }
    }
    if geo.theta.len() != grid.len() {
        return Err(Error::Shape(format!("Theta has {} values, grid has {}", geo.theta.len(), grid.len())));
    }
    if let Some(t) = geo.theta.iter().find(|t| !t.is_finite() || **t < -THETA_TOL || **t > 1.0 + THETA_TOL) {
        return Err(Error::Precondition(format!("Theta takes the value {t} outside [0, 1]")));
    }
    if !geo.lambda.is_subset(geo.omega) {
        return Err(Error::Precondition("Lambda is not contained in Omega".into()));
    }
    for (name, m) in [("Lambda1", geo.lambda1), ("Lambda2", geo.lambda2)] {
        if !m.is_subset(geo.lambda) {
            return Err(Error::Precondition(format!("{name} is not contained in Lambda")));
        }
    }
    let core = geo.lambda1.union(geo.lambda2).stencil_dilate(grid).intersect(geo.omega);
    if let Some(i) = core.indices().into_iter().find(|&i| (geo.theta[i] - 1.0).abs() > THETA_TOL) {
        return Err(Error::Precondition(format!(
            "Theta = {} at {:?}, next to Lambda1 or Lambda2 (must be 1 there)",
            geo.theta[i],
            grid.coord(i)
        )));
    }
    let outside = geo.omega.minus(geo.lambda).stencil_dilate(grid).intersect(geo.omega);
    if let Some(i) = outside.indices().into_iter().find(|&i| geo.theta[i].abs() > THETA_TOL) {
        return Err(Error::Precondition(format!(
            "Theta = {} at {:?}, next to Omega minus Lambda (must be 0 there)",
            geo.theta[i],
            grid.coord(i)
        )));
    }
    Ok(())
}

fn diag_rows(m: &Array2<C64>, w: &[f64]) -> Array2<C64> {
    let mut out = m.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|z| z * w[i]);
    }
    out
}

fn diag_cols(m: &Array2<C64>, w: &[f64]) -> Array2<C64> {
    let mut out = m.clone();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|z| z * w[j]);
    }
    out
}

fn resolvent_set_check(h: &DiscreteHamiltonian, z: C64, name: &str) -> Result<()> {
    if z.im != 0.0 {
        return Ok(());
    }
    let eig = eigensolve(h)?;
    let (lo, hi) = h.spectral_bounds();
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let d = eig.values.iter().map(|l| (l - z.re).abs()).fold(f64::INFINITY, f64::min);
    if d <= 1e-10 * scale {
        return Err(Error::Precondition(format!("z = {} lies on the spectrum of {name}", z.re)));
    }
    Ok(())
}

/// Both forms of the geometric resolvent identity by dense solves in the
/// coordinates of Ω; the Λ-resolvent acts by restriction and zero extension.
pub fn geometric_resolvent_check(
    h: &DiscreteHamiltonian,
    geo: &ResolventGeometry,
    z: C64,
) -> Result<ResolventIdentityReport> {
    if h.dim() != h.grid.len() {
        return Err(Error::Shape("geometric resolvent check needs the full-grid operator".into()));
    }
    check_resolvent_geometry(geo, h)?;
    let h_omega = restrict_dirichlet(h, geo.omega)?;
    let h_lambda = restrict_dirichlet(h, geo.lambda)?;
    resolvent_set_check(&h_omega, z, "H_Omega")?;
    resolvent_set_check(&h_lambda, z, "H_Lambda")?;
    let m = h_omega.dim();
    let local = h_omega.local_map();
    let on_omega = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { h_omega.sites.iter().map(|&g| f(g)).collect() };
    let theta = on_omega(&|g| geo.theta[g]);
    let chi1 = on_omega(&|g| if geo.lambda1.contains(g) { 1.0 } else { 0.0 });
    let chi2 = on_omega(&|g| if geo.lambda2.contains(g) { 1.0 } else { 0.0 });

    let r_omega = solve_shifted(&h_omega, 0.0, z, &linalg::identity(m), Backend::Dense)?;
    let r_small = solve_shifted(&h_lambda, 0.0, z, &linalg::identity(h_lambda.dim()), Backend::Dense)?;
    let pos: Vec<usize> = h_lambda.sites.iter().map(|&g| local[g]).collect();
    let mut r_lambda = linalg::zeros(m, m);
    for (a, &pa) in pos.iter().enumerate() {
        for (b, &pb) in pos.iter().enumerate() {
            r_lambda[[pa, pb]] = r_small[[a, b]];
        }
    }
    let k = commutator_with_multiplier(&h_omega, &theta)?;

    let lhs = diag_rows(&r_omega, &chi1);
    let chi1_rl = diag_rows(&r_lambda, &chi1);
    let rhs = diag_cols(&chi1_rl, &theta) + chi1_rl.dot(&k).dot(&r_omega);
    let lhs_norm = linalg::op_norm(&lhs)?;
    let residual = linalg::op_norm(&(&lhs - &rhs))? / lhs_norm;

    let lhs2 = diag_cols(&lhs, &chi2);
    let rhs2 = diag_cols(&chi1_rl, &chi2) + diag_cols(&chi1_rl.dot(&k).dot(&r_omega), &chi2);
    let lhs_sandwich_norm = linalg::op_norm(&lhs2)?;
    let residual_sandwich = linalg::op_norm(&(&lhs2 - &rhs2))? / lhs_sandwich_norm.max(f64::MIN_POSITIVE);
    Ok(ResolventIdentityReport {
        z: (z.re, z.im),
        residual,
        residual_sandwich,
        lhs_norm,
        lhs_sandwich_norm,
        dim_omega: m,
        dim_lambda: h_lambda.dim(),
    })
}

/// Owned masks for [`ResolventGeometry`].
#[derive(Clone, Debug)]
pub struct ResolventMasks {
    pub omega: DomainMask,
    pub lambda: DomainMask,
    pub lambda1: DomainMask,
    pub lambda2: DomainMask,
    pub theta: Vec<f64>,
}

impl ResolventMasks {
    pub fn geometry(&self) -> ResolventGeometry<'_> {
        ResolventGeometry {
            omega: &self.omega,
            lambda: &self.lambda,
            lambda1: &self.lambda1,
            lambda2: &self.lambda2,
            theta: &self.theta,
        }
    }
}

/// Λ = Ω ∩ J at the `s_index`-th sample. Θ rises from 0 at `offset_cells`
/// cells into Λ to 1 over c/4; Λ₁ is the part of Λ within c/8 of the
/// exterior of Ω, Λ₂ a band c/4 wide just past the rise of Θ. Offsets below
/// 2 put the rise next to Ω∖Λ and violate the support hypotheses.
///
/// Without a barrier (Ω the whole box, J empty) Λ = Ω, Θ ≡ 1, and Λ₁, Λ₂
/// are the first and last quarters of the sites.
pub fn scenario_resolvent_masks(
    setup: &crate::resonance_scenarios::ScenarioSetup,
    s_index: usize,
    offset_cells: usize,
) -> Result<ResolventMasks> {
    let grid = setup.grid();
    let c = setup.scenario.c;
    let h = grid.h;
    let regions = setup
        .regions
        .get(s_index)
        .ok_or_else(|| Error::Invalid(format!("s index {s_index} beyond {} samples", setup.regions.len())))?;
    let omega = setup.omega.clone();
    if regions.j.is_empty() {
        let idx = omega.indices();
        let q = (idx.len() / 4).max(1);
        return Ok(ResolventMasks {
            lambda: omega.clone().relabel("Lambda"),
            lambda1: DomainMask::from_indices(grid, "Lambda1", &idx[..q]),
            lambda2: DomainMask::from_indices(grid, "Lambda2", &idx[idx.len() - q..]),
            theta: omega.inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            omega,
        });
    }
    let lambda = omega.intersect(&regions.j).relabel("Lambda");
    let d = omega.minus(&lambda).distance_field(grid);
    let step = crate::spectral_calculus::Smoothstep::new(3);
    let ramp_start = offset_cells as f64 * h;
    let ramp = c / 4.0;
    let theta: Vec<f64> = (0..grid.len())
        .map(|i| if lambda.contains(i) { step.eval((d[i] - ramp_start) / ramp) } else { 0.0 })
        .collect();
    let d_ext = omega.complement().distance_field(grid);
    let lambda1 = DomainMask {
        label: "Lambda1".into(),
        inside: (0..grid.len()).map(|i| omega.contains(i) && d_ext[i] <= c / 8.0).collect(),
    }
    .intersect(&lambda);
    let lo = ramp_start + ramp + h;
    let lambda2 = DomainMask {
        label: "Lambda2".into(),
        inside: (0..grid.len()).map(|i| lambda.contains(i) && d[i] >= lo && d[i] <= lo + c / 4.0).collect(),
    };
    Ok(ResolventMasks { omega, lambda, lambda1: lambda1.relabel("Lambda1"), lambda2, theta })
}
