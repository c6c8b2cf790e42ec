use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::cutoff::CutoffField;
use crate::error::{Error, Result};
use crate::lattice_hamiltonian::DiscreteHamiltonian;
use crate::linalg;
use crate::spectral_calculus::{contour_projection, eigensolve, eigensolve_dense, spectral_gap, Backend, Contour};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameParent {
    /// Spectral projection of a Dirichlet restriction, extended by zero.
    Interior,
    /// Orthonormalised span of (1 − χ)ψ_i.
    NearlySpectral,
}

/// Orthonormal columns on the full grid together with the cluster energy and
/// gap they were built from.
#[derive(Clone, Debug)]
pub struct ProjectionFrame {
    pub frame: Array2<C64>,
    pub parent: FrameParent,
    pub energy: f64,
    pub gap: f64,
    pub s: f64,
}

impl ProjectionFrame {
    pub fn rank(&self) -> usize {
        self.frame.ncols()
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn projector(&self) -> Array2<C64> {
        self.frame.dot(&linalg::adjoint(&self.frame))
    }

    /// ‖Φ†Φ − I‖_max, which bounds both ‖P² − P‖ and the frame defect.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = linalg::adjoint(&self.frame).dot(&self.frame);
        linalg::max_abs(&(g - linalg::identity(self.rank())))
    }

    /// P x
    pub fn project(&self, x: &[C64]) -> Vec<C64> {
        let c: Vec<C64> = (0..self.rank()).map(|j| linalg::vdot(&linalg::column(&self.frame, j), x)).collect();
        (0..self.dim()).map(|i| (0..self.rank()).map(|j| self.frame[[i, j]] * c[j]).sum()).collect()
    }

    /// ‖(1 − P)ψ‖
    pub fn distance(&self, psi: &[C64]) -> f64 {
        let p = self.project(psi);
        let r: Vec<C64> = psi.iter().zip(&p).map(|(a, b)| a - b).collect();
        linalg::vnorm(&r)
    }

    /// Same projection, frame columns mixed by a unitary.
    pub fn rotated(&self, u: &Array2<C64>) -> Self {
        ProjectionFrame { frame: self.frame.dot(u), ..self.clone() }
    }
}

/// Rotate each column so its largest entry is real and positive.
fn fix_phases(m: &mut Array2<C64>) {
    for mut col in m.columns_mut() {
        let big = col.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm()));
        if let Some(b) = big {
            if b.norm() > 0.0 {
                let ph = b.conj() / b.norm();
                col.mapv_inplace(|z| z * ph);
            }
        }
    }
}

fn extend_columns(h: &DiscreteHamiltonian, local: &Array2<C64>) -> Array2<C64> {
    let mut out = linalg::zeros(h.grid.len(), local.ncols());
    for (p, &g) in h.sites.iter().enumerate() {
        for j in 0..local.ncols() {
            out[[g, j]] = local[[p, j]];
        }
    }
    out
}

/// Eigenspace of the cluster of `h_omega` at `e`, extended by zero to the grid.
pub fn build_interior_projection(h_omega: &DiscreteHamiltonian, e: f64, gap_min: f64) -> Result<ProjectionFrame> {
    let eig = eigensolve(h_omega)?;
    frame_from_eigs(h_omega, &eig, e, gap_min)
}

/// Eigenspace of the `level`-th eigenvalue (ascending, from 0) of `h_omega`
/// together with everything degenerate with it.
pub fn build_interior_projection_level(
    h_omega: &DiscreteHamiltonian,
    level: usize,
    gap_min: f64,
) -> Result<ProjectionFrame> {
    let eig = eigensolve(h_omega)?;
    let e = *eig
        .values
        .get(level)
        .ok_or_else(|| Error::Gap(format!("level {level} beyond dimension {}", eig.dim())))?;
    frame_from_eigs(h_omega, &eig, e, gap_min)
}

fn frame_from_eigs(
    h_omega: &DiscreteHamiltonian,
    eig: &crate::spectral_calculus::EigenDecomposition,
    e: f64,
    gap_min: f64,
) -> Result<ProjectionFrame> {
    let report = spectral_gap(eig, e)?;
    if report.gap < gap_min {
        return Err(Error::Gap(format!("gap {} below required {gap_min} at E = {e}", report.gap)));
    }
    let mut local = eig.columns(&report.cluster);
    fix_phases(&mut local);
    let energy = report.cluster.iter().map(|&i| eig.values[i]).sum::<f64>() / report.cluster.len() as f64;
    Ok(ProjectionFrame {
        frame: extend_columns(h_omega, &local),
        parent: FrameParent::Interior,
        energy,
        gap: report.gap,
        s: h_omega.s,
    })
}

/// Same cluster through the contour integral |z − E| = radius; the frame is
/// the range of the quadrature projector.
pub fn build_interior_projection_contour(
    h_omega: &DiscreteHamiltonian,
    e: f64,
    radius: f64,
    tol: f64,
) -> Result<ProjectionFrame> {
    let cp = contour_projection(h_omega, &Contour::new(e, radius, 32)?, tol, 4096, Backend::Auto)?;
    let herm = (&cp.p + &linalg::adjoint(&cp.p)).mapv(|z| z * 0.5);
    let dec = eigensolve_dense(&herm)?;
    let keep: Vec<usize> = (0..dec.dim()).filter(|&i| dec.values[i] > 0.5).collect();
    if keep.is_empty() {
        return Err(Error::Gap(format!("no eigenvalue enclosed by |z - {e}| = {radius}")));
    }
    let mut local = dec.columns(&keep);
    fix_phases(&mut local);
    let hl = h_omega.to_dense();
    let rq = linalg::adjoint(&local).dot(&hl.dot(&local));
    let energy = (0..keep.len()).map(|i| rq[[i, i]].re).sum::<f64>() / keep.len() as f64;
    Ok(ProjectionFrame {
        frame: extend_columns(h_omega, &local),
        parent: FrameParent::Interior,
        energy,
        gap: f64::NAN,
        s: h_omega.s,
    })
}

/// Löwdin-orthonormalised span of (1 − χ)ψ_i. Fails if the cutoff nearly
/// annihilates the frame (smallest singular value below 1e-6).
pub fn build_nearly_spectral(p_omega: &ProjectionFrame, chi: &CutoffField) -> Result<ProjectionFrame> {
    if chi.values.len() != p_omega.dim() {
        return Err(Error::Shape(format!(
            "cutoff has {} points, frame has {} rows",
            chi.values.len(),
            p_omega.dim()
        )));
    }
    if chi.is_zero() {
        return Ok(ProjectionFrame { parent: FrameParent::NearlySpectral, ..p_omega.clone() });
    }
    let mut m = p_omega.frame.clone();
    for (i, mut row) in m.rows_mut().into_iter().enumerate() {
        let w = 1.0 - chi.values[i];
        row.mapv_inplace(|z| z * w);
    }
    let (frame, smin) = linalg::lowdin(&m).map_err(|_| Error::RankCollapse(0.0))?;
    if smin < 1e-6 {
        return Err(Error::RankCollapse(smin));
    }
    Ok(ProjectionFrame { frame, parent: FrameParent::NearlySpectral, ..p_omega.clone() })
}

/// (H − E)Φ
pub fn shifted_action(h: &DiscreteHamiltonian, e: f64, p: &ProjectionFrame) -> Result<Array2<C64>> {
    if h.dim() != p.dim() {
        return Err(Error::Shape(format!("operator acts on {}, frame has {} rows", h.dim(), p.dim())));
    }
    let mut out = linalg::zeros(p.dim(), p.rank());
    let mut y = vec![C64::new(0.0, 0.0); p.dim()];
    for j in 0..p.rank() {
        h.apply_shifted(&linalg::column(&p.frame, j), e, &mut y);
        out.column_mut(j).assign(&ndarray::ArrayView1::from(&y));
    }
    Ok(out)
}

/// δ = 2‖(H − E)P‖ = 2‖(H − E)Φ‖.
pub fn delta_estimate(h: &DiscreteHamiltonian, e: f64, p: &ProjectionFrame) -> Result<f64> {
    let k = shifted_action(h, e, p)?;
    Ok(2.0 * linalg::op_norm(&k)?)
}
