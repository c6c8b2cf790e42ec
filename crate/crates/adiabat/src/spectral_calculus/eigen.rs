use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice_hamiltonian::DiscreteHamiltonian;
use crate::linalg;
use crate::C64;

/// Ascending eigenvalues with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Array2<C64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// ‖H − QΛQ†‖_max / ‖H‖_max.
    pub fn reconstruction_residual(&self, h: &Array2<C64>) -> f64 {
        let r = linalg::spectral_map(&self.values, &self.vectors, |x| x);
        linalg::max_abs(&(h - &r)) / linalg::max_abs(h).max(f64::MIN_POSITIVE)
    }

    /// ‖Q†Q − I‖_max.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = linalg::adjoint(&self.vectors).dot(&self.vectors);
        linalg::max_abs(&(g - linalg::identity(self.dim())))
    }

    pub fn columns(&self, idx: &[usize]) -> Array2<C64> {
        let n = self.vectors.nrows();
        Array2::from_shape_fn((n, idx.len()), |(i, j)| self.vectors[[i, idx[j]]])
    }
}

pub fn eigensolve(h: &DiscreteHamiltonian) -> Result<EigenDecomposition> {
    eigensolve_dense(&h.to_dense())
}

pub fn eigensolve_dense(h: &Array2<C64>) -> Result<EigenDecomposition> {
    let (values, vectors) = linalg::eigh(h)?;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence("eigensolver returned non-finite eigenvalues".into()));
    }
    Ok(EigenDecomposition { values, vectors })
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub gap: f64,
    pub cluster: Vec<usize>,
    pub nearest: f64,
    pub below: Option<f64>,
    pub above: Option<f64>,
}

/// Distance from the eigenvalue cluster at `e` to the rest of the spectrum.
/// The cluster holds every eigenvalue within 1e-9 of the one nearest `e`.
pub fn spectral_gap(eigs: &EigenDecomposition, e: f64) -> Result<GapReport> {
    spectral_gap_values(&eigs.values, e)
}

pub fn spectral_gap_values(values: &[f64], e: f64) -> Result<GapReport> {
    let (imin, nearest) = values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs()))
        .ok_or_else(|| Error::Gap("empty spectrum".into()))?;
    if (nearest - e).abs() > 1e-6 {
        return Err(Error::Gap(format!("no eigenvalue within 1e-6 of E = {e} (nearest {nearest})")));
    }
    let cluster: Vec<usize> = (0..values.len()).filter(|&i| (values[i] - values[imin]).abs() <= 1e-9).collect();
    let lo = *cluster.first().unwrap();
    let hi = *cluster.last().unwrap();
    let below = (lo > 0).then(|| values[lo - 1]);
    let above = (hi + 1 < values.len()).then(|| values[hi + 1]);
    let gap = [below.map(|b| values[lo] - b), above.map(|a| a - values[hi])]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    Ok(GapReport { gap, cluster, nearest, below, above })
}
