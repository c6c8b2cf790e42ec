use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::fields::{PotentialFamily, VectorPotentialField};
use super::grid::Grid;
use super::mask::DomainMask;
use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Full,
    DirichletRestricted,
}

/// Sparse Hermitian lattice operator: a real diagonal plus nearest-neighbour
/// couplings, acting on `sites` (ascending grid indices).
#[derive(Clone, Debug)]
pub struct DiscreteHamiltonian {
    pub grid: Grid,
    pub sites: Vec<usize>,
    pub diag: Vec<f64>,
    /// Upper couplings `(p, q, H[p][q])` in local indices, `p < q`.
    pub upper: Vec<(usize, usize, C64)>,
    pub hbar: f64,
    pub s: f64,
    pub domain: String,
    pub provenance: Provenance,
}

/// (-i hbar grad - A)^2 + V(s) with Dirichlet walls at the box edge.
///
/// Bonds carry `-hbar²/h² + i hbar A_mid / h` with A sampled at the bond
/// midpoint; the diagonal gets `2 d hbar²/h² + V + |A|²`.
pub fn build_hamiltonian(
    grid: &Grid,
    a: &VectorPotentialField,
    v: &PotentialFamily,
    s: f64,
    hbar: f64,
) -> Result<DiscreteHamiltonian> {
    if !(hbar > 0.0) || !hbar.is_finite() {
        return Err(Error::Invalid(format!("hbar = {hbar} must be positive")));
    }
    let kin = hbar * hbar / (grid.h * grid.h);
    let mut diag = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.coord(i);
        let vx = v.value(x, s);
        let ax = a.eval(x);
        if !vx.is_finite() {
            return Err(Error::NonFinite(format!("V({:?}, {s}) = {vx}", x)));
        }
        if !ax[0].is_finite() || !ax[1].is_finite() {
            return Err(Error::NonFinite(format!("A({:?})", x)));
        }
        diag.push(2.0 * grid.dim as f64 * kin + vx + ax[0] * ax[0] + ax[1] * ax[1]);
    }
    let mut upper = Vec::new();
    for (i, j, axis) in grid.bonds() {
        let xi = grid.coord(i);
        let xj = grid.coord(j);
        let mid = [(xi[0] + xj[0]) / 2.0, (xi[1] + xj[1]) / 2.0];
        let am = a.eval(mid)[axis];
        upper.push((i, j, C64::new(-kin, hbar * am / grid.h)));
    }
    Ok(DiscreteHamiltonian {
        grid: grid.clone(),
        sites: (0..grid.len()).collect(),
        diag,
        upper,
        hbar,
        s,
        domain: "full".into(),
        provenance: Provenance::Full,
    })
}

/// Principal submatrix on the masked points.
pub fn restrict_dirichlet(h: &DiscreteHamiltonian, mask: &DomainMask) -> Result<DiscreteHamiltonian> {
    mask.check_grid(&h.grid)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask(mask.label.clone()));
    }
    let local = h.local_map();
    let mut new_of_old = vec![usize::MAX; h.dim()];
    let mut sites = Vec::new();
    let mut diag = Vec::new();
    for g in mask.indices() {
        let p = local[g];
        if p == usize::MAX {
            return Err(Error::Shape(format!(
                "mask {} leaves the domain {} of the operator",
                mask.label, h.domain
            )));
        }
        new_of_old[p] = sites.len();
        sites.push(g);
        diag.push(h.diag[p]);
    }
    let upper = h
        .upper
        .iter()
        .filter_map(|&(p, q, v)| {
            let (a, b) = (new_of_old[p], new_of_old[q]);
            (a != usize::MAX && b != usize::MAX).then_some((a, b, v))
        })
        .collect();
    Ok(DiscreteHamiltonian {
        grid: h.grid.clone(),
        sites,
        diag,
        upper,
        hbar: h.hbar,
        s: h.s,
        domain: mask.label.clone(),
        provenance: Provenance::DirichletRestricted,
    })
}

impl DiscreteHamiltonian {
    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    /// Grid index -> local index, `usize::MAX` off the domain.
    pub fn local_map(&self) -> Vec<usize> {
        let mut m = vec![usize::MAX; self.grid.len()];
        for (p, &g) in self.sites.iter().enumerate() {
            m[g] = p;
        }
        m
    }

    pub fn domain_mask(&self) -> DomainMask {
        DomainMask::from_indices(&self.grid, &self.domain, &self.sites)
    }

    pub fn is_real(&self) -> bool {
        self.upper.iter().all(|e| e.2.im == 0.0)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for (p, &d) in self.diag.iter().enumerate() {
            m[[p, p]] = C64::new(d, 0.0);
        }
        for &(p, q, v) in &self.upper {
            m[[p, q]] = v;
            m[[q, p]] = v.conj();
        }
        m
    }

    /// Dense real matrix; only meaningful when `is_real()`.
    pub fn to_dense_real(&self) -> Array2<f64> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for (p, &d) in self.diag.iter().enumerate() {
            m[[p, p]] = d;
        }
        for &(p, q, v) in &self.upper {
            m[[p, q]] = v.re;
            m[[q, p]] = v.re;
        }
        m
    }

    /// y = (H - shift) x
    pub fn apply_shifted(&self, x: &[C64], shift: f64, y: &mut [C64]) {
        for p in 0..self.dim() {
            y[p] = x[p] * (self.diag[p] - shift);
        }
        for &(p, q, v) in &self.upper {
            y[p] += v * x[q];
            y[q] += v.conj() * x[p];
        }
    }

    /// Y = (H − shift) X for a block of columns.
    pub fn apply_block_shifted(&self, x: &Array2<C64>, shift: f64) -> Array2<C64> {
        let (n, m) = x.dim();
        assert_eq!(n, self.dim(), "block rows must match the operator dimension");
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut y = vec![C64::new(0.0, 0.0); n * m];
        for p in 0..n {
            let d = self.diag[p] - shift;
            for c in 0..m {
                y[p * m + c] = xs[p * m + c] * d;
            }
        }
        for &(p, q, v) in &self.upper {
            let vc = v.conj();
            for c in 0..m {
                y[p * m + c] += v * xs[q * m + c];
                y[q * m + c] += vc * xs[p * m + c];
            }
        }
        Array2::from_shape_vec((n, m), y).expect("shape")
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply_shifted(x, 0.0, &mut y);
        y
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut radius = vec![0.0; self.dim()];
        for &(p, q, v) in &self.upper {
            radius[p] += v.norm();
            radius[q] += v.norm();
        }
        let lo = (0..self.dim()).map(|p| self.diag[p] - radius[p]).fold(f64::INFINITY, f64::min);
        let hi = (0..self.dim()).map(|p| self.diag[p] + radius[p]).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Largest |i - j| over nonzero couplings.
    pub fn bandwidth(&self) -> usize {
        self.upper.iter().map(|&(p, q, _)| q - p).max().unwrap_or(0)
    }

    /// Embed a local vector into the full grid, zero elsewhere.
    pub fn extend(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.grid.len()];
        for (p, &g) in self.sites.iter().enumerate() {
            out[g] = x[p];
        }
        out
    }

    /// Grid function sampled on the operator's sites.
    pub fn sample(&self, f: &[f64]) -> Vec<f64> {
        self.sites.iter().map(|&g| f[g]).collect()
    }
}

/// [H, Θ] = HΘ − ΘH, Θ a real multiplier given on the operator's sites.
pub fn commutator_with_multiplier(h: &DiscreteHamiltonian, theta: &[f64]) -> Result<Array2<C64>> {
    if theta.len() != h.dim() {
        return Err(Error::Shape(format!(
            "multiplier has {} entries, operator acts on {}",
            theta.len(),
            h.dim()
        )));
    }
    let m = h.to_dense();
    let n = h.dim();
    let mut out = Array2::zeros((n, n));
    for j in 0..n {
        for k in 0..n {
            let v = m[[j, k]];
            if v != C64::new(0.0, 0.0) {
                out[[j, k]] = v * theta[k] - theta[j] * v;
            }
        }
    }
    Ok(out)
}

/// Diagonal of ∂ₛV or ∂ₛ²V on the operator's sites; must vanish outside the
/// declared support.
pub fn potential_derivative_operator(
    v: &PotentialFamily,
    h: &DiscreteHamiltonian,
    s: f64,
    order: u32,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Invalid(format!("s = {s} outside [0, 1]")));
    }
    if order != 1 && order != 2 {
        return Err(Error::Invalid(format!("derivative order {order} not in {{1, 2}}")));
    }
    let mut out = Vec::with_capacity(h.dim());
    for &g in &h.sites {
        let x = h.grid.coord(g);
        let d = v.deriv(x, s, order);
        if d != 0.0 && !v.declared_support(x) {
            return Err(Error::Precondition(format!(
                "dV/ds nonzero at {:?}, outside declared support",
                x
            )));
        }
        out.push(d);
    }
    Ok(out)
}
