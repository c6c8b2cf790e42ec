use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform lattice of interior points, 1D or 2D. Dirichlet walls sit one
/// spacing outside the first and last point along every axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    pub origin: [f64; 2],
}

impl Grid {
    pub fn new(dim: usize, n: usize, h: f64, origin: [f64; 2]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Invalid(format!("grid dimension {dim} not in {{1, 2}}")));
        }
        if n == 0 {
            return Err(Error::Invalid("grid needs at least one point per axis".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Invalid(format!("grid spacing {h} must be positive")));
        }
        Ok(Grid { dim, n, h, origin })
    }

    /// Interior points of the box `[lo, hi]^dim` with `n` points per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Invalid(format!("empty box [{lo}, {hi}]")));
        }
        let h = (hi - lo) / (n as f64 + 1.0);
        Grid::new(dim, n, h, [lo + h, lo + h])
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis indices of a flat index; x varies fastest.
    pub fn axes_of(&self, i: usize) -> [usize; 2] {
        if self.dim == 1 {
            [i, 0]
        } else {
            [i % self.n, i / self.n]
        }
    }

    pub fn flat(&self, ix: usize, iy: usize) -> usize {
        if self.dim == 1 {
            ix
        } else {
            ix + self.n * iy
        }
    }

    pub fn coord(&self, i: usize) -> [f64; 2] {
        let [ix, iy] = self.axes_of(i);
        let x = self.origin[0] + ix as f64 * self.h;
        let y = if self.dim == 1 { 0.0 } else { self.origin[1] + iy as f64 * self.h };
        [x, y]
    }

    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.n
        }
    }

    /// Nearest-neighbour bonds `(i, j, axis)` with `j = i + stride(axis)`.
    pub fn bonds(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.dim * self.len());
        for i in 0..self.len() {
            let ax = self.axes_of(i);
            for axis in 0..self.dim {
                if ax[axis] + 1 < self.n {
                    out.push((i, i + self.stride(axis), axis));
                }
            }
        }
        out
    }

    /// Lattice neighbours of `i` inside the box.
    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let ax = self.axes_of(i);
        (0..self.dim).flat_map(move |axis| {
            let s = self.stride(axis);
            let lo = (ax[axis] > 0).then(|| i - s);
            let hi = (ax[axis] + 1 < self.n).then(|| i + s);
            lo.into_iter().chain(hi)
        })
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        let a = self.coord(i);
        let b = self.coord(j);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// Volume element `h^dim` for discrete L² norms.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn coords_axis(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.origin[0] + k as f64 * self.h).collect()
    }
}
