use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Boolean indicator on the points of a grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainMask {
    pub label: String,
    pub inside: Vec<bool>,
}

impl DomainMask {
    pub fn full(grid: &Grid, label: &str) -> Self {
        DomainMask { label: label.into(), inside: vec![true; grid.len()] }
    }

    pub fn empty(grid: &Grid, label: &str) -> Self {
        DomainMask { label: label.into(), inside: vec![false; grid.len()] }
    }

    pub fn from_fn(grid: &Grid, label: &str, f: impl Fn([f64; 2]) -> bool) -> Self {
        let inside = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        DomainMask { label: label.into(), inside }
    }

    pub fn from_indices(grid: &Grid, label: &str, idx: &[usize]) -> Self {
        let mut m = DomainMask::empty(grid, label);
        for &i in idx {
            m.inside[i] = true;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.inside[i]
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.inside.len()).filter(|&i| self.inside[i]).collect()
    }

    pub fn relabel(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }

    pub fn complement(&self) -> Self {
        DomainMask {
            label: format!("{}^c", self.label),
            inside: self.inside.iter().map(|b| !b).collect(),
        }
    }

    fn zip(&self, other: &Self, label: String, f: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(self.len(), other.len(), "masks on different grids");
        let inside = self.inside.iter().zip(&other.inside).map(|(&a, &b)| f(a, b)).collect();
        DomainMask { label, inside }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, format!("{}+{}", self.label, other.label), |a, b| a || b)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        self.zip(other, format!("{}*{}", self.label, other.label), |a, b| a && b)
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.zip(other, format!("{}-{}", self.label, other.label), |a, b| a && !b)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.inside.iter().zip(&other.inside).all(|(&a, &b)| !a || b)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.inside.iter().zip(&other.inside).all(|(&a, &b)| !(a && b))
    }

    /// Symmetric-difference cell count.
    pub fn symmetric_difference(&self, other: &Self) -> usize {
        self.inside.iter().zip(&other.inside).filter(|(a, b)| a != b).count()
    }

    /// Minimum Euclidean distance between points of the two masks;
    /// infinite when either is empty.
    pub fn distance(&self, other: &Self, grid: &Grid) -> f64 {
        let a = self.indices();
        let b = other.indices();
        let mut best = f64::INFINITY;
        for &i in &a {
            for &j in &b {
                let d = grid.dist(i, j);
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// Distance from every grid point to the nearest masked point.
    pub fn distance_field(&self, grid: &Grid) -> Vec<f64> {
        let pts = self.indices();
        (0..grid.len())
            .map(|i| pts.iter().map(|&j| grid.dist(i, j)).fold(f64::INFINITY, f64::min))
            .collect()
    }

    /// Points within Euclidean distance `r` of the mask.
    pub fn dilate(&self, grid: &Grid, r: f64) -> Self {
        let d = self.distance_field(grid);
        DomainMask {
            label: format!("{}+{r}", self.label),
            inside: d.iter().map(|&x| x <= r + 1e-12 * grid.h).collect(),
        }
    }

    /// Add every lattice neighbour of the mask (one stencil radius).
    pub fn stencil_dilate(&self, grid: &Grid) -> Self {
        let mut out = self.clone();
        for i in self.indices() {
            for j in grid.neighbours(i) {
                out.inside[j] = true;
            }
        }
        out
    }

    /// Masked points with a lattice neighbour outside the mask, together with
    /// those outside neighbours. Box walls do not count as boundary.
    pub fn boundary(&self, grid: &Grid) -> Self {
        let mut out = DomainMask::empty(grid, &format!("d{}", self.label));
        for (i, j, _) in grid.bonds() {
            if self.inside[i] != self.inside[j] {
                out.inside[i] = true;
                out.inside[j] = true;
            }
        }
        out
    }

    /// Connected components under nearest-neighbour adjacency, in order of
    /// their smallest index.
    pub fn components(&self, grid: &Grid) -> Vec<DomainMask> {
        let mut seen = vec![false; grid.len()];
        let mut out = Vec::new();
        for start in 0..grid.len() {
            if !self.inside[start] || seen[start] {
                continue;
            }
            let mut comp = DomainMask::empty(grid, &format!("{}#{}", self.label, out.len()));
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(i) = queue.pop_front() {
                comp.inside[i] = true;
                for j in grid.neighbours(i) {
                    if self.inside[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// True if some point of the mask lies on the outermost layer of the box.
    pub fn touches_box(&self, grid: &Grid) -> bool {
        self.indices().into_iter().any(|i| {
            let ax = grid.axes_of(i);
            (0..grid.dim).any(|a| ax[a] == 0 || ax[a] + 1 == grid.n)
        })
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.len() != grid.len() {
            return Err(Error::Shape(format!(
                "mask {} has {} points, grid has {}",
                self.label,
                self.len(),
                grid.len()
            )));
        }
        Ok(())
    }

    /// Portable bitmap (plain PBM, P1) of a 2D mask; 1D masks become one row.
    pub fn to_pbm(&self, grid: &Grid) -> String {
        let (w, rows) = if grid.dim == 1 { (grid.n, 1) } else { (grid.n, grid.n) };
        let mut s = format!("P1\n# {}\n{} {}\n", self.label, w, rows);
        for r in (0..rows).rev() {
            let line: Vec<&str> = (0..w)
                .map(|c| if self.inside[grid.flat(c, r)] { "1" } else { "0" })
                .collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}
