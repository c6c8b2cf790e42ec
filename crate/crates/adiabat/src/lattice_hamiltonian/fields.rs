use std::fmt;
use std::sync::Arc;

use super::grid::Grid;
use super::mask::DomainMask;
use crate::error::{Error, Result};

type Field2 = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
type Scalar = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
type Indicator = Arc<dyn Fn([f64; 2]) -> bool + Send + Sync>;

/// Real vector potential with declared bounds on |A| and its first differences.
#[derive(Clone)]
pub struct VectorPotentialField {
    field: Option<Field2>,
    pub bound: f64,
    pub grad_bound: f64,
}

impl fmt::Debug for VectorPotentialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorPotentialField")
            .field("zero", &self.field.is_none())
            .field("bound", &self.bound)
            .field("grad_bound", &self.grad_bound)
            .finish()
    }
}

impl VectorPotentialField {
    pub fn zero() -> Self {
        VectorPotentialField { field: None, bound: 0.0, grad_bound: 0.0 }
    }

    pub fn new(
        f: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
        bound: f64,
        grad_bound: f64,
    ) -> Self {
        VectorPotentialField { field: Some(Arc::new(f)), bound, grad_bound }
    }

    /// Uniform field B in the symmetric gauge, A = (B/2)(-y, x).
    pub fn symmetric_gauge(b: f64, extent: f64) -> Self {
        let bound = 0.5 * b.abs() * extent * std::f64::consts::SQRT_2;
        Self::new(move |[x, y]| [-0.5 * b * y, 0.5 * b * x], bound, 0.5 * b.abs())
    }

    pub fn is_zero(&self) -> bool {
        self.field.is_none()
    }

    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        match &self.field {
            Some(f) => f(x),
            None => [0.0, 0.0],
        }
    }

    /// Verify the declared bounds on the nodes and bond midpoints of `grid`.
    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.is_zero() {
            return Ok(());
        }
        let tol = 1e-12 * (1.0 + self.bound);
        for i in 0..grid.len() {
            let a = self.eval(grid.coord(i));
            if !a[0].is_finite() || !a[1].is_finite() {
                return Err(Error::NonFinite(format!("vector potential at point {i}")));
            }
            if a[0].hypot(a[1]) > self.bound + tol {
                return Err(Error::Invalid(format!("|A| exceeds declared bound at point {i}")));
            }
        }
        for (i, j, _) in grid.bonds() {
            let a = self.eval(grid.coord(i));
            let b = self.eval(grid.coord(j));
            let d = (a[0] - b[0]).hypot(a[1] - b[1]) / grid.h;
            if d > self.grad_bound * (1.0 + 1e-9) + tol {
                return Err(Error::Invalid(format!("|dA| exceeds declared bound on bond ({i},{j})")));
            }
        }
        Ok(())
    }
}

/// Potential polynomial in s: V(x, s) = sum_k s^k f_k(x).
#[derive(Clone)]
pub struct PotentialFamily {
    pub label: String,
    terms: Vec<(i32, Scalar)>,
    support: Indicator,
}

impl fmt::Debug for PotentialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let powers: Vec<i32> = self.terms.iter().map(|t| t.0).collect();
        f.debug_struct("PotentialFamily")
            .field("label", &self.label)
            .field("powers", &powers)
            .finish()
    }
}

impl PotentialFamily {
    /// s-independent potential; the declared support of dV/ds is empty.
    pub fn stationary(label: &str, v0: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        PotentialFamily {
            label: label.into(),
            terms: vec![(0, Arc::new(v0))],
            support: Arc::new(|_| false),
        }
    }

    pub fn zero() -> Self {
        Self::stationary("zero", |_| 0.0)
    }

    /// Add `s^power * f(x)`.
    pub fn with_term(
        mut self,
        power: i32,
        f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert!(power >= 0);
        self.terms.push((power, Arc::new(f)));
        self
    }

    /// Declare where dV/ds may be nonzero.
    pub fn with_support(mut self, support: impl Fn([f64; 2]) -> bool + Send + Sync + 'static) -> Self {
        self.support = Arc::new(support);
        self
    }

    pub fn value(&self, x: [f64; 2], s: f64) -> f64 {
        self.terms.iter().map(|(k, f)| s.powi(*k) * f(x)).sum()
    }

    /// d^order V / ds^order at (x, s).
    pub fn deriv(&self, x: [f64; 2], s: f64, order: u32) -> f64 {
        let mut acc = 0.0;
        for (k, f) in &self.terms {
            let k = *k;
            if k < order as i32 {
                continue;
            }
            let mut c = 1.0;
            for j in 0..order as i32 {
                c *= (k - j) as f64;
            }
            acc += c * s.powi(k - order as i32) * f(x);
        }
        acc
    }

    pub fn is_stationary(&self) -> bool {
        self.terms.iter().all(|(k, _)| *k == 0)
    }

    pub fn declared_support(&self, x: [f64; 2]) -> bool {
        (self.support)(x)
    }

    pub fn support_mask(&self, grid: &Grid) -> DomainMask {
        DomainMask::from_fn(grid, "supp dV", |x| self.declared_support(x))
    }

    /// Check that dV/ds and d²V/ds² vanish outside the declared support at `s`.
    pub fn check_support(&self, grid: &Grid, s: f64) -> Result<()> {
        for i in 0..grid.len() {
            let x = grid.coord(i);
            if self.declared_support(x) {
                continue;
            }
            for order in 1..=2 {
                let d = self.deriv(x, s, order);
                if d != 0.0 {
                    return Err(Error::Precondition(format!(
                        "d^{order}V/ds^{order} = {d:e} at x = {:?}, outside declared support",
                        x
                    )));
                }
            }
        }
        Ok(())
    }
}
