use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice_hamiltonian::{DomainMask, Grid, PotentialFamily};

/// Slack for comparing lattice distances against margins.
const DIST_TOL: f64 = 1e-9;

/// Partition of the grid into the forbidden region J = {V > E + b}, the
/// enclosed allowed well I and the outer allowed region O.
#[derive(Clone, Debug, Serialize)]
pub struct Regions {
    pub j: DomainMask,
    pub i: DomainMask,
    pub o: DomainMask,
    pub energy: f64,
    pub b: f64,
    pub s: f64,
}

impl Regions {
    /// Regions of a scenario without a barrier: everything is interior.
    pub fn interior_only(grid: &Grid, s: f64, energy: f64, b: f64) -> Self {
        Regions {
            j: DomainMask::empty(grid, "J"),
            i: DomainMask::full(grid, "I"),
            o: DomainMask::empty(grid, "O"),
            energy,
            b,
            s,
        }
    }

    /// Lattice distance from I to O, the thickness of the barrier.
    pub fn barrier_width(&self, grid: &Grid) -> f64 {
        self.i.distance(&self.o, grid)
    }

    pub fn is_partition(&self) -> bool {
        let n = self.j.len();
        (0..n).all(|k| [self.j.inside[k], self.i.inside[k], self.o.inside[k]].iter().filter(|&&b| b).count() == 1)
    }
}

pub fn classify_regions(potential: &PotentialFamily, s: f64, e: f64, b: f64, grid: &Grid) -> Result<Regions> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Invalid(format!("barrier parameter b = {b} must be positive")));
    }
    if !e.is_finite() {
        return Err(Error::NonFinite(format!("reference energy {e}")));
    }
    let j = DomainMask::from_fn(grid, "J", |x| potential.value(x, s) > e + b);
    if j.is_empty() {
        return Err(Error::Scenario(format!("no point with V > E + b = {} at s = {s}", e + b)));
    }
    let allowed = j.complement();
    let (mut outer, mut inner) = (DomainMask::empty(grid, "O"), Vec::new());
    for comp in allowed.components(grid) {
        if comp.touches_box(grid) {
            outer = outer.union(&comp);
        } else {
            inner.push(comp);
        }
    }
    if inner.is_empty() || outer.is_empty() {
        return Err(Error::Scenario(format!(
            "barrier at E + b = {} does not separate an enclosed well from the outside (s = {s})",
            e + b
        )));
    }
    if inner.len() > 1 {
        return Err(Error::Scenario(format!("{} disconnected interior wells at s = {s}", inner.len())));
    }
    Ok(Regions {
        j,
        i: inner.pop().expect("one component").relabel("I"),
        o: outer.relabel("O"),
        energy: e,
        b,
        s,
    })
}

/// Both margin distances for one Ω at one s.
#[derive(Clone, Debug, Serialize)]
pub struct MarginCertificate {
    pub s: f64,
    pub c: f64,
    /// dist(O, Ω)
    pub outer: f64,
    /// dist(I, Ωᶜ)
    pub inner: f64,
}

impl MarginCertificate {
    pub fn holds(&self) -> bool {
        self.outer + DIST_TOL >= self.c && self.inner + DIST_TOL >= self.c
    }
}

pub fn margin_certificate(regions: &Regions, omega: &DomainMask, c: f64, grid: &Grid) -> MarginCertificate {
    MarginCertificate {
        s: regions.s,
        c,
        outer: regions.o.distance(omega, grid),
        inner: regions.i.distance(&omega.complement(), grid),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OmegaChoice {
    pub omega: DomainMask,
    pub width: f64,
    pub certificate: MarginCertificate,
}

/// Ω = I dilated halfway across the barrier, with both margins certified.
pub fn choose_omega(regions: &Regions, c: f64, grid: &Grid) -> Result<OmegaChoice> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Invalid(format!("margin c = {c} must be positive")));
    }
    let width = regions.barrier_width(grid);
    if width + DIST_TOL < 2.0 * c + 2.0 * grid.h {
        return Err(Error::Scenario(format!(
            "barrier width {width:.4} below 2c + 2h = {:.4}",
            2.0 * c + 2.0 * grid.h
        )));
    }
    let omega = regions.i.dilate(grid, width / 2.0).relabel("Omega");
    let certificate = margin_certificate(regions, &omega, c, grid);
    if !certificate.holds() {
        return Err(Error::Scenario(format!(
            "margins dist(O, Omega) = {:.4}, dist(I, Omega^c) = {:.4} below c = {c}",
            certificate.outer, certificate.inner
        )));
    }
    Ok(OmegaChoice { omega, width, certificate })
}
