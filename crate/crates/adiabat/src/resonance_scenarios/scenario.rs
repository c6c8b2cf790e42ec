use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::regions::{choose_omega, classify_regions, margin_certificate, MarginCertificate, Regions};
use super::track::{track_eigenvalue, EnergyTrack};
use crate::error::{Error, Result};
use crate::lattice_hamiltonian::{
    build_hamiltonian, restrict_dirichlet, DiscreteHamiltonian, DomainMask, Grid, PotentialFamily,
    VectorPotentialField,
};
use crate::projection_factory::{
    build_cutoff, build_interior_projection_level, build_nearly_spectral, CutoffField, ProjectionFrame,
};
use crate::spectral_calculus::eigensolve;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaRule {
    /// I dilated halfway into J.
    Dilation,
    /// The whole box; no barrier, no cutoff, δ = 0.
    FullBox,
}

#[derive(Clone, Debug)]
pub struct ShapeResonanceScenario {
    pub name: String,
    pub summary: String,
    pub box_lo: f64,
    pub box_hi: f64,
    pub grid: Grid,
    pub potential: PotentialFamily,
    pub field: VectorPotentialField,
    pub b: f64,
    pub c: f64,
    pub hbar: f64,
    pub hbar_ladder: Vec<f64>,
    /// Index of the tracked eigenvalue of H_Ω(0), ascending from 0.
    pub level: usize,
    /// E(s) must stay inside this interval.
    pub energy_window: (f64, f64),
    pub gap_min: f64,
    pub omega_rule: OmegaRule,
    pub s_samples: Vec<f64>,
}

/// Parameters of a scenario in serialisable form.
#[derive(Clone, Debug, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub summary: String,
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    pub box_lo: f64,
    pub box_hi: f64,
    pub b: f64,
    pub c: f64,
    pub hbar: f64,
    pub hbar_ladder: Vec<f64>,
    pub level: usize,
    pub energy_window: (f64, f64),
    pub gap_min: f64,
    pub omega_rule: OmegaRule,
    pub s_samples: Vec<f64>,
}

const OMEGA_ITERATIONS: usize = 6;

impl ShapeResonanceScenario {
    pub fn describe(&self) -> ScenarioSummary {
        ScenarioSummary {
            name: self.name.clone(),
            summary: self.summary.clone(),
            dim: self.grid.dim,
            n: self.grid.n,
            h: self.grid.h,
            box_lo: self.box_lo,
            box_hi: self.box_hi,
            b: self.b,
            c: self.c,
            hbar: self.hbar,
            hbar_ladder: self.hbar_ladder.clone(),
            level: self.level,
            energy_window: self.energy_window,
            gap_min: self.gap_min,
            omega_rule: self.omega_rule,
            s_samples: self.s_samples.clone(),
        }
    }

    /// Same scenario on `n` points per axis of the same box.
    pub fn with_resolution(&self, n: usize) -> Result<Self> {
        let grid = Grid::cube(self.grid.dim, self.box_lo, self.box_hi, n)?;
        Ok(ShapeResonanceScenario { grid, ..self.clone() })
    }

    pub fn hamiltonian(&self, hbar: f64, s: f64) -> Result<DiscreteHamiltonian> {
        build_hamiltonian(&self.grid, &self.field, &self.potential, s, hbar)
    }

    fn restricted(&self, omega: &DomainMask, hbar: f64, s: f64) -> Result<DiscreteHamiltonian> {
        let h = self.hamiltonian(hbar, s)?;
        match self.omega_rule {
            OmegaRule::FullBox => Ok(h),
            OmegaRule::Dilation => restrict_dirichlet(&h, omega),
        }
    }

    fn regions_at(&self, s: f64, e: f64) -> Result<Regions> {
        match self.omega_rule {
            OmegaRule::FullBox => Ok(Regions::interior_only(&self.grid, s, e, self.b)),
            OmegaRule::Dilation => classify_regions(&self.potential, s, e, self.b, &self.grid),
        }
    }

    /// Ω at s = 0, found by alternating region classification at the
    /// current energy with the eigensolve of H_Ω until Ω stops changing.
    fn settle_omega(&self, hbar: f64) -> Result<(DomainMask, f64)> {
        if self.omega_rule == OmegaRule::FullBox {
            let eig = eigensolve(&self.hamiltonian(hbar, 0.0)?)?;
            let e = *eig.values.get(self.level).ok_or_else(|| Error::Scenario("level beyond spectrum".into()))?;
            return Ok((DomainMask::full(&self.grid, "Omega"), e));
        }
        let mut e = (0..self.grid.len())
            .map(|i| self.potential.value(self.grid.coord(i), 0.0))
            .fold(f64::INFINITY, f64::min);
        let mut omega: Option<DomainMask> = None;
        for _ in 0..OMEGA_ITERATIONS {
            let regions = classify_regions(&self.potential, 0.0, e, self.b, &self.grid)?;
            let next = choose_omega(&regions, self.c, &self.grid)?.omega;
            let eig = eigensolve(&restrict_dirichlet(&self.hamiltonian(hbar, 0.0)?, &next)?)?;
            e = *eig
                .values
                .get(self.level)
                .ok_or_else(|| Error::Scenario(format!("level {} beyond dim H_Omega", self.level)))?;
            if omega.as_ref().is_some_and(|o| o.inside == next.inside) {
                return Ok((next, e));
            }
            omega = Some(next);
        }
        Err(Error::Scenario(format!("Omega did not settle after {OMEGA_ITERATIONS} iterations at hbar = {hbar}")))
    }

    /// Fixes Ω from s = 0, tracks E(s) over the s-samples and certifies every
    /// invariant of the scenario at each sample.
    pub fn setup(&self, hbar: f64) -> Result<ScenarioSetup> {
        let (omega, e0) = self.settle_omega(hbar)?;
        let (lo, hi) = self.energy_window;
        if !(e0 >= lo && e0 <= hi) {
            return Err(Error::Scenario(format!("E(0) = {e0} outside the energy window [{lo}, {hi}]")));
        }
        let family = |s: f64| self.restricted(&omega, hbar, s);
        let half = 0.5 * self.gap_min.max(1e-3);
        let track = track_eigenvalue(&family, &self.s_samples, (e0 - half, e0 + half), self.gap_min)?;
        if let Some((s, e)) = track.s.iter().zip(&track.energy).find(|(_, &e)| e < lo || e > hi) {
            return Err(Error::Scenario(format!("E({s}) = {e} leaves the energy window")));
        }
        let supp = self.potential.support_mask(&self.grid);
        let mut regions = Vec::new();
        let mut certificates = Vec::new();
        let mut omega_drift = Vec::new();
        let mut natural_prev: Option<DomainMask> = None;
        for (&s, &e) in track.s.iter().zip(&track.energy) {
            let r = self.regions_at(s, e)?;
            if !r.is_partition() {
                return Err(Error::Scenario(format!("J, I, O do not partition the grid at s = {s}")));
            }
            self.potential.check_support(&self.grid, s)?;
            if !supp.is_subset(&r.i) {
                return Err(Error::Scenario(format!("support of dV/ds leaves I at s = {s}")));
            }
            if !r.j.is_empty() {
                let vmax = r.j.indices().iter().map(|&i| self.potential.value(self.grid.coord(i), s)).fold(f64::MIN, f64::max);
                if !(e + self.b < vmax) {
                    return Err(Error::Scenario(format!("E + b = {} not below the barrier top {vmax} at s = {s}", e + self.b)));
                }
            }
            let cert = margin_certificate(&r, &omega, self.c, &self.grid);
            if !cert.holds() {
                return Err(Error::Scenario(format!(
                    "margin certificate fails at s = {s}: dist(O, Omega) = {}, dist(I, Omega^c) = {}",
                    cert.outer, cert.inner
                )));
            }
            if self.omega_rule == OmegaRule::Dilation {
                let natural = choose_omega(&r, self.c, &self.grid)?.omega;
                omega_drift.push(natural_prev.as_ref().map_or(0, |p| p.symmetric_difference(&natural)));
                natural_prev = Some(natural);
            } else {
                omega_drift.push(0);
            }
            certificates.push(cert);
            regions.push(r);
        }
        let cutoff = build_cutoff(&omega, self.c, &self.grid)?;
        Ok(ScenarioSetup {
            scenario: self.clone(),
            hbar,
            omega,
            regions,
            certificates,
            omega_drift,
            track,
            cutoff,
        })
    }
}

/// A scenario at one ħ with Ω fixed and all invariants certified.
#[derive(Clone, Debug)]
pub struct ScenarioSetup {
    pub scenario: ShapeResonanceScenario,
    pub hbar: f64,
    pub omega: DomainMask,
    /// J, I, O at each s-sample, classified at the tracked E(s).
    pub regions: Vec<Regions>,
    pub certificates: Vec<MarginCertificate>,
    /// Cells by which the midpoint dilation Ω(s) would change between
    /// consecutive samples; Ω itself stays at its s = 0 value.
    pub omega_drift: Vec<usize>,
    pub track: EnergyTrack,
    pub cutoff: CutoffField,
}

impl ScenarioSetup {
    pub fn grid(&self) -> &Grid {
        &self.scenario.grid
    }

    pub fn h_full(&self, s: f64) -> Result<DiscreteHamiltonian> {
        self.scenario.hamiltonian(self.hbar, s)
    }

    pub fn h_omega(&self, s: f64) -> Result<DiscreteHamiltonian> {
        self.scenario.restricted(&self.omega, self.hbar, s)
    }

    /// Eigenprojection of H_Ω(s) at the tracked level, on the full grid.
    pub fn interior_frame(&self, s: f64) -> Result<ProjectionFrame> {
        build_interior_projection_level(&self.h_omega(s)?, self.track.level, self.scenario.gap_min)
    }

    /// Cut-off frame (1 − χ)ψ, orthonormalised.
    pub fn frame(&self, s: f64) -> Result<ProjectionFrame> {
        build_nearly_spectral(&self.interior_frame(s)?, &self.cutoff)
    }

    pub fn energy(&self, s: f64) -> f64 {
        self.track.interpolate(s)
    }

    /// The collar B where χ = 1.
    pub fn collar(&self) -> &DomainMask {
        &self.cutoff.collar
    }

    /// Smallest ratio of a margin distance to c over all samples.
    pub fn margin_ratio(&self) -> f64 {
        self.certificates.iter().map(|c| c.outer.min(c.inner) / c.c).fold(f64::INFINITY, f64::min)
    }

    /// J, I, O at s = 0, Ω and the collar as plain PBM files in `dir`.
    pub fn write_masks(&self, dir: &Path) -> Result<Vec<String>> {
        fs::create_dir_all(dir)?;
        let r = &self.regions[0];
        let g = self.grid();
        let masks = [("J", &r.j), ("I", &r.i), ("O", &r.o), ("omega", &self.omega), ("collar", self.collar())];
        let mut names = Vec::new();
        for (name, m) in masks {
            let file = format!("{}_{name}.pbm", self.scenario.name);
            fs::write(dir.join(&file), m.to_pbm(g))?;
            names.push(file);
        }
        Ok(names)
    }
}
