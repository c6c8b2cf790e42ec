use ndarray::Array2;
use serde::Serialize;

use super::fit::{fit_decay, DecayFit};
use crate::error::{Error, Result};
use crate::lattice_hamiltonian::{restrict_dirichlet, DiscreteHamiltonian, DomainMask, Grid};
use crate::linalg;
use crate::projection_factory::{projection_derivative, FrameFamily};
use crate::resonance_scenarios::{Regions, ScenarioSetup, ShapeResonanceScenario};
use crate::spectral_calculus::{solve_shifted, Backend, Smoothstep};
use crate::C64;

/// ‖χ_rows R χ_cols‖ for R = (H − z)⁻¹, masks given on the grid.
fn sandwiched_resolvent_norm(h: &DiscreteHamiltonian, z: C64, rows: &DomainMask, cols: &DomainMask) -> Result<f64> {
    let local = h.local_map();
    let cols_local: Vec<usize> = cols.indices().iter().map(|&g| local[g]).collect();
    let rows_local: Vec<usize> = rows.indices().iter().map(|&g| local[g]).collect();
    if cols_local.iter().chain(&rows_local).any(|&p| p == usize::MAX) {
        return Err(Error::Precondition("probe masks leave the operator's domain".into()));
    }
    let mut rhs = linalg::zeros(h.dim(), cols_local.len());
    for (k, &p) in cols_local.iter().enumerate() {
        rhs[[p, k]] = C64::new(1.0, 0.0);
    }
    let x = solve_shifted(h, 0.0, z, &rhs, Backend::Auto)?;
    let sub = Array2::from_shape_fn((rows_local.len(), cols_local.len()), |(i, j)| x[[rows_local[i], j]]);
    linalg::op_norm(&sub)
}

/// Inner and outer rims of J of width `w`, plus bands at growing distance
/// from I for the separation probe.
#[derive(Clone, Debug)]
pub struct BarrierProbes {
    pub j: DomainMask,
    pub inner: DomainMask,
    pub outer: DomainMask,
    pub bands: Vec<(f64, DomainMask)>,
}

pub fn barrier_probes(regions: &Regions, grid: &Grid, w: f64, min_sep: f64) -> Result<BarrierProbes> {
    let j = regions.j.clone();
    let d_in = regions.i.distance_field(grid);
    let d_out = regions.o.distance_field(grid);
    let band = |lo: f64, hi: f64, d: &[f64], label: &str| DomainMask {
        label: label.into(),
        inside: (0..grid.len()).map(|i| j.contains(i) && d[i] > lo && d[i] <= hi).collect(),
    };
    let inner = band(0.0, w, &d_in, "J_i");
    let outer = band(0.0, w, &d_out, "J_j");
    let width = regions.barrier_width(grid);
    // three bands from min_sep beyond the inner one to the far edge of J
    let span = width - 2.0 * w - min_sep;
    if !(span > 0.0) {
        return Err(Error::Precondition(format!(
            "barrier of width {width} cannot hold bands of width {w} separated by {min_sep}"
        )));
    }
    let bands = (0..3)
        .map(|k| {
            let lo = w + min_sep + k as f64 * span / 2.0;
            (lo, band(lo, lo + w, &d_in, &format!("J_band{k}")))
        })
        .collect();
    Ok(BarrierProbes { j, inner, outer, bands })
}

#[derive(Clone, Debug, Serialize)]
pub struct CombesThomasReport {
    pub energy: f64,
    pub b: f64,
    pub separation: f64,
    pub hbar: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: DecayFit,
}

fn check_forbidden(scenario: &ShapeResonanceScenario, s: f64, e: f64, b: f64, j: &DomainMask) -> Result<()> {
    let grid = &scenario.grid;
    if let Some(i) = j.indices().into_iter().find(|&i| scenario.potential.value(grid.coord(i), s) <= e + b) {
        return Err(Error::Precondition(format!(
            "V = {} <= E + b = {} at {:?} inside J",
            scenario.potential.value(grid.coord(i), s),
            e + b,
            grid.coord(i)
        )));
    }
    Ok(())
}

fn ct_norm(
    scenario: &ShapeResonanceScenario,
    hbar: f64,
    s: f64,
    z: C64,
    j: &DomainMask,
    ji: &DomainMask,
    jj: &DomainMask,
) -> Result<f64> {
    let hj = restrict_dirichlet(&scenario.hamiltonian(hbar, s)?, j)?;
    sandwiched_resolvent_norm(&hj, z, ji, jj)
}

fn ct_preconditions(scenario: &ShapeResonanceScenario, s: f64, e: f64, b: f64, probes: (&DomainMask, &DomainMask, &DomainMask)) -> Result<f64> {
    let (j, ji, jj) = probes;
    let grid = &scenario.grid;
    check_forbidden(scenario, s, e, b, j)?;
    if !ji.is_subset(j) || !jj.is_subset(j) || ji.is_empty() || jj.is_empty() {
        return Err(Error::Precondition("J_i and J_j must be nonempty subsets of J".into()));
    }
    let sep = ji.distance(jj, grid);
    if sep < scenario.c / 2.0 {
        return Err(Error::Precondition(format!("dist(J_i, J_j) = {sep} below c/2 = {}", scenario.c / 2.0)));
    }
    Ok(sep)
}

/// ‖χ_{J_i}(H_J − z)⁻¹χ_{J_j}‖ across the ħ ladder at z = E + ib/4, with a
/// log-linear fit in 1/ħ.
pub fn combes_thomas_check(
    scenario: &ShapeResonanceScenario,
    s: f64,
    e: f64,
    probes: (&DomainMask, &DomainMask, &DomainMask),
    hbar_ladder: &[f64],
) -> Result<CombesThomasReport> {
    let b = scenario.b;
    let separation = ct_preconditions(scenario, s, e, b, probes)?;
    let z = C64::new(e, b / 4.0);
    let norms = hbar_ladder
        .iter()
        .map(|&hb| ct_norm(scenario, hb, s, z, probes.0, probes.1, probes.2))
        .collect::<Result<Vec<f64>>>()?;
    let x: Vec<f64> = hbar_ladder.iter().map(|h| 1.0 / h).collect();
    let fit = fit_decay("combes_thomas", &x, &norms)?;
    Ok(CombesThomasReport { energy: e, b, separation, hbar: hbar_ladder.to_vec(), norms, fit })
}

/// Same norm at one ħ for targets at growing distance from J_i.
pub fn combes_thomas_distance_probe(
    scenario: &ShapeResonanceScenario,
    s: f64,
    e: f64,
    hbar: f64,
    j: &DomainMask,
    ji: &DomainMask,
    targets: &[DomainMask],
) -> Result<Vec<(f64, f64)>> {
    let z = C64::new(e, scenario.b / 4.0);
    targets
        .iter()
        .map(|t| {
            let sep = ct_preconditions(scenario, s, e, scenario.b, (j, ji, t))?;
            Ok((sep, ct_norm(scenario, hbar, s, z, j, ji, t)?))
        })
        .collect()
}

/// A grid function used to probe P_Ω. Probes must vanish farther than c/8
/// from ∂Ω; controls are exempt and are expected not to be small.
#[derive(Clone, Debug)]
pub struct DecayProbe {
    pub label: String,
    pub control: bool,
    pub build: fn(&ScenarioSetup) -> Vec<f64>,
}

/// 1 within c/16 of ∂Ω, a C³ step down to 0 at c/8.
pub fn boundary_layer_probe(setup: &ScenarioSetup) -> Vec<f64> {
    let grid = setup.grid();
    let c = setup.scenario.c;
    let d = setup.omega.boundary(grid).distance_field(grid);
    let step = Smoothstep::new(3);
    d.iter().map(|&x| 1.0 - step.eval(((x - c / 16.0) / (c / 16.0)).clamp(0.0, 1.0))).collect()
}

/// Indicator of I: a control, ‖F P_Ω‖ is of order one.
pub fn interior_control(setup: &ScenarioSetup) -> Vec<f64> {
    setup.regions[0].i.inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

pub fn default_probes() -> Vec<DecayProbe> {
    vec![
        DecayProbe { label: "boundary_layer".into(), control: false, build: boundary_layer_probe },
        DecayProbe { label: "interior_control".into(), control: true, build: interior_control },
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeNorms {
    pub hbar: f64,
    /// ‖F P_Ω‖, ‖F Ṗ_Ω‖, ‖[H_Ω, F] P_Ω‖, ‖F (H_Ω − z)⁻¹ χ_Ĩ‖
    pub norms: [f64; 4],
    /// Smallest singular value of χ_Ĩ Φ.
    pub interior_mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeDecay {
    pub label: String,
    pub control: bool,
    pub rows: Vec<ProbeNorms>,
    /// One fit per norm; `None` where a value vanished identically.
    pub fits: Vec<Option<DecayFit>>,
}

pub const PROBE_NORMS: [&str; 4] = ["F_P", "F_Pdot", "comm_H_F_P", "F_resolvent_chi_I"];

fn probe_norms(setup: &ScenarioSetup, f: &[f64], s: f64, fd_step: f64) -> Result<ProbeNorms> {
    let grid = setup.grid();
    let h = setup.h_omega(s)?;
    let local = h.local_map();
    let fam = |t: f64| setup.interior_frame(t);
    let jet = projection_derivative(&fam as &FrameFamily, s, 1, fd_step)?;
    let on_sites = |v: &Array2<C64>| -> Array2<C64> {
        Array2::from_shape_fn((h.dim(), v.ncols()), |(p, j)| v[[h.sites[p], j]])
    };
    let phi = on_sites(&jet.phi);
    let dphi = on_sites(&jet.dphi);
    let fl: Vec<f64> = h.sites.iter().map(|&g| f[g]).collect();
    let scale = |m: &Array2<C64>| {
        let mut out = m.clone();
        for (p, mut row) in out.rows_mut().into_iter().enumerate() {
            row.mapv_inplace(|z| z * fl[p]);
        }
        out
    };
    let f_phi = scale(&phi);
    let n0 = linalg::op_norm(&f_phi)?;
    let n1 = linalg::outer_norm(&linalg::hstack(&[&scale(&dphi), &f_phi]), &linalg::hstack(&[&phi, &dphi]))?;
    let comm = h.apply_block_shifted(&f_phi, 0.0) - scale(&h.apply_block_shifted(&phi, 0.0));
    let n2 = linalg::op_norm(&comm)?;
    let tilde = setup.regions[0].i.dilate(grid, setup.scenario.c / 4.0).intersect(&setup.omega);
    let e = jet.energy;
    let z = C64::new(e, setup.track.min_gap() / 4.0);
    let cols: Vec<usize> = tilde.indices().iter().map(|&g| local[g]).collect();
    let mut rhs = linalg::zeros(h.dim(), cols.len());
    for (k, &p) in cols.iter().enumerate() {
        rhs[[p, k]] = C64::new(1.0, 0.0);
    }
    let r = solve_shifted(&h, 0.0, z, &rhs, Backend::Auto)?;
    let n3 = linalg::op_norm(&scale(&r))?;
    let mut mass = phi.clone();
    for (p, mut row) in mass.rows_mut().into_iter().enumerate() {
        if !tilde.contains(h.sites[p]) {
            row.fill(C64::new(0.0, 0.0));
        }
    }
    let sv = linalg::singular_values(&mass)?;
    let interior_mass = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ProbeNorms { hbar: setup.hbar, norms: [n0, n1, n2, n3], interior_mass })
}

/// Decay of the four probe norms over a ladder of prepared setups (one per ħ).
pub fn projection_decay_check(
    setups: &[ScenarioSetup],
    probes: &[DecayProbe],
    s: f64,
    fd_step: f64,
) -> Result<Vec<ProbeDecay>> {
    let mut out = Vec::new();
    for probe in probes {
        let mut rows = Vec::new();
        for setup in setups {
            let f = (probe.build)(setup);
            if f.len() != setup.grid().len() {
                return Err(Error::Shape(format!("probe {} has {} values", probe.label, f.len())));
            }
            if !probe.control {
                let c = setup.scenario.c;
                let d = setup.omega.boundary(setup.grid()).distance_field(setup.grid());
                if let Some(i) = (0..f.len()).find(|&i| setup.omega.contains(i) && d[i] > c / 8.0 && f[i] != 0.0) {
                    return Err(Error::Precondition(format!(
                        "probe {} is {} at distance {} > c/8 from the boundary of Omega",
                        probe.label, f[i], d[i]
                    )));
                }
            }
            rows.push(probe_norms(setup, &f, s, fd_step)?);
        }
        let x: Vec<f64> = rows.iter().map(|r| 1.0 / r.hbar).collect();
        let fits = (0..4)
            .map(|k| {
                let y: Vec<f64> = rows.iter().map(|r| r.norms[k]).collect();
                if y.iter().all(|&v| v > 0.0) && y.len() >= super::fit::MIN_FIT_POINTS {
                    fit_decay(&format!("{}:{}", probe.label, PROBE_NORMS[k]), &x, &y).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(ProbeDecay { label: probe.label.clone(), control: probe.control, rows, fits });
    }
    Ok(out)
}
