use super::scenario::{OmegaRule, ShapeResonanceScenario};
use crate::error::{Error, Result};
use crate::lattice_hamiltonian::{Grid, PotentialFamily, VectorPotentialField};

/// (1 − (r/ρ)²)³ on r < ρ: C² at the edge, so V stays C² in x.
fn well_profile(r: f64, rho: f64) -> f64 {
    let u = r / rho;
    if u < 1.0 {
        (1.0 - u * u).powi(3)
    } else {
        0.0
    }
}

fn default_samples() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Barrier 4x²e^{−x²} around a well whose depth grows like s² on |x| < 0.2.
pub fn double_barrier() -> ShapeResonanceScenario {
    let (lo, hi, n) = (-8.0, 8.0, 399);
    let depth = 0.1;
    let rho = 0.2;
    let potential = PotentialFamily::stationary("4x^2 exp(-x^2)", |[x, _]| 4.0 * x * x * (-x * x).exp())
        .with_term(2, move |[x, _]| -depth * well_profile(x.abs(), rho))
        .with_support(move |[x, _]| x.abs() < rho);
    ShapeResonanceScenario {
        name: "double_barrier".into(),
        summary: "1D double barrier, s-modulated well depth inside the barriers".into(),
        box_lo: lo,
        box_hi: hi,
        grid: Grid::cube(1, lo, hi, n).expect("valid grid"),
        potential,
        field: VectorPotentialField::zero(),
        b: 0.5,
        c: 0.5,
        hbar: 0.08,
        hbar_ladder: vec![0.1, 0.08, 0.06, 0.05],
        level: 0,
        energy_window: (0.0, 0.9),
        gap_min: 0.05,
        omega_rule: OmegaRule::Dilation,
        s_samples: default_samples(),
    }
}

/// Harmonic well pushed sideways by s²x; Ω is the whole box.
pub fn spectral_control() -> ShapeResonanceScenario {
    let (lo, hi, n) = (-6.0, 6.0, 400);
    let push = 1.0;
    let potential = PotentialFamily::stationary("x^2", |[x, _]| x * x)
        .with_term(2, move |[x, _]| push * x)
        .with_support(|_| true);
    ShapeResonanceScenario {
        name: "spectral_control".into(),
        summary: "1D harmonic well with s-dependent tilt, exact eigenprojection".into(),
        box_lo: lo,
        box_hi: hi,
        grid: Grid::cube(1, lo, hi, n).expect("valid grid"),
        potential,
        field: VectorPotentialField::zero(),
        b: 0.5,
        c: 0.5,
        hbar: 0.5,
        hbar_ladder: vec![0.5],
        level: 0,
        energy_window: (-1.0, 1.0),
        gap_min: 0.2,
        omega_rule: OmegaRule::FullBox,
        s_samples: default_samples(),
    }
}

/// Radial barrier of height 2 at r = 1.5 around a disc well deepening like
/// s² on r < 0.5, in a weak uniform magnetic field.
pub fn annulus_2d() -> ShapeResonanceScenario {
    let (lo, hi, n) = (-4.0, 4.0, 56);
    let (height, r0) = (2.0, 1.5);
    let depth = 0.2;
    let rho = 0.5;
    let potential = PotentialFamily::stationary("radial barrier", move |[x, y]| {
        let u = (x * x + y * y) / (r0 * r0);
        height * u * (1.0 - u).exp()
    })
    .with_term(2, move |[x, y]| -depth * well_profile(x.hypot(y), rho))
    .with_support(move |[x, y]| x.hypot(y) < rho);
    ShapeResonanceScenario {
        name: "annulus_2d".into(),
        summary: "2D annular barrier around a disc well, weak magnetic field".into(),
        box_lo: lo,
        box_hi: hi,
        grid: Grid::cube(2, lo, hi, n).expect("valid grid"),
        potential,
        field: VectorPotentialField::symmetric_gauge(0.1, hi),
        b: 0.5,
        c: 0.5,
        hbar: 0.2,
        hbar_ladder: vec![0.25, 0.22, 0.2, 0.18],
        level: 0,
        energy_window: (0.0, 1.3),
        gap_min: 0.05,
        omega_rule: OmegaRule::Dilation,
        s_samples: (0..=4).map(|k| k as f64 / 4.0).collect(),
    }
}

pub fn builtin_scenarios() -> Vec<ShapeResonanceScenario> {
    vec![double_barrier(), spectral_control(), annulus_2d()]
}

pub fn scenario_by_name(name: &str) -> Result<ShapeResonanceScenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name).ok_or_else(|| {
        let names: Vec<String> = builtin_scenarios().into_iter().map(|s| s.name).collect();
        Error::Scenario(format!("unknown scenario {name:?}; built-in: {}", names.join(", ")))
    })
}
