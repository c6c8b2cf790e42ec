use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_decay, DecayFit};
use crate::error::{Error, Result};
use crate::projection_factory::{closeness_check, delta_estimate, delta_prime_estimate, projection_derivative, FrameFamily};
use crate::propagators::{
    assemble_bounds, block_distance, decompose_commutator, evolve, intertwining_defect, BoundComponents, BoundInputs,
    CommutatorInputs, EvolveOptions, Generator, Variant, X1Path,
};
use crate::resonance_scenarios::ScenarioSetup;
use crate::spectral_calculus::{build_bump, eigensolve, triple_norm, Backend, QuasiAnalyticExtension};

/// How the plateau half-width a of g_a is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ARule {
    Fixed(f64),
    /// a = Δ/2 with Δ the smallest tracked gap.
    HalfGap,
}

impl ARule {
    pub fn resolve(self, gap: f64) -> Result<f64> {
        let a = match self {
            ARule::Fixed(a) => a,
            ARule::HalfGap => gap / 2.0,
        };
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Invalid(format!("a = {a} from rule {self:?} is not in (0, 1)")));
        }
        Ok(a)
    }
}

/// Below this δ a scenario counts as spectral.
pub const SPECTRAL_DELTA: f64 = 1e-10;

/// Gate thresholds. Defaults are the acceptance values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative residual of the geometric resolvent identities.
    pub resolvent_identity: f64,
    /// Relative residual of [X₁, H − E] = [Ṗ, g(H − E)] on the quadrature path.
    pub x1_identity: f64,
    /// Absolute slack on ‖Y₁‖ ≤ RHS, for rounding when both sides vanish.
    pub y1_floor: f64,
    /// ‖Φ†Φ − I‖ of every frame.
    pub projector_algebra: f64,
    /// distance ≤ rhs_factor · RHS(main).
    pub rhs_factor: f64,
    /// Final-distance ratio per ε halving, spectral case.
    pub halving_ratio: (f64, f64),
    /// Measured ε* within this factor of sqrt(δ/K_a).
    pub eps_star_factor: f64,
    /// defect(s) ≤ defect_factor · s δ/ε + defect_floor.
    pub defect_factor: f64,
    pub defect_floor: f64,
    /// Minimum R² of a gating decay fit.
    pub r2_min: f64,
    /// Relative difference allowed between the δ and δ' slopes.
    pub slope_agreement: f64,
    /// Largest max/min of δ'/(δ |||g_a|||₄/Δ) across the ladder.
    pub ratio_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            resolvent_identity: 1e-10,
            x1_identity: 1e-6,
            y1_floor: 1e-10,
            projector_algebra: 1e-10,
            rhs_factor: 10.0,
            halving_ratio: (0.3, 0.7),
            eps_star_factor: 4.0,
            defect_factor: 10.0,
            defect_floor: 1e-8,
            r2_min: 0.95,
            slope_agreement: 0.3,
            ratio_spread: 10.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub gate: String,
    pub pass: bool,
    /// Informational verdicts never fail a run.
    pub gating: bool,
    pub detail: String,
}

impl Verdict {
    fn new(gate: &str, pass: bool, detail: String) -> Self {
        Verdict { gate: gate.into(), pass, gating: true, detail }
    }

    fn info(gate: &str, pass: bool, detail: String) -> Self {
        Verdict { gate: gate.into(), pass, gating: false, detail }
    }
}

pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.pass || !v.gating)
}

/// A sweep point that failed; the sweep continues without it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointFailure {
    pub hbar: f64,
    pub eps: Option<f64>,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleMeasure {
    pub s: f64,
    pub energy: f64,
    pub gap: f64,
    /// 2‖(H − E)P‖
    pub delta: f64,
    /// ‖g_a(H − E)ṖP‖
    pub delta_prime: f64,
    pub pdot: f64,
    pub pddot: f64,
    /// ‖P_Ω − P‖
    pub closeness: f64,
}

/// Every measured input of the bounds for one prepared setup.
#[derive(Clone, Debug, Serialize)]
pub struct MeasuredInputs {
    pub hbar: f64,
    pub a: f64,
    pub fd_step: f64,
    pub samples: Vec<SampleMeasure>,
    pub delta: f64,
    pub delta_prime: f64,
    pub pdot_max: f64,
    pub pddot_max: f64,
    pub closeness: f64,
    pub min_gap: f64,
}

/// `[1.234e-5, ...]`
pub fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, f64::max)
}

pub fn measure_inputs(setup: &ScenarioSetup, a: f64, fd_step: f64) -> Result<MeasuredInputs> {
    let g = build_bump(a)?;
    let frame = |s: f64| setup.frame(s);
    let interior = |s: f64| setup.interior_frame(s);
    let samples = setup
        .scenario
        .s_samples
        .par_iter()
        .map(|&s| -> Result<SampleMeasure> {
            let h = setup.h_full(s)?;
            let jet = projection_derivative(&frame as &FrameFamily, s, 2, fd_step)?;
            let p = setup.frame(s)?;
            let e = p.energy;
            let delta = delta_estimate(&h, e, &p)?;
            let delta_prime = delta_prime_estimate(&eigensolve(&h)?, e, &jet, &g)?;
            let closeness = closeness_check(&interior as &FrameFamily, &frame as &FrameFamily, &[s], 0, fd_step)?[0].norms[0];
            Ok(SampleMeasure {
                s,
                energy: e,
                gap: p.gap,
                delta,
                delta_prime,
                pdot: jet.pdot().norm()?,
                pddot: jet.pddot().norm()?,
                closeness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasuredInputs {
        hbar: setup.hbar,
        a,
        fd_step,
        delta: max_of(samples.iter().map(|m| m.delta)),
        delta_prime: max_of(samples.iter().map(|m| m.delta_prime)),
        pdot_max: max_of(samples.iter().map(|m| m.pdot)),
        pddot_max: max_of(samples.iter().map(|m| m.pddot)),
        closeness: max_of(samples.iter().map(|m| m.closeness)),
        min_gap: setup.track.min_gap(),
        samples,
    })
}

impl MeasuredInputs {
    pub fn bounds(&self, eps: f64, variant: Variant) -> Result<BoundComponents> {
        assemble_bounds(
            &BoundInputs {
                delta: Some(self.delta),
                delta_prime: Some(self.delta_prime),
                pdot_max: Some(self.pdot_max),
                pddot_max: Some(self.pddot_max),
                a: Some(self.a),
                eps: Some(eps),
            },
            variant,
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsilonSweepOptions {
    pub eps_ladder: Vec<f64>,
    pub a_rule: ARule,
    pub fd_step: f64,
    pub evolve: EvolveOptions,
    /// Also run the near-adiabatic flow and record the intertwining defect.
    pub defect: bool,
    pub tolerances: Tolerances,
}

impl Default for EpsilonSweepOptions {
    fn default() -> Self {
        EpsilonSweepOptions {
            eps_ladder: vec![0.1, 0.05, 0.025, 0.0125],
            a_rule: ARule::HalfGap,
            fd_step: 1e-3,
            evolve: EvolveOptions::default(),
            defect: false,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonPoint {
    pub eps: f64,
    pub s: f64,
    /// dist{ψ_ε(s), Range P(s)} under the true flow.
    pub distance: f64,
    pub defect: Option<f64>,
    pub rhs_main: f64,
    pub pdot: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonSweep {
    pub scenario: String,
    pub hbar: f64,
    pub n: usize,
    pub inputs: MeasuredInputs,
    pub bounds: BoundComponents,
    pub points: Vec<EpsilonPoint>,
    pub failures: Vec<PointFailure>,
    pub eps_star_formula: f64,
    /// Minimiser of the final distance over the ladder, refined by a
    /// parabola in log-log coordinates; `None` when the minimum sits on an
    /// end of the ladder.
    pub eps_star_measured: Option<f64>,
    pub u_shape: bool,
    pub verdicts: Vec<Verdict>,
}

fn epsilon_point(
    setup: &ScenarioSetup,
    inputs: &MeasuredInputs,
    bounds: &BoundComponents,
    eps: f64,
    opts: &EpsilonSweepOptions,
) -> Result<Vec<EpsilonPoint>> {
    let s_grid = &setup.scenario.s_samples;
    let h = |s: f64| setup.h_full(s);
    let energy = |s: f64| setup.energy(s);
    let frame = |s: f64| setup.frame(s);
    let frames = s_grid.iter().map(|&s| setup.frame(s)).collect::<Result<Vec<_>>>()?;
    let psi0 = frames[0].frame.clone();
    let tr = evolve(&h, &energy, eps, s_grid, &psi0, Generator::True, &opts.evolve)?;
    let defect = if opts.defect {
        let na = evolve(&h, &energy, eps, s_grid, &psi0, Generator::NearAdiabatic(&frame), &opts.evolve)?;
        Some(intertwining_defect(&na, &frame)?)
    } else {
        None
    };
    let b = bounds.with_eps(eps)?;
    s_grid
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let pdot = inputs.samples[k].pdot;
            Ok(EpsilonPoint {
                eps,
                s,
                distance: block_distance(&tr.states[k], &frames[k])?,
                defect: defect.as_ref().map(|d| d[k].1),
                rhs_main: b.rhs_main_at(pdot),
                pdot,
                steps: tr.steps,
            })
        })
        .collect()
}

/// Log-parabola vertex through the ladder minimum and its neighbours.
fn refined_minimum(x: &[f64], y: &[f64]) -> Option<f64> {
    let k = (0..y.len()).min_by(|&i, &j| y[i].total_cmp(&y[j]))?;
    if k == 0 || k + 1 == y.len() {
        return None;
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = (k - 1..=k + 1).map(|i| (x[i].ln(), y[i].ln())).unzip();
    let d1 = (ly[1] - ly[0]) / (lx[1] - lx[0]);
    let d2 = (ly[2] - ly[1]) / (lx[2] - lx[1]);
    let curv = (d2 - d1) / (lx[2] - lx[0]);
    if !(curv > 0.0) {
        return Some(x[k]);
    }
    // vertex of the parabola through the three points
    let vertex = 0.5 * (lx[0] + lx[1]) - d1 / (2.0 * curv);
    Some(vertex.clamp(lx[0].min(lx[2]), lx[0].max(lx[2])).exp())
}

fn is_halving(eps: &[f64]) -> bool {
    eps.windows(2).all(|w| (w[1] / w[0] - 0.5).abs() < 1e-9)
}

pub fn epsilon_sweep(setup: &ScenarioSetup, opts: &EpsilonSweepOptions) -> Result<EpsilonSweep> {
    if opts.eps_ladder.is_empty() {
        return Err(Error::Invalid("empty epsilon ladder".into()));
    }
    let a = opts.a_rule.resolve(setup.track.min_gap())?;
    let inputs = measure_inputs(setup, a, opts.fd_step)?;
    let bounds = inputs.bounds(opts.eps_ladder[0], Variant::One)?;
    let results: Vec<Result<Vec<EpsilonPoint>>> = opts
        .eps_ladder
        .par_iter()
        .map(|&eps| epsilon_point(setup, &inputs, &bounds, eps, opts))
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (&eps, r) in opts.eps_ladder.iter().zip(results) {
        match r {
            Ok(p) => points.extend(p),
            Err(e) => failures.push(PointFailure { hbar: setup.hbar, eps: Some(eps), error: e.to_string() }),
        }
    }
    let s_end = *setup.scenario.s_samples.last().unwrap();
    let mut finals: Vec<(f64, f64)> =
        points.iter().filter(|p| p.s == s_end).map(|p| (p.eps, p.distance)).collect();
    finals.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (fe, fd): (Vec<f64>, Vec<f64>) = finals.iter().copied().unzip();
    let eps_star_formula = bounds.eps_star();
    let eps_star_measured = if fd.iter().all(|&d| d > 0.0) { refined_minimum(&fe, &fd) } else { None };
    let u_shape = eps_star_measured.is_some();

    let tol = &opts.tolerances;
    let mut verdicts = Vec::new();
    let worst = points.iter().map(|p| p.distance / p.rhs_main).fold(0.0, f64::max);
    verdicts.push(Verdict::new(
        "distance_within_rhs_factor",
        !points.is_empty() && worst <= tol.rhs_factor,
        format!("max distance/RHS(main) = {worst:.3e} over {} points", points.len()),
    ));
    if inputs.delta <= SPECTRAL_DELTA {
        let ratios: Vec<f64> = fd.windows(2).map(|w| w[1] / w[0]).collect();
        let pass = is_halving(&fe) && fe.len() >= 2 && ratios.iter().all(|r| (tol.halving_ratio.0..=tol.halving_ratio.1).contains(r));
        verdicts.push(Verdict::new(
            "halving_ratio",
            pass,
            format!(
                "final-distance ratios per halving {} (need [{}, {}])",
                sci(&ratios),
                tol.halving_ratio.0,
                tol.halving_ratio.1
            ),
        ));
    } else {
        let (pass, detail) = match eps_star_measured {
            Some(m) => {
                let r = m / eps_star_formula;
                ((1.0 / tol.eps_star_factor..=tol.eps_star_factor).contains(&r), format!("measured {m:.3e}, sqrt(delta/K_a) = {eps_star_formula:.3e}, ratio {r:.3}"))
            }
            None => (false, format!("no interior minimum on the ladder; sqrt(delta/K_a) = {eps_star_formula:.3e}")),
        };
        verdicts.push(Verdict::new("eps_star_within_factor", pass, detail));
    }
    if opts.defect {
        let bound = |p: &EpsilonPoint| tol.defect_factor * p.s * inputs.delta / p.eps + tol.defect_floor;
        let with_defect: Vec<&EpsilonPoint> = points.iter().filter(|p| p.defect.is_some()).collect();
        let pass = with_defect.iter().all(|p| p.defect.unwrap() <= bound(p));
        let max_defect = with_defect.iter().map(|p| p.defect.unwrap()).fold(0.0, f64::max);
        let max_ratio = with_defect.iter().map(|p| p.defect.unwrap() / bound(p)).fold(0.0, f64::max);
        verdicts.push(Verdict::new(
            "intertwining_defect",
            pass && !with_defect.is_empty(),
            format!(
                "max defect {max_defect:.3e}; max defect/({} s delta/eps + {:e}) = {max_ratio:.3e}",
                tol.defect_factor, tol.defect_floor
            ),
        ));
    }
    verdicts.push(Verdict::info("u_shape", u_shape, format!("final distances {}", sci(&fd))));
    if !failures.is_empty() {
        verdicts.push(Verdict::new("all_points_ran", false, format!("{} point(s) failed", failures.len())));
    }
    Ok(EpsilonSweep {
        scenario: setup.scenario.name.clone(),
        hbar: setup.hbar,
        n: setup.grid().n,
        inputs,
        bounds,
        points,
        failures,
        eps_star_formula,
        eps_star_measured,
        u_shape,
        verdicts,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HbarSweepOptions {
    pub hbar_ladder: Vec<f64>,
    pub a_rule: ARule,
    pub fd_step: f64,
    /// Re-measure δ on a grid with 2n + 1 points per axis.
    pub refine: bool,
    /// Repeat the measurement at a/2 for the scenario's default ħ.
    pub a_halving: bool,
    pub tolerances: Tolerances,
}

impl Default for HbarSweepOptions {
    fn default() -> Self {
        HbarSweepOptions {
            hbar_ladder: vec![0.1, 0.08, 0.06, 0.05],
            a_rule: ARule::HalfGap,
            fd_step: 1e-3,
            refine: true,
            a_halving: true,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HbarRung {
    pub hbar: f64,
    pub a: f64,
    pub gap: f64,
    pub g4: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub closeness: f64,
    /// δ'/(δ |||g_a|||₄/Δ)
    pub ratio: f64,
    pub delta_refined: Option<f64>,
    pub inputs: MeasuredInputs,
}

#[derive(Clone, Debug, Serialize)]
pub struct AHalving {
    pub hbar: f64,
    pub a: f64,
    pub delta: [f64; 2],
    pub delta_prime: [f64; 2],
    pub g4: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct HbarSweep {
    pub scenario: String,
    pub n: usize,
    pub rungs: Vec<HbarRung>,
    pub failures: Vec<PointFailure>,
    pub fit_delta: Option<DecayFit>,
    pub fit_delta_prime: Option<DecayFit>,
    pub fit_closeness: Option<DecayFit>,
    pub a_halving: Option<AHalving>,
    pub verdicts: Vec<Verdict>,
}

fn hbar_rung(setup: &ScenarioSetup, opts: &HbarSweepOptions) -> Result<HbarRung> {
    let gap = setup.track.min_gap();
    let a = opts.a_rule.resolve(gap)?;
    let inputs = measure_inputs(setup, a, opts.fd_step)?;
    let g4 = triple_norm(&build_bump(a)?, 4)?.value;
    let delta_refined = if opts.refine {
        let fine = setup.scenario.with_resolution(2 * setup.grid().n + 1)?.setup(setup.hbar)?;
        let d = fine
            .scenario
            .s_samples
            .iter()
            .map(|&s| delta_estimate(&fine.h_full(s)?, fine.energy(s), &fine.frame(s)?))
            .collect::<Result<Vec<f64>>>()?;
        Some(max_of(d.into_iter()))
    } else {
        None
    };
    Ok(HbarRung {
        hbar: setup.hbar,
        a,
        gap,
        g4,
        delta: inputs.delta,
        delta_prime: inputs.delta_prime,
        closeness: inputs.closeness,
        ratio: inputs.delta_prime / (inputs.delta * g4 / gap),
        delta_refined,
        inputs,
    })
}

fn fit_gate(name: &str, fit: &Option<DecayFit>, n: usize, r2_min: f64) -> Verdict {
    match fit {
        Some(f) => Verdict::new(
            name,
            n >= super::fit::MIN_FIT_POINTS && f.decays(r2_min),
            format!("slope {:.4}, R^2 {:.4}, eta band [{:.4}, {:.4}] over {n} points", f.slope, f.r2, f.eta_band().0, f.eta_band().1),
        ),
        None => Verdict::new(name, false, "no fit (fewer than 4 usable points)".into()),
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// δ, δ' and ‖P_Ω − P‖ across the ħ ladder with log-linear fits in 1/ħ.
pub fn hbar_sweep(scenario: &crate::resonance_scenarios::ShapeResonanceScenario, opts: &HbarSweepOptions) -> Result<HbarSweep> {
    let mut ladder = opts.hbar_ladder.clone();
    ladder.sort_by(|a, b| b.total_cmp(a));
    let results: Vec<Result<HbarRung>> =
        ladder.par_iter().map(|&hb| scenario.setup(hb).and_then(|st| hbar_rung(&st, opts))).collect();
    let mut rungs = Vec::new();
    let mut failures = Vec::new();
    for (&hb, r) in ladder.iter().zip(results) {
        match r {
            Ok(r) => rungs.push(r),
            Err(e) => failures.push(PointFailure { hbar: hb, eps: None, error: e.to_string() }),
        }
    }
    let x: Vec<f64> = rungs.iter().map(|r| 1.0 / r.hbar).collect();
    let fit = |label: &str, y: Vec<f64>| fit_decay(label, &x, &y).ok();
    let deltas: Vec<f64> = rungs.iter().map(|r| r.delta).collect();
    let dps: Vec<f64> = rungs.iter().map(|r| r.delta_prime).collect();
    let closes: Vec<f64> = rungs.iter().map(|r| r.closeness).collect();
    let fit_delta = fit("delta", deltas.clone());
    let fit_delta_prime = fit("delta_prime", dps.clone());
    let fit_closeness = fit("closeness", closes.clone());

    let a_halving = if opts.a_halving {
        let st = scenario.setup(scenario.hbar)?;
        let a = opts.a_rule.resolve(st.track.min_gap())?;
        let m = [measure_inputs(&st, a, opts.fd_step)?, measure_inputs(&st, a / 2.0, opts.fd_step)?];
        Some(AHalving {
            hbar: scenario.hbar,
            a,
            delta: [m[0].delta, m[1].delta],
            delta_prime: [m[0].delta_prime, m[1].delta_prime],
            g4: [triple_norm(&build_bump(a)?, 4)?.value, triple_norm(&build_bump(a / 2.0)?, 4)?.value],
        })
    } else {
        None
    };

    let tol = &opts.tolerances;
    let n = rungs.len();
    let mut verdicts = vec![
        fit_gate("delta_decay_fit", &fit_delta, n, tol.r2_min),
        fit_gate("delta_prime_decay_fit", &fit_delta_prime, n, tol.r2_min),
        Verdict::new("delta_strictly_decreasing", n >= 2 && strictly_decreasing(&deltas), format!("delta {}", sci(&deltas))),
    ];
    let slope_detail = match (&fit_delta, &fit_delta_prime) {
        (Some(a), Some(b)) => {
            let rel = (b.slope - a.slope).abs() / a.slope.abs();
            (rel <= tol.slope_agreement, format!("slope(delta) {:.4}, slope(delta') {:.4}, relative difference {rel:.3}", a.slope, b.slope))
        }
        _ => (false, "missing fit".into()),
    };
    verdicts.push(Verdict::new("slope_agreement", slope_detail.0, slope_detail.1));
    let ratios: Vec<f64> = rungs.iter().map(|r| r.ratio).collect();
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    verdicts.push(Verdict::new(
        "ratio_spread",
        n >= 2 && spread <= tol.ratio_spread,
        format!("delta'/(delta g4/Delta) = {}, spread {spread:.3}", sci(&ratios)),
    ));
    let mut close_gate = fit_gate("closeness_decay_fit", &fit_closeness, n, tol.r2_min);
    close_gate.pass &= strictly_decreasing(&closes);
    close_gate.detail = format!("{}; closeness {}", close_gate.detail, sci(&closes));
    verdicts.push(close_gate);
    if opts.refine {
        let changes: Vec<f64> = rungs.iter().filter_map(|r| r.delta_refined.map(|d| d / r.delta)).collect();
        verdicts.push(Verdict::info(
            "grid_convergence",
            changes.iter().all(|c| (0.5..=2.0).contains(c)),
            format!("delta(2n+1)/delta(n) = {}", sci(&changes)),
        ));
    }
    if let Some(ah) = &a_halving {
        let same = (ah.delta[1] - ah.delta[0]).abs() <= 1e-12 * ah.delta[0].max(1e-300);
        let r = (ah.delta_prime[1] / ah.delta_prime[0]) / (ah.g4[1] / ah.g4[0]);
        verdicts.push(Verdict::new(
            "a_halving",
            same && (1.0 / tol.ratio_spread..=tol.ratio_spread).contains(&r),
            format!(
                "delta {:.3e} -> {:.3e}; delta' ratio / g4 ratio = {r:.3}",
                ah.delta[0], ah.delta[1]
            ),
        ));
    }
    if !failures.is_empty() {
        verdicts.push(Verdict::new("all_points_ran", false, format!("{} rung(s) failed", failures.len())));
    }
    Ok(HbarSweep {
        scenario: scenario.name.clone(),
        n: scenario.grid.n,
        rungs,
        failures,
        fit_delta,
        fit_delta_prime,
        fit_closeness,
        a_halving,
        verdicts,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Y1Row {
    pub s: f64,
    pub y1_norm: f64,
    /// 2δ' + 2‖Ṗ(s)‖|||g_a|||₃δ with the sweep-wide δ, δ'.
    pub rhs: f64,
    /// Same with δ(s), δ'(s) at this s.
    pub rhs_pointwise: f64,
    pub identity_residual: f64,
    pub decomposition_residual: f64,
    pub nodes: usize,
}

/// ‖Y₁(s)‖ against its bound, with X₁ by Helffer–Sjöstrand quadrature
/// (`hs = true`) or by divided differences.
pub fn y1_check(setup: &ScenarioSetup, inputs: &MeasuredInputs, s_list: &[f64], hs: bool) -> Result<Vec<Y1Row>> {
    let g = build_bump(inputs.a)?;
    let g3 = triple_norm(&g, 3)?.value;
    let ext = QuasiAnalyticExtension::new(&g, 4)?;
    let frame = |s: f64| setup.frame(s);
    s_list
        .iter()
        .map(|&s| {
            let h = setup.h_full(s)?;
            let jet = projection_derivative(&frame as &FrameFamily, s, 1, inputs.fd_step)?;
            let e = jet.energy;
            let path = if hs { X1Path::Hs(&ext, Backend::Auto) } else { X1Path::Eigen };
            let d = decompose_commutator(&CommutatorInputs {
                h: &h,
                e,
                jet: &jet,
                g: &g,
                variant: Variant::One,
                x1_path: path,
                h_dot: None,
            })?;
            let pdot = jet.pdot().norm()?;
            let p = setup.frame(s)?;
            let delta_s = delta_estimate(&h, e, &p)?;
            let dprime_s = delta_prime_estimate(&eigensolve(&h)?, e, &jet, &g)?;
            Ok(Y1Row {
                s,
                y1_norm: d.y_norm,
                rhs: 2.0 * inputs.delta_prime + 2.0 * pdot * g3 * inputs.delta,
                rhs_pointwise: 2.0 * dprime_s + 2.0 * pdot * g3 * delta_s,
                identity_residual: d.identity_residual.unwrap_or(f64::NAN),
                decomposition_residual: d.residual,
                nodes: d.nodes,
            })
        })
        .collect()
}
