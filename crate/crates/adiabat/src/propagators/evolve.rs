use std::collections::HashMap;
use std::sync::Mutex;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_hamiltonian::DiscreteHamiltonian;
use crate::linalg;
use crate::projection_factory::{aligned_stencil, FrameFamily, OperatorFamily, ProjectionFrame};
use crate::spectral_calculus::eigensolve_dense;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// H(s) − E(s)
    True,
    /// H(s) − E(s) + iε[Ṗ(s), P(s)]
    NearAdiabatic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorBackend {
    /// Chebyshev–Bessel expansion of the step exponential; matrix-free.
    Chebyshev,
    /// Dense eigendecomposition of the generator at every step.
    DenseEigen,
}

pub enum Generator<'a> {
    True,
    NearAdiabatic(&'a FrameFamily<'a>),
}

impl Generator<'_> {
    pub fn kind(&self) -> GeneratorKind {
        match self {
            Generator::True => GeneratorKind::True,
            Generator::NearAdiabatic(_) => GeneratorKind::NearAdiabatic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveOptions {
    /// Upper limit on ‖H − E‖Δs/ε.
    pub phase_budget: f64,
    /// Upper limit on Δs itself, so that the s-dependence is resolved even
    /// when H − E is small.
    pub max_ds: f64,
    pub max_steps: usize,
    pub backend: PropagatorBackend,
    /// Target finite-difference step for Ṗ (rounded to a multiple of Δs).
    pub fd_step: f64,
    /// Samples of ‖H(s) − E(s)‖ used to fix the step size.
    pub norm_samples: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            phase_budget: 0.5,
            max_ds: 1e-2,
            max_steps: 2_000_000,
            backend: PropagatorBackend::Chebyshev,
            fd_step: 1e-2,
            norm_samples: 33,
        }
    }
}

/// States (or blocks of states) at the recorded s values.
#[derive(Clone, Debug)]
pub struct EvolutionTrace {
    pub s_grid: Vec<f64>,
    pub states: Vec<Array2<C64>>,
    pub generator: GeneratorKind,
    pub backend: PropagatorBackend,
    pub eps: f64,
    pub steps: usize,
    /// Largest ‖H − E‖Δs/ε actually used.
    pub phase_per_step: f64,
    /// Per-step ‖X†X − Y†Y‖_max for consecutive blocks.
    pub unitarity_defect: Vec<f64>,
    /// ‖Ψ(s)†Ψ(s) − Ψ(0)†Ψ(0)‖_max at the last recorded point.
    pub norm_drift: f64,
}

impl EvolutionTrace {
    pub fn final_state(&self) -> &Array2<C64> {
        self.states.last().expect("trace has at least the initial state")
    }

    pub fn max_step_defect(&self) -> f64 {
        self.unitarity_defect.iter().copied().fold(0.0, f64::max)
    }
}

/// J_0(x), …, J_kmax(x) for x ≥ 0 by Miller's backward recurrence,
/// normalised with J_0 + 2ΣJ_2k = 1.
pub fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    assert!(x > 0.0 && x.is_finite(), "Bessel argument must be finite and non-negative");
    let top = kmax.max(x.ceil() as usize) + 20 + (40.0 * x.max(kmax as f64)).sqrt() as usize;
    let top = top + top % 2;
    let mut j = vec![0.0; top + 2];
    j[top] = 1e-300;
    for k in (1..=top).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in &mut j[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * (2..=top).step_by(2).map(|k| j[k]).sum::<f64>();
    for k in 0..=kmax {
        out[k] = j[k] / norm;
    }
    out
}

/// exp(−iτG)X for Hermitian G with spectrum in [lo, hi].
pub fn chebyshev_exp(apply: &dyn Fn(&Array2<C64>) -> Array2<C64>, lo: f64, hi: f64, tau: f64, x: &Array2<C64>) -> Array2<C64> {
    let c = 0.5 * (hi + lo);
    let r = 0.5 * (hi - lo);
    let phase = C64::from_polar(1.0, -tau * c);
    let arg = tau * r;
    if arg <= 0.0 {
        return x.mapv(|z| z * phase);
    }
    let kmax = (arg.ceil() as usize) + 40;
    let j = bessel_j_sequence(arg, kmax);
    // last index worth keeping
    let mut kend = kmax;
    while kend > arg.ceil() as usize && j[kend].abs() < 1e-18 {
        kend -= 1;
    }
    let scaled = |v: &Array2<C64>| -> Array2<C64> {
        let gv = apply(v);
        (&gv - &v.mapv(|z| z * c)).mapv(|z| z / r)
    };
    let mut acc = x.mapv(|z| z * j[0]);
    if kend == 0 {
        return acc.mapv(|z| z * phase);
    }
    let mut prev = x.clone();
    let mut cur = scaled(x);
    let mut coef = C64::new(0.0, -1.0);
    acc.scaled_add(coef * 2.0 * j[1], &cur);
    for k in 2..=kend {
        let next = &scaled(&cur).mapv(|z| z * 2.0) - &prev;
        coef *= C64::new(0.0, -1.0);
        acc.scaled_add(coef * 2.0 * j[k], &next);
        prev = cur;
        cur = next;
    }
    acc.mapv(|z| z * phase)
}

/// Generator at one midpoint.
struct StepGenerator {
    h: DiscreteHamiltonian,
    e: f64,
    eps: f64,
    /// (Φ, Φ̇) for the iε[Ṗ, P] term.
    coupling: Option<(Array2<C64>, Array2<C64>)>,
}

impl StepGenerator {
    fn apply(&self, x: &Array2<C64>) -> Array2<C64> {
        let mut y = self.h.apply_block_shifted(x, self.e);
        if let Some((phi, dphi)) = &self.coupling {
            let pdot = |v: &Array2<C64>| -> Array2<C64> {
                phi.dot(&linalg::adjoint(dphi).dot(v)) + dphi.dot(&linalg::adjoint(phi).dot(v))
            };
            let proj = |v: &Array2<C64>| -> Array2<C64> { phi.dot(&linalg::adjoint(phi).dot(v)) };
            let comm = &pdot(&proj(x)) - &proj(&pdot(x));
            y.scaled_add(C64::new(0.0, self.eps), &comm);
        }
        y
    }

    /// Gershgorin enclosure of H − E.
    fn h_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.h.spectral_bounds();
        (lo - self.e, hi - self.e)
    }

    /// Enclosure of the full generator; ‖[Ṗ, P]‖ ≤ ‖Ṗ‖ ≤ 2‖Φ̇‖ for a projector P.
    fn bounds(&self) -> Result<(f64, f64)> {
        let (lo, hi) = self.h_bounds();
        let extra = match &self.coupling {
            Some((_, dphi)) => 2.0 * self.eps * linalg::op_norm(dphi)? * (1.0 + 1e-6),
            None => 0.0,
        };
        Ok((lo - extra, hi + extra))
    }

    fn dense(&self) -> Array2<C64> {
        let mut g = self.h.to_dense();
        for i in 0..g.nrows() {
            g[[i, i]] -= self.e;
        }
        if let Some((phi, dphi)) = &self.coupling {
            let p = phi.dot(&linalg::adjoint(phi));
            let pd = dphi.dot(&linalg::adjoint(phi)) + phi.dot(&linalg::adjoint(dphi));
            g.scaled_add(C64::new(0.0, self.eps), &linalg::commutator(&pd, &p));
        }
        g
    }
}

/// Memoised frame family on the lattice of step midpoints.
struct FrameCache<'a> {
    family: &'a FrameFamily<'a>,
    quantum: f64,
    frames: Mutex<HashMap<i64, (f64, ProjectionFrame)>>,
}

impl<'a> FrameCache<'a> {
    fn key(&self, s: f64) -> i64 {
        (s / self.quantum).round() as i64
    }

    fn get(&self, s: f64) -> Result<ProjectionFrame> {
        let k = self.key(s);
        if let Some((at, f)) = self.frames.lock().expect("cache lock").get(&k) {
            if (at - s).abs() <= 1e-12 {
                return Ok(f.clone());
            }
        }
        let f = (self.family)(s)?;
        self.frames.lock().expect("cache lock").insert(k, (s, f.clone()));
        Ok(f)
    }

    fn forget_before(&self, s: f64) {
        let k = self.key(s);
        self.frames.lock().expect("cache lock").retain(|&key, _| key >= k);
    }
}

fn gram_defect(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let ga = linalg::adjoint(a).dot(a);
    let gb = linalg::adjoint(b).dot(b);
    linalg::max_abs(&(ga - gb))
}

/// Exponential-midpoint integration of iε Ψ' = G(s) Ψ over `s_grid`
/// (ascending, first point is where `psi0` is given).
///
/// The step is uniform within each interval and chosen from sampled
/// ‖H(s) − E(s)‖ so that ‖H − E‖Δs/ε stays within the phase budget; every
/// step re-checks the bound and fails rather than exceed it.
pub fn evolve(
    h: &OperatorFamily,
    energy: &(dyn Fn(f64) -> f64 + Sync),
    eps: f64,
    s_grid: &[f64],
    psi0: &Array2<C64>,
    generator: Generator,
    opts: &EvolveOptions,
) -> Result<EvolutionTrace> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Invalid(format!("eps = {eps} must be positive")));
    }
    if s_grid.is_empty() || s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("s grid must be non-empty and strictly increasing".into()));
    }
    if s_grid[0] < 0.0 || *s_grid.last().unwrap() > 1.0 {
        return Err(Error::Invalid("s grid must lie in [0, 1]".into()));
    }
    if !(opts.phase_budget > 0.0) {
        return Err(Error::Invalid(format!("phase budget {} must be positive", opts.phase_budget)));
    }
    let (s0, s1) = (s_grid[0], *s_grid.last().unwrap());

    // Fix one step size for the whole run so midpoints form a lattice.
    let samples = opts.norm_samples.max(2);
    let mut gnorm: f64 = 0.0;
    for k in 0..samples {
        let s = s0 + (s1 - s0) * k as f64 / (samples - 1) as f64;
        let (lo, hi) = h(s)?.spectral_bounds();
        let e = energy(s);
        gnorm = gnorm.max((lo - e).abs()).max((hi - e).abs());
    }
    let gnorm = gnorm * 1.05 + eps;
    let ds_max = (opts.phase_budget * eps / gnorm).min(opts.max_ds);
    let per_interval: Vec<usize> = s_grid
        .windows(2)
        .map(|w| ((w[1] - w[0]) / ds_max).ceil().max(1.0) as usize)
        .collect();
    let total: usize = per_interval.iter().sum();
    if total > opts.max_steps {
        return Err(Error::Step(format!(
            "{total} steps needed for ‖G‖ ≈ {gnorm:.3e}, eps = {eps}, budget {}; limit {}",
            opts.phase_budget, opts.max_steps
        )));
    }
    let ds_nominal = if s_grid.len() > 1 { (s_grid[1] - s_grid[0]) / per_interval[0] as f64 } else { ds_max };

    let cache = match &generator {
        Generator::NearAdiabatic(family) => Some(FrameCache {
            family: *family,
            quantum: ds_nominal / 4.0,
            frames: Mutex::new(HashMap::new()),
        }),
        Generator::True => None,
    };

    let mut state = psi0.clone();
    let mut states = vec![state.clone()];
    let mut defects = Vec::with_capacity(total);
    let mut phase_used: f64 = 0.0;
    for (iv, w) in s_grid.windows(2).enumerate() {
        let n = per_interval[iv];
        let ds = (w[1] - w[0]) / n as f64;
        let fd_mult = (opts.fd_step / ds).round().max(1.0);
        let fd_step = fd_mult * ds;
        for k in 0..n {
            let s_mid = w[0] + (k as f64 + 0.5) * ds;
            let coupling = match &cache {
                Some(c) => {
                    let step = fd_step.min(1.0 / 6.0);
                    let st = aligned_stencil(&|s| c.get(s), s_mid, step)?;
                    c.forget_before(s_mid - 6.0 * step);
                    Some((st.centre().frame.clone(), st.frame_derivative(1)))
                }
                None => None,
            };
            let gen = StepGenerator { h: h(s_mid)?, e: energy(s_mid), eps, coupling };
            if gen.h.dim() != state.nrows() {
                return Err(Error::Shape(format!(
                    "state has {} rows, H(s) acts on {}",
                    state.nrows(),
                    gen.h.dim()
                )));
            }
            let (hlo, hhi) = gen.h_bounds();
            let phase = hlo.abs().max(hhi.abs()) * ds / eps;
            if phase > opts.phase_budget * (1.0 + 1e-9) {
                return Err(Error::Step(format!(
                    "‖G({s_mid:.6})‖Δs/ε = {phase:.3} exceeds the budget {}",
                    opts.phase_budget
                )));
            }
            phase_used = phase_used.max(phase);
            let (lo, hi) = gen.bounds()?;
            let tau = ds / eps;
            let next = match opts.backend {
                PropagatorBackend::Chebyshev => chebyshev_exp(&|x| gen.apply(x), lo, hi, tau, &state),
                PropagatorBackend::DenseEigen => {
                    let eig = eigensolve_dense(&gen.dense())?;
                    let u = linalg::spectral_map_complex(&eig.values, &eig.vectors, |l| C64::from_polar(1.0, -tau * l));
                    u.dot(&state)
                }
            };
            if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite(format!("state at s = {s_mid}")));
            }
            defects.push(gram_defect(&next, &state));
            state = next;
        }
        states.push(state.clone());
    }
    let norm_drift = gram_defect(&state, psi0);
    Ok(EvolutionTrace {
        s_grid: s_grid.to_vec(),
        states,
        generator: generator.kind(),
        backend: opts.backend,
        eps,
        steps: total,
        phase_per_step: phase_used,
        unitarity_defect: defects,
        norm_drift,
    })
}

/// ‖(1 − P)ψ‖ for a unit vector ψ.
pub fn adiabatic_distance(psi: &[C64], p: &ProjectionFrame) -> Result<f64> {
    if psi.len() != p.dim() {
        return Err(Error::Shape(format!("state has {} entries, frame has {} rows", psi.len(), p.dim())));
    }
    let norm = linalg::vnorm(psi);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!("state norm {norm} is not 1")));
    }
    Ok(p.distance(psi))
}

/// ‖(1 − P)Ψ‖ for a block of orthonormal columns.
pub fn block_distance(psi: &Array2<C64>, p: &ProjectionFrame) -> Result<f64> {
    let coeff = linalg::adjoint(&p.frame).dot(psi);
    linalg::op_norm(&(psi - &p.frame.dot(&coeff)))
}

/// ‖U_n(s)* P(s) U_n(s) − P(0)‖ on the recorded grid.
///
/// With a full unitary in the trace this is evaluated directly. With an
/// evolved frame of Range P(0) it equals ‖(1 − P(s)) U_n Φ₀‖, since both
/// P(s) and U_n P(0) U_n* are projections of the same finite rank.
pub fn intertwining_defect(trace: &EvolutionTrace, p: &FrameFamily) -> Result<Vec<(f64, f64)>> {
    if trace.generator != GeneratorKind::NearAdiabatic {
        return Err(Error::Precondition("intertwining defect needs a near-adiabatic trace".into()));
    }
    let p0 = p(trace.s_grid[0])?;
    let psi0 = &trace.states[0];
    let full = psi0.ncols() == psi0.nrows();
    if !full {
        if psi0.ncols() != p0.rank() {
            return Err(Error::Precondition(format!(
                "initial block has {} columns, P(0) has rank {}",
                psi0.ncols(),
                p0.rank()
            )));
        }
        let leak = block_distance(psi0, &p0)?;
        if leak > 1e-10 {
            return Err(Error::Precondition(format!("initial block leaves Range P(0) by {leak:e}")));
        }
    }
    let mut out = Vec::with_capacity(trace.s_grid.len());
    for (k, &s) in trace.s_grid.iter().enumerate() {
        let ps = if k == 0 { p0.clone() } else { p(s)? };
        let u = &trace.states[k];
        let d = if full {
            let lhs = ps.projector().dot(u);
            let rhs = u.dot(&p0.projector());
            linalg::op_norm(&(lhs - rhs))?
        } else if k == 0 {
            0.0
        } else {
            block_distance(u, &ps)?
        };
        out.push((s, d));
    }
    Ok(out)
}
