use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use super::frame::{shifted_action, ProjectionFrame};
use crate::error::{Error, Result};
use crate::lattice_hamiltonian::DiscreteHamiltonian;
use crate::linalg::{self, LowRankHermitian};
use crate::spectral_calculus::{hs_apply, Backend, BumpFunction, EigenDecomposition, QuasiAnalyticExtension};
use crate::C64;

pub type FrameFamily<'a> = dyn Fn(f64) -> Result<ProjectionFrame> + Sync + 'a;
pub type OperatorFamily<'a> = dyn Fn(f64) -> Result<DiscreteHamiltonian> + Sync + 'a;

/// Richardson acceptance: |X_h − X_{h/2}| ≤ 10 % of |X_{h/2}| plus this floor.
const RICHARDSON_FLOOR: f64 = 1e-7;

/// Finite-difference weights at 0 for the given nodes (Fornberg's recursion).
pub fn fd_weights(nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Integer offsets of a stencil around `s` that stays inside [0, 1]:
/// five centred points, or six one-sided ones near an end.
pub fn stencil_offsets(s: f64, step: f64) -> Result<Vec<i32>> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Invalid(format!("s = {s} outside [0, 1]")));
    }
    if !(step > 0.0) || 6.0 * step > 1.0 {
        return Err(Error::Invalid(format!("finite-difference step {step} not in (0, 1/6]")));
    }
    let slack = 1e-12;
    if s - 2.0 * step >= -slack && s + 2.0 * step <= 1.0 + slack {
        return Ok((-2..=2).collect());
    }
    let lo = if s - 2.0 * step < -slack {
        -((s + slack) / step).floor() as i32
    } else {
        ((1.0 - s + slack) / step).floor() as i32 - 5
    };
    Ok((lo..lo + 6).collect())
}

/// Frames at s + k·step, each rotated onto the centre frame by the unitary
/// polar factor of the overlap.
#[derive(Clone, Debug)]
pub struct AlignedStencil {
    pub s: f64,
    pub step: f64,
    pub offsets: Vec<i32>,
    pub frames: Vec<ProjectionFrame>,
}

impl AlignedStencil {
    pub fn centre(&self) -> &ProjectionFrame {
        let k = self.offsets.iter().position(|&o| o == 0).expect("stencil contains 0");
        &self.frames[k]
    }

    pub fn weights(&self, order: usize) -> Vec<f64> {
        let nodes: Vec<f64> = self.offsets.iter().map(|&o| o as f64).collect();
        fd_weights(&nodes, order).into_iter().map(|w| w / self.step.powi(order as i32)).collect()
    }

    /// Σ w_k X_k for per-node blocks X_k, summed as Σ w_k (X_k − X_0) when
    /// differentiating so that constant data give exactly zero.
    pub fn combine(&self, values: &[Array2<C64>], order: usize) -> Array2<C64> {
        let w = self.weights(order);
        let c = self.offsets.iter().position(|&o| o == 0).unwrap();
        let mut acc = Array2::zeros(values[0].dim());
        for (k, (wk, x)) in w.iter().zip(values).enumerate() {
            if order == 0 {
                acc.scaled_add(C64::new(*wk, 0.0), x);
            } else if k != c {
                acc.scaled_add(C64::new(*wk, 0.0), &(x - &values[c]));
            }
        }
        acc
    }

    pub fn frame_derivative(&self, order: usize) -> Array2<C64> {
        let blocks: Vec<Array2<C64>> = self.frames.iter().map(|f| f.frame.clone()).collect();
        self.combine(&blocks, order)
    }
}

fn align(centre: &ProjectionFrame, other: ProjectionFrame) -> Result<ProjectionFrame> {
    if other.rank() != centre.rank() || other.dim() != centre.dim() {
        return Err(Error::Gauge(0.0));
    }
    let o = linalg::adjoint(&centre.frame).dot(&other.frame);
    let (w, smin) = linalg::polar_unitary(&o)?;
    if smin < 0.5 {
        return Err(Error::Gauge(smin));
    }
    Ok(other.rotated(&linalg::adjoint(&w)))
}

pub fn aligned_stencil(family: &FrameFamily, s: f64, step: f64) -> Result<AlignedStencil> {
    let offsets = stencil_offsets(s, step)?;
    let raw: Vec<ProjectionFrame> = offsets
        .par_iter()
        .map(|&k| family(s + k as f64 * step))
        .collect::<Result<_>>()?;
    let c = offsets.iter().position(|&o| o == 0).unwrap();
    let centre = raw[c].clone();
    let frames = raw.into_iter().map(|f| align(&centre, f)).collect::<Result<_>>()?;
    Ok(AlignedStencil { s, step, offsets, frames })
}

/// Gauge-aligned frame and its first two s-derivatives at one s; Ṗ and P̈
/// follow as Φ̇Φ† + ΦΦ̇† and Φ̈Φ† + 2Φ̇Φ̇† + ΦΦ̈†.
#[derive(Clone, Debug)]
pub struct FrameJet {
    pub s: f64,
    pub step: f64,
    pub energy: f64,
    pub phi: Array2<C64>,
    pub dphi: Array2<C64>,
    pub ddphi: Array2<C64>,
    /// Relative change of Φ̇ and Φ̈ between step and step/2.
    pub richardson: [f64; 2],
}

impl FrameJet {
    pub fn rank(&self) -> usize {
        self.phi.ncols()
    }

    pub fn pdot(&self) -> LowRankHermitian {
        let k = self.rank();
        LowRankHermitian {
            basis: linalg::hstack(&[&self.dphi, &self.phi]),
            core: linalg::scalar_blocks(k, &[&[0.0, 1.0], &[1.0, 0.0]]),
        }
    }

    pub fn pddot(&self) -> LowRankHermitian {
        let k = self.rank();
        LowRankHermitian {
            basis: linalg::hstack(&[&self.ddphi, &self.dphi, &self.phi]),
            core: linalg::scalar_blocks(k, &[&[0.0, 0.0, 1.0], &[0.0, 2.0, 0.0], &[1.0, 0.0, 0.0]]),
        }
    }

    /// Dense Ṗ (order 1) or P̈ (order 2).
    pub fn matrix(&self, order: usize) -> Array2<C64> {
        if order == 1 {
            self.pdot().dense()
        } else {
            self.pddot().dense()
        }
    }

    pub fn projector(&self) -> Array2<C64> {
        self.phi.dot(&linalg::adjoint(&self.phi))
    }

    /// ‖PṖP‖ = ‖Φ†Φ̇ + Φ̇†Φ‖.
    pub fn diagonal_block_norm(&self) -> Result<f64> {
        let m = linalg::adjoint(&self.phi).dot(&self.dphi);
        linalg::normal_norm(&(&m + &linalg::adjoint(&m)), false)
    }

    /// ṖP = (Φ̇ + ΦΦ̇†Φ)Φ†; returns the left factor.
    pub fn pdot_p_factor(&self) -> Array2<C64> {
        &self.dphi + &self.phi.dot(&linalg::adjoint(&self.dphi).dot(&self.phi))
    }
}

fn richardson(coarse: &Array2<C64>, fine: &Array2<C64>) -> (f64, bool) {
    let diff = linalg::frobenius(&(coarse - fine));
    let scale = linalg::frobenius(fine);
    (diff / scale.max(f64::MIN_POSITIVE), diff <= 0.1 * scale + RICHARDSON_FLOOR)
}

/// Aligned frame derivatives at `s`, verified against the half step.
/// `order` selects which derivatives must pass the Richardson check.
pub fn projection_derivative(family: &FrameFamily, s: f64, order: usize, fd_step: f64) -> Result<FrameJet> {
    if order != 1 && order != 2 {
        return Err(Error::Invalid(format!("derivative order {order} not in {{1, 2}}")));
    }
    let coarse = aligned_stencil(family, s, fd_step)?;
    let fine = aligned_stencil(family, s, fd_step / 2.0)?;
    // Both stencils share the centre evaluation, hence the gauge.
    let phi = fine.centre().frame.clone();
    let d1 = (coarse.frame_derivative(1), fine.frame_derivative(1));
    let d2 = (coarse.frame_derivative(2), fine.frame_derivative(2));
    let (r1, ok1) = richardson(&d1.0, &d1.1);
    let (r2, ok2) = richardson(&d2.0, &d2.1);
    if !ok1 || (order == 2 && !ok2) {
        return Err(Error::Richardson(format!(
            "frame derivative at s = {s}: relative step-halving change {:.3e} (order 1), {:.3e} (order 2)",
            r1, r2
        )));
    }
    Ok(FrameJet {
        s,
        step: fd_step / 2.0,
        energy: fine.centre().energy,
        phi,
        dphi: d1.1,
        ddphi: d2.1,
        richardson: [r1, r2],
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothDelta {
    /// 2 max_s ‖d/ds[(H − E)P]‖
    pub value: f64,
    pub per_s: Vec<(f64, f64)>,
    pub richardson: f64,
}

fn smooth_norm_at(h: &OperatorFamily, st: &AlignedStencil) -> Result<f64> {
    let ks: Vec<Array2<C64>> = st
        .offsets
        .par_iter()
        .zip(&st.frames)
        .map(|(&k, f)| shifted_action(&h(st.s + k as f64 * st.step)?, f.energy, f))
        .collect::<Result<_>>()?;
    let c = st.offsets.iter().position(|&o| o == 0).unwrap();
    let kdot = st.combine(&ks, 1);
    let phidot = st.frame_derivative(1);
    let phi = &st.frames[c].frame;
    linalg::outer_norm(&linalg::hstack(&[&kdot, &ks[c]]), &linalg::hstack(&[phi, &phidot]))
}

/// δ_smooth = 2 max over `s_grid` of ‖d/ds[(H(s) − E(s))P(s)]‖, each value
/// confirmed by step halving to 10 %.
pub fn delta_smooth_estimate(
    h: &OperatorFamily,
    p: &FrameFamily,
    s_grid: &[f64],
    fd_step: f64,
) -> Result<SmoothDelta> {
    let mut per_s = Vec::with_capacity(s_grid.len());
    let mut worst: f64 = 0.0;
    for &s in s_grid {
        let coarse = smooth_norm_at(h, &aligned_stencil(p, s, fd_step)?)?;
        let fine = smooth_norm_at(h, &aligned_stencil(p, s, fd_step / 2.0)?)?;
        let scale = h(s)?.spectral_bounds();
        let floor = 1e-9 * scale.0.abs().max(scale.1.abs()).max(1.0);
        let diff = (coarse - fine).abs();
        if diff > 0.1 * fine + floor {
            return Err(Error::Richardson(format!(
                "d/ds[(H - E)P] at s = {s}: {coarse:.6e} vs {fine:.6e} under step halving"
            )));
        }
        worst = worst.max(diff / fine.max(f64::MIN_POSITIVE));
        per_s.push((s, fine));
    }
    let value = 2.0 * per_s.iter().map(|x| x.1).fold(0.0, f64::max);
    Ok(SmoothDelta { value, per_s, richardson: worst })
}

/// δ' = ‖g(H − E)ṖP‖ through the eigendecomposition of H.
pub fn delta_prime_estimate(eigs: &EigenDecomposition, e: f64, jet: &FrameJet, g: &BumpFunction) -> Result<f64> {
    let x = jet.pdot_p_factor();
    let q = &eigs.vectors;
    let mut coeffs = linalg::adjoint(q).dot(&x);
    for (i, mut row) in coeffs.rows_mut().into_iter().enumerate() {
        let gi = g.eval(eigs.values[i] - e);
        row.mapv_inplace(|z| z * gi);
    }
    linalg::op_norm(&q.dot(&coeffs))
}

/// Same quantity through the Helffer–Sjöstrand quadrature (cross-check).
pub fn delta_prime_estimate_hs(
    h: &DiscreteHamiltonian,
    e: f64,
    jet: &FrameJet,
    ext: &QuasiAnalyticExtension,
    backend: Backend,
) -> Result<f64> {
    let y = hs_apply(h, e, ext, &jet.pdot_p_factor(), backend)?;
    linalg::op_norm(&y)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosenessRow {
    pub s: f64,
    /// ‖dⁿ/dsⁿ (P_Ω − P)‖ for n = 0, 1, 2.
    pub norms: [f64; 3],
}

/// ‖Q⁽ⁿ⁾(s)‖ for n ≤ `order` on every grid point (higher entries NaN).
pub fn closeness_check(
    p_omega: &FrameFamily,
    p: &FrameFamily,
    s_grid: &[f64],
    order: usize,
    fd_step: f64,
) -> Result<Vec<ClosenessRow>> {
    if order > 2 {
        return Err(Error::Invalid(format!("closeness order {order} above 2")));
    }
    let mut out = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let mut norms = [f64::NAN; 3];
        if order == 0 {
            let (a, b) = (p_omega(s)?, p(s)?);
            norms[0] = difference_norm(&[&a.frame], &[&b.frame], 0)?;
        } else {
            let a = projection_derivative(p_omega, s, order, fd_step)?;
            let b = projection_derivative(p, s, order, fd_step)?;
            norms[0] = difference_norm(&[&a.phi], &[&b.phi], 0)?;
            norms[1] = difference_norm(&[&a.dphi, &a.phi], &[&b.dphi, &b.phi], 1)?;
            if order == 2 {
                norms[2] = difference_norm(&[&a.ddphi, &a.dphi, &a.phi], &[&b.ddphi, &b.dphi, &b.phi], 2)?;
            }
        }
        out.push(ClosenessRow { s, norms });
    }
    Ok(out)
}

/// ‖dⁿ(AA†)/dsⁿ − dⁿ(BB†)/dsⁿ‖ from jets [Φ⁽ⁿ⁾, …, Φ].
fn difference_norm(a: &[&Array2<C64>], b: &[&Array2<C64>], n: usize) -> Result<f64> {
    let k = a[0].ncols();
    let kb = b[0].ncols();
    let pattern: Vec<Vec<f64>> = match n {
        0 => vec![vec![1.0]],
        1 => vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        _ => vec![vec![0.0, 0.0, 1.0], vec![0.0, 2.0, 0.0], vec![1.0, 0.0, 0.0]],
    };
    let rows: Vec<&[f64]> = pattern.iter().map(|r| r.as_slice()).collect();
    let ca = linalg::scalar_blocks(k, &rows);
    let cb = linalg::scalar_blocks(kb, &rows).mapv(|z| -z);
    let (na, nb) = (ca.nrows(), cb.nrows());
    let mut core = linalg::zeros(na + nb, na + nb);
    core.slice_mut(ndarray::s![..na, ..na]).assign(&ca);
    core.slice_mut(ndarray::s![na.., na..]).assign(&cb);
    let mut blocks: Vec<&Array2<C64>> = a.to_vec();
    blocks.extend_from_slice(b);
    LowRankHermitian::new(linalg::hstack(&blocks), core)?.norm()
}
