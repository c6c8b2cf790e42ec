use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bump::BumpFunction;
use super::eigen::EigenDecomposition;
use super::quad::gauss_legendre;
use super::resolvent::{resolvent, solve_shifted, Backend};
use crate::error::{Error, Result};
use crate::lattice_hamiltonian::DiscreteHamiltonian;
use crate::linalg;
use crate::C64;

/// Panel layout for the plane integral over the upper half of the support
/// rectangle |x| <= a, 0 < y <= a.
///
/// The top strip a/2 <= y <= a (where the y-cutoff varies) is tiled with
/// `top_panels` panels per x-piece. Below it only the transition zones
/// a/2 <= |x| <= a contribute; they are cut into dyadic y-levels down to
/// y_min = a 2^-(levels+1), and each level gets x-panels of width
/// kappa(level) times twice its height, kappa = kappa0 2^max(0, level - fine_levels).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsQuadrature {
    pub gl_order: usize,
    pub levels: usize,
    pub top_panels: usize,
    pub kappa0: f64,
    pub fine_levels: usize,
}

impl Default for HsQuadrature {
    fn default() -> Self {
        HsQuadrature { gl_order: 8, levels: 9, top_panels: 4, kappa0: 0.25, fine_levels: 3 }
    }
}

impl HsQuadrature {
    pub fn y_min(&self, a: f64) -> f64 {
        a / 2f64.powi(self.levels as i32 + 1)
    }
}

/// g̃(x+iy) = Σ_{k≤n} g^(k)(x)(iy)^k/k! · σ(y), with σ = g_a itself as the
/// y-cutoff.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuasiAnalyticExtension {
    pub g: BumpFunction,
    pub order: usize,
    pub quad: HsQuadrature,
}

#[derive(Clone, Copy, Debug)]
pub struct HsNode {
    pub z: C64,
    pub weight: f64,
    /// weight · ∂̄g̃(z) / π
    pub coeff: C64,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

impl QuasiAnalyticExtension {
    pub fn new(g: &BumpFunction, order: usize) -> Result<Self> {
        Self::with_quadrature(g, order, HsQuadrature::default())
    }

    pub fn with_quadrature(g: &BumpFunction, order: usize, quad: HsQuadrature) -> Result<Self> {
        if !(2..=4).contains(&order) {
            return Err(Error::Invalid(format!(
                "extension order {order} not in 2..=4 (g^(order+1) must exist)"
            )));
        }
        Ok(QuasiAnalyticExtension { g: g.clone(), order, quad })
    }

    pub fn eval(&self, z: C64) -> C64 {
        let iy = C64::new(0.0, z.im);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..=self.order {
            acc += self.g.deriv(z.re, k) * iy.powu(k as u32) / factorial(k);
        }
        acc * self.g.eval(z.im)
    }

    /// ∂̄g̃ = ½[g^(n+1)(iy)^n/n! σ + i Σ_k g^(k)(iy)^k/k! σ'].
    pub fn dbar(&self, z: C64) -> C64 {
        let (x, y) = (z.re, z.im);
        let iy = C64::new(0.0, y);
        let n = self.order;
        let sigma = self.g.eval(y);
        let dsigma = self.g.deriv(y, 1);
        let mut acc = self.g.deriv(x, n + 1) * iy.powu(n as u32) / factorial(n) * sigma;
        if dsigma != 0.0 {
            let mut taylor = C64::new(0.0, 0.0);
            for k in 0..=n {
                taylor += self.g.deriv(x, k) * iy.powu(k as u32) / factorial(k);
            }
            acc += C64::new(0.0, 1.0) * taylor * dsigma;
        }
        acc * 0.5
    }

    /// Quadrature nodes in the upper half plane. The lower half follows by
    /// conjugation.
    pub fn nodes(&self) -> Vec<HsNode> {
        let a = self.g.a;
        let q = &self.quad;
        let (xs, ws) = gauss_legendre(q.gl_order);
        let mut out = Vec::new();
        let mut panel = |x0: f64, x1: f64, y0: f64, y1: f64| {
            let (cx, rx) = ((x0 + x1) / 2.0, (x1 - x0) / 2.0);
            let (cy, ry) = ((y0 + y1) / 2.0, (y1 - y0) / 2.0);
            for (xi, wi) in xs.iter().zip(&ws) {
                for (yj, wj) in xs.iter().zip(&ws) {
                    let z = C64::new(cx + rx * xi, cy + ry * yj);
                    let weight = wi * rx * wj * ry;
                    let coeff = self.dbar(z) * weight / std::f64::consts::PI;
                    if coeff != C64::new(0.0, 0.0) {
                        out.push(HsNode { z, weight, coeff });
                    }
                }
            }
        };
        for (x0, x1) in [(-a, -a / 2.0), (-a / 2.0, a / 2.0), (a / 2.0, a)] {
            let m = q.top_panels;
            for k in 0..m {
                let w = (x1 - x0) / m as f64;
                panel(x0 + k as f64 * w, x0 + (k + 1) as f64 * w, a / 2.0, a);
            }
        }
        for level in 1..=q.levels {
            let y1 = a / 2f64.powi(level as i32);
            let y0 = y1 / 2.0;
            let kappa = q.kappa0 * 2f64.powi(level.saturating_sub(q.fine_levels) as i32);
            let width = kappa * 2.0 * (y1 - y0);
            let m = ((a / 2.0) / width - 1e-9).ceil().max(1.0) as usize;
            for (x0, x1) in [(-a, -a / 2.0), (a / 2.0, a)] {
                let w = (x1 - x0) / m as f64;
                for k in 0..m {
                    panel(x0 + k as f64 * w, x0 + (k + 1) as f64 * w, y0, y1);
                }
            }
        }
        out
    }

    /// Scalar g(λ) through the same quadrature (for calibration).
    pub fn scalar(&self, lambda: f64) -> f64 {
        self.nodes().iter().map(|n| 2.0 * (n.coeff / (lambda - n.z)).re).sum()
    }
}

/// Σ over fixed chunks of `0..n`, evaluated in parallel and reduced by a
/// fixed pairwise tree, so the result does not depend on the thread count.
pub fn chunked_sum<F>(n: usize, chunk: usize, f: F) -> Result<Option<Array2<C64>>>
where
    F: Fn(std::ops::Range<usize>) -> Result<Array2<C64>> + Sync,
{
    let ranges: Vec<_> = (0..n).step_by(chunk.max(1)).map(|s| s..(s + chunk).min(n)).collect();
    let parts: Vec<Result<Array2<C64>>> = ranges.into_par_iter().map(&f).collect();
    let mut level: Vec<Array2<C64>> = parts.into_iter().collect::<Result<_>>()?;
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        level = next;
    }
    Ok(level.pop())
}

pub const HS_CHUNK: usize = 256;

#[derive(Clone, Debug)]
pub struct HsResult {
    pub matrix: Array2<C64>,
    pub nodes: usize,
}

/// g(H − E) = Σ_nodes c R(z) + h.c., one linear solve per node.
pub fn hs_function_of_operator(
    h: &DiscreteHamiltonian,
    shift: f64,
    ext: &QuasiAnalyticExtension,
    backend: Backend,
) -> Result<HsResult> {
    let nodes = ext.nodes();
    let n = h.dim();
    let s = chunked_sum(nodes.len(), HS_CHUNK, |range| {
        let mut acc = linalg::zeros(n, n);
        for node in &nodes[range] {
            let r = resolvent(h, shift, node.z, backend)?;
            acc.scaled_add(node.coeff, &r);
        }
        Ok(acc)
    })?
    .unwrap_or_else(|| linalg::zeros(n, n));
    let matrix = &s + &linalg::adjoint(&s);
    Ok(HsResult { matrix, nodes: nodes.len() })
}

/// Q g(Λ − E) Q†.
pub fn function_of_operator_eig(eigs: &EigenDecomposition, shift: f64, g: &BumpFunction) -> Array2<C64> {
    linalg::spectral_map(&eigs.values, &eigs.vectors, |x| g.eval(x - shift))
}

/// g(H − E)·X for a block X of columns, without forming g(H − E):
/// Σ_nodes [c R(z) + c̄ R(z̄)] X.
pub fn hs_apply(
    h: &DiscreteHamiltonian,
    shift: f64,
    ext: &QuasiAnalyticExtension,
    x: &Array2<C64>,
    backend: Backend,
) -> Result<Array2<C64>> {
    let nodes = ext.nodes();
    let (n, m) = x.dim();
    if n != h.dim() {
        return Err(Error::Shape(format!("block has {n} rows, operator acts on {}", h.dim())));
    }
    Ok(chunked_sum(nodes.len(), HS_CHUNK, |range| {
        let mut acc = linalg::zeros(n, m);
        for node in &nodes[range] {
            let up = solve_shifted(h, shift, node.z, x, backend)?;
            let down = solve_shifted(h, shift, node.z.conj(), x, backend)?;
            acc.scaled_add(node.coeff, &up);
            acc.scaled_add(node.coeff.conj(), &down);
        }
        Ok(acc)
    })?
    .unwrap_or_else(|| linalg::zeros(n, m)))
}
