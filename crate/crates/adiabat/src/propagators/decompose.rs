use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_hamiltonian::DiscreteHamiltonian;
use crate::linalg;
use crate::projection_factory::FrameJet;
use crate::spectral_calculus::{
    chunked_sum, eigensolve, solve_shifted, Backend, BumpFunction, QuasiAnalyticExtension, HS_CHUNK,
};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// X₁ from the plane integral of R Ṗ R, Y₁ = [Ṗ, P − g(H − E)].
    One,
    /// X₂ = (1 − g)(H − E)⁻² Ḣ P + h.c. on the complement of the g-window.
    Two,
}

/// How X₁ is evaluated.
#[derive(Clone, Copy)]
pub enum X1Path<'a> {
    /// Divided differences of g in the eigenbasis of H.
    Eigen,
    /// −Σ c R(z) Ṗ R(z) + h.c. over the quadrature nodes.
    Hs(&'a QuasiAnalyticExtension, Backend),
}

pub struct CommutatorInputs<'a> {
    pub h: &'a DiscreteHamiltonian,
    pub e: f64,
    pub jet: &'a FrameJet,
    pub g: &'a BumpFunction,
    pub variant: Variant,
    pub x1_path: X1Path<'a>,
    /// Diagonal of d(H − E)/ds on the operator's sites; required for variant 2.
    pub h_dot: Option<&'a [f64]>,
}

#[derive(Clone, Debug)]
pub struct CommutatorDecomposition {
    pub variant: Variant,
    pub x: Array2<C64>,
    pub y: Array2<C64>,
    /// ‖[Ṗ, P]‖
    pub commutator_norm: f64,
    pub x_norm: f64,
    pub y_norm: f64,
    /// ‖[Ṗ, P] − [X, H − E] − Y‖, relative to ‖[Ṗ, P]‖ when that is nonzero.
    pub residual: f64,
    /// Variant 1: ‖[X₁, H − E] − [Ṗ, g(H − E)]‖ / ‖[Ṗ, g(H − E)]‖ with the
    /// right side from the eigendecomposition.
    pub identity_residual: Option<f64>,
    /// Variant 2: relative difference to the full-resolvent reading
    /// (1 − g)(H − E)⁻² computed by dense solves, when H − E is invertible.
    pub full_reading_gap: Option<f64>,
    /// Quadrature nodes used (0 on the eigen path).
    pub nodes: usize,
}

/// [X, H − E] using the sparse action of H.
fn commutator_with_h(h: &DiscreteHamiltonian, e: f64, x: &Array2<C64>) -> Array2<C64> {
    let ax = h.apply_block_shifted(x, e);
    let xa = linalg::adjoint(&h.apply_block_shifted(&linalg::adjoint(x), e));
    xa - ax
}

fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

fn x1_eigen(vals: &[f64], q: &Array2<C64>, e: f64, g: &BumpFunction, pdot: &Array2<C64>) -> Array2<C64> {
    let m = linalg::adjoint(q).dot(pdot).dot(q);
    let n = vals.len();
    let gv: Vec<f64> = vals.iter().map(|&l| g.eval(l - e)).collect();
    let dd = Array2::from_shape_fn((n, n), |(i, j)| {
        let (li, lj) = (vals[i] - e, vals[j] - e);
        if (li - lj).abs() > 1e-6 {
            (gv[i] - gv[j]) / (li - lj)
        } else {
            g.deriv(0.5 * (li + lj), 1)
        }
    });
    let core = Array2::from_shape_fn((n, n), |(i, j)| m[[i, j]] * dd[[i, j]]);
    q.dot(&core).dot(&linalg::adjoint(q))
}

fn x1_hs(
    h: &DiscreteHamiltonian,
    e: f64,
    ext: &QuasiAnalyticExtension,
    backend: Backend,
    jet: &FrameJet,
) -> Result<(Array2<C64>, usize)> {
    let pd = jet.pdot();
    let (b, core) = (&pd.basis, &pd.core);
    let nodes = ext.nodes();
    let n = h.dim();
    let s = chunked_sum(nodes.len(), HS_CHUNK, |range| {
        let chunk = &nodes[range];
        let w = b.ncols();
        let mut left = linalg::zeros(n, w * chunk.len());
        let mut right = linalg::zeros(n, w * chunk.len());
        for (k, node) in chunk.iter().enumerate() {
            let up = solve_shifted(h, e, node.z, b, backend)?;
            let down = solve_shifted(h, e, node.z.conj(), b, backend)?;
            let scaled = up.dot(core).mapv(|z| z * node.coeff);
            left.slice_mut(ndarray::s![.., k * w..(k + 1) * w]).assign(&scaled);
            right.slice_mut(ndarray::s![.., k * w..(k + 1) * w]).assign(&down);
        }
        Ok(left.dot(&linalg::adjoint(&right)))
    })?
    .unwrap_or_else(|| linalg::zeros(n, n));
    Ok(((&s + &linalg::adjoint(&s)).mapv(|z| -z), nodes.len()))
}

/// [Ṗ, P] = [X, H − E] + Y in either variant, with the residual and the
/// cross-checks described on [`CommutatorDecomposition`].
pub fn decompose_commutator(inp: &CommutatorInputs) -> Result<CommutatorDecomposition> {
    let (h, e, jet, g) = (inp.h, inp.e, inp.jet, inp.g);
    if jet.phi.nrows() != h.dim() {
        return Err(Error::Shape(format!("jet has {} rows, operator acts on {}", jet.phi.nrows(), h.dim())));
    }
    let eig = eigensolve(h)?;
    let pdot = jet.matrix(1);
    let p = jet.projector();
    let comm = linalg::commutator(&pdot, &p);
    let commutator_norm = linalg::op_norm(&comm)?;
    let gmat = linalg::spectral_map(&eig.values, &eig.vectors, |l| g.eval(l - e));

    let (x, y, identity_residual, full_reading_gap, nodes) = match inp.variant {
        Variant::One => {
            let (x, nodes) = match inp.x1_path {
                X1Path::Eigen => (x1_eigen(&eig.values, &eig.vectors, e, g, &pdot), 0),
                X1Path::Hs(ext, backend) => x1_hs(h, e, ext, backend, jet)?,
            };
            let y = linalg::commutator(&pdot, &(&p - &gmat));
            let target = linalg::commutator(&pdot, &gmat);
            let lhs = commutator_with_h(h, e, &x);
            let idr = relative(linalg::op_norm(&(&lhs - &target))?, linalg::op_norm(&target)?);
            (x, y, Some(idr), None, nodes)
        }
        Variant::Two => {
            let hd = inp
                .h_dot
                .ok_or_else(|| Error::Invalid("variant 2 needs the diagonal of dH/ds".into()))?;
            if hd.len() != h.dim() {
                return Err(Error::Shape(format!("dH/ds has {} entries, operator acts on {}", hd.len(), h.dim())));
            }
            let a = g.a;
            let near = eig.values.iter().filter(|&&l| (l - e).abs() < a / 4.0).count();
            if near > jet.rank() {
                return Err(Error::Precondition(format!(
                    "spectral margin: {near} eigenvalues of H - E within a/4 = {} of 0, cluster rank {}",
                    a / 4.0,
                    jet.rank()
                )));
            }
            let f = |l: f64| {
                let x = l - e;
                if x.abs() <= a / 2.0 {
                    0.0
                } else {
                    (1.0 - g.eval(x)) / (x * x)
                }
            };
            let fmat = linalg::spectral_map(&eig.values, &eig.vectors, f);
            let mut dphi = jet.phi.clone();
            for (i, mut row) in dphi.rows_mut().into_iter().enumerate() {
                row.mapv_inplace(|z| z * hd[i]);
            }
            let m = fmat.dot(&dphi);
            let x = m.dot(&linalg::adjoint(&jet.phi)) + jet.phi.dot(&linalg::adjoint(&m));
            let y = &comm - &commutator_with_h(h, e, &x);
            let min_abs = eig.values.iter().map(|l| (l - e).abs()).fold(f64::INFINITY, f64::min);
            let max_abs = eig.values.iter().map(|l| (l - e).abs()).fold(0.0, f64::max);
            let gap = if min_abs > 1e-10 * max_abs {
                let once = solve_shifted(h, e, C64::new(0.0, 0.0), &dphi, Backend::Dense)?;
                let twice = solve_shifted(h, e, C64::new(0.0, 0.0), &once, Backend::Dense)?;
                let full = &twice - &gmat.dot(&twice);
                Some(relative(linalg::op_norm(&(&full - &m))?, linalg::op_norm(&m)?))
            } else {
                None
            };
            (x, y, None, gap, 0)
        }
    };
    let recon = &comm - &commutator_with_h(h, e, &x) - &y;
    let residual = relative(linalg::op_norm(&recon)?, commutator_norm);
    Ok(CommutatorDecomposition {
        variant: inp.variant,
        x_norm: linalg::op_norm(&x)?,
        y_norm: linalg::op_norm(&y)?,
        x,
        y,
        commutator_norm,
        residual,
        identity_residual,
        full_reading_gap,
        nodes,
    })
}
