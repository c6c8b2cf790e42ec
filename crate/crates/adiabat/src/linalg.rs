//! Dense and banded kernels shared by the modules: LAPACK divide-and-conquer
//! eigensolvers, banded LU for shifted operators, norms and frame utilities.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::SVD;

use crate::error::{Error, Result};
use crate::lattice_hamiltonian::DiscreteHamiltonian;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn to_col_major<T: Copy>(a: ArrayView2<T>) -> Vec<T> {
    a.t().iter().copied().collect()
}

fn from_col_major<T: Copy>(n: usize, m: usize, buf: &[T]) -> Array2<T> {
    Array2::from_shape_fn((n, m), |(i, j)| buf[i + j * n])
}

/// Eigenpairs of a Hermitian matrix, ascending (LAPACK zheevr).
///
/// Real symmetric input goes through the same complex driver: the real
/// level-3 kernels of some OpenBLAS builds are unreliable, and the MRRR
/// path only relies on complex Householder updates.
pub fn eigh(a: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("eigh of {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok((vec![], zeros(0, 0)));
    }
    let mut buf = to_col_major(a.view());
    let mut w = vec![0.0; n];
    let mut z = vec![ZERO; n * n];
    let mut isuppz = vec![0i32; 2 * n];
    let jobz = b'V' as std::ffi::c_char;
    let range = b'A' as std::ffi::c_char;
    let uplo = b'L' as std::ffi::c_char;
    let ni = n as i32;
    let (vl, vu, il, iu, abstol) = (0.0, 0.0, 0, 0, 0.0);
    let mut call = |work: &mut [C64], lwork: i32, rwork: &mut [f64], lrwork: i32, iwork: &mut [i32], liwork: i32| {
        let (mut m, mut info) = (0i32, 0i32);
        unsafe {
            lapack_sys::zheevr_(
            &jobz, &range, &uplo, &ni, buf.as_mut_ptr() as *mut _, &ni, &vl, &vu, &il, &iu, &abstol, &mut m,
            w.as_mut_ptr(), z.as_mut_ptr() as *mut _, &ni, isuppz.as_mut_ptr(), work.as_mut_ptr() as *mut _, &lwork,
            rwork.as_mut_ptr(), &lrwork, iwork.as_mut_ptr(), &liwork, &mut info,
            );
        }
        (m, info)
    };
    let (mut wq, mut rwq, mut iwq) = ([ZERO], [0.0f64], [0i32]);
    let (_, info) = call(&mut wq, -1, &mut rwq, -1, &mut iwq, -1);
    if info != 0 {
        return Err(Error::Eigensolver(info));
    }
    let lwork = (wq[0].re as i32).max(2 * n as i32);
    let lrwork = (rwq[0] as i32).max(24 * n as i32);
    let liwork = iwq[0].max(10 * n as i32);
    let mut work = vec![ZERO; lwork as usize];
    let mut rwork = vec![0.0; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    let (m, info) = call(&mut work, lwork, &mut rwork, lrwork, &mut iwork, liwork);
    if info != 0 {
        return Err(Error::Eigensolver(info));
    }
    if m as usize != n {
        return Err(Error::NoConvergence(format!("eigensolver found {m} of {n} eigenpairs")));
    }
    Ok((w, from_col_major(n, n, &z)))
}

/// LU factorization of `H - z` in LAPACK band storage.
pub struct BandedLu {
    n: usize,
    kl: usize,
    ab: Vec<C64>,
    ipiv: Vec<i32>,
}

impl BandedLu {
    /// Factor `(H - shift) - z`.
    pub fn new(h: &DiscreteHamiltonian, shift: f64, z: C64) -> Result<Self> {
        let n = h.dim();
        let kl = h.bandwidth().max(1);
        let ldab = 3 * kl + 1;
        let mut ab = vec![ZERO; ldab * n];
        let at = |i: usize, j: usize| 2 * kl + i - j + j * ldab;
        for p in 0..n {
            ab[at(p, p)] = C64::new(h.diag[p] - shift, 0.0) - z;
        }
        for &(p, q, v) in &h.upper {
            ab[at(p, q)] = v;
            ab[at(q, p)] = v.conj();
        }
        let mut ipiv = vec![0i32; n];
        let (ni, kli) = (n as i32, kl as i32);
        let ldabi = ldab as i32;
        let mut info = 0;
        unsafe {
            lapack_sys::zgbtrf_(&ni, &ni, &kli, &kli, ab.as_mut_ptr() as *mut _, &ldabi, ipiv.as_mut_ptr(), &mut info);
        }
        if info != 0 {
            return Err(Error::Solve(format!("banded LU singular at z = {z} (info {info})")));
        }
        check_pivots((0..n).map(|j| ab[2 * kl + j * ldab]))?;
        Ok(BandedLu { n, kl, ab, ipiv })
    }

    /// Solve in place for a column-major block of `nrhs` right-hand sides.
    pub fn solve_in_place(&self, rhs: &mut [C64], nrhs: usize) -> Result<()> {
        let trans = b'N' as std::ffi::c_char;
        let (ni, kli) = (self.n as i32, self.kl as i32);
        let ldab = (3 * self.kl + 1) as i32;
        let nr = nrhs as i32;
        let mut info = 0;
        unsafe {
            lapack_sys::zgbtrs_(
                &trans, &ni, &kli, &kli, &nr, self.ab.as_ptr() as *const _, &ldab, self.ipiv.as_ptr(),
                rhs.as_mut_ptr() as *mut _, &ni, &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Solve(format!("banded solve failed (info {info})")));
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &Array2<C64>) -> Result<Array2<C64>> {
        let mut buf = to_col_major(rhs.view());
        self.solve_in_place(&mut buf, rhs.ncols())?;
        Ok(from_col_major(self.n, rhs.ncols(), &buf))
    }
}

/// Pivot-growth estimate of the condition number from the diagonal of U.
pub fn check_pivots(diag: impl Iterator<Item = C64>) -> Result<()> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for d in diag {
        lo = lo.min(d.norm());
        hi = hi.max(d.norm());
    }
    if hi > 0.0 && hi / lo > 1e14 {
        return Err(Error::Solve(format!("LU pivot ratio {:e} exceeds 1e14", hi / lo)));
    }
    Ok(())
}

pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) - b.dot(a)
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn to_complex(a: &Array2<f64>) -> Array2<C64> {
    a.mapv(|x| C64::new(x, 0.0))
}

pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Singular values, descending.
pub fn singular_values(a: &Array2<C64>) -> Result<Array1<f64>> {
    if a.is_empty() {
        return Ok(Array1::zeros(0));
    }
    let (_, s, _) = a.svd(false, false).map_err(|e| Error::Solve(format!("svd: {e}")))?;
    Ok(s)
}

/// Operator 2-norm.
pub fn op_norm(a: &Array2<C64>) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(singular_values(a)?.iter().copied().fold(0.0, f64::max))
}

/// Spectral norm of a matrix known to be Hermitian or anti-Hermitian.
pub fn normal_norm(a: &Array2<C64>, anti: bool) -> Result<f64> {
    let m = if anti { a.mapv(|z| z * C64::new(0.0, 1.0)) } else { a.clone() };
    let sym = (&m + &adjoint(&m)).mapv(|z| z * 0.5);
    let (w, _) = eigh(&sym)?;
    Ok(w.iter().map(|x| x.abs()).fold(0.0, f64::max))
}

/// Euclidean norm of a vector.
pub fn vnorm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vdot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Symmetric (Löwdin) orthonormalization M (M†M)^{-1/2}; returns the frame
/// and the smallest singular value of M.
pub fn lowdin(m: &Array2<C64>) -> Result<(Array2<C64>, f64)> {
    let gram = adjoint(m).dot(m);
    let (w, v) = eigh(&gram)?;
    let smin = w.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
    if smin == 0.0 {
        return Err(Error::RankCollapse(0.0));
    }
    let d = Array1::from_iter(w.iter().map(|&x| C64::new(1.0 / x.sqrt(), 0.0)));
    let inv_sqrt = (&v * &d.view().insert_axis(Axis(0))).dot(&adjoint(&v));
    Ok((m.dot(&inv_sqrt), smin))
}

/// Unitary polar factor of a square matrix and its smallest singular value.
pub fn polar_unitary(o: &Array2<C64>) -> Result<(Array2<C64>, f64)> {
    let (u, s, vt) = o.svd(true, true).map_err(|e| Error::Solve(format!("svd: {e}")))?;
    let (u, vt) = (u.unwrap(), vt.unwrap());
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((u.dot(&vt), smin))
}

/// Q diag(f(λ)) Q†.
pub fn spectral_map(vals: &[f64], vecs: &Array2<C64>, f: impl Fn(f64) -> f64) -> Array2<C64> {
    let d = Array1::from_iter(vals.iter().map(|&x| C64::new(f(x), 0.0)));
    (vecs * &d.view().insert_axis(Axis(0))).dot(&adjoint(vecs))
}

/// Q diag(f(λ)) Q† for complex-valued f.
pub fn spectral_map_complex(vals: &[f64], vecs: &Array2<C64>, f: impl Fn(f64) -> C64) -> Array2<C64> {
    let d = Array1::from_iter(vals.iter().map(|&x| f(x)));
    (vecs * &d.view().insert_axis(Axis(0))).dot(&adjoint(vecs))
}

/// Column `j` as an owned vector.
pub fn column(a: &Array2<C64>, j: usize) -> Vec<C64> {
    a.column(j).to_vec()
}

pub fn zeros(n: usize, m: usize) -> Array2<C64> {
    Array2::from_elem((n, m), ZERO)
}

/// Hermitian operator of the form B C B† with a thin basis B (N×k) and a
/// Hermitian core C (k×k).
#[derive(Clone, Debug)]
pub struct LowRankHermitian {
    pub basis: Array2<C64>,
    pub core: Array2<C64>,
}

impl LowRankHermitian {
    pub fn new(basis: Array2<C64>, core: Array2<C64>) -> Result<Self> {
        if core.nrows() != basis.ncols() || core.ncols() != basis.ncols() {
            return Err(Error::Shape(format!(
                "core {:?} does not match basis {:?}",
                core.dim(),
                basis.dim()
            )));
        }
        Ok(LowRankHermitian { basis, core })
    }

    /// Operator norm through a thin SVD B = UΣV†: ‖ΣV†CVΣ‖.
    pub fn norm(&self) -> Result<f64> {
        if self.basis.is_empty() {
            return Ok(0.0);
        }
        let (_, s, vt) = self.basis.svd(false, true).map_err(|e| Error::Solve(format!("svd: {e}")))?;
        let vt = vt.unwrap();
        let k = s.len();
        let vt = vt.slice(ndarray::s![..k, ..]).to_owned();
        let sv = Array2::from_shape_fn((k, vt.ncols()), |(i, j)| vt[[i, j]] * s[i]);
        let m = sv.dot(&self.core).dot(&adjoint(&sv));
        normal_norm(&m, false)
    }

    pub fn dense(&self) -> Array2<C64> {
        self.basis.dot(&self.core).dot(&adjoint(&self.basis))
    }

    /// B C B† X
    pub fn apply(&self, x: &Array2<C64>) -> Array2<C64> {
        self.basis.dot(&self.core.dot(&adjoint(&self.basis).dot(x)))
    }
}

/// Horizontal concatenation of column blocks with equal row count.
pub fn hstack(blocks: &[&Array2<C64>]) -> Array2<C64> {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    ndarray::concatenate(Axis(1), &views).expect("blocks with equal row counts")
}

/// Block matrix whose (i, j) block is `pattern[i][j]`·I of side `k`.
pub fn scalar_blocks(k: usize, pattern: &[&[f64]]) -> Array2<C64> {
    let m = pattern.len();
    let mut out = zeros(m * k, m * k);
    for (bi, row) in pattern.iter().enumerate() {
        for (bj, &c) in row.iter().enumerate() {
            if c != 0.0 {
                for i in 0..k {
                    out[[bi * k + i, bj * k + i]] = C64::new(c, 0.0);
                }
            }
        }
    }
    out
}

/// ‖A B†‖ for thin blocks A, B with equal column counts, via thin SVDs.
pub fn outer_norm(a: &Array2<C64>, b: &Array2<C64>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let thin = |m: &Array2<C64>| -> Result<Array2<C64>> {
        let (_, s, vt) = m.svd(false, true).map_err(|e| Error::Solve(format!("svd: {e}")))?;
        let vt = vt.unwrap();
        Ok(Array2::from_shape_fn((s.len(), vt.ncols()), |(i, j)| vt[[i, j]] * s[i]))
    };
    let (sa, sb) = (thin(a)?, thin(b)?);
    op_norm(&sa.dot(&adjoint(&sb)))
}
