use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_hamiltonian::DiscreteHamiltonian;
use crate::linalg::{self, BandedLu};
use crate::C64;

/// Linear-solve backend for shifted operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// LU of the dense matrix.
    Dense,
    /// LU in band storage.
    Banded,
    /// Banded when the bandwidth is below a quarter of the dimension.
    Auto,
}

impl Backend {
    fn resolve(self, h: &DiscreteHamiltonian) -> Backend {
        match self {
            Backend::Auto if 4 * h.bandwidth() < h.dim() => Backend::Banded,
            Backend::Auto => Backend::Dense,
            b => b,
        }
    }
}

fn dense_solve(a: &Array2<C64>, rhs: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    let m = rhs.ncols();
    let mut abuf: Vec<C64> = a.t().iter().copied().collect();
    let mut bbuf: Vec<C64> = rhs.t().iter().copied().collect();
    let mut ipiv = vec![0i32; n];
    let (ni, mi) = (n as i32, m as i32);
    let mut info = 0;
    unsafe {
        lapack_sys::zgesv_(
            &ni, &mi, abuf.as_mut_ptr() as *mut _, &ni, ipiv.as_mut_ptr(), bbuf.as_mut_ptr() as *mut _, &ni, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Solve(format!("dense LU singular (info {info})")));
    }
    linalg::check_pivots((0..n).map(|i| abuf[i + i * n]))?;
    Ok(Array2::from_shape_fn((n, m), |(i, j)| bbuf[i + j * n]))
}

/// (H − shift − z)⁻¹ · rhs.
pub fn solve_shifted(
    h: &DiscreteHamiltonian,
    shift: f64,
    z: C64,
    rhs: &Array2<C64>,
    backend: Backend,
) -> Result<Array2<C64>> {
    match backend.resolve(h) {
        Backend::Banded => BandedLu::new(h, shift, z)?.solve(rhs),
        _ => {
            let mut a = h.to_dense();
            for i in 0..h.dim() {
                a[[i, i]] -= shift + z;
            }
            dense_solve(&a, rhs)
        }
    }
}

/// Full resolvent matrix (H − shift − z)⁻¹.
pub fn resolvent(h: &DiscreteHamiltonian, shift: f64, z: C64, backend: Backend) -> Result<Array2<C64>> {
    solve_shifted(h, shift, z, &linalg::identity(h.dim()), backend)
}
