use adiabat::lattice_hamiltonian::{build_hamiltonian, Grid, PotentialFamily, VectorPotentialField};
use adiabat::linalg;
use adiabat::spectral_calculus::*;
use adiabat::C64;
use ndarray::Array2;
use proptest::prelude::*;

fn random_hermitian(n: usize, seed: u64) -> Array2<C64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let a = Array2::from_shape_fn((n, n), |_| C64::new(next(), next()));
    (&a + &linalg::adjoint(&a)).mapv(|z| z * 0.5)
}

fn diag_op(vals: &[f64]) -> adiabat::lattice_hamiltonian::DiscreteHamiltonian {
    let grid = Grid::new(1, vals.len(), 1.0, [0.0, 0.0]).unwrap();
    let v = vals.to_vec();
    let pot = PotentialFamily::stationary("diag", move |x| v[x[0].round() as usize]);
    let mut h = build_hamiltonian(&grid, &VectorPotentialField::zero(), &pot, 0.0, 1.0).unwrap();
    // strip the kinetic part: only the diagonal potential remains
    h.upper.clear();
    h.diag = vals.to_vec();
    h
}

#[test]
fn smoothstep_endpoint_conditions() {
    for n in [3, 4] {
        let s = Smoothstep::new(n);
        assert_eq!(s.degree(), 2 * n + 1);
        assert!((s.poly_deriv(0.0, 0)).abs() < 1e-15);
        assert!((s.poly_deriv(1.0, 0) - 1.0).abs() < 1e-12);
        for k in 1..=n {
            assert!(s.poly_deriv(0.0, k).abs() < 1e-12, "S_{n}^({k})(0)");
            assert!(s.poly_deriv(1.0, k).abs() < 1e-9, "S_{n}^({k})(1) = {}", s.poly_deriv(1.0, k));
        }
        assert!(s.poly_deriv(1.0, n + 1).abs() > 1e-3);
    }
}

#[test]
fn bump_definition_and_gluing() {
    let g = build_bump(0.2).unwrap();
    assert_eq!(g.eval(0.0), 1.0);
    assert_eq!(g.eval(0.2), 0.0);
    let mid = g.eval(0.15);
    assert!(mid > 0.0 && mid < 1.0);
    let eps = 1e-12;
    for x in [0.1 + eps, 0.2 - eps, -0.1 - eps, -0.2 + eps] {
        assert!(g.deriv(x, 1).abs() < 1e-6, "g'({x}) = {}", g.deriv(x, 1));
    }
    assert!(build_bump(0.0).is_err());
    assert!(build_bump(1.0).is_err());
}

#[test]
fn bump_fourth_derivative_continuous_across_glue() {
    let a = 0.2;
    let g = build_bump(a).unwrap();
    let fd4 = |x: f64, h: f64| {
        (g.eval(x - 2.0 * h) - 4.0 * g.eval(x - h) + 6.0 * g.eval(x) - 4.0 * g.eval(x + h) + g.eval(x + 2.0 * h))
            / h.powi(4)
    };
    let scale = (2.0 / a).powi(4);
    for &x0 in &[a / 2.0, a] {
        let mut prev = f64::INFINITY;
        for &h in &[1e-3, 5e-4, 2.5e-4] {
            let jump = (fd4(x0 + 3.0 * h, h) - fd4(x0 - 3.0 * h, h)).abs() / scale;
            assert!(jump < prev * 0.75 || jump < 1e-6, "jump {jump} not O(step) at {x0}");
            prev = jump;
        }
    }
}

#[test]
fn triple_norm_properties() {
    let g1 = build_bump(0.1).unwrap();
    let g2 = build_bump(0.2).unwrap();
    for idx in 3..=5 {
        let t1 = triple_norm(&g1, idx).unwrap();
        let t2 = triple_norm(&g2, idx).unwrap();
        assert!(t1.value >= t2.value);
        assert_eq!(t1.convention, "C=1");
        let coarse = triple_norm_with_tol(&g1, idx, 2e-13).unwrap();
        assert!(((coarse.value - t1.value) / t1.value).abs() <= 1e-8);
    }
    assert!(triple_norm(&g1, 2).is_err());
    assert!(triple_norm(&g1, 6).is_err());
}

#[test]
fn triple_norm_zeroth_term_bounded_by_support() {
    // k = 0 contribution alone, recomputed directly by quadrature.
    let g = build_bump(0.3).unwrap();
    for idx in 3..=5 {
        let l = 1.0 - idx as f64;
        let f = |x: f64| (1.0 + x * x).powf(l / 2.0) * g.eval(x).abs();
        let (v, _) = quad::adaptive(&f, -0.3, 0.3, 1e-13);
        assert!(v <= 2.0 * 0.3);
    }
}

#[test]
fn triple_norm_scales_like_inverse_power() {
    // |||g_a|||_{n+2} ~ a^{-(n+1)}: the ratio between a and a/2 approaches 2^{n+1}.
    for idx in 3..=5 {
        let n = idx - 2;
        let t1 = triple_norm(&build_bump(0.02).unwrap(), idx).unwrap().value;
        let t2 = triple_norm(&build_bump(0.01).unwrap(), idx).unwrap().value;
        let ratio = t2 / t1;
        let expected = 2f64.powi(n as i32 + 1);
        assert!((ratio / expected - 1.0).abs() < 0.05, "index {idx}: ratio {ratio} vs {expected}");
    }
}

#[test]
fn eigensolve_diagonal_and_laplacian() {
    let h = diag_op(&[3.0, 1.0, 2.0]);
    let e = eigensolve(&h).unwrap();
    assert_eq!(e.values, vec![1.0, 2.0, 3.0]);

    let grid = Grid::new(1, 4, 1.0, [1.0, 0.0]).unwrap();
    let h = build_hamiltonian(&grid, &VectorPotentialField::zero(), &PotentialFamily::zero(), 0.0, 1.0).unwrap();
    let e = eigensolve(&h).unwrap();
    for k in 1..=4 {
        let exact = 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 5.0).cos();
        assert!((e.values[k - 1] - exact).abs() < 1e-13);
    }
}

#[test]
fn eigensolve_random_hermitian_reconstruction() {
    let a = random_hermitian(50, 7);
    let e = eigensolve_dense(&a).unwrap();
    assert!(e.reconstruction_residual(&a) <= 1e-12);
    assert!(e.orthonormality_defect() <= 1e-12);
}

#[test]
fn eigensolve_large_double_barrier_and_magnetic_grid() {
    // near-degenerate tunnelling pairs in 1D, complex couplings in 2D
    let v = PotentialFamily::stationary("db", |[x, y]| {
        let r2 = x * x + y * y;
        3.0 * r2 * (-r2).exp()
    });
    let cases = [
        (Grid::cube(1, -6.0, 6.0, 399).unwrap(), VectorPotentialField::zero(), 0.15),
        (Grid::cube(2, -3.0, 3.0, 24).unwrap(), VectorPotentialField::symmetric_gauge(0.3, 3.0), 0.2),
    ];
    for (grid, a, hbar) in cases {
        let h = build_hamiltonian(&grid, &a, &v, 0.0, hbar).unwrap();
        let m = h.to_dense();
        let e = eigensolve(&h).unwrap();
        assert!(e.reconstruction_residual(&m) <= 1e-12);
        assert!(e.orthonormality_defect() <= 1e-12);
        let sv = linalg::singular_values(&m).unwrap();
        let top = e.values.iter().fold(0.0f64, |x, y| x.max(y.abs()));
        assert!((sv[0] - top).abs() <= 1e-12 * top);
    }
}

#[test]
fn spectral_gap_examples() {
    let r = spectral_gap_values(&[0.0, 1.0, 3.0], 1.0).unwrap();
    assert_eq!(r.gap, 1.0);
    assert_eq!(r.cluster, vec![1]);
    let r = spectral_gap_values(&[1.0, 1.0, 2.0], 1.0).unwrap();
    assert_eq!(r.gap, 1.0);
    assert_eq!(r.cluster.len(), 2);
    assert!(spectral_gap_values(&[0.0, 1.0], 0.5).is_err());
}

#[test]
fn contour_trivial_cases() {
    let h = diag_op(&[0.0, 1.0]);
    let c = Contour::new(0.0, 0.5, 64).unwrap();
    let p = contour_sum(&h, &c, Backend::Dense).unwrap();
    assert!((p[[0, 0]] - C64::new(1.0, 0.0)).norm() < 1e-10);
    assert!(p[[1, 1]].norm() < 1e-10);
    let c = Contour::new(5.0, 0.5, 64).unwrap();
    let p = contour_sum(&h, &c, Backend::Dense).unwrap();
    assert!(linalg::max_abs(&p) < 1e-10);
    let c = Contour::new(0.5, 0.5, 16).unwrap();
    assert!(matches!(
        contour_projection(&h, &c, 1e-8, 1024, Backend::Dense),
        Err(adiabat::Error::EigenvalueOnContour { .. })
    ));
    assert!(Contour::new(0.0, 1.0, 8).is_err());
}

#[test]
fn hs_trivial_diagonal() {
    let a = 0.2;
    let g = build_bump(a).unwrap();
    let ext = QuasiAnalyticExtension::new(&g, 4).unwrap();
    let h = diag_op(&[0.0, 10.0 * a]);
    let r = hs_function_of_operator(&h, 0.0, &ext, Backend::Dense).unwrap();
    assert!((r.matrix[[0, 0]] - C64::new(1.0, 0.0)).norm() < 1e-8);
    assert!(r.matrix[[1, 1]].norm() < 1e-8);
}

#[test]
fn hs_scalar_calibration_across_transition() {
    let a = 0.1;
    let g = build_bump(a).unwrap();
    let ext = QuasiAnalyticExtension::new(&g, 4).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..=240 {
        let lam = -0.12 + 0.24 * k as f64 / 240.0;
        worst = worst.max((ext.scalar(lam) - g.eval(lam)).abs());
    }
    assert!(worst < 1e-7, "max scalar HS error {worst}");
}

#[test]
fn hs_matches_eigensolve_on_random_hermitian() {
    let a = 0.3;
    let g = build_bump(a).unwrap();
    let ext = QuasiAnalyticExtension::new(&g, 4).unwrap();
    let m = random_hermitian(30, 11);
    let grid = Grid::new(1, 30, 1.0, [0.0, 0.0]).unwrap();
    let mut h = build_hamiltonian(&grid, &VectorPotentialField::zero(), &PotentialFamily::zero(), 0.0, 1.0).unwrap();
    h.diag = (0..30).map(|i| m[[i, i]].re).collect();
    h.upper = (0..30).flat_map(|i| ((i + 1)..30).map(move |j| (i, j))).map(|(i, j)| (i, j, m[[i, j]])).collect();
    let e = eigensolve(&h).unwrap();
    let shift = e.values[15];
    let hs = hs_function_of_operator(&h, shift, &ext, Backend::Dense).unwrap();
    let eig = function_of_operator_eig(&e, shift, &g);
    let diff = linalg::op_norm(&(&hs.matrix - &eig)).unwrap();
    assert!(diff <= 1e-4 * linalg::op_norm(&eig).unwrap() + 1e-10, "diff {diff}");
    let comm = linalg::op_norm(&linalg::commutator(&hs.matrix, &h.to_dense())).unwrap();
    assert!(comm < 1e-6, "[g(H), H] = {comm}");
}

#[test]
fn dbar_vanishes_like_y_to_the_order() {
    let g = build_bump(0.2).unwrap();
    let ext = QuasiAnalyticExtension::new(&g, 4).unwrap();
    let sup5 = (0..=400).map(|k| g.deriv(0.1 + 0.1 * k as f64 / 400.0, 5).abs()).fold(0.0, f64::max);
    for &x in &[0.12, 0.15, 0.18, -0.13] {
        for &y in &[1e-2, 1e-3, 1e-4] {
            let d = ext.dbar(C64::new(x, y)).norm();
            assert!(d <= sup5 * y.powi(4), "|dbar| = {d} at ({x}, {y})");
        }
    }
}

proptest! {
    #[test]
    fn bump_is_even_and_bounded(x in -1.0f64..1.0, a in 0.05f64..0.95) {
        let g = build_bump(a).unwrap();
        let v = g.eval(x);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, g.eval(-x));
    }

    #[test]
    fn contour_projector_is_spectral(seed in 0u64..1000) {
        let m = random_hermitian(12, seed);
        let e = eigensolve_dense(&m).unwrap();
        let grid = Grid::new(1, 12, 1.0, [0.0, 0.0]).unwrap();
        let mut h = build_hamiltonian(&grid, &VectorPotentialField::zero(), &PotentialFamily::zero(), 0.0, 1.0).unwrap();
        h.diag = (0..12).map(|i| m[[i, i]].re).collect();
        h.upper = (0..12).flat_map(|i| ((i + 1)..12).map(move |j| (i, j))).map(|(i, j)| (i, j, m[[i, j]])).collect();
        let gap = spectral_gap_values(&e.values, e.values[5]).unwrap();
        let c = Contour::new(e.values[5], gap.gap / 2.0, 16).unwrap();
        let p = contour_projection(&h, &c, 1e-8, 1 << 14, Backend::Dense).unwrap();
        prop_assert_eq!(p.rank, gap.cluster.len());
        let v = e.columns(&gap.cluster);
        let exact = v.dot(&linalg::adjoint(&v));
        prop_assert!(linalg::max_abs(&(&p.p - &exact)) < 1e-7);
    }
}
