use adiabat::lattice_hamiltonian::*;
use adiabat::linalg::{self, max_abs};
use adiabat::projection_factory::*;
use adiabat::spectral_calculus::{build_bump, eigensolve};
use adiabat::{Error, Result, C64};
use ndarray::{array, Array2};
use proptest::prelude::*;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn frame_of(cols: Array2<C64>, s: f64) -> ProjectionFrame {
    ProjectionFrame { frame: cols, parent: FrameParent::Interior, energy: 0.0, gap: 1.0, s }
}

/// Harmonic well sliding with s: V = (x - 0.6 s)² + 0.3 s² x.
fn sliding_well(s: f64) -> Result<DiscreteHamiltonian> {
    let g = Grid::cube(1, -5.0, 5.0, 120)?;
    let v = PotentialFamily::stationary("x2", |[x, _]| x * x)
        .with_term(1, |[x, _]| -1.2 * x)
        .with_term(2, |[x, _]| 0.36 + 0.3 * x)
        .with_support(|_| true);
    build_hamiltonian(&g, &VectorPotentialField::zero(), &v, s, 0.5)
}

fn ground_frame(s: f64) -> Result<ProjectionFrame> {
    let h = sliding_well(s)?;
    let e = eigensolve(&h)?.values[0];
    build_interior_projection(&h, e, 0.1)
}

/// Two wells separated by a barrier, restricted to a window around the left one.
fn double_barrier() -> (DiscreteHamiltonian, DomainMask) {
    let g = Grid::cube(1, -6.0, 6.0, 199).unwrap();
    let v = PotentialFamily::stationary("db", |[x, _]| 3.0 * x * x * (-x * x).exp());
    let h = build_hamiltonian(&g, &VectorPotentialField::zero(), &v, 0.0, 0.15).unwrap();
    let omega = DomainMask::from_fn(&g, "omega", |[x, _]| x.abs() < 2.2);
    (h, omega)
}

#[test]
fn fornberg_weights_reproduce_textbook_stencils() {
    let w = fd_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
    let want = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
    for (a, b) in w.iter().zip(want) {
        assert!((a - b).abs() < 1e-15);
    }
    let w2 = fd_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
    let want2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
    for (a, b) in w2.iter().zip(want2) {
        assert!((a - b).abs() < 1e-14);
    }
    let fwd = fd_weights(&[0.0, 1.0, 2.0, 3.0, 4.0], 1);
    let want3 = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25];
    for (a, b) in fwd.iter().zip(want3) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn stencils_stay_inside_the_unit_interval() {
    assert_eq!(stencil_offsets(0.5, 1e-3).unwrap(), vec![-2, -1, 0, 1, 2]);
    assert_eq!(stencil_offsets(0.0, 1e-3).unwrap(), vec![0, 1, 2, 3, 4, 5]);
    assert_eq!(stencil_offsets(1.0, 1e-3).unwrap(), vec![-5, -4, -3, -2, -1, 0]);
    assert_eq!(stencil_offsets(0.0015, 1e-3).unwrap(), vec![-1, 0, 1, 2, 3, 4]);
    assert!(stencil_offsets(1.2, 1e-3).is_err());
}

#[test]
fn rotating_rank_one_projection_matches_closed_form() {
    let fam = |s: f64| -> Result<ProjectionFrame> {
        // Arbitrary phase per evaluation: alignment must remove it.
        let ph = C64::from_polar(1.0, 3.0 * s + 0.7);
        Ok(frame_of(array![[c(s.cos()) * ph], [c(s.sin()) * ph]], s))
    };
    for &s in &[0.0, 0.3, 0.77, 1.0] {
        let jet = projection_derivative(&fam, s, 2, 1e-3).unwrap();
        let (s2, c2) = ((2.0 * s).sin(), (2.0 * s).cos());
        let pdot = array![[c(-s2), c(c2)], [c(c2), c(s2)]];
        let pddot = array![[c(-2.0 * c2), c(-2.0 * s2)], [c(-2.0 * s2), c(2.0 * c2)]];
        assert!(max_abs(&(jet.matrix(1) - &pdot)) < 1e-8, "s = {s}");
        assert!(max_abs(&(jet.matrix(2) - &pddot)) < 1e-6, "s = {s}");
        assert!((jet.pdot().norm().unwrap() - 1.0).abs() < 1e-8);
        assert!(jet.diagonal_block_norm().unwrap() < 1e-9);
    }
}

#[test]
fn constant_projection_has_zero_derivative() {
    let fam = |s: f64| Ok(frame_of(array![[c(0.6)], [c(0.8)], [c(0.0)]], s));
    let jet = projection_derivative(&fam, 0.4, 2, 1e-3).unwrap();
    assert_eq!(max_abs(&jet.matrix(1)), 0.0);
    assert_eq!(max_abs(&jet.matrix(2)), 0.0);
}

#[test]
fn derivative_is_off_diagonal_for_a_moving_well() {
    let jet = projection_derivative(&ground_frame, 0.5, 2, 1e-3).unwrap();
    let pd = jet.matrix(1);
    let p = jet.projector();
    let norm = linalg::op_norm(&pd).unwrap();
    assert!(norm > 0.1);
    assert!(linalg::op_norm(&p.dot(&pd).dot(&p)).unwrap() <= 1e-6 * norm);
    let split = pd.dot(&p) + p.dot(&pd);
    assert!(linalg::op_norm(&(&split - &pd)).unwrap() <= 1e-6 * norm);
    let herm = &pd - &linalg::adjoint(&pd);
    assert!(max_abs(&herm) < 1e-14);
    assert!((jet.pdot().norm().unwrap() - norm).abs() < 1e-10 * norm);
}

#[test]
fn gauge_mismatch_and_coarse_steps_are_reported() {
    // Rank changes between neighbouring s: no alignment possible.
    let jumpy = |s: f64| -> Result<ProjectionFrame> {
        if s > 0.5 {
            Ok(frame_of(array![[c(1.0), c(0.0)], [c(0.0), c(1.0)]], s))
        } else {
            Ok(frame_of(array![[c(1.0)], [c(0.0)]], s))
        }
    };
    assert!(matches!(projection_derivative(&jumpy, 0.5, 1, 1e-3), Err(Error::Gauge(_))));
    // A frame rotating by a large angle per step cannot be differenced.
    let fast = |s: f64| Ok(frame_of(array![[c((400.0 * s).cos())], [c((400.0 * s).sin())]], s));
    let r = projection_derivative(&fast, 0.5, 1, 1e-2);
    assert!(matches!(r, Err(Error::Richardson(_)) | Err(Error::Gauge(_))), "{r:?}");
}

#[test]
fn interior_projection_ranks() {
    let g = Grid::new(1, 4, 1.0, [0.0; 2]).unwrap();
    let mut h = build_hamiltonian(&g, &VectorPotentialField::zero(), &PotentialFamily::zero(), 0.0, 1.0).unwrap();
    h.upper.clear();
    h.diag = vec![0.0, 1.0, 1.0, 3.0];
    let p = build_interior_projection(&h, 0.0, 0.5).unwrap();
    assert_eq!(p.rank(), 1);
    assert!((p.frame[[0, 0]] - c(1.0)).norm() < 1e-15);
    let p2 = build_interior_projection(&h, 1.0, 0.5).unwrap();
    assert_eq!(p2.rank(), 2);
    assert!((p2.gap - 1.0).abs() < 1e-15);
    assert!(matches!(build_interior_projection(&h, 1.0, 1.5), Err(Error::Gap(_))));
}

#[test]
fn contour_and_eigen_routes_agree_on_a_double_barrier() {
    let (h, omega) = double_barrier();
    let ho = restrict_dirichlet(&h, &omega).unwrap();
    let eig = eigensolve(&ho).unwrap();
    let e = eig.values[0];
    let gap = eig.values[1] - e;
    let a = build_interior_projection(&ho, e, 0.5 * gap).unwrap();
    let b = build_interior_projection_contour(&ho, e, gap / 2.0, 1e-10).unwrap();
    assert_eq!(a.dim(), h.grid.len());
    assert!(max_abs(&(a.projector() - b.projector())) < 1e-8);
    assert!(a.orthonormality_defect() < 1e-12);
    // Extended by zero off Ω.
    for i in omega.complement().indices() {
        assert_eq!(a.frame[[i, 0]], c(0.0));
    }
}

#[test]
fn cutoff_field_definition() {
    let (h, omega) = double_barrier();
    let g = &h.grid;
    let chi = build_cutoff(&omega, 0.8, g).unwrap();
    let edge = omega.boundary(g);
    assert!(edge.count() == 4);
    for i in edge.indices() {
        assert_eq!(chi.values[i], 1.0);
    }
    let d = edge.distance_field(g);
    for i in 0..g.len() {
        assert!((0.0..=1.0).contains(&chi.values[i]));
        if d[i] > 0.4 {
            assert_eq!(chi.values[i], 0.0);
        }
        if d[i] <= 0.1 {
            assert_eq!(chi.values[i], 1.0);
        }
    }
    assert!(chi.collar.is_subset(&edge.dilate(g, 0.1)));
    assert!(chi.sobolev_22.is_finite() && chi.sobolev_22 > 0.0);
    assert!(build_cutoff(&omega, 100.0, g).is_err());
    assert!(build_cutoff(&omega, 2.0 * g.h, g).is_err());
    let none = build_cutoff(&DomainMask::full(g, "box"), 0.5, g).unwrap();
    assert!(none.is_zero());
}

#[test]
fn discrete_sobolev_norm_of_a_spike() {
    let g = Grid::cube(1, 0.0, 1.0, 9).unwrap();
    let mut v = vec![0.0; 9];
    v[4] = 1.0;
    let h = g.h;
    let want = (h * ((1.0 + 2.0 / (h * h)).powi(2) + 2.0 / h.powi(4))).sqrt();
    assert!((sobolev_22(&v, &g) - want).abs() < 1e-12 * want);
}

#[test]
fn cutoff_sobolev_norm_scales_like_c_to_minus_three_halves() {
    let g = Grid::cube(1, -6.0, 6.0, 2399).unwrap();
    let omega = DomainMask::from_fn(&g, "omega", |[x, _]| x.abs() < 3.0);
    let a = build_cutoff(&omega, 1.0, &g).unwrap().sobolev_22;
    let b = build_cutoff(&omega, 0.5, &g).unwrap().sobolev_22;
    let ratio = b / a;
    assert!((ratio - 2f64.powf(1.5)).abs() < 0.05 * ratio, "{ratio}");
}

#[test]
fn nearly_spectral_construction() {
    let (h, omega) = double_barrier();
    let ho = restrict_dirichlet(&h, &omega).unwrap();
    let e = eigensolve(&ho).unwrap().values[0];
    let po = build_interior_projection(&ho, e, 0.01).unwrap();

    let zero = build_cutoff(&DomainMask::full(&h.grid, "box"), 0.5, &h.grid).unwrap();
    let same = build_nearly_spectral(&po, &zero).unwrap();
    assert_eq!(same.frame, po.frame);

    let chi = build_cutoff(&omega, 0.8, &h.grid).unwrap();
    let p = build_nearly_spectral(&po, &chi).unwrap();
    assert_eq!(p.rank(), 1);
    assert!(p.orthonormality_defect() < 1e-12);
    for i in chi.collar.indices() {
        assert_eq!(p.frame[[i, 0]], c(0.0));
    }
    let dist = linalg::op_norm(&(p.projector() - po.projector())).unwrap();
    assert!(dist > 0.0 && dist < 1e-2, "{dist}");

    // A cutoff covering the whole support of the frame annihilates it.
    let mut eat = chi.clone();
    eat.values = vec![1.0; h.grid.len()];
    assert!(matches!(build_nearly_spectral(&po, &eat), Err(Error::RankCollapse(_))));
}

#[test]
fn delta_of_exact_and_wrong_eigenvectors() {
    let (h, _) = double_barrier();
    let eig = eigensolve(&h).unwrap();
    // first level separated from its neighbours (low ones come in tunnelling pairs)
    let k = (1..eig.dim() - 1)
        .find(|&k| eig.values[k] - eig.values[k - 1] > 1e-3 && eig.values[k + 1] - eig.values[k] > 1e-3)
        .unwrap();
    let e = eig.values[k];
    let p = build_interior_projection(&h, e, 1e-6).unwrap();
    assert_eq!(p.rank(), 1);
    let d = delta_estimate(&h, e, &p).unwrap();
    assert!(d < 1e-12 * max_abs(&h.to_dense()), "{d}");
    let q = frame_of(eig.columns(&[k + 1]), 0.0);
    let want = 2.0 * (eig.values[k + 1] - e);
    assert!((delta_estimate(&h, e, &q).unwrap() - want).abs() < 1e-12);
    let g = Grid::new(1, 2, 1.0, [0.0; 2]).unwrap();
    let mut d = build_hamiltonian(&g, &VectorPotentialField::zero(), &PotentialFamily::zero(), 0.0, 1.0).unwrap();
    d.upper.clear();
    d.diag = vec![0.0, 1.0];
    let top = frame_of(array![[c(0.0)], [c(1.0)]], 0.0);
    assert!((delta_estimate(&d, 0.0, &top).unwrap() - 2.0).abs() < 1e-15);
}

#[test]
fn smooth_delta_vanishes_for_stationary_spectral_families() {
    let (h, _) = double_barrier();
    let hs = h.clone();
    let hfam = move |_s: f64| Ok(hs.clone());
    let e = eigensolve(&h).unwrap().values[0];
    let pfam = |_s: f64| build_interior_projection(&h, e, 1e-3);
    let r = delta_smooth_estimate(&hfam, &pfam, &[0.0, 0.5, 1.0], 1e-3).unwrap();
    assert!(r.value < 1e-9, "{}", r.value);
}

#[test]
fn smooth_delta_of_a_moving_spectral_projection_is_zero() {
    // (H(s) - E(s))P(s) = 0 identically, so its derivative vanishes too.
    let r = delta_smooth_estimate(&sliding_well, &ground_frame, &[0.2, 0.8], 1e-3).unwrap();
    assert!(r.value < 1e-7, "{}", r.value);
}

#[test]
fn delta_prime_block_diagonal_example() {
    // Ṗ couples E = 0 only to states at energy 5, far outside supp g_a.
    let g = Grid::new(1, 4, 1.0, [0.0; 2]).unwrap();
    let mut h = build_hamiltonian(&g, &VectorPotentialField::zero(), &PotentialFamily::zero(), 0.0, 1.0).unwrap();
    h.upper.clear();
    h.diag = vec![0.0, 0.05, 5.0, 5.0];
    let eig = eigensolve(&h).unwrap();
    let fam = |s: f64| {
        Ok(frame_of(array![[c(s.cos())], [c(0.0)], [c(s.sin())], [c(0.0)]], s))
    };
    let jet = projection_derivative(&fam, 0.0, 1, 1e-3).unwrap();
    let g = build_bump(0.2).unwrap();
    assert!(delta_prime_estimate(&eig, 0.0, &jet, &g).unwrap() <= 1e-10);
    // Coupling to the nearby level at 0.05 is seen in full.
    let near = |s: f64| Ok(frame_of(array![[c(s.cos())], [c(s.sin())], [c(0.0)], [c(0.0)]], s));
    let jet = projection_derivative(&near, 0.0, 1, 1e-3).unwrap();
    assert!((delta_prime_estimate(&eig, 0.0, &jet, &g).unwrap() - 1.0).abs() < 1e-8);
    let still = |s: f64| Ok(frame_of(array![[c(1.0)], [c(0.0)], [c(0.0)], [c(0.0)]], s));
    let jet = projection_derivative(&still, 0.3, 1, 1e-3).unwrap();
    assert_eq!(delta_prime_estimate(&eig, 0.0, &jet, &g).unwrap(), 0.0);
}

#[test]
fn closeness_vanishes_without_cutoff() {
    let rows = closeness_check(&ground_frame, &ground_frame, &[0.0, 0.5, 1.0], 2, 1e-3).unwrap();
    for r in rows {
        assert!(r.norms.iter().all(|&x| x < 1e-9), "{:?}", r.norms);
    }
}

#[test]
fn closeness_rank_one_oracle() {
    // Two rank-one families at a fixed angle θ: ‖P_a − P_b‖ = sin θ.
    let th = 0.3f64;
    let a = |s: f64| Ok(frame_of(array![[c(s.cos())], [c(s.sin())], [c(0.0)]], s));
    let b = move |s: f64| {
        Ok(frame_of(array![[c(s.cos() * th.cos())], [c(s.sin() * th.cos())], [c(th.sin())]], s))
    };
    let rows = closeness_check(&a, &b, &[0.4], 1, 1e-3).unwrap();
    assert!((rows[0].norms[0] - th.sin()).abs() < 1e-12);
    assert!(rows[0].norms[1] > 0.0 && rows[0].norms[2].is_nan());
}

fn random_unitary(k: usize, seed: u64) -> Array2<C64> {
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let m = Array2::from_shape_fn((k, k), |_| C64::new(next(), next()));
    linalg::polar_unitary(&m).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn measurements_are_frame_gauge_invariant(seed in any::<u64>(), s in 0.05f64..0.95) {
        let (h, _) = double_barrier();
        let eig = eigensolve(&h).unwrap();
        let e = eig.values[2];
        let base = frame_of(eig.columns(&[2, 3]), s);
        let u = random_unitary(2, seed);
        let rot = base.rotated(&u);
        let d0 = delta_estimate(&h, e, &base).unwrap();
        let d1 = delta_estimate(&h, e, &rot).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-10 * (1.0 + d0));
        let psi: Vec<C64> = (0..h.dim()).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let n = linalg::vnorm(&psi);
        let psi: Vec<C64> = psi.iter().map(|z| z / n).collect();
        prop_assert!((base.distance(&psi) - rot.distance(&psi)).abs() < 1e-10);

        // δ' of a moving frame under a fixed and an s-dependent remixing.
        let spin = |t: f64| -> Result<ProjectionFrame> {
            let (ct, st) = (t.cos(), t.sin());
            let mut m = eig.columns(&[2, 3, 4]);
            for i in 0..m.nrows() {
                let (a, b) = (m[[i, 1]], m[[i, 2]]);
                m[[i, 1]] = a * ct + b * st;
            }
            Ok(frame_of(m.slice(ndarray::s![.., 0..2]).to_owned(), t))
        };
        let spin_rot = |t: f64| -> Result<ProjectionFrame> {
            let w = random_unitary(2, seed ^ (t * 1e6) as u64);
            Ok(spin(t)?.rotated(&w))
        };
        let g = build_bump(0.4 * (eig.values[4] - eig.values[2])).unwrap();
        let j0 = projection_derivative(&spin, s, 1, 1e-3).unwrap();
        let j1 = projection_derivative(&spin_rot, s, 1, 1e-3).unwrap();
        let a = delta_prime_estimate(&eig, e, &j0, &g).unwrap();
        let b = delta_prime_estimate(&eig, e, &j1, &g).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a), "{} vs {}", a, b);
    }

    #[test]
    fn energy_shift_leaves_measurements_unchanged(shift in -5.0f64..5.0) {
        let (h, omega) = double_barrier();
        let ho = restrict_dirichlet(&h, &omega).unwrap();
        let e = eigensolve(&ho).unwrap().values[0];
        let chi = build_cutoff(&omega, 0.8, &h.grid).unwrap();
        let p = build_nearly_spectral(&build_interior_projection(&ho, e, 0.01).unwrap(), &chi).unwrap();
        let mut hs = h.clone();
        for d in hs.diag.iter_mut() {
            *d -= shift;
        }
        let d0 = delta_estimate(&h, e, &p).unwrap();
        let d1 = delta_estimate(&hs, e - shift, &p).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-12 + 1e-9 * d0);
    }
}
