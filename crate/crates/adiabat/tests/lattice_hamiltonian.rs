use adiabat::lattice_hamiltonian::*;
use adiabat::linalg::{eigh, max_abs};
use adiabat::C64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn free_1d(n: usize, h: f64, hbar: f64) -> DiscreteHamiltonian {
    let g = Grid::new(1, n, h, [0.0, 0.0]).unwrap();
    build_hamiltonian(&g, &VectorPotentialField::zero(), &PotentialFamily::zero(), 0.0, hbar).unwrap()
}

fn laplacian_levels(n: usize) -> Vec<f64> {
    (1..=n).map(|k| 2.0 - 2.0 * (k as f64 * PI / (n as f64 + 1.0)).cos()).collect()
}

#[test]
fn dirichlet_laplacian_spectrum() {
    let h = free_1d(4, 1.0, 1.0);
    let (w, _) = eigh(&h.to_dense()).unwrap();
    for (a, b) in w.iter().zip(laplacian_levels(4)) {
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }
}

#[test]
fn constant_potential_shifts_diagonal_exactly() {
    let g = Grid::cube(2, -1.0, 1.0, 7).unwrap();
    let a = VectorPotentialField::symmetric_gauge(0.7, 1.0);
    let h0 = build_hamiltonian(&g, &a, &PotentialFamily::zero(), 0.3, 0.2).unwrap();
    let h1 = build_hamiltonian(&g, &a, &PotentialFamily::stationary("c", |_| 2.5), 0.3, 0.2).unwrap();
    let diff = h1.to_dense() - h0.to_dense();
    for ((i, j), z) in diff.indexed_iter() {
        let want = if i == j { 2.5 } else { 0.0 };
        assert!((z.re - want).abs() <= 4.0 * f64::EPSILON * (1.0 + h0.diag[i].abs()) && z.im == 0.0);
    }
}

#[test]
fn magnetic_operator_is_hermitian() {
    let g = Grid::cube(2, -2.0, 2.0, 9).unwrap();
    let a = VectorPotentialField::symmetric_gauge(1.3, 2.0);
    a.check(&g).unwrap();
    let v = PotentialFamily::stationary("q", |[x, y]| x * x + 0.5 * y);
    let h = build_hamiltonian(&g, &a, &v, 0.0, 0.3).unwrap();
    assert!(!h.is_real());
    let m = h.to_dense();
    let herm = &m - &m.t().mapv(|z| z.conj());
    assert!(max_abs(&herm) <= 1e-14 * max_abs(&m));
    let (w, _) = eigh(&m).unwrap();
    assert!(w.iter().all(|x| x.is_finite()));
}

#[test]
fn build_rejects_bad_input() {
    let g = Grid::cube(1, 0.0, 1.0, 5).unwrap();
    let z = VectorPotentialField::zero();
    assert!(build_hamiltonian(&g, &z, &PotentialFamily::zero(), 0.0, 0.0).is_err());
    let bad = PotentialFamily::stationary("nan", |_| f64::NAN);
    assert!(build_hamiltonian(&g, &z, &bad, 0.0, 1.0).is_err());
    assert!(Grid::new(3, 4, 1.0, [0.0; 2]).is_err());
    assert!(Grid::new(1, 4, -1.0, [0.0; 2]).is_err());
}

#[test]
fn full_restriction_is_identity() {
    let h = free_1d(12, 0.5, 0.7);
    let r = restrict_dirichlet(&h, &DomainMask::full(&h.grid, "all")).unwrap();
    assert_eq!(r.to_dense(), h.to_dense());
    assert_eq!(r.provenance, Provenance::DirichletRestricted);
}

#[test]
fn middle_restriction_is_smaller_laplacian() {
    let h = free_1d(8, 1.0, 1.0);
    let mask = DomainMask::from_indices(&h.grid, "mid", &[2, 3, 4, 5]);
    let r = restrict_dirichlet(&h, &mask).unwrap();
    assert_eq!(r.dim(), 4);
    assert_eq!(r.sites, vec![2, 3, 4, 5]);
    let (w, _) = eigh(&r.to_dense()).unwrap();
    for (a, b) in w.iter().zip(laplacian_levels(4)) {
        assert!((a - b).abs() < 1e-13);
    }
    assert!(restrict_dirichlet(&h, &DomainMask::empty(&h.grid, "none")).is_err());
}

#[test]
fn restriction_interlaces_from_above() {
    let g = Grid::cube(1, -3.0, 3.0, 60).unwrap();
    let v = PotentialFamily::stationary("w", |[x, _]| x * x * (-x * x).exp() + 0.1 * x.abs());
    let h = build_hamiltonian(&g, &VectorPotentialField::zero(), &v, 0.0, 0.2).unwrap();
    let mask = DomainMask::from_fn(&g, "box", |[x, _]| x.abs() < 1.2);
    let r = restrict_dirichlet(&h, &mask).unwrap();
    let (wf, _) = eigh(&h.to_dense()).unwrap();
    let (wr, _) = eigh(&r.to_dense()).unwrap();
    assert!(wr[0] >= wf[0] - 1e-12);
    // Cauchy interlacing for principal submatrices, every level.
    for (k, x) in wr.iter().enumerate() {
        assert!(*x >= wf[k] - 1e-12);
    }
}

#[test]
fn restricted_action_agrees_away_from_the_edge() {
    let g = Grid::cube(2, -1.0, 1.0, 11).unwrap();
    let a = VectorPotentialField::symmetric_gauge(0.9, 1.0);
    let h = build_hamiltonian(&g, &a, &PotentialFamily::stationary("v", |[x, y]| x * y), 0.0, 0.4).unwrap();
    let mask = DomainMask::from_fn(&g, "disc", |[x, y]| x * x + y * y < 0.6);
    let r = restrict_dirichlet(&h, &mask).unwrap();
    let core = DomainMask::from_fn(&g, "core", |[x, y]| x * x + y * y < 0.15);
    assert!(core.stencil_dilate(&g).is_subset(&mask));
    let psi: Vec<C64> = (0..g.len())
        .map(|i| if core.contains(i) { C64::new((i as f64).sin(), (i as f64 * 0.3).cos()) } else { C64::new(0.0, 0.0) })
        .collect();
    let full = h.apply(&psi);
    let local: Vec<C64> = r.sites.iter().map(|&i| psi[i]).collect();
    let part = r.extend(&r.apply(&local));
    for i in mask.indices() {
        assert!((full[i] - part[i]).norm() < 1e-13);
    }
}

#[test]
fn stencil_locality_by_unit_probes() {
    let g = Grid::cube(2, -1.0, 1.0, 6).unwrap();
    let a = VectorPotentialField::symmetric_gauge(0.5, 1.0);
    let h = build_hamiltonian(&g, &a, &PotentialFamily::zero(), 0.0, 1.0).unwrap();
    for j in 0..g.len() {
        let mut e = vec![C64::new(0.0, 0.0); g.len()];
        e[j] = C64::new(1.0, 0.0);
        let y = h.apply(&e);
        for i in 0..g.len() {
            if y[i].norm() > 0.0 {
                assert!(g.dist(i, j) <= g.h * (1.0 + 1e-12), "{i} sees {j}");
            }
        }
    }
}

#[test]
fn commutator_with_coordinate() {
    let hbar = 0.3;
    let g = Grid::cube(1, -1.0, 1.0, 20).unwrap();
    let h = build_hamiltonian(&g, &VectorPotentialField::zero(), &PotentialFamily::zero(), 0.0, hbar).unwrap();
    let theta: Vec<f64> = (0..g.len()).map(|i| g.coord(i)[0]).collect();
    let c = commutator_with_multiplier(&h, &theta).unwrap();
    // Oracle hbar² ΔΘ - 2i hbar P·∇Θ with P = -i hbar D_c and Θ = x: ΔΘ = 0, ∇Θ = 1,
    // leaving -2 hbar² D_c with D_c the centred difference.
    let n = g.len();
    let k = hbar * hbar / g.h;
    for j in 0..n {
        for l in 0..n {
            let want = if l == j + 1 {
                -k
            } else if j == l + 1 {
                k
            } else {
                0.0
            };
            assert!((c[[j, l]] - C64::new(want, 0.0)).norm() < 1e-12);
        }
    }
    let m = h.to_dense();
    let th = ndarray::Array2::from_diag(&ndarray::Array1::from_iter(theta.iter().map(|&t| C64::new(t, 0.0))));
    let direct = m.dot(&th) - th.dot(&m);
    assert!(max_abs(&(&direct - &c)) < 1e-12);
}

#[test]
fn commutator_with_constant_vanishes_and_is_local() {
    let g = Grid::cube(2, -1.0, 1.0, 8).unwrap();
    let a = VectorPotentialField::symmetric_gauge(1.0, 1.0);
    let h = build_hamiltonian(&g, &a, &PotentialFamily::zero(), 0.0, 0.5).unwrap();
    let c = commutator_with_multiplier(&h, &vec![3.0; g.len()]).unwrap();
    assert_eq!(max_abs(&c), 0.0);
    // Θ = 1 on a disc; the commutator only lives on bonds crossing the disc edge.
    let disc = DomainMask::from_fn(&g, "d", |[x, y]| x * x + y * y < 0.3);
    let theta: Vec<f64> = disc.inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let c = commutator_with_multiplier(&h, &theta).unwrap();
    let edge = disc.boundary(&g);
    for ((i, j), z) in c.indexed_iter() {
        if z.norm() > 0.0 {
            assert!(edge.contains(i) && edge.contains(j));
        }
    }
    assert!(commutator_with_multiplier(&h, &[1.0]).is_err());
}

#[test]
fn potential_derivative_operator_cases() {
    let g = Grid::cube(1, -2.0, 2.0, 30).unwrap();
    let h = free_1d(30, g.h, 1.0);
    let h = DiscreteHamiltonian { grid: g.clone(), ..h };
    let still = PotentialFamily::stationary("v0", |[x, _]| x * x);
    assert!(potential_derivative_operator(&still, &h, 0.5, 1).unwrap().iter().all(|&d| d == 0.0));

    let w = |x: f64| if x.abs() < 0.5 { 1.0 - 4.0 * x * x } else { 0.0 };
    let lin = PotentialFamily::stationary("v0", |[x, _]| x * x)
        .with_term(1, move |[x, _]| w(x))
        .with_support(|[x, _]| x.abs() < 0.5);
    let d = potential_derivative_operator(&lin, &h, 0.7, 1).unwrap();
    for (i, di) in d.iter().enumerate() {
        assert_eq!(*di, w(g.coord(i)[0]));
    }
    assert!(potential_derivative_operator(&lin, &h, 0.7, 2).unwrap().iter().all(|&x| x == 0.0));
    assert!(potential_derivative_operator(&lin, &h, 1.5, 1).is_err());
    assert!(potential_derivative_operator(&lin, &h, 0.5, 3).is_err());

    let leaky = PotentialFamily::stationary("v0", |_| 0.0).with_term(2, |[x, _]| x).with_support(|[x, _]| x > 0.0);
    assert!(potential_derivative_operator(&leaky, &h, 0.5, 1).is_err());
    assert!(leaky.check_support(&g, 0.5).is_err());
    lin.check_support(&g, 0.3).unwrap();
}

#[test]
fn dense_dump_round_trip() {
    let g = Grid::cube(2, -1.0, 1.0, 4).unwrap();
    let a = VectorPotentialField::symmetric_gauge(0.8, 1.0);
    let h = build_hamiltonian(&g, &a, &PotentialFamily::zero(), 0.25, 0.6).unwrap();
    let dir = std::env::temp_dir().join(format!("adiabat-dump-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let stem = dir.join("h");
    write_dense_dump(&h, &stem).unwrap();
    let (m, side) = read_dense_dump(&stem).unwrap();
    assert_eq!(m, h.to_dense());
    assert_eq!((side.rows, side.cols), (16, 16));
    assert_eq!(side.hbar, 0.6);
    assert_eq!(side.s, 0.25);
    assert_eq!(side.provenance, Provenance::Full);
    let bytes = std::fs::metadata(stem.with_extension("bin")).unwrap().len();
    assert_eq!(bytes, 16 * 16 * 16);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn region_masks_and_components() {
    let g = Grid::cube(1, -5.0, 5.0, 99).unwrap();
    let barrier = DomainMask::from_fn(&g, "J", |[x, _]| (1.0..2.0).contains(&x.abs()));
    let allowed = barrier.complement();
    let comps = allowed.components(&g);
    assert_eq!(comps.len(), 3);
    let inner: Vec<_> = comps.iter().filter(|c| !c.touches_box(&g)).collect();
    assert_eq!(inner.len(), 1);
    let well = inner[0];
    assert!(well.is_disjoint(&barrier));
    let d = well.distance(&comps[0], &g);
    assert!((d - 1.1).abs() < 1e-9, "{d}");
    let pbm = well.to_pbm(&g);
    assert!(pbm.starts_with("P1"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hermitian_for_any_field(b in -3.0f64..3.0, hbar in 0.05f64..1.0, n in 3usize..9, s in 0.0f64..1.0) {
        let g = Grid::cube(2, -1.0, 1.0, n).unwrap();
        let a = VectorPotentialField::symmetric_gauge(b, 1.0);
        let v = PotentialFamily::stationary("v", |[x, y]| (x + 2.0 * y).sin()).with_term(2, |[x, _]| x * x).with_support(|_| true);
        let h = build_hamiltonian(&g, &a, &v, s, hbar).unwrap();
        let m = h.to_dense();
        let herm = &m - &m.t().mapv(|z| z.conj());
        prop_assert!(max_abs(&herm) <= 1e-14 * max_abs(&m));
    }

    #[test]
    fn potential_shift_identity(c in -10.0f64..10.0, hbar in 0.05f64..1.0) {
        let g = Grid::cube(1, -1.0, 1.0, 15).unwrap();
        let z = VectorPotentialField::zero();
        let v = PotentialFamily::stationary("v", |[x, _]| x.cos());
        let vc = PotentialFamily::stationary("v+c", move |[x, _]| x.cos() + c);
        let h0 = build_hamiltonian(&g, &z, &v, 0.0, hbar).unwrap();
        let h1 = build_hamiltonian(&g, &z, &vc, 0.0, hbar).unwrap();
        prop_assert_eq!(&h0.upper, &h1.upper);
        for (a, b) in h0.diag.iter().zip(&h1.diag) {
            prop_assert!((b - a - c).abs() <= 8.0 * f64::EPSILON * (a.abs() + b.abs() + c.abs()));
        }
    }

    #[test]
    fn restriction_is_principal_submatrix(bits in proptest::collection::vec(any::<bool>(), 20)) {
        prop_assume!(bits.iter().any(|&b| b));
        let h = free_1d(20, 0.1, 0.5);
        let mask = DomainMask { label: "m".into(), inside: bits.clone() };
        let r = restrict_dirichlet(&h, &mask).unwrap();
        let full = h.to_dense();
        let sub = r.to_dense();
        let idx = mask.indices();
        for (p, &i) in idx.iter().enumerate() {
            for (q, &j) in idx.iter().enumerate() {
                prop_assert_eq!(sub[[p, q]], full[[i, j]]);
            }
        }
    }

    #[test]
    fn mask_algebra(bits_a in proptest::collection::vec(any::<bool>(), 25), bits_b in proptest::collection::vec(any::<bool>(), 25)) {
        let a = DomainMask { label: "a".into(), inside: bits_a };
        let b = DomainMask { label: "b".into(), inside: bits_b };
        prop_assert_eq!(a.complement().complement().inside, a.inside.clone());
        prop_assert!(a.intersect(&b).is_subset(&a));
        prop_assert!(a.is_subset(&a.union(&b)));
        prop_assert!(a.minus(&b).is_disjoint(&b));
        prop_assert_eq!(a.symmetric_difference(&b), a.union(&b).count() - a.intersect(&b).count());
    }
}
