use adiabat::lattice_hamiltonian::*;
use adiabat::projection_factory::delta_estimate;
use adiabat::resonance_scenarios::*;
use adiabat::spectral_calculus::eigensolve_dense;
use adiabat::{Error, Result};
use proptest::prelude::*;

fn square_barrier() -> (Grid, PotentialFamily) {
    let g = Grid::cube(1, -4.0, 4.0, 159).unwrap();
    let v = PotentialFamily::stationary("square", |[x, _]| if (1.0..=2.0).contains(&x.abs()) { 1.0 } else { 0.0 });
    (g, v)
}

#[test]
fn square_double_barrier_regions() {
    let (g, v) = square_barrier();
    let r = classify_regions(&v, 0.0, 0.0, 0.5, &g).unwrap();
    for i in 0..g.len() {
        let x = g.coord(i)[0].abs();
        assert_eq!(r.j.contains(i), (1.0..=2.0).contains(&x), "J at {x}");
        assert_eq!(r.i.contains(i), x < 1.0, "I at {x}");
        assert_eq!(r.o.contains(i), x > 2.0, "O at {x}");
    }
    assert!(r.is_partition());
    assert_eq!(r.o.components(&g).len(), 2);
}

#[test]
fn barrier_below_threshold_is_rejected() {
    let (g, v) = square_barrier();
    assert!(matches!(classify_regions(&v, 0.0, 0.0, 1.5, &g), Err(Error::Scenario(_))));
    // a single barrier encloses nothing
    let one = PotentialFamily::stationary("step", |[x, _]| if (1.0..=2.0).contains(&x) { 1.0 } else { 0.0 });
    assert!(matches!(classify_regions(&one, 0.0, 0.0, 0.5, &g), Err(Error::Scenario(_))));
    assert!(matches!(classify_regions(&v, 0.0, 0.0, -1.0, &g), Err(Error::Invalid(_))));
}

#[test]
fn radial_barrier_interior_is_the_inner_disc() {
    let sc = annulus_2d();
    let (g, e, b) = (&sc.grid, 0.6, sc.b);
    let r = classify_regions(&sc.potential, 0.0, e, b, g).unwrap();
    // inner crossing of the radial profile with E + b, by bisection
    let radial = |rr: f64| sc.potential.value([rr, 0.0], 0.0) - (e + b);
    let (mut lo, mut hi) = (0.5, 1.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if radial(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let r_in = 0.5 * (lo + hi);
    for i in 0..g.len() {
        let [x, y] = g.coord(i);
        assert_eq!(r.i.contains(i), x.hypot(y) < r_in, "({x}, {y})");
    }
    assert!(r.is_partition());
    assert!(r.o.touches_box(g) && !r.i.touches_box(g));
}

#[test]
fn omega_margins_and_thin_barrier() {
    let sc = double_barrier();
    let r = classify_regions(&sc.potential, 0.0, 0.15, sc.b, &sc.grid).unwrap();
    let choice = choose_omega(&r, sc.c, &sc.grid).unwrap();
    assert!(choice.certificate.outer >= sc.c && choice.certificate.inner >= sc.c);
    assert!(r.i.is_subset(&choice.omega) && choice.omega.is_disjoint(&r.o));
    assert!(matches!(choose_omega(&r, 0.6 * choice.width, &sc.grid), Err(Error::Scenario(_))));
}

#[test]
fn double_barrier_satisfies_every_invariant() {
    let sc = double_barrier();
    let st = sc.setup(sc.hbar).unwrap();
    let supp = sc.potential.support_mask(&sc.grid);
    assert_eq!(st.regions.len(), sc.s_samples.len());
    for (r, cert) in st.regions.iter().zip(&st.certificates) {
        assert!(r.is_partition());
        assert!(cert.holds() && cert.outer >= sc.c && cert.inner >= sc.c);
        assert!(supp.is_subset(&r.i));
        for i in r.j.indices() {
            assert!(sc.potential.value(sc.grid.coord(i), r.s) > r.energy + sc.b);
        }
    }
    assert!(st.track.min_gap() >= sc.gap_min);
    assert!(st.track.min_overlap() >= MIN_OVERLAP);
    assert!(st.omega_drift.iter().all(|&d| d <= 2), "{:?}", st.omega_drift);
}

#[test]
fn double_barrier_level_is_a_resonance() {
    let sc = double_barrier();
    let st = sc.setup(sc.hbar).unwrap();
    let h = st.h_omega(0.0).unwrap();
    let e = eigensolve_dense(&h.to_dense()).unwrap().values[sc.level];
    assert!((e - st.track.energy[0]).abs() < 1e-12);
    let r = &st.regions[0];
    let vmax = r.j.indices().iter().map(|&i| sc.potential.value(sc.grid.coord(i), 0.0)).fold(f64::MIN, f64::max);
    assert!(e + sc.b < vmax, "E + b = {} vs max V on J = {vmax}", e + sc.b);
    // the full-box operator has no eigenvector this localised: δ > 0
    let f = st.frame(0.0).unwrap();
    assert!(delta_estimate(&st.h_full(0.0).unwrap(), f.energy, &f).unwrap() > 1e-8);
}

#[test]
fn spectral_control_has_vanishing_delta() {
    let sc = spectral_control();
    let st = sc.setup(sc.hbar).unwrap();
    assert!(st.cutoff.is_zero());
    for s in [0.0, 0.5, 1.0] {
        let f = st.frame(s).unwrap();
        let d = delta_estimate(&st.h_full(s).unwrap(), f.energy, &f).unwrap();
        assert!(d <= 1e-12, "delta {d:e} at s = {s}");
    }
}

#[test]
fn annulus_setup_is_valid() {
    let sc = annulus_2d();
    assert!(sc.grid.n <= 64);
    let st = sc.setup(sc.hbar).unwrap();
    assert!(st.margin_ratio() >= 1.0);
    assert!(!st.omega.touches_box(&sc.grid));
}

fn two_wells(offset: f64, slope: f64) -> impl Fn(f64) -> Result<DiscreteHamiltonian> + Sync {
    let g = Grid::cube(1, -4.0, 4.0, 119).unwrap();
    let left = |x: f64| (x + 2.0).abs() < 1.0;
    let v = PotentialFamily::stationary("two wells", move |[x, _]| {
        if left(x) {
            offset
        } else if (x - 2.0).abs() < 1.0 {
            0.0
        } else {
            5.0
        }
    })
    .with_term(1, move |[x, _]| if left(x) { -slope } else { 0.0 })
    .with_support(move |[x, _]| left(x));
    move |s| build_hamiltonian(&g, &VectorPotentialField::zero(), &v, s, 0.3)
}

fn ground_window(h: &DiscreteHamiltonian) -> (f64, f64) {
    let e = eigensolve_dense(&h.to_dense()).unwrap().values[0];
    (e - 0.01, e + 0.01)
}

#[test]
fn stationary_track_is_constant() {
    let fam = two_wells(1.0, 0.0);
    let w = ground_window(&fam(0.0).unwrap());
    let s: Vec<f64> = (0..=5).map(|k| k as f64 / 5.0).collect();
    let t = track_eigenvalue(&fam, &s, w, 0.05).unwrap();
    assert!(t.energy.iter().all(|&e| e == t.energy[0]));
    assert!(t.overlap.iter().all(|&o| (o - 1.0).abs() < 1e-12));
}

#[test]
fn deepening_well_lowers_the_tracked_level() {
    // the tracked level lives in the left well, which deepens linearly in s
    let fam = two_wells(-0.5, 0.3);
    let w = ground_window(&fam(0.0).unwrap());
    let s: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let t = track_eigenvalue(&fam, &s, w, 0.05).unwrap();
    assert!(t.energy.windows(2).all(|p| p[1] < p[0]), "{:?}", t.energy);
    // first-order sign: <psi, dV/ds psi> < 0
    let h = fam(0.0).unwrap();
    let eig = eigensolve_dense(&h.to_dense()).unwrap();
    let vdot: f64 = (0..h.dim())
        .map(|i| {
            let x = h.grid.coord(i)[0];
            let dv = if (x + 2.0).abs() < 1.0 { -0.3 } else { 0.0 };
            dv * eig.vectors[[i, 0]].norm_sqr()
        })
        .sum();
    assert!(vdot < 0.0);
}

#[test]
fn level_crossing_is_reported() {
    // right-well level fixed, left-well level falls through it near s = 0.5
    let fam = two_wells(1.0, 2.0);
    let w = ground_window(&fam(0.0).unwrap());
    let s: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    match track_eigenvalue(&fam, &s, w, 1e-6) {
        Err(Error::Crossing { s, overlap }) => assert!(s > 0.3 && s < 0.7 && overlap < 0.9, "s = {s}, {overlap}"),
        other => panic!("expected a crossing, got {other:?}"),
    }
    // the gap floor catches the approach before the crossing
    assert!(matches!(track_eigenvalue(&fam, &s, w, 0.5), Err(Error::Gap(_))));
}

#[test]
fn seed_window_must_isolate_one_level() {
    let fam = two_wells(0.0, 0.0);
    let h = fam(0.0).unwrap();
    let vals = eigensolve_dense(&h.to_dense()).unwrap().values;
    // symmetric wells: the lowest two levels form a tunnelling pair
    let w = (vals[0] - 0.01, vals[1] + 0.01);
    assert!(matches!(track_eigenvalue(&fam, &[0.0, 1.0], w, 0.0), Err(Error::Precondition(_))));
    assert!(matches!(track_eigenvalue(&fam, &[0.0, 0.0], w, 0.0), Err(Error::Invalid(_))));
}

#[test]
fn catalogue_lookup_and_masks() {
    assert_eq!(builtin_scenarios().len(), 3);
    assert!(matches!(scenario_by_name("nope"), Err(Error::Scenario(_))));
    let sc = scenario_by_name("double_barrier").unwrap();
    let st = sc.setup(0.1).unwrap();
    let dir = std::env::temp_dir().join(format!("adiabat-masks-{}", std::process::id()));
    let files = st.write_masks(&dir).unwrap();
    assert_eq!(files.len(), 5);
    let pbm = std::fs::read_to_string(dir.join(&files[3])).unwrap();
    assert!(pbm.starts_with("P1\n"));
    let body: String = pbm.lines().skip(3).collect();
    assert_eq!(body.matches('1').count(), st.omega.count());
    std::fs::remove_dir_all(&dir).unwrap();
    let coarse = sc.with_resolution(199).unwrap();
    assert!((coarse.grid.h - 0.08).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn regions_partition_the_grid(e in 0.0f64..0.4, b in 0.2f64..0.9) {
        let sc = double_barrier();
        let g = sc.with_resolution(99).unwrap().grid;
        let r = classify_regions(&sc.potential, 0.3, e, b, &g).unwrap();
        prop_assert!(r.is_partition());
        prop_assert!(r.j.is_disjoint(&r.i) && r.j.is_disjoint(&r.o) && r.i.is_disjoint(&r.o));
        prop_assert!(!r.i.touches_box(&g));
        for i in 0..g.len() {
            prop_assert_eq!(r.j.contains(i), sc.potential.value(g.coord(i), 0.3) > e + b);
        }
    }
}
