use proptest::prelude::*;
use ricci_core::cover::{
    build_chi, build_cover, CoverParams, CurvatureProfile, Cutoff, GoodCover, Recipe, Regions, Variant,
};
use ricci_core::flow::{
    run_einstein_flow, run_exhaustion, run_flow, stability_dt, step, write_series_csv, FlowControls,
    FlowTrajectory, ModelState, StopPredicates, StopReason,
};
use ricci_core::metric::fixtures::{constant_curvature_state, random_sphere_perturbation, BumpOnFlat};
use ricci_core::metric::{geometry, EinsteinFactor, EinsteinProductState, Topology, WarpedState};
use ricci_core::par::Execution;
use ricci_core::Error;

fn sphere(nodes: usize) -> WarpedState {
    constant_curvature_state(3, 1.0, Topology::Sphere, nodes).unwrap()
}

fn controls(t_end: f64, every: f64) -> FlowControls {
    FlowControls { t_end, snapshot_interval: every, ..FlowControls::default() }
}

fn warped(traj: &FlowTrajectory, k: usize) -> &WarpedState {
    match &traj.snapshots[k].state {
        ModelState::Warped(w) => w,
        ModelState::Einstein(_) => panic!("expected a warped snapshot"),
    }
}

/// Bump on the flat plane, transfer cover from the pole, `Ω = [0, 8]`,
/// `Ω̂ = [0, 11]`.
fn bump_setup() -> (WarpedState, GoodCover, Cutoff) {
    bump_with(Regions { omega: (0.0, 8.0), omega_hat: (0.0, 11.0) })
}

fn bump_with(regions: Regions) -> (WarpedState, GoodCover, Cutoff) {
    let st = BumpOnFlat::default().state().unwrap();
    let f = geometry(&st).unwrap();
    let profile = CurvatureProfile::from_field(&f, Topology::Plane);
    let params = CoverParams { recipe: Recipe::Transfer, variant: Variant::Assumption2, ..CoverParams::default() };
    let cover = build_cover(&profile, (0.0, 11.0), &params).unwrap();
    let chi = build_chi(&cover, &regions, &f.s).unwrap();
    (st, cover, chi)
}

#[test]
fn stability_step_for_the_unit_three_sphere() {
    let st = sphere(201);
    let f = geometry(&st).unwrap();
    let c = FlowControls::default();
    let dt = stability_dt(&st, &f, None, &c, 1.0).unwrap();
    let h = std::f64::consts::PI / 200.0;
    let expected = 0.5 * h * h / 4.0;
    assert!((dt - expected).abs() < 1e-12 * expected, "dt = {dt}");
    assert!((dt - 3.08e-5).abs() < 5e-8);
}

#[test]
fn stability_step_scales_with_h_squared() {
    let c = FlowControls::default();
    let dt = |nodes| {
        let st = sphere(nodes);
        stability_dt(&st, &geometry(&st).unwrap(), None, &c, 1.0).unwrap()
    };
    let ratio = dt(401) / dt(201);
    assert!((ratio - 0.25).abs() < 0.05 * 0.25, "ratio = {ratio}");
}

#[test]
fn frozen_cutoff_gives_the_remaining_interval() {
    let st = sphere(101);
    let f = geometry(&st).unwrap();
    let zero = Cutoff::constant(&f.s, 0.0);
    let c = FlowControls { dt_safety: 0.7, ..FlowControls::default() };
    assert_eq!(stability_dt(&st, &f, Some(&zero), &c, 0.3).unwrap(), 0.7 * 0.3);
}

#[test]
fn degenerate_grid_is_rejected() {
    let mut st = sphere(101);
    let f = geometry(&st).unwrap();
    st.phi[10] = -st.phi[9];
    let err = stability_dt(&st, &f, None, &FlowControls::default(), 1.0).unwrap_err();
    assert!(matches!(err, Error::DegenerateGrid(_)), "{err}");
}

#[test]
fn frozen_cutoff_step_is_the_identity() {
    let st = random_sphere_perturbation(3, 4, 0.05, 101).unwrap();
    let zero = Cutoff::constant(&st.arclength(), 0.0);
    let next = step(&st, Some(&zero), 1e-4).unwrap();
    assert_eq!(next.phi, st.phi);
    assert_eq!(next.psi, st.psi);
}

#[test]
fn one_step_on_the_sphere_matches_the_shrinking_solution() {
    let st = sphere(201);
    let dt = 2e-5;
    let next = step(&st, None, dt).unwrap();
    let rm = geometry(&next).unwrap().norm_rm.iter().fold(0.0f64, |m, &v| m.max(v));
    let exact = 12f64.sqrt() / (1.0 - 4.0 * dt);
    assert!((rm - exact).abs() < 1e-8, "rm = {rm}, exact = {exact}");
    let scale = (1.0 - 4.0 * dt).sqrt();
    for j in 0..st.len() {
        assert!((next.phi[j] - scale).abs() < 1e-12);
        assert!((next.psi[j] - scale * st.psi[j]).abs() < 1e-12);
    }
}

#[test]
fn flat_plane_never_moves() {
    let st = constant_curvature_state(3, 0.0, Topology::Plane, 129).unwrap();
    let s = st.arclength();
    let half = Cutoff::constant(&s, 0.5);
    for chi in [None, Some(&half)] {
        let mut cur = st.clone();
        for _ in 0..50 {
            cur = step(&cur, chi, 1e-3).unwrap();
        }
        for j in 0..st.len() {
            assert!((cur.phi[j] - st.phi[j]).abs() < 1e-14);
            assert!((cur.psi[j] - st.psi[j]).abs() < 1e-14);
        }
    }
}

#[test]
fn shrinking_sphere_tracks_the_closed_form() {
    let traj = run_flow(&sphere(201), None, &controls(0.2, 0.01), None).unwrap();
    assert_eq!(traj.stop, StopReason::Horizon);
    assert_eq!(traj.snapshots.len(), 21);
    for snap in &traj.snapshots {
        let scaled = snap.sups()[0] * (1.0 - 4.0 * snap.t);
        assert!((scaled / 12f64.sqrt() - 1.0).abs() < 5e-3, "t = {}: {scaled}", snap.t);
    }
    let last = traj.series.last().unwrap();
    assert!((last.equivalence - 1.0 / (1.0 - 0.8)).abs() < 1e-6);
}

#[test]
fn snapshots_land_on_the_cadence_and_increase() {
    let traj = run_flow(&sphere(101), None, &controls(0.05, 0.0125), None).unwrap();
    let times = traj.snapshot_times();
    assert_eq!(times.len(), 5);
    for (k, t) in times.iter().enumerate() {
        assert!((t - 0.0125 * k as f64).abs() < 1e-15);
    }
    assert!(traj.series.windows(2).all(|w| w[1].t > w[0].t));
}

#[test]
fn doubling_predicate_stops_the_run() {
    let mut c = controls(0.2, 0.01);
    c.stop = StopPredicates { doubling: true, ..StopPredicates::default() };
    let traj = run_flow(&sphere(101), None, &c, None).unwrap();
    let StopReason::Doubling { time } = traj.stop else { panic!("{:?}", traj.stop) };
    assert!(time >= 0.125 && time < 0.1251, "time = {time}");
    assert_eq!(traj.last().t, time);
}

#[test]
fn extinction_proximity_estimates_the_singular_time() {
    let mut c = controls(0.3, 0.01);
    c.stop.extinction_fraction = Some(0.1);
    let traj = run_flow(&sphere(101), None, &c, None).unwrap();
    let StopReason::ExtinctionProximity { time, estimate } = traj.stop else { panic!("{:?}", traj.stop) };
    assert!(time < 0.25);
    assert!((estimate - 0.25).abs() < 1e-3, "estimate = {estimate}");
}

#[test]
fn ricci_flat_plane_has_zero_running_integrals() {
    let (_, cover, _) = bump_setup();
    let flat = BumpOnFlat { amplitude: 0.0, ..BumpOnFlat::default() }.state().unwrap();
    let traj = run_flow(&flat, None, &controls(1.0, 0.1), Some(&cover)).unwrap();
    let ledger = traj.ledger_for(&cover).unwrap();
    for table in [&ledger.sup_rm, &ledger.int_ric, &ledger.int_dric, &ledger.int_d2ric] {
        assert!(table.iter().flatten().all(|&v| v == 0.0));
    }
    assert_eq!(ledger.times.len(), traj.snapshots.len());
    assert!(traj.series.iter().all(|r| r.sup_rm == 0.0 && r.equivalence == 1.0));
}

#[test]
fn ledger_is_tied_to_its_cover() {
    let (st, cover, chi) = bump_setup();
    let traj = run_flow(&st, Some(&chi), &controls(0.02, 0.01), Some(&cover)).unwrap();
    assert!(traj.ledger_for(&cover).is_ok());
    let mut other = cover.clone();
    other.balls[0].k *= 2.0;
    assert!(matches!(traj.ledger_for(&other), Err(Error::CoverMismatch)));
    let bare = run_flow(&st, Some(&chi), &controls(0.02, 0.01), None).unwrap();
    assert!(matches!(bare.ledger_for(&cover), Err(Error::CoverMismatch)));
}

#[test]
fn running_integrals_are_nondecreasing() {
    let (st, cover, chi) = bump_setup();
    let traj = run_flow(&st, Some(&chi), &controls(0.1, 0.02), Some(&cover)).unwrap();
    let ledger = traj.ledger_for(&cover).unwrap();
    assert!(ledger.times.windows(2).all(|w| w[1] > w[0]));
    for table in [&ledger.sup_rm, &ledger.int_ric, &ledger.int_dric, &ledger.int_d2ric] {
        for w in table.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| b >= a));
        }
    }
    assert!(ledger.int_ric.last().unwrap().iter().any(|&v| v > 0.0));
}

#[test]
fn local_flow_freezes_outside_the_cutoff() {
    let (st, _, chi) = bump_with(Regions { omega: (0.0, 5.0), omega_hat: (0.0, 7.0) });
    let frozen: Vec<usize> = (0..st.len()).filter(|&j| chi.chi[j] == 0.0).collect();
    assert!(frozen.len() > 100, "only {} frozen nodes", frozen.len());
    let traj = run_flow(&st, Some(&chi), &controls(0.2, 0.02), None).unwrap();
    for k in 0..traj.snapshots.len() {
        let w = warped(&traj, k);
        for &j in &frozen {
            assert_eq!(w.phi[j].to_bits(), st.phi[j].to_bits(), "phi at node {j}, snapshot {k}");
            assert_eq!(w.psi[j].to_bits(), st.psi[j].to_bits(), "psi at node {j}, snapshot {k}");
        }
    }
    assert!(warped(&traj, traj.snapshots.len() - 1).psi[40] != st.psi[40]);
}

#[test]
fn einstein_product_closed_form_and_extinction() {
    let factors = vec![EinsteinFactor::round_sphere(2), EinsteinFactor::round_sphere(2)];
    let state = EinsteinProductState { scales: vec![1.0, 1.0], factors, time: 0.0 };
    let traj = run_einstein_flow(&state, &controls(1.0, 0.01), None).unwrap();
    let StopReason::Extinction { time } = traj.stop else { panic!("{:?}", traj.stop) };
    assert!((time - 0.5).abs() < 1e-6, "time = {time}");
    for snap in &traj.snapshots {
        let ModelState::Einstein(e) = &snap.state else { panic!() };
        for c in &e.scales {
            assert!((c - (1.0 - 2.0 * snap.t)).abs() < 1e-10);
        }
    }
}

#[test]
fn symmetric_data_stays_symmetric() {
    let st = random_sphere_perturbation(3, 11, 0.08, 121).unwrap();
    let last = st.len() - 1;
    for j in 0..st.len() {
        assert!((st.psi[j] - st.psi[last - j]).abs() < 1e-14);
    }
    let mut cur = st.clone();
    let dt = 0.5 * st.min_arclength_spacing().powi(2) / 4.0;
    for _ in 0..400 {
        cur = step(&cur, None, dt).unwrap();
        for j in 0..=last / 2 {
            assert!((cur.phi[j] - cur.phi[last - j]).abs() < 1e-12, "phi asymmetric at {j}");
            assert!((cur.psi[j] - cur.psi[last - j]).abs() < 1e-12, "psi asymmetric at {j}");
        }
    }
}

#[test]
fn rk4_time_error_drops_sixteenfold() {
    // coarse grid: the spatial error of the self-similar profile is nil
    let st = sphere(17);
    let t_end = 0.08;
    let err = |steps: usize| {
        let c = FlowControls { fixed_dt: Some(t_end / steps as f64), ..controls(t_end, t_end) };
        let traj = run_flow(&st, None, &c, None).unwrap();
        (traj.last().sups()[0] - 12f64.sqrt() / (1.0 - 4.0 * t_end)).abs()
    };
    let (e1, e2, e3) = (err(8), err(16), err(32));
    assert!(e1 > 1e-9, "e1 = {e1}");
    assert!(e1 / e2 >= 8.0 && e2 / e3 >= 8.0, "{e1:e} {e2:e} {e3:e}");
}

#[test]
fn collapse_is_reported_as_blowup() {
    let st = sphere(101);
    let err = step(&st, None, 0.3).unwrap_err();
    let Error::BlowupDetected { last_good, .. } = err else { panic!("{err}") };
    assert_eq!(last_good.snapshots.len(), 1);
}

#[test]
fn runs_are_deterministic() {
    let (st, cover, chi) = bump_setup();
    let c = controls(0.05, 0.01);
    let a = run_flow(&st, Some(&chi), &c, Some(&cover)).unwrap();
    let b = run_flow(&st, Some(&chi), &c, Some(&cover)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_controls_are_rejected() {
    for c in [
        FlowControls { dt_safety: 0.0, ..FlowControls::default() },
        FlowControls { dt_safety: 1.5, ..FlowControls::default() },
        FlowControls { t_end: -1.0, ..FlowControls::default() },
        FlowControls { fixed_dt: Some(0.0), ..FlowControls::default() },
    ] {
        assert!(matches!(run_flow(&sphere(51), None, &c, None), Err(Error::InvalidArgument(_))));
    }
}

#[test]
fn exhaustion_of_flat_data_is_trivial() {
    let (_, cover, _) = bump_setup();
    let flat = BumpOnFlat { amplitude: 0.0, ..BumpOnFlat::default() }.state().unwrap();
    let regions = [
        Regions { omega: (0.0, 4.0), omega_hat: (0.0, 5.5) },
        Regions { omega: (0.0, 6.0), omega_hat: (0.0, 8.0) },
        Regions { omega: (0.0, 8.0), omega_hat: (0.0, 11.0) },
    ];
    let report = run_exhaustion(&flat, &cover, &regions, &controls(0.05, 0.01), &[10, 40, 80], Execution::Sequential).unwrap();
    assert_eq!(report.deltas, vec![0.0, 0.0]);
    assert!(report.nonincreasing);
}

#[test]
fn exhaustion_probes_are_checked_and_parallel_matches_sequential() {
    let (st, cover, _) = bump_setup();
    let regions = [
        Regions { omega: (0.0, 6.0), omega_hat: (0.0, 8.0) },
        Regions { omega: (0.0, 8.0), omega_hat: (0.0, 11.0) },
    ];
    let c = controls(0.02, 0.01);
    // node 370 sits at s ≈ 11.6, outside every cutoff
    let seq = run_exhaustion(&st, &cover, &regions, &c, &[370], Execution::Sequential).unwrap();
    assert_eq!(seq.deltas, vec![0.0]);
    let par = run_exhaustion(&st, &cover, &regions, &c, &[370], Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    let bad = run_exhaustion(&st, &cover, &regions, &c, &[10_000], Execution::Sequential);
    assert!(matches!(bad, Err(Error::InvalidArgument(_))));
    let reversed = [regions[1], regions[0]];
    assert!(run_exhaustion(&st, &cover, &reversed, &c, &[10], Execution::Sequential).is_err());
}

#[test]
fn series_csv_has_the_documented_columns() {
    let traj = run_flow(&sphere(51), None, &controls(0.01, 0.005), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    write_series_csv(&traj, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,sup_rm,sup_ric,sup_dric,sup_d2ric,equivalence");
    assert_eq!(text.lines().count(), traj.series.len() + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn einstein_scales_follow_the_linear_law(
        l1 in 0.05f64..3.0, l2 in -1.0f64..3.0, c1 in 0.2f64..4.0, c2 in 0.2f64..4.0,
    ) {
        let factors = vec![EinsteinFactor::new(2, l1, 2.0 * l1, c1), EinsteinFactor::new(3, l2, 3.0 * l2.abs(), c2)];
        let state = EinsteinProductState { scales: vec![c1, c2], factors, time: 0.0 };
        let traj = run_einstein_flow(&state, &controls(10.0, 0.05), None).unwrap();
        let expected = EinsteinProductState::extinction_time(&state.factors).unwrap();
        let end = match traj.stop {
            StopReason::Extinction { time } => time,
            StopReason::ExtinctionProximity { estimate, .. } => estimate,
            other => panic!("{other:?}"),
        };
        prop_assert!((end - expected).abs() < 1e-6 * expected.max(1.0));
        for snap in &traj.snapshots {
            let ModelState::Einstein(e) = &snap.state else { panic!() };
            prop_assert!((e.scales[0] - (c1 - 2.0 * l1 * snap.t)).abs() < 1e-10);
            prop_assert!((e.scales[1] - (c2 - 2.0 * l2 * snap.t)).abs() < 1e-10);
        }
        prop_assert!(traj.snapshot_times().windows(2).all(|w| w[1] > w[0]));
    }
}
