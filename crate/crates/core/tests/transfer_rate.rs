use std::sync::OnceLock;

use proptest::prelude::*;
use ricci_core::cover::{build_chi, build_cover, CoverParams, Cutoff, CurvatureProfile, Recipe, Regions, Variant};
use ricci_core::flow::{run_flow, FlowControls, FlowTrajectory};
use ricci_core::metric::fixtures::{constant_curvature_state, BumpOnFlat};
use ricci_core::metric::{geometry, CurvatureField, Topology};
use ricci_core::transfer::*;
use ricci_core::Error;

fn bump_run() -> &'static (Cutoff, FlowTrajectory) {
    static RUN: OnceLock<(Cutoff, FlowTrajectory)> = OnceLock::new();
    RUN.get_or_init(|| {
        let st = BumpOnFlat::default().state().unwrap();
        let f = geometry(&st).unwrap();
        let profile = CurvatureProfile::from_field(&f, Topology::Plane);
        let params = CoverParams { recipe: Recipe::Transfer, variant: Variant::Assumption2, ..CoverParams::default() };
        let cover = build_cover(&profile, (0.0, 11.0), &params).unwrap();
        let chi = build_chi(&cover, &Regions { omega: (0.0, 8.0), omega_hat: (0.0, 11.0) }, &f.s).unwrap();
        let controls = FlowControls { t_end: 1.0, snapshot_interval: 0.05, ..FlowControls::default() };
        let traj = run_flow(&st, Some(&chi), &controls, Some(&cover)).unwrap();
        (chi, traj)
    })
}

fn bump_opts(omega0: f64) -> DecayOptions {
    DecayOptions { omega0: (0.0, omega0), base_node: 0, d_range: Some((3.0, 9.0)) }
}

/// A field on `s ∈ [0, 10]` whose only nonzero norm is `|Ric| = (1+s)² e^{-(1+s)²}`.
fn equality_field() -> CurvatureField {
    let len = 401;
    let s: Vec<f64> = (0..len).map(|j| 10.0 * j as f64 / (len - 1) as f64).collect();
    let ric = s.iter().map(|x| (1.0 + x).powi(2) * (-(1.0 + x) * (1.0 + x)).exp()).collect();
    let zero = vec![0.0; len];
    CurvatureField {
        n: 3,
        s,
        k_rad: zero.clone(),
        k_sph: zero.clone(),
        ric_a: zero.clone(),
        ric_b: zero.clone(),
        norm_rm: zero.clone(),
        norm_ric: ric,
        norm_dric: Some(zero.clone()),
        norm_d2ric: Some(zero),
    }
}

fn model(c1: f64, c2: f64, m: usize, d: &[f64]) -> Vec<f64> {
    d.iter().map(|x| c1 * (1.0 + x).powi(2 + m as i32) * (-c2 * (1.0 + x) * (1.0 + x)).exp()).collect()
}

#[test]
fn exact_model_is_recovered() {
    let d: Vec<f64> = (0..40).map(|i| 0.1 * i as f64).collect();
    for m in 0..=2 {
        let fit = fit_decay_samples(&d, &model(3.0, 0.7, m, &d), Some(m), (0.0, 10.0)).unwrap();
        assert!((fit.c1 - 3.0).abs() < 1e-6 && (fit.c2 - 0.7).abs() < 1e-6, "{fit:?}");
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!((fit.samples, fit.below_floor, fit.m), (40, 0, Some(m)));
    }
}

#[test]
fn equality_data_passes_with_zero_margin() {
    let r = check_decay_hypothesis(&equality_field(), (0.0, 1.0), 1.0, 0);
    assert!(r.passed);
    let ric = r.checks.iter().find(|c| c.quantity == "ric").unwrap();
    assert!(ric.margin.abs() < 1e-15, "margin {}", ric.margin);
    assert!((ric.worst_ratio - 1.0).abs() < 1e-12);
}

#[test]
fn faster_decay_fails_at_the_omega0_boundary() {
    let f = equality_field();
    let r = check_decay_hypothesis(&f, (0.0, 1.0), 2.0, 0);
    assert!(!r.passed);
    let ric = r.checks.iter().find(|c| c.quantity == "ric").unwrap();
    assert!(!ric.passed && ric.margin < 0.0);
    let first_outside = f.s.iter().position(|&x| x > 1.0).unwrap();
    assert_eq!(ric.worst_node, Some(first_outside));
    assert!(r.checks.iter().filter(|c| c.quantity != "ric").all(|c| c.passed));
}

#[test]
fn equality_data_fits_its_own_rate() {
    let f = equality_field();
    let fit = fit_decay_samples(&f.s, &f.norm_ric, Some(0), (1.0, 4.0)).unwrap();
    assert!((fit.c2 - 1.0).abs() < 1e-9 && (fit.c1 - 1.0).abs() < 1e-9);
}

#[test]
fn compactly_supported_curvature_passes_outside_its_support() {
    let st = BumpOnFlat::default().state().unwrap();
    let f = geometry(&st).unwrap();
    // The support ends at s = 2; the stencil of ∇²Ric reaches a few nodes past it.
    let r = check_decay_hypothesis(&f, (0.0, 2.5), 1.0, 0);
    assert!(r.passed && r.nodes_checked > 0, "{r:#?}");
    for c in r.checks.iter().filter(|c| c.quantity != "rm") {
        assert_eq!(c.margin, f64::INFINITY, "{}", c.quantity);
        assert_eq!(c.worst_node, None);
    }
}

#[test]
fn bump_flow_decays_at_the_final_time() {
    let (_, traj) = bump_run();
    for m in 0..=2 {
        let fit = fit_gaussian_decay(traj, &bump_opts(2.0), m, 1.0).unwrap();
        assert!(fit.c2 > 0.0 && fit.r2 >= 0.9, "m = {m}: {fit:?}");
        assert_eq!(fit.below_floor, 0);
    }
    assert_eq!(decay_horizon(traj, &bump_opts(2.0), 0, 0.9).unwrap(), Some(1.0));
}

#[test]
fn enlarging_omega0_keeps_the_sign_of_the_rate() {
    let (_, traj) = bump_run();
    for omega0 in [2.0, 2.5, 3.0, 4.0] {
        let opts = DecayOptions { d_range: Some((omega0, 9.0)), ..bump_opts(omega0) };
        for m in 0..=2 {
            let fit = fit_gaussian_decay(traj, &opts, m, 1.0).unwrap();
            assert!(fit.c2 > 0.0, "Ω₀ = (0, {omega0}), m = {m}: {fit:?}");
        }
    }
}

#[test]
fn interpolated_fit_lies_between_snapshots() {
    let (_, traj) = bump_run();
    let a = fit_gaussian_decay(traj, &bump_opts(2.0), 0, 0.5).unwrap();
    let mid = fit_gaussian_decay(traj, &bump_opts(2.0), 0, 0.525).unwrap();
    let b = fit_gaussian_decay(traj, &bump_opts(2.0), 0, 0.55).unwrap();
    assert!(mid.c2 > 0.0 && a.c2 > 0.0 && b.c2 > 0.0);
    assert!(matches!(fit_gaussian_decay(traj, &bump_opts(2.0), 0, 2.0), Err(Error::InvalidArgument(_))));
}

#[test]
fn growth_vanishes_where_the_cutoff_does() {
    let (chi, traj) = bump_run();
    let g = temporal_growth_profile(traj, &bump_opts(2.0)).unwrap();
    let frozen: Vec<usize> = (0..chi.chi.len()).filter(|&j| chi.chi[j] == 0.0).collect();
    assert!(!frozen.is_empty());
    for &j in &frozen {
        assert_eq!(g.g[j], 0.0, "node {j}");
        assert!(g.rm_change[j] < 1e-9);
    }
    let fit = g.fit.fit().unwrap();
    assert!(fit.c2 > 0.0 && fit.m.is_none());
}

#[test]
fn frozen_nodes_are_dropped_by_the_floor() {
    let (_, traj) = bump_run();
    let opts = DecayOptions { d_range: None, ..bump_opts(2.0) };
    let g = temporal_growth_profile(traj, &opts).unwrap();
    let zeros = g.d.iter().zip(&g.g).filter(|(d, v)| **d > 2.0 && **v < FIT_FLOOR).count();
    assert!(zeros > 0);
    assert_eq!(g.fit.fit().unwrap().below_floor, zeros);
}

#[test]
fn homogeneous_sphere_fit_is_rejected() {
    let st = constant_curvature_state(3, 1.0, Topology::Sphere, 51).unwrap();
    let controls = FlowControls { t_end: 0.05, snapshot_interval: 0.01, ..FlowControls::default() };
    let traj = run_flow(&st, None, &controls, None).unwrap();
    let opts = DecayOptions { omega0: (0.0, std::f64::consts::PI), base_node: 0, d_range: None };
    let g = temporal_growth_profile(&traj, &opts).unwrap();
    assert!(matches!(g.fit, FitOutcome::Rejected { .. }));
    let spread = g.g.iter().fold(0.0f64, |m, v| m.max(*v)) - g.g.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    assert!(spread < 1e-8, "G varies by {spread}");
}

#[test]
fn fit_errors() {
    let d: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let v = model(1.0, 0.5, 0, &d);
    assert!(matches!(fit_decay_samples(&d, &v, Some(0), (0.0, 10.0)), Err(Error::InsufficientSamples { .. })));
    let d: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let tiny = vec![1e-20; 20];
    assert!(matches!(fit_decay_samples(&d, &tiny, Some(0), (0.0, 30.0)), Err(Error::AllBelowFloor)));
    let same = vec![1.0; 20];
    assert!(matches!(fit_decay_samples(&same, &d, Some(0), (0.0, 30.0)), Err(Error::InvalidArgument(_))));
}

#[test]
fn fit_csv_has_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fit.csv");
    let d: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let v = model(2.0, 0.3, 1, &d);
    let fit = fit_decay_samples(&d, &v, Some(1), (0.0, 10.0)).unwrap();
    write_fit_csv(&path, &d, &v, Some(&fit)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,value,fitted");
    assert_eq!(lines.len(), 11);
}

proptest! {
    #[test]
    fn fits_are_idempotent(c1 in 0.1f64..10.0, c2 in 0.05f64..1.5, m in 0usize..3) {
        let d: Vec<f64> = (0..30).map(|i| 0.15 * i as f64).collect();
        let v = model(c1, c2, m, &d);
        let fit = fit_decay_samples(&d, &v, Some(m), (0.0, 10.0)).unwrap();
        prop_assert!((fit.c1 / c1 - 1.0).abs() < 1e-6 && (fit.c2 - c2).abs() < 1e-6);
        let again: Vec<f64> = d.iter().map(|&x| fit.eval(x)).collect();
        let refit = fit_decay_samples(&d, &again, Some(m), (0.0, 10.0)).unwrap();
        prop_assert!((refit.c1 / fit.c1 - 1.0).abs() < 1e-9 && (refit.c2 - fit.c2).abs() < 1e-9);
    }

    #[test]
    fn r2_is_a_fraction(seed in 0u64..1000) {
        let d: Vec<f64> = (0..20).map(|i| 0.3 * i as f64).collect();
        let v: Vec<f64> = d.iter().enumerate().map(|(i, x)| {
            let wobble = 1.0 + 0.5 * ((seed as f64 + i as f64 * 1.7).sin());
            wobble * (-(1.0 + x) * (1.0 + x) * 0.2).exp()
        }).collect();
        let fit = fit_decay_samples(&d, &v, Some(0), (0.0, 10.0)).unwrap();
        prop_assert!((0.0..=1.0).contains(&fit.r2));
    }
}
