use proptest::prelude::*;
use ricci_core::metric::fixtures::{
    constant_curvature_state, random_sphere_perturbation, BumpOnFlat, GaussianBump,
};
use ricci_core::metric::{
    eval_warped_geometry, geometry, oracle_curvature_grid, oracle_sample_nodes, relative_error, rm_norm, validate_against_oracle,
    OracleOptions, OracleSample, Topology, WarpedState,
};
use ricci_core::Error;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn round_three_sphere_has_unit_sectional_curvature() {
    let st = constant_curvature_state(3, 1.0, Topology::Sphere, 201).unwrap();
    let f = geometry(&st).unwrap();
    for j in 0..st.len() {
        assert!(close(f.k_rad[j], 1.0, 1e-9), "kRad[{j}] = {}", f.k_rad[j]);
        assert!(close(f.k_sph[j], 1.0, 1e-9), "kSph[{j}] = {}", f.k_sph[j]);
        assert!(close(f.norm_rm[j], 12f64.sqrt(), 1e-8));
        assert!(f.dric()[j] < 1e-6, "dric[{j}] = {}", f.dric()[j]);
        assert!(f.d2ric()[j] < 1e-4, "d2ric[{j}] = {}", f.d2ric()[j]);
    }
}

#[test]
fn round_four_sphere_of_curvature_four() {
    let st = constant_curvature_state(4, 4.0, Topology::Sphere, 201).unwrap();
    let f = eval_warped_geometry(&st).unwrap();
    let expected = 4.0 * 24f64.sqrt();
    assert!(f.norm_rm.iter().all(|&v| relative_error(v, expected, 1.0) < 1e-6));
}

#[test]
fn flat_plane_is_exactly_flat() {
    let st = constant_curvature_state(3, 0.0, Topology::Plane, 201).unwrap();
    let f = geometry(&st).unwrap();
    for v in [&f.k_rad, &f.k_sph, &f.norm_rm, &f.norm_ric] {
        assert!(v.iter().all(|&x| x == 0.0));
    }
    assert!(f.dric().iter().chain(f.d2ric()).all(|&x| x == 0.0));
}

#[test]
fn round_cylinder_curvature() {
    let st = constant_curvature_state(3, 1.0, Topology::Cylinder, 201).unwrap();
    let f = geometry(&st).unwrap();
    for j in 0..st.len() {
        assert_eq!(f.k_rad[j], 0.0);
        assert_eq!(f.k_sph[j], 1.0);
        assert_eq!(f.ric_a[j], 0.0);
        assert_eq!(f.ric_b[j], 1.0);
        assert_eq!(f.norm_rm[j], 2.0);
        // tensor norm: Ric = diag(0, 1, 1)
        assert!(close(f.norm_ric[j], 2f64.sqrt(), 1e-15));
        assert_eq!(f.dric()[j], 0.0);
        assert_eq!(f.d2ric()[j], 0.0);
    }
}

#[test]
fn unit_curvature_norm_identity() {
    for n in 2..=8 {
        let exact = 2.0 * (n * (n - 1)) as f64;
        assert!(relative_error(rm_norm(n, 1.0, 1.0).powi(2), exact, 1e-300) <= 1e-12, "n = {n}");
    }
}

#[test]
fn norm_identities_hold_at_every_node() {
    let st = GaussianBump::random(4, 7).state().unwrap();
    let f = eval_warped_geometry(&st).unwrap();
    let n = 4.0;
    for j in 0..st.len() {
        let (kr, ks) = (f.k_rad[j], f.k_sph[j]);
        let rm2 = 4.0 * (n - 1.0) * kr * kr + 2.0 * (n - 1.0) * (n - 2.0) * ks * ks;
        assert!(relative_error(f.norm_rm[j].powi(2), rm2, 1e-300) < 1e-12);
        assert_eq!(f.ric_a[j], (n - 1.0) * kr);
        assert_eq!(f.ric_b[j], kr + (n - 2.0) * ks);
    }
}

#[test]
fn pole_regularity_is_enforced() {
    let mut st = constant_curvature_state(3, 1.0, Topology::Sphere, 101).unwrap();
    st.psi[0] = 1e-3;
    assert!(matches!(eval_warped_geometry(&st), Err(Error::PoleRegularityViolation { .. })));
    let mut st = constant_curvature_state(3, 1.0, Topology::Sphere, 101).unwrap();
    for p in st.psi.iter_mut() {
        *p *= 1.5;
    }
    assert!(matches!(eval_warped_geometry(&st), Err(Error::PoleRegularityViolation { .. })));
}

#[test]
fn non_positive_coefficients_are_rejected() {
    let mut st = constant_curvature_state(3, 1.0, Topology::Sphere, 101).unwrap();
    st.phi[10] = 0.0;
    assert!(matches!(
        eval_warped_geometry(&st),
        Err(Error::NonPositiveMetric { field: "phi", node: 10, .. })
    ));
    let mut st = constant_curvature_state(3, 1.0, Topology::Sphere, 101).unwrap();
    st.psi[50] = -1.0;
    assert!(matches!(eval_warped_geometry(&st), Err(Error::NonPositiveMetric { field: "psi", .. })));
}

#[test]
fn tiny_grids_and_negative_curvature_are_rejected() {
    assert!(matches!(
        constant_curvature_state(3, 1.0, Topology::Sphere, 5),
        Err(Error::GridTooSmall { .. })
    ));
    assert!(matches!(
        constant_curvature_state(3, -1.0, Topology::Sphere, 50),
        Err(Error::UnsupportedTopology(_))
    ));
}

#[test]
fn oracle_reproduces_constant_curvature_and_products() {
    let opts = OracleOptions::default();
    let st = constant_curvature_state(3, 1.0, Topology::Sphere, 201).unwrap();
    let o = oracle_curvature_grid(&st, &OracleSample::at(70), &opts).unwrap();
    assert!(close(o.norm_rm, 12f64.sqrt(), 1e-6), "{o:?}");
    assert!(close(o.norm_ric, 2.0 * 3f64.sqrt(), 1e-6));

    let st = constant_curvature_state(3, 0.0, Topology::Plane, 201).unwrap();
    let o = oracle_curvature_grid(&st, &OracleSample::at(100), &opts).unwrap();
    for v in [o.norm_rm, o.norm_ric, o.norm_dric, o.norm_d2ric] {
        assert!(v <= 1e-8, "{o:?}");
    }

    let st = constant_curvature_state(3, 1.0, Topology::Cylinder, 201).unwrap();
    let o = oracle_curvature_grid(&st, &OracleSample::at(100), &opts).unwrap();
    assert!(close(o.norm_rm, 2.0, 1e-6));
    assert!(close(o.norm_ric, 2f64.sqrt(), 1e-6));
    assert!(o.norm_dric < 1e-6 && o.norm_d2ric < 1e-5, "{o:?}");
}

#[test]
fn oracle_refuses_chart_singularities() {
    let st = constant_curvature_state(3, 1.0, Topology::Sphere, 201).unwrap();
    let opts = OracleOptions::default();
    assert!(matches!(
        oracle_curvature_grid(&st, &OracleSample::at(3), &opts),
        Err(Error::SingularChart(_))
    ));
    let s = OracleSample { node: 100, angles: vec![0.01, 1.0] };
    assert!(matches!(oracle_curvature_grid(&st, &s, &opts), Err(Error::SingularChart(_))));
}

#[test]
fn simple_bump_first_derivative_matches_oracle_at_three() {
    let st = GaussianBump::simple(3).state().unwrap();
    let f = geometry(&st).unwrap();
    let j = st.x.iter().position(|&x| x == 3.0).unwrap();
    let o = oracle_curvature_grid(&st, &OracleSample::at(j), &OracleOptions::default()).unwrap();
    let err = relative_error(f.dric()[j], o.norm_dric, 1e-12);
    assert!(err < 1e-4, "fast {} oracle {} rel {err}", f.dric()[j], o.norm_dric);
}

#[test]
fn random_bumps_agree_with_oracle() {
    let opts = OracleOptions::default();
    for seed in 0..20 {
        let st = GaussianBump::random(3, seed).state().unwrap();
        let f = geometry(&st).unwrap();
        let samples: Vec<OracleSample> =
            [192, 320, 448].iter().map(|&j| OracleSample::at(j)).collect();
        if let Err(e) = validate_against_oracle(&st, &f, &samples, &opts, 1e-4, 1e-6) {
            panic!("seed {seed}: {e}");
        }
    }
}

#[test]
fn sample_nodes_are_significant_and_clear_of_the_ends() {
    let st = GaussianBump::random(3, 5).state().unwrap();
    let f = geometry(&st).unwrap();
    let opts = OracleOptions::default();
    let nodes = oracle_sample_nodes(&f, &opts, 5, 1e-2);
    assert_eq!(nodes.len(), 5);
    assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    let sup = f.d2ric().iter().copied().fold(0.0, f64::max);
    for &j in &nodes {
        assert!(j >= opts.clearance() && j + opts.clearance() < st.len());
        assert!(f.d2ric()[j] >= 1e-2 * sup);
    }
    assert!(oracle_sample_nodes(&f, &opts, 5, 2.0).is_empty());
}

#[test]
fn four_dimensional_bump_agrees_with_oracle() {
    let st = GaussianBump::random(4, 99).state().unwrap();
    let f = geometry(&st).unwrap();
    let samples = [OracleSample::at(250), OracleSample::at(400)];
    validate_against_oracle(&st, &f, &samples, &OracleOptions::default(), 1e-4, 1e-6).unwrap();
}

#[test]
fn bump_on_flat_is_flat_outside_its_support() {
    let b = BumpOnFlat::default();
    let st = b.state().unwrap();
    let f = geometry(&st).unwrap();
    for j in 0..st.len() {
        if st.x[j] > b.support + 0.2 {
            assert_eq!(f.norm_rm[j], 0.0, "node {j}");
            assert_eq!(f.d2ric()[j], 0.0);
        }
    }
    assert!(f.norm_rm[0] > 0.0);
}

fn scaled_matches(st: &WarpedState, c: f64, edge: usize, tol: f64) {
    let f = geometry(st).unwrap();
    let g = geometry(&st.scaled(c)).unwrap();
    // relative to the sup of each field, since isolated zeros have no relative scale
    let pairs: [(&[f64], &[f64], f64); 4] = [
        (&g.norm_rm, &f.norm_rm, 1.0 / c),
        (&g.norm_ric, &f.norm_ric, 1.0 / c),
        (g.dric(), f.dric(), c.powf(-1.5)),
        (g.d2ric(), f.d2ric(), 1.0 / (c * c)),
    ];
    for (k, (scaled, base, factor)) in pairs.into_iter().enumerate() {
        let sup = base.iter().fold(0.0f64, |m, v| m.max(v.abs())) * factor;
        for j in edge..st.len() - edge {
            let err = (scaled[j] - base[j] * factor).abs() / sup;
            assert!(err < tol, "quantity {k} node {j}: {err:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn curvature_scales_covariantly(seed in 0u64..1000, c in 0.25f64..4.0) {
        // rounding of sqrt(c)·ψ is amplified like 1/h^m by the stencils, so
        // this uses profiles whose curvature is of the order of 1/ψ²
        let st = random_sphere_perturbation(3, seed, 0.02, 65).unwrap();
        scaled_matches(&st, c, 0, 1e-9);
    }

    #[test]
    fn dyadic_rescaling_is_exact_to_rounding(seed in 0u64..1000, k in -2i32..3) {
        let c = 4f64.powi(k);
        scaled_matches(&GaussianBump::random(3, seed).state().unwrap(), c, 0, 1e-13);
    }

    #[test]
    fn norms_are_consistent_for_random_profiles(seed in 0u64..1000, n in 3usize..6) {
        let st = GaussianBump::random(n, seed).state().unwrap();
        let f = eval_warped_geometry(&st).unwrap();
        let m = (n - 1) as f64;
        for j in 0..st.len() {
            let rm2 = 4.0 * m * f.k_rad[j].powi(2) + 2.0 * m * (m - 1.0) * f.k_sph[j].powi(2);
            prop_assert!(relative_error(f.norm_rm[j].powi(2), rm2, 1e-300) < 1e-12);
        }
    }
}
