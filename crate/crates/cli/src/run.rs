//! Experiment dispatch.

use ricci_core::cover::{
    build_chi, build_cover, verify_cover, CoverParams, CurvatureProfile, GoodCover, Regions, ScaleOptions,
};
use ricci_core::flow::{run_einstein_flow, run_exhaustion, run_flow, FlowControls, FlowTrajectory, StopPredicates, StopReason};
use ricci_core::metric::fixtures::{constant_curvature_state, random_sphere_perturbation, BumpOnFlat, GaussianBump};
use ricci_core::metric::io::load_profile;
use ricci_core::metric::{
    geometry, oracle_curvature_grid, oracle_sample_nodes, relative_error, rm_norm, EinsteinFactor, EinsteinProductState, OracleOptions,
    OracleSample, Topology, WarpedState,
};
use ricci_core::monitor::{monitor_report, LifespanConstants, MonitorReport, ResidualOptions};
use ricci_core::par::{self, Execution};
use ricci_core::transfer::{
    check_decay_hypothesis, decay_horizon, fit_gaussian_decay, temporal_growth_profile, DecayFit, DecayOptions,
};
use ricci_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CoverRecipe, ExperimentConfig, Kind, ModelKind, ProfileKind};
use crate::emit::{to_json, Cell, Table};

/// Worst outcome of an experiment, ordered by severity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    /// A monitor or acceptance check failed.
    Violation,
    /// Blow-up, NaN or extinction during integration.
    NumericalFailure,
    /// The inputs do not admit the requested experiment.
    ConfigError,
    /// Output could not be written.
    IoFailure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::IoFailure => 1,
            Outcome::Violation => 2,
            Outcome::NumericalFailure => 3,
            Outcome::ConfigError => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct RunError {
    pub outcome: Outcome,
    pub message: String,
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let outcome = match &e {
            e if e.is_numerical() => Outcome::NumericalFailure,
            Error::OracleMismatch { .. } | Error::CoverMismatch => Outcome::Violation,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => Outcome::IoFailure,
            _ => Outcome::ConfigError,
        };
        RunError { outcome, message: e.to_string() }
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// An extra file written next to the report.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultBundle {
    pub kind: Kind,
    pub seed: u64,
    pub outcome: Outcome,
    pub report: Value,
    pub table: Table,
    pub artifacts: Vec<Artifact>,
}

impl ResultBundle {
    pub fn exit_code(&self) -> i32 {
        self.outcome.exit_code()
    }

    pub fn json(&self) -> Value {
        json!({ "kind": self.kind, "seed": self.seed, "outcome": self.outcome, "report": self.report })
    }

    pub fn markdown(&self) -> String {
        let kind = serde_json::to_value(self.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let outcome =
            serde_json::to_value(self.outcome).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        format!("# {kind}\n\nseed {}, outcome {outcome}\n\n{}", self.seed, self.table.to_markdown())
    }
}

/// Runs the experiment described by a validated configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    match cfg.kind {
        Kind::Flow | Kind::LocalFlow => flow_experiment(cfg),
        Kind::Sweep => sweep_experiment(cfg),
        Kind::Cover => cover_experiment(cfg),
        Kind::Exhaustion => exhaustion_experiment(cfg),
        Kind::OracleCheck => oracle_experiment(cfg),
        Kind::TransferRate => transfer_experiment(cfg),
    }
}

enum Model {
    Warped(WarpedState),
    Einstein(EinsteinProductState),
}

fn build_model(cfg: &ExperimentConfig) -> Result<Model> {
    let m = &cfg.model;
    let nodes = cfg.grid.nodes.unwrap_or(cfg.default_nodes());
    let warped = match m.kind {
        ModelKind::Sphere => constant_curvature_state(m.n, m.curvature, Topology::Sphere, nodes)?,
        ModelKind::Plane => constant_curvature_state(m.n, 0.0, Topology::Plane, nodes)?,
        ModelKind::Cylinder => constant_curvature_state(m.n, m.curvature, Topology::Cylinder, nodes)?,
        ModelKind::BumpOnFlat => {
            let d = BumpOnFlat::default();
            BumpOnFlat {
                n: m.n,
                amplitude: m.amplitude.unwrap_or(d.amplitude),
                support: m.support.unwrap_or(d.support),
                length: m.length.unwrap_or(d.length),
                nodes,
            }
            .state()?
        }
        ModelKind::RandomBump => GaussianBump { nodes, ..GaussianBump::random(m.n, cfg.seed) }.state()?,
        ModelKind::SpherePerturbation => {
            random_sphere_perturbation(m.n, cfg.seed, m.amplitude.unwrap_or(0.05), nodes)?
        }
        ModelKind::Profile => {
            let path = m.path.as_ref().expect("validated");
            load_profile(path, m.n, m.topology.expect("validated"))?
        }
        ModelKind::EinsteinProduct => {
            let factors: Vec<EinsteinFactor> = m
                .factors
                .iter()
                .map(|f| EinsteinFactor::new(f.dim, f.lambda, f.rm_norm, f.initial_scale))
                .collect();
            let scales = factors.iter().map(|f| f.initial_scale).collect();
            return Ok(Model::Einstein(EinsteinProductState { factors, scales, time: 0.0 }));
        }
    };
    Ok(Model::Warped(warped))
}

fn warped(model: &Model) -> Result<&WarpedState> {
    match model {
        Model::Warped(w) => Ok(w),
        Model::Einstein(_) => {
            Err(RunError { outcome: Outcome::ConfigError, message: "this experiment needs a warped model".into() })
        }
    }
}

fn controls(cfg: &ExperimentConfig) -> FlowControls {
    let s = &cfg.solver;
    FlowControls {
        dt_safety: s.dt_safety,
        t_end: s.t_end,
        snapshot_interval: s.snapshot_interval.expect("filled"),
        stop: StopPredicates {
            doubling: s.stop_on_doubling,
            rm_ratio: s.rm_ratio,
            extinction_fraction: (s.extinction_fraction > 0.0).then_some(s.extinction_fraction),
        },
        fixed_dt: s.fixed_dt,
        max_steps: s.max_steps,
    }
}

fn synthetic_profile(spec: &crate::config::SyntheticSpec, n: usize) -> CurvatureProfile {
    let domain = (spec.domain[0], spec.domain[1]);
    match spec.kind {
        ProfileKind::Quadratic => CurvatureProfile::synthetic(n, domain, spec.resolution, |s: f64| {
            let q = (1.0 + s.abs()).powi(2);
            [q, 0.5 * q, 0.0, 0.0]
        }),
        ProfileKind::Constant => {
            let (k, d) = (spec.curvature, n as f64);
            let rm = k * (2.0 * d * (d - 1.0)).sqrt();
            let ric = (d - 1.0) * k * d.sqrt();
            CurvatureProfile::synthetic(n, domain, spec.resolution, move |_| [rm, ric, 0.0, 0.0])
        }
    }
}

/// The configured cover with the profile it was built from (`None` for
/// Einstein products, which use a single ball). `model` may be absent only
/// when the cover has a synthetic profile.
fn build_cover_for(
    cfg: &ExperimentConfig,
    model: Option<&Model>,
) -> Result<Option<(GoodCover, Option<CurvatureProfile>)>> {
    let Some(spec) = &cfg.cover else { return Ok(None) };
    let (profile, poles) = match (&spec.profile, model) {
        (Some(p), _) => (synthetic_profile(p, cfg.model.n), (None, None)),
        (None, Some(Model::Warped(w))) => {
            let f = geometry(w)?;
            let (s0, s1) = (f.s[0], f.s[f.s.len() - 1]);
            let poles = (w.topology.left_pole().then_some(s0), w.topology.right_pole().then_some(s1));
            (CurvatureProfile::from_field(&f, w.topology), poles)
        }
        (None, None) => unreachable!("validated: cover without a model needs a synthetic profile"),
        (None, Some(Model::Einstein(e))) => {
            if spec.recipe != CoverRecipe::SingleBall {
                return Err(RunError {
                    outcome: Outcome::ConfigError,
                    message: "Einstein products only support the single-ball cover".into(),
                });
            }
            let k = e.curvature().norm_rm;
            return Ok(Some((GoodCover::single_ball(e.dim(), (0.0, 1.0), k, (None, None)), None)));
        }
    };
    let domain = spec.domain.map_or(profile.domain(), |d| (d[0], d[1]));
    let cover = match spec.recipe.core() {
        None => {
            let pts = profile.sample_points(domain.0, domain.1);
            let k = pts.iter().map(|&s| profile.at(s)[0]).fold(0.0, f64::max);
            GoodCover::single_ball(profile.n(), domain, k, poles)
        }
        Some(recipe) => {
            let params = CoverParams {
                recipe,
                variant: spec.variant,
                rbar: spec.rbar,
                alpha: spec.alpha,
                kbar: spec.kbar,
                base_point: spec.base_point,
                scale: ScaleOptions { rho_max: spec.rho_max, ..ScaleOptions::default() },
            };
            build_cover(&profile, domain, &params)?
        }
    };
    Ok(Some((cover, Some(profile))))
}

/// Largest `A` with `sup|Ric| ≤ (n-1) K e^{-AK}` at `t = 0`; infinite for Ricci-flat data.
fn decay_constant(n: usize, k: f64, ric: f64) -> f64 {
    if ric == 0.0 || k == 0.0 {
        f64::INFINITY
    } else {
        ((n - 1) as f64 * k / ric).ln().max(0.0) / k
    }
}

struct FlowRun {
    traj: FlowTrajectory,
    cover: Option<GoodCover>,
    monitor: Option<MonitorReport>,
    a: f64,
}

fn flow_run(cfg: &ExperimentConfig, kind: Kind) -> Result<FlowRun> {
    let model = build_model(cfg)?;
    let cover = build_cover_for(cfg, Some(&model))?.map(|(c, _)| c);
    let ctl = controls(cfg);
    let (traj, n) = match &model {
        Model::Warped(w) => {
            let chi = match (kind, &cfg.cutoff, &cover) {
                (Kind::LocalFlow | Kind::TransferRate, Some(c), Some(cover)) => {
                    let s = geometry(w)?.s;
                    let regions = Regions { omega: (c.omega[0], c.omega[1]), omega_hat: (c.omega_hat[0], c.omega_hat[1]) };
                    Some(build_chi(cover, &regions, &s)?)
                }
                _ => None,
            };
            (run_flow(w, chi.as_ref(), &ctl, cover.as_ref())?, w.n)
        }
        Model::Einstein(e) => (run_einstein_flow(e, &ctl, cover.as_ref())?, e.dim()),
    };
    let [k, ric, _, _] = traj.initial().sups();
    let a = cfg.monitors.a.unwrap_or_else(|| decay_constant(n, k, ric));
    let monitor = if cfg.monitors.enabled {
        let m = &cfg.monitors;
        let d = LifespanConstants::default();
        let constants = LifespanConstants { c_n: m.c_n.unwrap_or(d.c_n), c_n_gamma: m.c_n_gamma, c: m.c.unwrap_or(d.c) };
        let opts = ResidualOptions { max_spacing: m.max_spacing, t_min: m.residual_t_min };
        Some(monitor_report(&traj, cover.as_ref(), a, &constants, m.residuals.then_some(&opts))?)
    } else {
        None
    };
    Ok(FlowRun { traj, cover, monitor, a })
}

fn stop_label(stop: &StopReason) -> String {
    serde_json::to_value(stop).ok().and_then(|v| v["reason"].as_str().map(String::from)).unwrap_or_default()
}

fn extinction_estimate(stop: &StopReason) -> Option<f64> {
    match stop {
        StopReason::Extinction { time } => Some(*time),
        StopReason::ExtinctionProximity { estimate, .. } => Some(*estimate),
        _ => None,
    }
}

const FLOW_COLUMNS: [&str; 10] =
    ["horizon", "doubling_time", "generalized_time", "binding", "hamilton", "improved", "slow_growth", "A", "stop", "status"];

fn flow_cells(run: &FlowRun) -> Vec<Cell> {
    let m = run.monitor.as_ref();
    let binding = m
        .and_then(|m| m.binding.as_ref())
        .map(|b| format!("{} (ball {})", serde_json::to_value(b.condition).unwrap().as_str().unwrap(), b.ball));
    let status = if m.is_some_and(|m| m.violated()) { "violation" } else { "ok" };
    vec![
        run.traj.horizon().into(),
        m.and_then(|m| m.measured.doubling_time).into(),
        m.and_then(|m| m.measured.generalized.map(|g| g.time)).into(),
        binding.map_or(Cell::Empty, Cell::Text),
        m.map(|m| m.bounds.hamilton.value()).into(),
        m.map(|m| m.bounds.improved.value()).into(),
        m.and_then(|m| m.bounds.slow_growth.map(|b| b.value())).into(),
        run.a.into(),
        stop_label(&run.traj.stop).into(),
        status.into(),
    ]
}

fn flow_json(run: &FlowRun) -> Value {
    json!({
        "horizon": run.traj.horizon(),
        "steps": run.traj.steps,
        "stop": run.traj.stop,
        "extinctionEstimate": extinction_estimate(&run.traj.stop),
        "A": if run.a.is_finite() { json!(run.a) } else { json!("infinite") },
        "monitors": run.monitor,
        "coverBalls": run.cover.as_ref().map(|c| c.balls.len()),
    })
}

fn series_csv(traj: &FlowTrajectory) -> String {
    let mut t = Table::new(&["t", "sup_rm", "sup_ric", "sup_dric", "sup_d2ric", "equivalence"]);
    for r in &traj.series {
        t.push(vec![r.t.into(), r.sup_rm.into(), r.sup_ric.into(), r.sup_dric.into(), r.sup_d2ric.into(), r.equivalence.into()]);
    }
    t.to_csv()
}

fn with_seed(columns: &[&str]) -> Vec<String> {
    std::iter::once("seed").chain(columns.iter().copied()).map(String::from).collect()
}

fn flow_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let run = flow_run(cfg, cfg.kind)?;
    let mut table = Table { columns: with_seed(&FLOW_COLUMNS), rows: Vec::new() };
    let mut row = vec![Cell::from(cfg.seed)];
    row.extend(flow_cells(&run));
    table.push(row);
    let mut artifacts = vec![Artifact { name: "series.csv".into(), text: series_csv(&run.traj) }];
    if let Some(c) = &run.cover {
        artifacts.push(Artifact { name: "cover.json".into(), text: to_json(c).map_err(Error::from)? });
    }
    let violated = run.monitor.as_ref().is_some_and(|m| m.violated());
    Ok(ResultBundle {
        kind: cfg.kind,
        seed: cfg.seed,
        outcome: if violated { Outcome::Violation } else { Outcome::Success },
        report: flow_json(&run),
        table,
        artifacts,
    })
}

/// Every combination of swept values, last parameter fastest. Empty if any
/// parameter has no values or none are given.
fn cross_product(params: &std::collections::BTreeMap<String, Vec<f64>>) -> Vec<Vec<(String, f64)>> {
    if params.is_empty() || params.values().any(|v| v.is_empty()) {
        return Vec::new();
    }
    let mut out: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for (name, values) in params {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push((name.clone(), v));
                    p
                })
            })
            .collect();
    }
    out
}

fn sweep_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let spec = cfg.sweep.as_ref().expect("validated");
    let names: Vec<&str> = spec.parameters.keys().map(String::as_str).collect();
    let combos = cross_product(&spec.parameters);
    let mut columns = vec!["run"];
    columns.extend(&names);
    columns.extend(FLOW_COLUMNS);
    let mut table = Table { columns: with_seed(&columns), rows: Vec::new() };

    // runs are independent; sweeps parallelize across them only
    let results = par::map_with(Execution::Parallel, &combos, |combo| {
        let mut run_cfg = cfg.clone();
        run_cfg.kind = spec.base;
        run_cfg.sweep = None;
        for (name, v) in combo {
            run_cfg.apply(name, *v);
        }
        flow_run(&run_cfg, spec.base)
    });

    let mut outcome = Outcome::Success;
    let mut runs = Vec::new();
    for (i, (combo, result)) in combos.iter().zip(&results).enumerate() {
        let mut row = vec![Cell::from(cfg.seed), Cell::from(i)];
        row.extend(combo.iter().map(|(_, v)| Cell::from(*v)));
        let params: serde_json::Map<String, Value> = combo.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        match result {
            Ok(run) => {
                row.extend(flow_cells(run));
                if run.monitor.as_ref().is_some_and(|m| m.violated()) {
                    outcome = outcome.max(Outcome::Violation);
                }
                runs.push(json!({ "run": i, "parameters": params, "result": flow_json(run) }));
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(Cell::Empty, FLOW_COLUMNS.len() - 1));
                row.push(format!("error: {}", e.message).into());
                outcome = outcome.max(e.outcome);
                runs.push(json!({ "run": i, "parameters": params, "error": e.message, "outcome": e.outcome }));
            }
        }
        table.push(row);
    }
    Ok(ResultBundle {
        kind: Kind::Sweep,
        seed: cfg.seed,
        outcome,
        report: json!({ "base": spec.base, "parameters": names, "runs": runs }),
        table,
        artifacts: Vec::new(),
    })
}

fn cover_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let model = match cfg.cover.as_ref().and_then(|c| c.profile.as_ref()) {
        Some(_) => None,
        None => Some(build_model(cfg)?),
    };
    let (cover, profile) = build_cover_for(cfg, model.as_ref())?.expect("validated");
    let Some(profile) = profile else {
        return Err(RunError { outcome: Outcome::ConfigError, message: "cover checks need a warped or synthetic profile".into() });
    };
    let report = verify_cover(&cover, &profile, cover.variant);
    let mut table = Table {
        columns: with_seed(&["recipe", "variant", "balls", "I", "Gamma", "A", "Kbar", "a", "b", "c", "d", "e", "all_passed"]),
        rows: Vec::new(),
    };
    let pass = |name: &str| report.item(name).map_or(Cell::Empty, |c| Cell::from(if c.passed { "pass" } else { "fail" }));
    let label = |v: Value| v.as_str().map(String::from).unwrap_or_default();
    table.push(vec![
        cfg.seed.into(),
        label(serde_json::to_value(cover.recipe).unwrap()).into(),
        label(serde_json::to_value(cover.variant).unwrap()).into(),
        cover.balls.len().into(),
        cover.intersections.into(),
        cover.gamma.into(),
        cover.a.into(),
        cover.kbar.into(),
        pass("a"),
        pass("b"),
        pass("c"),
        pass("d"),
        pass("e"),
        (if report.all_passed { "yes" } else { "no" }).into(),
    ]);
    let text = to_json(&cover).map_err(Error::from)?;
    Ok(ResultBundle {
        kind: Kind::Cover,
        seed: cfg.seed,
        outcome: if report.all_passed { Outcome::Success } else { Outcome::Violation },
        report: json!({ "verification": report, "balls": cover.balls.len(), "domain": cover.domain }),
        table,
        artifacts: vec![Artifact { name: "cover.json".into(), text }],
    })
}

fn exhaustion_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let spec = cfg.exhaustion.as_ref().expect("validated");
    let model = build_model(cfg)?;
    let state = warped(&model)?;
    let (cover, _) = build_cover_for(cfg, Some(&model))?.expect("validated");
    let regions: Vec<Regions> = spec
        .regions
        .iter()
        .map(|r| Regions { omega: (r.omega[0], r.omega[1]), omega_hat: (r.omega_hat[0], r.omega_hat[1]) })
        .collect();
    let probes: Vec<usize> = match (&spec.probes, spec.probe_range) {
        (Some(p), _) => p.clone(),
        (None, Some([a, b])) => (a..=b).collect(),
        (None, None) => {
            let s = state.arclength();
            let (lo, hi) = regions[0].omega;
            (0..s.len()).filter(|&j| s[j] >= lo && s[j] <= hi).collect()
        }
    };
    let report = run_exhaustion(state, &cover, &regions, &controls(cfg), &probes, Execution::Parallel)?;
    let mut table = Table { columns: with_seed(&["run", "omega_hi", "omega_hat_hi", "delta"]), rows: Vec::new() };
    for (j, r) in regions.iter().enumerate() {
        table.push(vec![cfg.seed.into(), j.into(), r.omega.1.into(), r.omega_hat.1.into(), report.deltas.get(j).copied().into()]);
    }
    let last = report.deltas.last().copied().unwrap_or(0.0);
    let ok = report.nonincreasing && last <= spec.tol;
    Ok(ResultBundle {
        kind: Kind::Exhaustion,
        seed: cfg.seed,
        outcome: if ok { Outcome::Success } else { Outcome::Violation },
        report: json!({ "exhaustion": report, "tol": spec.tol, "passed": ok }),
        table,
        artifacts: Vec::new(),
    })
}

#[derive(Serialize)]
struct OracleRow {
    state: usize,
    seed: u64,
    max_rel: [f64; 4],
    worst_node: [usize; 4],
}

fn oracle_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let o = &cfg.oracle;
    let ids: Vec<usize> = (0..o.count).collect();
    let opts = OracleOptions::default();
    let rows = par::try_map(&ids, |&i| {
        let seed = cfg.seed.wrapping_add(i as u64);
        let state = GaussianBump { nodes: o.nodes, ..GaussianBump::random(o.n, seed) }.state()?;
        let field = geometry(&state)?;
        let nodes = oracle_sample_nodes(&field, &opts, o.samples, o.significance);
        if nodes.is_empty() {
            return Err(ricci_core::Error::InvalidArgument(format!(
                "seed {seed}: no node reaches significance {}",
                o.significance
            )));
        }
        let mut row = OracleRow { state: i, seed, max_rel: [0.0; 4], worst_node: [0; 4] };
        for j in nodes {
            let v = oracle_curvature_grid(&state, &OracleSample::at(j), &opts)?;
            let fast = [field.norm_rm[j], field.norm_ric[j], field.dric()[j], field.d2ric()[j]];
            let exact = [v.norm_rm, v.norm_ric, v.norm_dric, v.norm_d2ric];
            for q in 0..4 {
                let e = relative_error(fast[q], exact[q], o.floor);
                if e > row.max_rel[q] {
                    row.max_rel[q] = e;
                    row.worst_node[q] = j;
                }
            }
        }
        Ok(row)
    })?;
    let n = o.n as f64;
    let exact = 2.0 * n * (n - 1.0);
    let identity = (rm_norm(o.n, 1.0, 1.0).powi(2) - exact).abs() / exact;
    // truncation of the discrete round sphere, reported alongside
    let sphere = constant_curvature_state(o.n, 1.0, Topology::Sphere, 201)?;
    let discrete =
        geometry(&sphere)?.norm_rm.iter().map(|r| (r * r - exact).abs() / exact).fold(0.0, f64::max);
    let mut table =
        Table { columns: with_seed(&["state", "rm", "ric", "dric", "d2ric", "status"]), rows: Vec::new() };
    let mut ok = identity <= 1e-12;
    for r in &rows {
        let pass = r.max_rel.iter().all(|&e| e <= o.rel_tol);
        ok &= pass;
        let mut row = vec![Cell::from(r.seed), Cell::from(r.state)];
        row.extend(r.max_rel.iter().map(|&e| Cell::from(e)));
        row.push((if pass { "ok" } else { "violation" }).into());
        table.push(row);
    }
    Ok(ResultBundle {
        kind: Kind::OracleCheck,
        seed: cfg.seed,
        outcome: if ok { Outcome::Success } else { Outcome::Violation },
        report: json!({
            "quantities": ["normRm", "normRic", "normDRic", "normD2Ric"],
            "relTol": o.rel_tol,
            "states": rows,
            "constantCurvatureIdentity": identity,
            "discreteSphereDeviation": discrete,
        }),
        table,
        artifacts: Vec::new(),
    })
}

fn fit_table(d: &[f64], v: &[f64], fit: Option<&DecayFit>, keep: impl Fn(usize) -> bool) -> String {
    let mut t = Table::new(&["d", "value", "fitted"]);
    for j in (0..d.len()).filter(|&j| keep(j)) {
        t.push(vec![d[j].into(), v[j].into(), fit.map(|f| f.eval(d[j])).into()]);
    }
    t.to_csv()
}

fn transfer_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let run = flow_run(cfg, Kind::TransferRate)?;
    let spec = &cfg.transfer;
    let traj = &run.traj;
    let (_, f0) = traj.initial().warped().expect("warped run");
    let opts = DecayOptions {
        omega0: (spec.omega0[0], spec.omega0[1]),
        base_node: spec.base_node,
        d_range: spec.d_range.map(|d| (d[0], d[1])),
    };
    let t = spec.t.unwrap_or(traj.horizon());
    let s = &f0.s;
    let d: Vec<f64> = s.iter().map(|x| (x - s[spec.base_node.min(s.len() - 1)]).abs()).collect();
    let outside = |j: usize| s[j] < opts.omega0.0 || s[j] > opts.omega0.1;
    let hypothesis = check_decay_hypothesis(f0, opts.omega0, spec.alpha, spec.base_node);

    let mut fits = Vec::new();
    let mut artifacts = Vec::new();
    let mut table = Table { columns: with_seed(&["quantity", "C1", "C2", "R2", "samples", "status"]), rows: Vec::new() };
    let mut ok = true;
    let snap = traj.snapshots.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).expect("snapshots");
    for m in 0..=2 {
        let fit = fit_gaussian_decay(traj, &opts, m, t);
        let status = match &fit {
            Ok(f) if f.c2 > 0.0 && f.r2 >= spec.r2_min => "ok".to_string(),
            Ok(_) => "violation".to_string(),
            Err(e) => format!("rejected: {e}"),
        };
        if m == 0 && status != "ok" {
            ok = false;
        }
        let fitted = fit.as_ref().ok();
        table.push(vec![
            cfg.seed.into(),
            format!("ric_m{m}").into(),
            fitted.map(|f| f.c1).into(),
            fitted.map(|f| f.c2).into(),
            fitted.map(|f| f.r2).into(),
            fitted.map_or(Cell::Empty, |f| f.samples.into()),
            status.into(),
        ]);
        let values = snap.warped().expect("warped").1.ric_derivative(m).to_vec();
        artifacts.push(Artifact { name: format!("fit_m{m}.csv"), text: fit_table(&d, &values, fitted, outside) });
        fits.push(json!({ "m": m, "fit": fitted, "error": fit.as_ref().err().map(|e| e.to_string()) }));
    }

    let growth = temporal_growth_profile(traj, &opts)?;
    let chi = traj.chi.as_ref().expect("local run");
    let frozen: Vec<usize> = (0..chi.chi.len()).filter(|&j| chi.chi[j] == 0.0).collect();
    let frozen_g = frozen.iter().map(|&j| growth.g[j]).fold(0.0, f64::max);
    let growth_fit = growth.fit.fit();
    let growth_ok = growth_fit.is_some_and(|f| f.c2 > 0.0) && frozen_g == 0.0;
    ok &= growth_ok;
    table.push(vec![
        cfg.seed.into(),
        "growth".into(),
        growth_fit.map(|f| f.c1).into(),
        growth_fit.map(|f| f.c2).into(),
        growth_fit.map(|f| f.r2).into(),
        growth_fit.map_or(Cell::Empty, |f| f.samples.into()),
        (if growth_ok { "ok" } else { "violation" }).into(),
    ]);
    artifacts.push(Artifact { name: "growth.csv".into(), text: fit_table(&growth.d, &growth.g, growth_fit, outside) });
    let horizon = decay_horizon(traj, &opts, 0, spec.r2_min)?;

    Ok(ResultBundle {
        kind: Kind::TransferRate,
        seed: cfg.seed,
        outcome: if ok { Outcome::Success } else { Outcome::Violation },
        report: json!({
            "t": t,
            "fitSnapshot": snap.t,
            "hypothesis": hypothesis,
            "fits": fits,
            "growth": { "fit": growth.fit, "frozenNodes": frozen.len(), "frozenMaxG": frozen_g },
            "decayHorizon": horizon,
            "flow": flow_json(&run),
        }),
        table,
        artifacts,
    })
}

/// Human-readable one-line summary of a bundle for the terminal.
pub fn summary_line(b: &ResultBundle) -> String {
    let first = b.table.rows.first().map(|r| r.iter().map(Cell::render).collect::<Vec<_>>().join(", "));
    format!("{:?}: {:?} ({} rows){}", b.kind, b.outcome, b.table.rows.len(), first.map_or(String::new(), |f| format!("; first: {f}")))
}
