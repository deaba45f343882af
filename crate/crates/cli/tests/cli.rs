use std::path::Path;
use std::process::Command;

use ricci_cli::config::ModelKind;
use ricci_cli::{emit_report, parse_config, run_experiment, ConfigError, Format, Kind, Outcome};

const SPHERE: &str = r#"
kind = "flow"
[model]
type = "sphere"
n = 3
[grid]
J = 51
[solver]
tEnd = 0.15
"#;

const SWEEP: &str = r#"
kind = "sweep"
[model]
type = "einstein-product"
factors = [{ dim = 3, lambda = 0.1, rmNorm = 100.0 }]
[solver]
tEnd = 1e9
stopOnDoubling = true
[cover]
recipe = "single-ball"
[sweep]
parameters = { lambda = [1e-1, 1e-2, 1e-3, 1e-4] }
"#;

const COVER: &str = r#"
kind = "cover"
[cover]
recipe = "existence"
variant = "assumption1"
domain = [-5.0, 5.0]
profile = { type = "constant", domain = [-200.0, 200.0], resolution = 0.01, curvature = 0.01 }
"#;

const EXHAUST: &str = r#"
kind = "exhaustion"
[model]
type = "bump-on-flat"
[grid]
nodes = 193
[solver]
tEnd = 0.1
snapshotInterval = 0.05
[cover]
domain = [0.0, 11.0]
[exhaustion]
regions = [
  { omega = [0.0, 1.0], omegaHat = [0.0, 3.0] },
  { omega = [0.0, 4.0], omegaHat = [0.0, 6.0] },
  { omega = [0.0, 8.0], omegaHat = [0.0, 11.0] },
]
probeRange = [0, 8]
"#;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ricci-lab")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn lab(sub: &str, config: &Path, out: &Path, extra: &[&str], threads: Option<&str>) -> i32 {
    let mut cmd = Command::new(bin());
    cmd.args([sub, "--config"]).arg(config).arg("--out").arg(out).args(extra);
    if let Some(t) = threads {
        cmd.env(ricci_cli::THREADS_ENV, t);
    }
    cmd.output().unwrap().status.code().unwrap()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn minimal_sphere_config_fills_defaults() {
    let cfg = parse_config(SPHERE, true).unwrap();
    assert_eq!(cfg.kind, Kind::Flow);
    assert_eq!(cfg.model.kind, ModelKind::Sphere);
    assert_eq!(cfg.grid.nodes, Some(51));
    assert_eq!(cfg.solver.dt_safety, 0.5);
    assert_eq!(cfg.solver.snapshot_interval, Some(0.0015));
    assert_eq!(cfg.formats, [Format::Json, Format::Csv, Format::Md]);
    assert_eq!(cfg.seed, 0);
    assert!(cfg.ignored_keys.is_empty());
}

#[test]
fn zero_dt_safety_names_the_field() {
    let text = SPHERE.replace("tEnd = 0.15", "tEnd = 0.15\ndtSafety = 0");
    match parse_config(&text, false) {
        Err(ConfigError::Validation { field, .. }) => assert_eq!(field, "solver.dtSafety"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_keys_fail_only_in_strict_mode() {
    let text = format!("fooo = 1\n{SPHERE}");
    match parse_config(&text, true) {
        Err(ConfigError::Validation { field, .. }) => assert_eq!(field, "fooo"),
        other => panic!("{other:?}"),
    }
    let nested = SPHERE.replace("n = 3", "n = 3\nradius = 2");
    assert!(matches!(parse_config(&nested, true), Err(ConfigError::Validation { field, .. }) if field == "model.radius"));
    let lax = parse_config(&text, false).unwrap();
    assert_eq!(lax.ignored_keys, ["fooo"]);
}

#[test]
fn parse_errors_carry_a_position() {
    let text = "kind = \"flow\"\n[solver]\ntEnd = = 1\n";
    match parse_config(text, false) {
        Err(ConfigError::Parse { line, column, .. }) => assert_eq!((line, column), (3, 8)),
        other => panic!("{other:?}"),
    }
    let bad_type = "kind = \"flow\"\n[solver]\ntEnd = \"soon\"\n";
    assert!(matches!(parse_config(bad_type, false), Err(ConfigError::Parse { line: 3, .. })));
    assert!(matches!(parse_config("kind = \"teleport\"\n", false), Err(ConfigError::Parse { line: 1, .. })));
}

#[test]
fn kind_specific_sections_are_required() {
    let local = SPHERE.replace("\"flow\"", "\"local-flow\"");
    assert!(matches!(parse_config(&local, false), Err(ConfigError::Validation { field, .. }) if field == "cover"));
    let sweep = SWEEP.replace("lambda = [", "speed = [");
    assert!(
        matches!(parse_config(&sweep, false), Err(ConfigError::Validation { field, .. }) if field == "sweep.parameters.speed")
    );
    let bad_value = SWEEP.replace("1e-4] }", "1e-4], dtSafety = [0.0] }");
    assert!(matches!(
        parse_config(&bad_value, false),
        Err(ConfigError::Validation { field, .. }) if field == "sweep.parameters.dtSafety"
    ));
}

#[test]
fn sphere_flow_doubles_at_one_eighth() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "sphere.toml", SPHERE);
    let out = dir.path().join("out");
    assert_eq!(lab("flow", &config, &out, &[], None), 0);
    let r = report(&out);
    let td = r["report"]["monitors"]["measured"]["doubling_time"].as_f64().unwrap();
    assert!((td - 0.125).abs() < 1.25e-3, "T_d = {td}");
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(series.starts_with("t,sup_rm,sup_ric,sup_dric,sup_d2ric,equivalence\n0,3.46410161514,"));
    assert_eq!(r["seed"], 0);
}

#[test]
fn einstein_sweep_tabulates_the_doubling_law() {
    let cfg = parse_config(SWEEP, true).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(b.outcome, Outcome::Success);
    let col = |name: &str| b.table.columns.iter().position(|c| c == name).unwrap();
    let (eps, td, improved, hamilton) = (col("lambda"), col("doubling_time"), col("improved"), col("hamilton"));
    assert_eq!(b.table.rows.len(), 4);
    let mut last = 0.0;
    for row in &b.table.rows {
        let get = |i: usize| row[i].render().parse::<f64>().unwrap();
        assert!((get(td) * 4.0 * get(eps) - 1.0).abs() < 1e-6);
        assert!(get(td) > last && get(improved) <= get(td) && get(hamilton) <= get(td));
        last = get(td);
    }
    let md = b.markdown();
    assert!(md.contains("| binding |") && md.contains("ric-integral (ball 0)"));
}

#[test]
fn empty_sweep_writes_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "empty.toml", &SWEEP.replace("[1e-1, 1e-2, 1e-3, 1e-4]", "[]"));
    let out = dir.path().join("out");
    assert_eq!(lab("sweep", &config, &out, &["--strict"], None), 0);
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("seed,run,lambda,horizon,doubling_time"));
}

#[test]
fn sweep_rows_record_each_stop_reason() {
    let text = SWEEP.replace("parameters = { lambda = [1e-1, 1e-2, 1e-3, 1e-4] }", "parameters = { dtSafety = [0.5, 0.01] }")
        .replace("stopOnDoubling = true", "stopOnDoubling = true\nmaxSteps = 500");
    let cfg = parse_config(&text, true).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(b.table.rows.len(), 2);
    let status = b.table.columns.iter().position(|c| c == "status").unwrap();
    let stop = b.table.columns.iter().position(|c| c == "stop").unwrap();
    assert_eq!(b.table.rows[0][stop].render(), "doubling");
    assert_eq!(b.table.rows[1][stop].render(), "max-steps");
    assert!(b.table.rows.iter().all(|r| r[status].render() == "ok"));
}

#[test]
fn constant_profile_cover_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "cover.toml", COVER);
    let out = dir.path().join("out");
    assert_eq!(lab("cover", &config, &out, &["--strict"], None), 0);
    let r = report(&out);
    assert_eq!(r["report"]["verification"]["all_passed"], true);
    let cover: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("cover.json")).unwrap()).unwrap();
    let radii: Vec<f64> = cover["balls"].as_array().unwrap().iter().map(|b| b["radius"].as_f64().unwrap()).collect();
    assert!(radii.iter().all(|&r| r == radii[0]));
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "sweep.toml", SWEEP);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(lab("sweep", &config, &a, &[], Some("1")), 0);
    assert_eq!(lab("sweep", &config, &b, &[], Some("3")), 0);
    for name in ["report.json", "summary.csv", "summary.md"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let cfg = parse_config(SPHERE, false).unwrap();
    let bundle = run_experiment(&cfg).unwrap();
    let (c, d) = (dir.path().join("c"), dir.path().join("d"));
    emit_report(&bundle, &cfg.formats, &c).unwrap();
    emit_report(&run_experiment(&cfg).unwrap(), &cfg.formats, &d).unwrap();
    for name in ["report.json", "summary.csv", "summary.md", "series.csv"] {
        assert_eq!(std::fs::read(c.join(name)).unwrap(), std::fs::read(d.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = write(dir.path(), "bad.toml", &SPHERE.replace("tEnd = 0.15", "tEnd = 0.15\ndtSafety = 0"));
    assert_eq!(lab("flow", &bad, &out, &[], None), 4);
    let unknown = write(dir.path(), "unknown.toml", &format!("fooo = 1\n{SPHERE}"));
    assert_eq!(lab("flow", &unknown, &out, &["--strict"], None), 4);
    let sphere = write(dir.path(), "sphere.toml", SPHERE);
    assert_eq!(lab("cover", &sphere, &out, &[], None), 4, "kind does not match the subcommand");
    assert_eq!(lab("flow", &sphere, &out, &[], Some("zero")), 4);
    let unstable = write(dir.path(), "unstable.toml", &SPHERE.replace("tEnd = 0.15", "tEnd = 0.15\nfixedDt = 0.01"));
    assert_eq!(lab("flow", &unstable, &out, &[], None), 3);
    // the last region before the largest cuts through the bump, so its delta is small but nonzero
    let two = EXHAUST.replace("  { omega = [0.0, 4.0], omegaHat = [0.0, 6.0] },\n", "");
    let strict = write(dir.path(), "exhaust.toml", &two.replace("probeRange", "tol = 1e-300\nprobeRange"));
    assert_eq!(lab("exhaust", &strict, &out, &[], None), 2);
}

#[test]
fn exhaustion_differences_shrink() {
    let cfg = parse_config(EXHAUST, true).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(b.outcome, Outcome::Success);
    let deltas = b.report["exhaustion"]["deltas"].as_array().unwrap();
    assert_eq!(deltas.len(), 2);
    let (d0, d1) = (deltas[0].as_f64().unwrap(), deltas[1].as_f64().unwrap());
    // the bump sits inside the middle region, so only the first run differs at the probes
    assert!(d0 > 0.0 && d0 < 1e-6 && d1 == 0.0, "{d0} {d1}");
}

#[test]
fn oracle_check_passes_on_random_bumps() {
    let text = "kind = \"oracle-check\"\nseed = 7\n[oracle]\ncount = 2\nsamples = 3\n";
    let cfg = parse_config(text, true).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(b.outcome, Outcome::Success, "{}", b.markdown());
    assert_eq!(b.table.rows.len(), 2);
    assert_eq!(b.report["states"][1]["seed"], 8);
    assert!(b.report["constantCurvatureIdentity"].as_f64().unwrap() <= 1e-12);
    assert!(b.report["discreteSphereDeviation"].as_f64().unwrap() < 1e-8);
}

#[test]
fn transfer_rate_fits_the_bump() {
    let text = r#"
kind = "transfer-rate"
[model]
type = "bump-on-flat"
[solver]
tEnd = 1.0
snapshotInterval = 0.05
[monitors]
enabled = false
[cover]
domain = [0.0, 11.0]
[cutoff]
omega = [0.0, 8.0]
omegaHat = [0.0, 11.0]
"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(text, true).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(b.outcome, Outcome::Success, "{}", b.markdown());
    assert_eq!(b.report["growth"]["frozenMaxG"], 0.0);
    assert_eq!(b.report["decayHorizon"], 1.0);
    let paths = emit_report(&b, &cfg.formats, dir.path()).unwrap();
    let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert!(names.contains(&"fit_m0.csv".to_string()) && names.contains(&"growth.csv".to_string()));
    let fit = std::fs::read_to_string(dir.path().join("fit_m0.csv")).unwrap();
    assert!(fit.starts_with("d,value,fitted\n"));
}
