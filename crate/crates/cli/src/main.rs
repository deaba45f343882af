use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ricci_cli::{emit_report, load_config, run_experiment, ConfigError, Kind, Outcome, THREADS_ENV};

#[derive(Parser)]
#[command(name = "ricci-lab", version, about = "Run Ricci flow experiments from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Global or local flow with monitors (kind = flow | local-flow)
    Flow(Common),
    /// Build and verify a good cover
    Cover(Common),
    /// Nested local flows and their Cauchy differences
    Exhaust(Common),
    /// Cross product of swept parameters, run in parallel
    Sweep(Common),
    /// Fast-path curvature against the coordinate oracle
    Oracle(Common),
    /// Gaussian decay fits along a local flow
    Transfer(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Treat unknown config keys as errors.
    #[arg(long)]
    strict: bool,
}

impl Command {
    fn parts(&self) -> (&Common, &'static [Kind]) {
        match self {
            Command::Flow(c) => (c, &[Kind::Flow, Kind::LocalFlow]),
            Command::Cover(c) => (c, &[Kind::Cover]),
            Command::Exhaust(c) => (c, &[Kind::Exhaustion]),
            Command::Sweep(c) => (c, &[Kind::Sweep]),
            Command::Oracle(c) => (c, &[Kind::OracleCheck]),
            Command::Transfer(c) => (c, &[Kind::TransferRate]),
        }
    }
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(Outcome::ConfigError.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("config error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return ExitCode::from(Outcome::ConfigError.exit_code() as u8);
            }
        }
    }
    let (common, kinds) = cli.command.parts();
    let cfg = match load_config(&common.config, common.strict) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    for key in &cfg.ignored_keys {
        eprintln!("warning: unknown key `{key}` ignored");
    }
    if !kinds.contains(&cfg.kind) {
        let e = ConfigError::Validation {
            field: "kind".into(),
            message: format!("{:?} does not match this subcommand (expected one of {kinds:?})", cfg.kind),
        };
        return config_failure(&e);
    }
    let out = common.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let bundle = match run_experiment(&cfg) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.outcome.exit_code() as u8);
        }
    };
    match emit_report(&bundle, &cfg.formats, &out) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: cannot write reports under {}: {e}", out.display());
            return ExitCode::from(Outcome::IoFailure.exit_code() as u8);
        }
    }
    eprintln!("{}", ricci_cli::run::summary_line(&bundle));
    ExitCode::from(bundle.exit_code() as u8)
}
