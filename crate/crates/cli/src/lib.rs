//! Experiment harness for `ricci-core`: TOML configs, dispatch over the
//! experiment kinds, and deterministic JSON/CSV/Markdown reports.

pub mod config;
pub mod emit;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig, Format, Kind};
pub use emit::{emit_report, fmt_float, Cell, Table};
pub use run::{run_experiment, Artifact, Outcome, ResultBundle, RunError};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "RICCI_LAB_THREADS";
