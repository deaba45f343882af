//! TOML experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ricci_core::cover::{Recipe, Variant};
use ricci_core::metric::Topology;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation { field: field.into(), message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Flow,
    LocalFlow,
    Exhaustion,
    Cover,
    Sweep,
    OracleCheck,
    TransferRate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Sphere,
    Plane,
    Cylinder,
    BumpOnFlat,
    /// Seeded Gaussian bump on a cylinder-type grid.
    RandomBump,
    /// Seeded even-mode perturbation of the round sphere.
    SpherePerturbation,
    /// `x,phi,psi` CSV read from `path`.
    Profile,
    EinsteinProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FactorSpec {
    pub dim: usize,
    pub lambda: f64,
    pub rm_norm: f64,
    pub initial_scale: f64,
}

impl Default for FactorSpec {
    fn default() -> Self {
        Self { dim: 3, lambda: 2.0, rm_norm: 12f64.sqrt(), initial_scale: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ModelSpec {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    pub n: usize,
    /// Sectional curvature for constant-curvature models.
    pub curvature: f64,
    pub amplitude: Option<f64>,
    pub support: Option<f64>,
    pub length: Option<f64>,
    pub path: Option<PathBuf>,
    pub topology: Option<Topology>,
    pub factors: Vec<FactorSpec>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Sphere,
            n: 3,
            curvature: 1.0,
            amplitude: None,
            support: None,
            length: None,
            path: None,
            topology: None,
            factors: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GridSpec {
    /// Node count `J`; the model's default when absent.
    #[serde(alias = "J")]
    pub nodes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SolverSpec {
    pub dt_safety: f64,
    pub t_end: f64,
    /// Defaults to `tEnd / 100`.
    pub snapshot_interval: Option<f64>,
    pub fixed_dt: Option<f64>,
    pub max_steps: usize,
    pub stop_on_doubling: bool,
    pub rm_ratio: Option<f64>,
    /// `0` disables the extinction-proximity stop.
    pub extinction_fraction: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            dt_safety: 0.5,
            t_end: 1.0,
            snapshot_interval: None,
            fixed_dt: None,
            max_steps: 50_000_000,
            stop_on_doubling: false,
            rm_ratio: None,
            extinction_fraction: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverRecipe {
    Existence,
    Transfer,
    /// One ball over the whole domain with `K = sup|Rm|`, for homogeneous models.
    SingleBall,
}

impl CoverRecipe {
    pub fn core(self) -> Option<Recipe> {
        match self {
            CoverRecipe::Existence => Some(Recipe::Existence),
            CoverRecipe::Transfer => Some(Recipe::Transfer),
            CoverRecipe::SingleBall => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `|Rm| = (1+|s|)²`, `|Ric| = ½(1+|s|)²`, parallel Ricci.
    Quadratic,
    /// Constant sectional curvature `curvature` in dimension `n`.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SyntheticSpec {
    #[serde(rename = "type")]
    pub kind: ProfileKind,
    pub domain: [f64; 2],
    pub resolution: f64,
    pub curvature: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { kind: ProfileKind::Quadratic, domain: [-400.0, 400.0], resolution: 5e-3, curvature: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct CoverSpec {
    pub recipe: CoverRecipe,
    pub variant: Variant,
    pub rbar: f64,
    pub alpha: f64,
    pub kbar: Option<f64>,
    pub base_point: f64,
    pub rho_max: f64,
    /// Covered interval; the whole profile when absent.
    pub domain: Option<[f64; 2]>,
    /// Closed-form profile in place of the model's curvature.
    pub profile: Option<SyntheticSpec>,
}

impl Default for CoverSpec {
    fn default() -> Self {
        Self {
            recipe: CoverRecipe::Transfer,
            variant: Variant::Assumption2,
            rbar: 1.0,
            alpha: 1.0,
            kbar: None,
            base_point: 0.0,
            rho_max: 1e6,
            domain: None,
            profile: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CutoffSpec {
    pub omega: [f64; 2],
    pub omega_hat: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct MonitorSpec {
    pub enabled: bool,
    /// Ricci decay constant `A`; derived from the initial data when absent.
    pub a: Option<f64>,
    pub residuals: bool,
    pub residual_t_min: f64,
    pub max_spacing: f64,
    pub c_n: Option<f64>,
    pub c_n_gamma: Option<f64>,
    pub c: Option<[f64; 7]>,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            a: None,
            residuals: true,
            residual_t_min: 0.0,
            max_spacing: 0.05,
            c_n: None,
            c_n_gamma: None,
            c: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ExhaustionSpec {
    pub regions: Vec<CutoffSpec>,
    pub probes: Option<Vec<usize>>,
    /// Inclusive node range used when `probes` is absent.
    pub probe_range: Option<[usize; 2]>,
    /// Largest acceptable final `δ`.
    pub tol: f64,
}

impl Default for ExhaustionSpec {
    fn default() -> Self {
        Self { regions: Vec::new(), probes: None, probe_range: None, tol: 1e-3 }
    }
}

/// Parameters a sweep may vary.
pub const SWEEPABLE: [&str; 7] = ["amplitude", "curvature", "dtSafety", "lambda", "nodes", "rmNorm", "tEnd"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SweepSpec {
    /// Kind of every run in the sweep.
    pub base: Kind,
    /// Swept values per parameter; runs are the cross product.
    pub parameters: BTreeMap<String, Vec<f64>>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { base: Kind::Flow, parameters: BTreeMap::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct OracleSpec {
    /// Number of random bumps checked.
    pub count: usize,
    pub n: usize,
    pub rel_tol: f64,
    pub floor: f64,
    /// Sample nodes per state.
    pub samples: usize,
    /// Samples are drawn where every norm is at least this fraction of its sup.
    pub significance: f64,
    pub nodes: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self { count: 20, n: 3, rel_tol: 1e-4, floor: 1e-6, samples: 5, significance: 1e-2, nodes: 769 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TransferSpec {
    pub omega0: [f64; 2],
    pub base_node: usize,
    pub d_range: Option<[f64; 2]>,
    /// Fit time; the run's horizon when absent.
    pub t: Option<f64>,
    pub r2_min: f64,
    /// `α` of the decay hypothesis checked on the initial data.
    pub alpha: f64,
}

impl Default for TransferSpec {
    fn default() -> Self {
        Self { omega0: [0.0, 2.0], base_node: 0, d_range: Some([3.0, 9.0]), t: None, r2_min: 0.9, alpha: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub cover: Option<CoverSpec>,
    #[serde(default)]
    pub cutoff: Option<CutoffSpec>,
    #[serde(default)]
    pub monitors: MonitorSpec,
    #[serde(default)]
    pub exhaustion: Option<ExhaustionSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub transfer: TransferSpec,
    /// Keys present in the file but not in the schema (non-strict mode only).
    #[serde(skip)]
    pub ignored_keys: Vec<String>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv, Format::Md]
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_error(text: &str, e: toml::de::Error) -> ConfigError {
    let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
    ConfigError::Parse { line, column, message: e.message().trim().to_string() }
}

/// Parses, fills defaults and validates a configuration. Unknown keys are
/// errors when `strict`, otherwise recorded in `ignored_keys`.
pub fn parse_config(text: &str, strict: bool) -> Result<ExperimentConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| parse_error(text, e))?;
    let mut ignored = Vec::new();
    let mut config: ExperimentConfig =
        serde_ignored::deserialize(de, |path| ignored.push(path.to_string())).map_err(|e| parse_error(text, e))?;
    if strict {
        if let Some(key) = ignored.first() {
            return Err(ConfigError::field(key, "unknown key"));
        }
    }
    config.ignored_keys = ignored;
    config.fill_defaults();
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path, strict: bool) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    parse_config(&text, strict)
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::field(field, format!("must be positive, got {v}")))
    }
}

fn interval(field: &str, v: [f64; 2]) -> Result<(), ConfigError> {
    if v[0] < v[1] {
        Ok(())
    } else {
        Err(ConfigError::field(field, format!("empty interval [{}, {}]", v[0], v[1])))
    }
}

impl ExperimentConfig {
    /// Kind of the individual runs: the sweep base for sweeps.
    pub fn run_kind(&self) -> Kind {
        match (&self.kind, &self.sweep) {
            (Kind::Sweep, Some(s)) => s.base,
            (k, _) => *k,
        }
    }

    pub fn default_nodes(&self) -> usize {
        match self.model.kind {
            ModelKind::Sphere | ModelKind::SpherePerturbation => 201,
            ModelKind::BumpOnFlat => 385,
            ModelKind::RandomBump => 769,
            ModelKind::Plane | ModelKind::Cylinder => 193,
            ModelKind::Profile | ModelKind::EinsteinProduct => 0,
        }
    }

    fn fill_defaults(&mut self) {
        if self.grid.nodes.is_none() && self.default_nodes() > 0 {
            self.grid.nodes = Some(self.default_nodes());
        }
        if self.solver.snapshot_interval.is_none() {
            self.solver.snapshot_interval = Some(self.solver.t_end / 100.0);
        }
        if self.model.kind == ModelKind::EinsteinProduct && self.model.factors.is_empty() {
            self.model.factors.push(FactorSpec::default());
        }
        if self.kind == Kind::TransferRate && self.cover.is_none() {
            self.cover = Some(CoverSpec::default());
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.solver;
        positive("solver.dtSafety", s.dt_safety)?;
        if s.dt_safety > 1.0 {
            return Err(ConfigError::field("solver.dtSafety", "must not exceed 1"));
        }
        positive("solver.tEnd", s.t_end)?;
        positive("solver.snapshotInterval", s.snapshot_interval.unwrap_or(1.0))?;
        if let Some(d) = s.fixed_dt {
            positive("solver.fixedDt", d)?;
        }
        if let Some(r) = s.rm_ratio {
            positive("solver.rmRatio", r)?;
        }
        if !(s.extinction_fraction >= 0.0 && s.extinction_fraction < 1.0) {
            return Err(ConfigError::field("solver.extinctionFraction", "must lie in [0, 1)"));
        }
        if s.max_steps == 0 {
            return Err(ConfigError::field("solver.maxSteps", "must be positive"));
        }
        self.validate_model()?;
        if let Some(c) = &self.cover {
            positive("cover.rbar", c.rbar)?;
            positive("cover.alpha", c.alpha)?;
            positive("cover.rhoMax", c.rho_max)?;
            if let Some(k) = c.kbar {
                positive("cover.kbar", k)?;
            }
            if let Some(d) = c.domain {
                interval("cover.domain", d)?;
            }
            if let Some(p) = &c.profile {
                interval("cover.profile.domain", p.domain)?;
                positive("cover.profile.resolution", p.resolution)?;
                if p.kind == ProfileKind::Constant {
                    positive("cover.profile.curvature", p.curvature)?;
                }
            }
        }
        if let Some(c) = &self.cutoff {
            interval("cutoff.omega", c.omega)?;
            interval("cutoff.omegaHat", c.omega_hat)?;
        }
        let m = &self.monitors;
        positive("monitors.maxSpacing", m.max_spacing)?;
        if !(m.residual_t_min >= 0.0) {
            return Err(ConfigError::field("monitors.residualTMin", "must be nonnegative"));
        }
        if let Some(a) = m.a {
            if !(a >= 0.0) {
                return Err(ConfigError::field("monitors.a", "must be nonnegative"));
            }
        }
        for (name, v) in [("monitors.cN", m.c_n), ("monitors.cNGamma", m.c_n_gamma)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if let Some(c) = m.c {
            for v in c {
                positive("monitors.c", v)?;
            }
        }
        self.validate_kind()
    }

    fn validate_model(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if m.kind != ModelKind::EinsteinProduct && m.n < 3 {
            return Err(ConfigError::field("model.n", "dimension must be at least 3"));
        }
        if let Some(j) = self.grid.nodes {
            if j < 9 {
                return Err(ConfigError::field("grid.nodes", format!("need at least 9 nodes, got {j}")));
            }
        }
        match m.kind {
            ModelKind::Sphere | ModelKind::Cylinder => positive("model.curvature", m.curvature)?,
            ModelKind::BumpOnFlat => {
                if let Some(w) = m.support {
                    positive("model.support", w)?;
                }
                if let Some(l) = m.length {
                    positive("model.length", l)?;
                }
            }
            ModelKind::SpherePerturbation => {
                let a = m.amplitude.unwrap_or(0.05);
                if !(a >= 0.0 && a < 0.2) {
                    return Err(ConfigError::field("model.amplitude", "must lie in [0, 0.2)"));
                }
            }
            ModelKind::Profile => {
                if m.path.is_none() {
                    return Err(ConfigError::field("model.path", "required for profile models"));
                }
                if m.topology.is_none() {
                    return Err(ConfigError::field("model.topology", "required for profile models"));
                }
            }
            ModelKind::EinsteinProduct => {
                for f in &m.factors {
                    if f.dim == 0 {
                        return Err(ConfigError::field("model.factors.dim", "must be positive"));
                    }
                    positive("model.factors.initialScale", f.initial_scale)?;
                    if !(f.rm_norm >= 0.0) {
                        return Err(ConfigError::field("model.factors.rmNorm", "must be nonnegative"));
                    }
                    if !f.lambda.is_finite() {
                        return Err(ConfigError::field("model.factors.lambda", "must be finite"));
                    }
                }
            }
            ModelKind::Plane | ModelKind::RandomBump => {}
        }
        Ok(())
    }

    fn validate_kind(&self) -> Result<(), ConfigError> {
        let warped_only = |what: &str| {
            if self.model.kind == ModelKind::EinsteinProduct {
                Err(ConfigError::field("model.type", format!("{what} needs a warped model")))
            } else {
                Ok(())
            }
        };
        match self.kind {
            Kind::Flow => {}
            Kind::LocalFlow => {
                warped_only("local-flow")?;
                self.require_cover("local-flow")?;
                if self.cutoff.is_none() {
                    return Err(ConfigError::field("cutoff", "local-flow needs a [cutoff] section"));
                }
            }
            Kind::Exhaustion => {
                warped_only("exhaustion")?;
                self.require_cover("exhaustion")?;
                let e = self.exhaustion.as_ref().ok_or_else(|| ConfigError::field("exhaustion", "section required"))?;
                if e.regions.len() < 2 {
                    return Err(ConfigError::field("exhaustion.regions", "need at least two nested regions"));
                }
                for r in &e.regions {
                    interval("exhaustion.regions.omega", r.omega)?;
                    interval("exhaustion.regions.omegaHat", r.omega_hat)?;
                }
                positive("exhaustion.tol", e.tol)?;
                if let Some([a, b]) = e.probe_range {
                    if a > b {
                        return Err(ConfigError::field("exhaustion.probeRange", "start exceeds end"));
                    }
                }
            }
            Kind::Cover => {
                let c = self.require_cover("cover")?;
                if c.profile.is_none() {
                    warped_only("cover without a synthetic profile")?;
                }
            }
            Kind::Sweep => {
                let s = self.sweep.as_ref().ok_or_else(|| ConfigError::field("sweep", "section required"))?;
                if !matches!(s.base, Kind::Flow | Kind::LocalFlow) {
                    return Err(ConfigError::field("sweep.base", "must be flow or local-flow"));
                }
                for (name, values) in &s.parameters {
                    if !SWEEPABLE.contains(&name.as_str()) {
                        return Err(ConfigError::field(
                            &format!("sweep.parameters.{name}"),
                            format!("not sweepable; choose from {SWEEPABLE:?}"),
                        ));
                    }
                    for &v in values {
                        let mut probe = self.clone();
                        probe.kind = s.base;
                        probe.sweep = None;
                        probe.apply(name, v);
                        probe.validate().map_err(|e| match e {
                            ConfigError::Validation { field, message } => ConfigError::Validation {
                                field: format!("sweep.parameters.{name}"),
                                message: format!("value {v} makes {field} invalid: {message}"),
                            },
                            other => other,
                        })?;
                    }
                }
                let mut base = self.clone();
                base.kind = s.base;
                base.sweep = None;
                base.validate_kind()?;
            }
            Kind::OracleCheck => {
                let o = &self.oracle;
                positive("oracle.relTol", o.rel_tol)?;
                positive("oracle.floor", o.floor)?;
                if !(3..=4).contains(&o.n) {
                    return Err(ConfigError::field("oracle.n", "the coordinate oracle supports n = 3 or 4"));
                }
                if o.samples == 0 {
                    return Err(ConfigError::field("oracle.samples", "must be positive"));
                }
                if !(0.0..1.0).contains(&o.significance) {
                    return Err(ConfigError::field("oracle.significance", "must lie in [0, 1)"));
                }
                if o.nodes < 33 {
                    return Err(ConfigError::field("oracle.nodes", "need at least 33 nodes"));
                }
            }
            Kind::TransferRate => {
                warped_only("transfer-rate")?;
                self.require_cover("transfer-rate")?;
                if self.cutoff.is_none() {
                    return Err(ConfigError::field("cutoff", "transfer-rate needs a [cutoff] section"));
                }
                let t = &self.transfer;
                interval("transfer.omega0", t.omega0)?;
                if let Some(d) = t.d_range {
                    interval("transfer.dRange", d)?;
                }
                if let Some(t) = t.t {
                    positive("transfer.t", t)?;
                }
                positive("transfer.alpha", t.alpha)?;
                if !(0.0..=1.0).contains(&t.r2_min) {
                    return Err(ConfigError::field("transfer.r2Min", "must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    fn require_cover(&self, what: &str) -> Result<&CoverSpec, ConfigError> {
        self.cover.as_ref().ok_or_else(|| ConfigError::field("cover", format!("{what} needs a [cover] section")))
    }

    /// Sets a sweepable parameter.
    pub fn apply(&mut self, name: &str, v: f64) {
        match name {
            "amplitude" => self.model.amplitude = Some(v),
            "curvature" => self.model.curvature = v,
            "dtSafety" => self.solver.dt_safety = v,
            "lambda" => self.model.factors.iter_mut().take(1).for_each(|f| f.lambda = v),
            "nodes" => self.grid.nodes = Some(v as usize),
            "rmNorm" => self.model.factors.iter_mut().take(1).for_each(|f| f.rm_norm = v),
            "tEnd" => {
                self.solver.t_end = v;
                self.solver.snapshot_interval = Some(v / 100.0);
            }
            _ => unreachable!("validated sweep parameter {name}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_map_to_one_based_positions() {
        let text = "a = 1\nbb = 2\n";
        assert_eq!(line_column(text, 0), (1, 1));
        assert_eq!(line_column(text, 6), (2, 1));
        assert_eq!(line_column(text, 8), (2, 3));
    }
}
