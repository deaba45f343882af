//! Time integration of the Ricci flow and the local flow `∂g/∂t = -2χ²Ric`.
//!
//! Warped states are advanced by explicit RK4 on a fixed `x`-grid; Einstein
//! products follow their scale ODEs. Runs record global sup series, snapshots
//! and, against a cover, the per-ball quantities behind the generalized
//! doubling time.

mod einstein;
mod exhaustion;
mod io;
mod ledger;
mod warped;

use serde::{Deserialize, Serialize};

use crate::cover::{Cutoff, GoodCover};
use crate::error::{Error, Result};
use crate::metric::{CurvatureField, EinsteinProductState, ProductCurvature, WarpedState};

pub use einstein::run_einstein_flow;
pub use exhaustion::{run_exhaustion, ExhaustionReport};
pub use io::{write_series_csv, write_snapshot_fields};
pub use ledger::{cover_fingerprint, BallLedger};
pub(crate) use warped::semidiscrete_rates;
pub use warped::{run_flow, stability_dt, step};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct StopPredicates {
    /// Stop once `sup|Rm|` reaches twice its initial value.
    pub doubling: bool,
    /// Stop once `sup|Rm|` reaches this multiple of its initial value.
    pub rm_ratio: Option<f64>,
    /// Stop once the size of the model (largest `ψ`, or smallest Einstein
    /// scale) drops below this fraction of its initial value.
    pub extinction_fraction: Option<f64>,
}

impl Default for StopPredicates {
    fn default() -> Self {
        Self { doubling: false, rm_ratio: None, extinction_fraction: Some(1e-3) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct FlowControls {
    pub dt_safety: f64,
    pub t_end: f64,
    pub snapshot_interval: f64,
    pub stop: StopPredicates,
    /// Overrides the stability step (still clipped to snapshot times).
    pub fixed_dt: Option<f64>,
    pub max_steps: usize,
}

impl Default for FlowControls {
    fn default() -> Self {
        Self {
            dt_safety: 0.5,
            t_end: 1.0,
            snapshot_interval: 0.01,
            stop: StopPredicates::default(),
            fixed_dt: None,
            max_steps: 50_000_000,
        }
    }
}

impl FlowControls {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return bad("dt_safety must lie in (0, 1]");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(self.snapshot_interval > 0.0) {
            return bad("snapshot_interval must be positive");
        }
        if self.fixed_dt.is_some_and(|d| !(d > 0.0)) {
            return bad("fixed_dt must be positive");
        }
        Ok(())
    }

    /// Snapshot time with index `k`, clipped to the horizon.
    pub(crate) fn snapshot_time(&self, k: usize) -> f64 {
        (k as f64 * self.snapshot_interval).min(self.t_end)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelState {
    Warped(WarpedState),
    Einstein(EinsteinProductState),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SnapshotCurvature {
    Warped(CurvatureField),
    Einstein(ProductCurvature),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub state: ModelState,
    pub curvature: SnapshotCurvature,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x))
}

impl Snapshot {
    /// Global `[sup|Rm|, sup|Ric|, sup|∇Ric|, sup|∇²Ric|]`.
    pub fn sups(&self) -> [f64; 4] {
        match &self.curvature {
            SnapshotCurvature::Warped(f) => [sup(&f.norm_rm), sup(&f.norm_ric), sup(f.dric()), sup(f.d2ric())],
            SnapshotCurvature::Einstein(c) => [c.norm_rm, c.norm_ric, c.norm_dric, c.norm_d2ric],
        }
    }

    pub fn warped(&self) -> Option<(&WarpedState, &CurvatureField)> {
        match (&self.state, &self.curvature) {
            (ModelState::Warped(s), SnapshotCurvature::Warped(f)) => Some((s, f)),
            _ => None,
        }
    }
}

/// Per-step global quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub sup_rm: f64,
    pub sup_ric: f64,
    pub sup_dric: f64,
    pub sup_d2ric: f64,
    /// `sup max(g(t)/g(0), g(0)/g(t))` over nodes and eigen-directions.
    pub equivalence: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum StopReason {
    Horizon,
    Doubling { time: f64 },
    RmRatio { time: f64 },
    /// Some Einstein scale reached zero (located by bisection).
    Extinction { time: f64 },
    /// The size dropped below the configured fraction; `estimate` is the
    /// extinction time extrapolated from the last step.
    ExtinctionProximity { time: f64, estimate: f64 },
    MaxSteps { time: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    /// Snapshots at the configured cadence; the first one is the initial data.
    pub snapshots: Vec<Snapshot>,
    pub series: Vec<SeriesRow>,
    pub ledger: Option<BallLedger>,
    /// The cutoff used, or `None` for `χ ≡ 1`.
    pub chi: Option<Cutoff>,
    pub stop: StopReason,
    pub steps: usize,
    pub controls: FlowControls,
}

impl FlowTrajectory {
    pub fn initial(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has an initial snapshot")
    }

    /// Time of the last recorded step.
    pub fn horizon(&self) -> f64 {
        self.series.last().map_or(0.0, |r| r.t)
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Errors unless the per-ball ledger was recorded against `cover`.
    pub fn ledger_for(&self, cover: &GoodCover) -> Result<&BallLedger> {
        match &self.ledger {
            Some(l) if l.fingerprint == cover_fingerprint(cover) => Ok(l),
            _ => Err(Error::CoverMismatch),
        }
    }
}

/// Equivalence ratio of two positive coefficients, squared (metric components).
pub(crate) fn ratio2(now: f64, then: f64) -> f64 {
    let r = now / then;
    (r * r).max(1.0 / (r * r))
}
