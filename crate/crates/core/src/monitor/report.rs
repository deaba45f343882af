use serde::{Deserialize, Serialize};

use super::barrier::{barrier_margin, BarrierResult, BarrierSpec};
use super::bounds::{theoretical_lifespan_bounds, LifespanBounds, LifespanConstants};
use super::doubling::{
    doubling_time, equivalence_factor, equivalence_factor_until, generalized_doubling_time, Binding, Equivalence,
    GeneralizedDoubling,
};
use super::residual::{evolution_residuals, ResidualOptions};
use crate::cover::GoodCover;
use crate::error::{Error, Result};
use crate::flow::{FlowTrajectory, ModelState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub horizon: f64,
    pub doubling_time: Option<f64>,
    pub generalized: Option<GeneralizedDoubling>,
    pub equivalence: Equivalence,
    /// Equivalence factor up to the generalized doubling time.
    pub equivalence_within_generalized: Option<Equivalence>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// Every bound lies below the measured doubling time (vacuous if it is never reached).
    pub bounds_hold: bool,
    pub barrier: Vec<BarrierResult>,
    pub residual_max_positive: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub measured: Measured,
    pub bounds: LifespanBounds,
    pub margins: Margins,
    pub binding: Option<Binding>,
}

impl MonitorReport {
    /// Whether any monitored invariant failed.
    pub fn violated(&self) -> bool {
        !self.margins.bounds_hold || self.margins.barrier.iter().any(|b| b.max_feasible_lambda.is_none())
    }
}

/// Spatial dimension of the trajectory's model.
fn dimension(traj: &FlowTrajectory) -> usize {
    match &traj.initial().state {
        ModelState::Warped(w) => w.n,
        ModelState::Einstein(e) => e.dim(),
    }
}

/// Runs every monitor that applies: the ledger-based ones need a cover, the
/// residuals need dense enough snapshots (skipped otherwise), and barrier
/// margins are checked for `m = 0, 1, 2` up to the generalized doubling time
/// on warped runs with a cover.
pub fn monitor_report(
    traj: &FlowTrajectory,
    cover: Option<&GoodCover>,
    a: f64,
    constants: &LifespanConstants,
    residuals: Option<&ResidualOptions>,
) -> Result<MonitorReport> {
    let k = traj.initial().sups()[0];
    let bounds = theoretical_lifespan_bounds(dimension(traj), k, a, cover, constants);
    let td = doubling_time(traj);
    let generalized = cover.map(|c| generalized_doubling_time(traj, c)).transpose()?;
    let mut barrier = Vec::new();
    if let (Some(c), Some(g), Some(_)) = (cover, &generalized, traj.initial().warped()) {
        for m in 0..=2 {
            barrier.push(barrier_margin(traj, c, &BarrierSpec::new(c, m, 1.0).until(g.time))?);
        }
    }
    let residual_max_positive = match residuals.map(|o| evolution_residuals(traj, o)) {
        Some(Ok(r)) => Some(r.max_positive),
        Some(Err(Error::SnapshotsTooSparse { .. })) | None => None,
        Some(Err(e)) => return Err(e),
    };
    Ok(MonitorReport {
        measured: Measured {
            horizon: traj.horizon(),
            doubling_time: td,
            equivalence: equivalence_factor(traj),
            equivalence_within_generalized: generalized.map(|g| equivalence_factor_until(traj, g.time)),
            generalized,
        },
        margins: Margins { bounds_hold: td.is_none_or(|t| bounds.all_below(t)), barrier, residual_max_positive },
        binding: generalized.and_then(|g| g.binding),
        bounds,
    })
}
