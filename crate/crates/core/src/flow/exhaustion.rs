use serde::{Deserialize, Serialize};

use super::{run_flow, FlowControls, ModelState};
use crate::cover::{build_chi, GoodCover, Regions};
use crate::error::{Error, Result};
use crate::metric::WarpedState;
use crate::par::{self, Execution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionReport {
    pub regions: Vec<Regions>,
    pub probe_nodes: Vec<usize>,
    /// Snapshot times shared by all runs.
    pub times: Vec<f64>,
    /// `δ_j`: sup over probes and shared times of the largest difference of
    /// `φ` or `ψ` between run `j` and the last run, for `j < J`.
    pub deltas: Vec<f64>,
    pub nonincreasing: bool,
    pub note: String,
}

/// Runs the local flow once per nested region and compares every run with the
/// largest one on a probe set.
pub fn run_exhaustion(
    state: &WarpedState,
    cover: &GoodCover,
    regions: &[Regions],
    controls: &FlowControls,
    probe_nodes: &[usize],
    exec: Execution,
) -> Result<ExhaustionReport> {
    if regions.len() < 2 {
        return Err(Error::InvalidArgument("exhaustion needs at least two regions".into()));
    }
    let within = |a: (f64, f64), b: (f64, f64)| b.0 <= a.0 && a.1 <= b.1;
    for w in regions.windows(2) {
        if !(within(w[0].omega, w[1].omega) && within(w[0].omega_hat, w[1].omega_hat)) {
            return Err(Error::InvalidArgument(format!("regions are not nested: {:?}, {:?}", w[0], w[1])));
        }
    }
    if probe_nodes.iter().any(|&j| j >= state.len()) {
        return Err(Error::InvalidArgument("probe node out of range".into()));
    }
    let s = state.arclength();
    let idx: Vec<usize> = (0..regions.len()).collect();
    let runs = par::map_with(exec, &idx, |&j| {
        let tag = |e: Error| Error::ExhaustionRun { index: j, source: Box::new(e) };
        let chi = build_chi(cover, &regions[j], &s).map_err(tag)?;
        run_flow(state, Some(&chi), controls, None).map_err(tag)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let reference = runs.last().unwrap();
    let mut times = reference.snapshot_times();
    for r in &runs {
        let ts = r.snapshot_times();
        times.retain(|t| ts.contains(t));
    }
    let at = |run: &super::FlowTrajectory, t: f64| -> WarpedState {
        let snap = run.snapshots.iter().find(|s| s.t == t).expect("shared time");
        match &snap.state {
            ModelState::Warped(w) => w.clone(),
            ModelState::Einstein(_) => unreachable!("exhaustion runs warped states"),
        }
    };
    let mut deltas = Vec::with_capacity(runs.len() - 1);
    for run in &runs[..runs.len() - 1] {
        let mut d = 0.0f64;
        for &t in &times {
            let (a, b) = (at(run, t), at(reference, t));
            for &j in probe_nodes {
                d = d.max((a.phi[j] - b.phi[j]).abs()).max((a.psi[j] - b.psi[j]).abs());
            }
        }
        deltas.push(d);
    }
    let nonincreasing = deltas.windows(2).all(|w| w[1] <= w[0]);
    Ok(ExhaustionReport {
        regions: regions.to_vec(),
        probe_nodes: probe_nodes.to_vec(),
        times,
        deltas,
        nonincreasing,
        note: "Cauchy comparison against the largest region: a numerical check of the exhaustion limit, not a convergence proof".into(),
    })
}
