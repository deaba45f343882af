use serde::{Deserialize, Serialize};

use crate::cover::{BallCutoff, GoodCover, HAT};
use crate::error::{Error, Result};
use crate::flow::{cover_fingerprint, FlowTrajectory};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    /// Exponential rate `Λ` in `e^{ΛK_i t}`.
    pub lambda: f64,
    pub m: usize,
    pub cover_fingerprint: u64,
    /// Only snapshots with `t ≤ horizon` are checked.
    pub horizon: Option<f64>,
}

impl BarrierSpec {
    pub fn new(cover: &GoodCover, m: usize, lambda: f64) -> Self {
        Self { lambda, m, cover_fingerprint: cover_fingerprint(cover), horizon: None }
    }

    pub fn until(self, horizon: f64) -> Self {
        Self { horizon: Some(horizon), ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierResult {
    pub m: usize,
    pub lambda: f64,
    /// `min (Φ_m − |∇^m Ric|²)` over checked snapshots and nodes, at `spec.lambda`.
    pub worst_margin: f64,
    pub worst_node: usize,
    pub worst_time: f64,
    /// Smallest `Λ` on [`lambda_grid`] with a nonnegative worst margin.
    pub max_feasible_lambda: Option<f64>,
    pub snapshots_checked: usize,
}

/// 81 values of `Λ`, logarithmically spaced over `[1e-4, 1e4]`.
pub fn lambda_grid() -> Vec<f64> {
    (0..81).map(|i| 10f64.powf(-4.0 + 0.1 * i as f64)).collect()
}

/// Partition of unity `φ_i = η_i / Σ_j η_j` subordinate to the enlarged
/// balls, where `η_i` is the cutoff of `B(x_i, 16 r_i)` at scale `K_i`.
/// For every node, the balls with `φ_i > 0` and their weights.
pub fn partition_of_unity(cover: &GoodCover, s: &[f64]) -> Result<Vec<Vec<(usize, f64)>>> {
    let bumps = cover
        .balls
        .iter()
        .map(|b| BallCutoff::new(b.center, HAT * b.radius, b.k, cover.rbar))
        .collect::<Result<Vec<_>>>()?;
    Ok(par::map(s, |&x| {
        let mut w: Vec<(usize, f64)> = bumps
            .iter()
            .enumerate()
            .filter(|(_, b)| (x - b.center).abs() < b.support())
            .map(|(i, b)| (i, b.eval(x)[0]))
            .filter(|&(_, v)| v > 0.0)
            .collect();
        let total: f64 = w.iter().map(|p| p.1).sum();
        for p in &mut w {
            p.1 /= total;
        }
        w
    }))
}

struct Sample {
    t: f64,
    node: usize,
    /// `|∇^m Ric|²`
    lhs: f64,
}

fn worst(samples: &[Sample], pou: &[Vec<(usize, f64)>], cover: &GoodCover, m: usize, lambda: f64) -> (f64, usize, f64) {
    let mut out = (f64::INFINITY, 0, 0.0);
    for smp in samples {
        let phi: f64 = pou[smp.node]
            .iter()
            .map(|&(i, w)| {
                let b = &cover.balls[i];
                w * b.k.powi(m as i32) * b.p * b.p * (lambda * b.k * smp.t).exp()
            })
            .sum();
        let margin = phi - smp.lhs;
        if margin < out.0 {
            out = (margin, smp.node, smp.t);
        }
    }
    out
}

/// Checks `|∇^m Ric|² ≤ Φ_m = Σ φ_i K_i^m P_i² e^{ΛK_i t}` on the nodes of
/// the cover's domain at every snapshot up to the horizon, for `spec.lambda`
/// and over [`lambda_grid`].
pub fn barrier_margin(traj: &FlowTrajectory, cover: &GoodCover, spec: &BarrierSpec) -> Result<BarrierResult> {
    if spec.cover_fingerprint != cover_fingerprint(cover) {
        return Err(Error::CoverMismatch);
    }
    traj.ledger_for(cover)?;
    if spec.m > 2 {
        return Err(Error::InvalidArgument(format!("barrier order m = {} exceeds 2", spec.m)));
    }
    if !(spec.lambda > 0.0) {
        return Err(Error::InvalidArgument("barrier rate must be positive".into()));
    }
    let Some((_, f0)) = traj.initial().warped() else {
        return Err(Error::InvalidArgument("barrier margins need a warped trajectory".into()));
    };
    let s0 = &f0.s;
    let pou = partition_of_unity(cover, s0)?;
    let (lo, hi) = cover.domain;
    let nodes: Vec<usize> = (0..s0.len()).filter(|&j| s0[j] >= lo && s0[j] <= hi).collect();
    let until = spec.horizon.unwrap_or(f64::INFINITY);

    let mut samples = Vec::new();
    let mut snapshots_checked = 0;
    for snap in traj.snapshots.iter().filter(|s| s.t <= until) {
        let (_, f) = snap.warped().expect("warped trajectory");
        let v = f.ric_derivative(spec.m);
        samples.extend(nodes.iter().map(|&j| Sample { t: snap.t, node: j, lhs: v[j] * v[j] }));
        snapshots_checked += 1;
    }

    let (worst_margin, worst_node, worst_time) = worst(&samples, &pou, cover, spec.m, spec.lambda);
    let grid = lambda_grid();
    let margins = par::map(&grid, |&l| worst(&samples, &pou, cover, spec.m, l).0);
    let max_feasible_lambda = grid.iter().zip(&margins).find(|(_, m)| **m >= 0.0).map(|(l, _)| *l);
    Ok(BarrierResult {
        m: spec.m,
        lambda: spec.lambda,
        worst_margin,
        worst_node,
        worst_time,
        max_feasible_lambda,
        snapshots_checked,
    })
}
