use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cover::Cutoff;
use crate::error::{Error, Result};
use crate::flow::{semidiscrete_rates, FlowTrajectory, Snapshot, SnapshotCurvature};
use crate::metric::stencil::Parity;
use crate::metric::{eval_warped_geometry, mean_curvature, WarpedState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ResidualOptions {
    /// Largest snapshot spacing for which `∂_t|Rm|` is differenced.
    pub max_spacing: f64,
    /// Snapshots before this time are not checked. Outside the support of
    /// compactly supported data the solution starts like `e^{-d²/4t}`, which
    /// no fixed snapshot spacing differences accurately near `t = 0`.
    pub t_min: f64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self { max_spacing: 0.05, t_min: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub t: f64,
    /// `max_x (∂_t|Rm| − RHS)`
    pub max_residual: f64,
    /// `max(max_residual, 0)`
    pub max_positive: f64,
    /// `max_x |∂_t|Rm| − D|Rm|[ġ]|`, the mismatch between the differenced
    /// snapshots and the derivative of `|Rm|` along the discrete flow field.
    pub identity: Option<f64>,
    /// `max_x (D|Rm|[ġ] − RHS)`, the residual with the exact rate of the
    /// discrete flow in place of the snapshot difference.
    pub rate_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Whether the cutoff form of the inequality was checked.
    pub local: bool,
    pub rows: Vec<ResidualRow>,
    pub max_residual: f64,
    pub max_positive: f64,
    pub worst_time: f64,
    pub worst_node: usize,
    pub identity_max: Option<f64>,
    /// `identity_max / max |∂_t|Rm||`
    pub identity_relative: Option<f64>,
    pub max_rate_residual: Option<f64>,
}

/// Nodal `|Rm|, |Ric|, |∇Ric|, |∇²Ric|` of a snapshot.
fn norms(s: &Snapshot) -> [Vec<f64>; 4] {
    match &s.curvature {
        SnapshotCurvature::Warped(f) => {
            [f.norm_rm.clone(), f.norm_ric.clone(), f.dric().to_vec(), f.d2ric().to_vec()]
        }
        SnapshotCurvature::Einstein(c) => [vec![c.norm_rm], vec![c.norm_ric], vec![c.norm_dric], vec![c.norm_d2ric]],
    }
}

/// `(χ, |∇χ|, |∇²χ|)` of a cutoff fixed in `x`, measured in the metric of `state`.
fn cutoff_at(chi: &Cutoff, initial: &WarpedState, state: &WarpedState) -> [Vec<f64>; 3] {
    let m = (state.n - 1) as f64;
    let st = state.stencil();
    let phi0_x = st.d1(&initial.phi, Parity::Even);
    let phi_x = st.d1(&state.phi, Parity::Even);
    let hm = mean_curvature(state);
    let len = state.len();
    let mut grad = vec![0.0; len];
    let mut hess = vec![0.0; len];
    for j in 0..len {
        let (p0, p) = (initial.phi[j], state.phi[j]);
        let cx = chi.d1[j] * p0;
        let cxx = chi.d2[j] * p0 * p0 + chi.d1[j] * phi0_x[j];
        let cs = cx / p;
        let css = cxx / (p * p) - cx * phi_x[j] / (p * p * p);
        let tangential = if state.is_pole(j) { css } else { hm[j] * cs };
        grad[j] = cs.abs();
        hess[j] = (css * css + m * tangential * tangential).sqrt();
    }
    [chi.chi.clone(), grad, hess]
}

/// `D|Rm|[ġ]` by a centred difference along the semidiscrete flow field.
fn rm_rate(state: &WarpedState, chi: Option<&Cutoff>) -> Result<Vec<f64>> {
    let (dphi, dpsi) = semidiscrete_rates(state, chi)?;
    let mut scale = 0.0f64;
    for j in 0..state.len() {
        scale = scale.max((dphi[j] / state.phi[j]).abs());
        if !state.is_pole(j) {
            scale = scale.max((dpsi[j] / state.psi[j]).abs());
        }
    }
    if scale == 0.0 {
        return Ok(vec![0.0; state.len()]);
    }
    let delta = 1e-6 / scale;
    let moved = |sign: f64| -> Result<Vec<f64>> {
        let mut s = state.clone();
        for j in 0..s.len() {
            s.phi[j] += sign * delta * dphi[j];
            s.psi[j] += sign * delta * dpsi[j];
        }
        Ok(eval_warped_geometry(&s)?.norm_rm)
    };
    let (up, down) = (moved(1.0)?, moved(-1.0)?);
    Ok(up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * delta)).collect())
}

/// Residuals of the pointwise evolution inequality for `|Rm|`.
///
/// Without a cutoff: `∂_t|Rm| ≤ 6|Rm||Ric| + 4|∇²Ric|`. With one:
/// `∂_t|Rm| ≤ 8(χ|∇²χ| + |∇χ|²)|Ric| + 8χ|∇χ||∇Ric| + 4χ²|∇²Ric| + 4χ²|Rm||Ric|`.
/// `∂_t|Rm|` is differenced across neighbouring snapshots (second order on
/// uneven spacing) and compared with the right side at the middle one.
pub fn evolution_residuals(traj: &FlowTrajectory, opts: &ResidualOptions) -> Result<ResidualReport> {
    let snaps = &traj.snapshots;
    let spacing = snaps.windows(2).map(|w| w[1].t - w[0].t).fold(0.0, f64::max);
    if snaps.len() < 3 {
        return Err(Error::SnapshotsTooSparse { spacing: traj.horizon(), cap: opts.max_spacing });
    }
    if spacing > opts.max_spacing * (1.0 + 1e-9) {
        return Err(Error::SnapshotsTooSparse { spacing, cap: opts.max_spacing });
    }
    let chi = traj.chi.as_ref();
    let initial = snaps[0].warped().map(|(s, _)| s);
    let fields: Vec<[Vec<f64>; 4]> = snaps.iter().map(norms).collect();

    let mut rows = Vec::with_capacity(snaps.len() - 2);
    let mut report = ResidualReport {
        local: chi.is_some(),
        rows: Vec::new(),
        max_residual: f64::NEG_INFINITY,
        max_positive: 0.0,
        worst_time: 0.0,
        worst_node: 0,
        identity_max: None,
        identity_relative: None,
        max_rate_residual: None,
    };
    let mut rate_scale = 0.0f64;
    for k in 1..snaps.len() - 1 {
        if snaps[k].t < opts.t_min {
            continue;
        }
        let (ta, t, tb) = (snaps[k - 1].t, snaps[k].t, snaps[k + 1].t);
        let (h1, h2) = (t - ta, tb - t);
        let [rm, ric, dric, d2ric] = &fields[k];
        let (ra, rb) = (&fields[k - 1][0], &fields[k + 1][0]);
        let dt_rm: Vec<f64> = (0..rm.len())
            .map(|j| (h1 * h1 * rb[j] - h2 * h2 * ra[j] + (h2 * h2 - h1 * h1) * rm[j]) / (h1 * h2 * (h1 + h2)))
            .collect();
        let rhs: Vec<f64> = match (chi, snaps[k].warped(), initial) {
            (Some(c), Some((state, _)), Some(init)) => {
                let [x, gx, hx] = cutoff_at(c, init, state);
                (0..rm.len())
                    .map(|j| {
                        8.0 * (x[j] * hx[j] + gx[j] * gx[j]) * ric[j]
                            + 8.0 * x[j] * gx[j] * dric[j]
                            + 4.0 * x[j] * x[j] * (d2ric[j] + rm[j] * ric[j])
                    })
                    .collect()
            }
            _ => (0..rm.len()).map(|j| 6.0 * rm[j] * ric[j] + 4.0 * d2ric[j]).collect(),
        };
        let mut row =
            ResidualRow { t, max_residual: f64::NEG_INFINITY, max_positive: 0.0, identity: None, rate_residual: None };
        for j in 0..rm.len() {
            let r = dt_rm[j] - rhs[j];
            if r > row.max_residual {
                row.max_residual = r;
            }
            if r > report.max_residual {
                report.max_residual = r;
                report.worst_time = t;
                report.worst_node = j;
            }
        }
        row.max_positive = row.max_residual.max(0.0);
        if let Some((state, _)) = snaps[k].warped() {
            let d = rm_rate(state, chi)?;
            row.identity = Some(d.iter().zip(&dt_rm).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            rate_scale = rate_scale.max(d.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
            row.rate_residual = Some(d.iter().zip(&rhs).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::SnapshotsTooSparse { spacing, cap: opts.max_spacing });
    }
    report.max_positive = report.max_residual.max(0.0);
    report.identity_max = rows.iter().filter_map(|r| r.identity).reduce(f64::max);
    report.identity_relative = report.identity_max.map(|v| if rate_scale > 0.0 { v / rate_scale } else { v });
    report.max_rate_residual = rows.iter().filter_map(|r| r.rate_residual).reduce(f64::max);
    report.rows = rows;
    Ok(report)
}

/// CSV with columns `t,max_residual,max_positive,identity,rate_residual`.
pub fn write_residual_csv(report: &ResidualReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
