use super::ledger::{Integrands, LedgerBuilder};
use super::{ratio2, sup, FlowControls, FlowTrajectory, ModelState, SeriesRow, Snapshot, SnapshotCurvature, StopReason};
use crate::cover::{Cutoff, GoodCover};
use crate::error::{Error, Result};
use crate::metric::{geometry, pole_slopes, sectional_curvatures, CurvatureField, WarpedState};

fn chi_squared(state: &WarpedState, chi: Option<&Cutoff>) -> Result<Vec<f64>> {
    match chi {
        None => Ok(vec![1.0; state.len()]),
        Some(c) if c.len() == state.len() => Ok(c.chi.iter().map(|v| v * v).collect()),
        Some(c) => Err(Error::InvalidArgument(format!(
            "cutoff has {} nodes, state has {}",
            c.len(),
            state.len()
        ))),
    }
}

/// Explicit time step `dtSafety·h_s² / (2 max χ² (n-1) max(1, h_s² sup|Rm|))`.
///
/// With `χ ≡ 0` nothing moves and the whole `remaining` interval (scaled by
/// `dtSafety`) is returned.
pub fn stability_dt(
    state: &WarpedState,
    field: &CurvatureField,
    chi: Option<&Cutoff>,
    controls: &FlowControls,
    remaining: f64,
) -> Result<f64> {
    let hs = state.min_arclength_spacing();
    if !(hs > 0.0 && hs.is_finite()) {
        return Err(Error::DegenerateGrid(hs));
    }
    let chi2_max = chi_squared(state, chi)?.into_iter().fold(0.0, f64::max);
    if chi2_max == 0.0 {
        return Ok(controls.dt_safety * remaining);
    }
    let stiffness = (hs * hs * sup(&field.norm_rm)).max(1.0);
    Ok(controls.dt_safety * hs * hs / (2.0 * chi2_max * (state.n - 1) as f64 * stiffness))
}

/// Grid-scale damping rate of the `φ` filter is `64·FILTER/h_s²`.
const FILTER: f64 = 1.0 / 16.0;

/// Sixth-difference filter `FILTER·δ⁶φ/(φh)²`, O(h⁴) on smooth data.
///
/// `φ` enters the reduced system only through first differences, so
/// odd-even modes of `φ` are invisible to the centred stencils and drift
/// unstably next to a pole, where the coefficients grow like `1/ψ`.
/// Poles use even reflection; nodes within three of a truncated end are
/// left unfiltered.
fn phi_filter(state: &WarpedState) -> Vec<f64> {
    const C: [f64; 7] = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];
    let len = state.len() as isize;
    let (lp, rp) = (state.topology.left_pole(), state.topology.right_pole());
    let h = state.h();
    let phi = &state.phi;
    let at = |i: isize| -> Option<f64> {
        if (0..len).contains(&i) {
            Some(phi[i as usize])
        } else if i < 0 && lp {
            Some(phi[(-i) as usize])
        } else if i >= len && rp {
            Some(phi[(2 * (len - 1) - i) as usize])
        } else {
            None
        }
    };
    (0..len)
        .map(|j| {
            let mut acc = 0.0;
            for (k, c) in C.iter().enumerate() {
                match at(j + k as isize - 3) {
                    Some(v) => acc += c * v,
                    None => return 0.0,
                }
            }
            let hs = phi[j as usize] * h;
            FILTER * acc / (hs * hs)
        })
        .collect()
}

/// `(∂φ/∂t, ∂ψ/∂t) = (-χ² a φ, -χ² b ψ)` with `a = Ric(e_s,e_s)` and
/// `b = Ric(e_i,e_i)`, plus the `φ` filter.
fn rates(state: &WarpedState, chi2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let len = state.len();
    let m = (state.n - 1) as f64;
    let (_, k_rad, k_sph) = sectional_curvatures(state);
    let filter = phi_filter(state);
    let mut dphi = vec![0.0; len];
    let mut dpsi = vec![0.0; len];
    for j in 0..len {
        if chi2[j] == 0.0 {
            continue;
        }
        let a = m * k_rad[j];
        let b = k_rad[j] + (m - 1.0) * k_sph[j];
        dphi[j] = chi2[j] * (filter[j] - a * state.phi[j]);
        dpsi[j] = if state.is_pole(j) { 0.0 } else { -chi2[j] * b * state.psi[j] };
    }
    (dphi, dpsi)
}

/// Right-hand side of the semidiscrete system (with `χ` from `chi`).
pub(crate) fn semidiscrete_rates(state: &WarpedState, chi: Option<&Cutoff>) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(rates(state, &chi_squared(state, chi)?))
}

/// Pole regularity rule, applied where `χ > 0`: `φ = |ψ_x|` at the pole
/// (so `|ψ_s| = 1`), and `φ` at the two nearest nodes is replaced by the even
/// continuation `A + Bx² + Cx⁴` through the pole and the nodes 3h and 4h away.
///
/// Evolving these values by their own rates closes a feedback loop through
/// `kRad` and `kSph` at the first interior node with gain `~1/h²`.
fn regularize(state: &mut WarpedState, chi2: &[f64]) {
    // Lagrange weights in z = (d/h)² on the nodes z = 0, 9, 16
    const NEAR: [[f64; 3]; 2] = [
        [120.0 / 144.0, 15.0 / 63.0, -8.0 / 112.0],
        [60.0 / 144.0, 48.0 / 63.0, -20.0 / 112.0],
    ];
    let len = state.len();
    if len < 9 || !(state.is_pole(0) || state.is_pole(len - 1)) {
        return;
    }
    let slopes = pole_slopes(state);
    for ((pole, dir), psi_x) in [(0usize, 1isize), (len - 1, -1)].into_iter().zip(slopes) {
        let Some(psi_x) = psi_x else { continue };
        let node = |d: isize| (pole as isize + dir * d) as usize;
        if chi2[pole] > 0.0 {
            state.phi[pole] = psi_x.abs();
        }
        let (p0, p3, p4) = (state.phi[pole], state.phi[node(3)], state.phi[node(4)]);
        for (d, w) in [1isize, 2].into_iter().zip(NEAR) {
            if chi2[node(d)] > 0.0 {
                state.phi[node(d)] = w[0] * p0 + w[1] * p3 + w[2] * p4;
            }
        }
    }
}

fn shifted(state: &WarpedState, chi2: &[f64], k: &(Vec<f64>, Vec<f64>), c: f64) -> WarpedState {
    let mut s = state.clone();
    for j in 0..s.len() {
        s.phi[j] += c * k.0[j];
        s.psi[j] += c * k.1[j];
    }
    regularize(&mut s, chi2);
    s
}

fn rk4(state: &WarpedState, chi2: &[f64], dt: f64) -> WarpedState {
    let mut out = state.clone();
    out.time = state.time + dt;
    if chi2.iter().all(|&c| c == 0.0) {
        return out;
    }
    let k1 = rates(state, chi2);
    let k2 = rates(&shifted(state, chi2, &k1, 0.5 * dt), chi2);
    let k3 = rates(&shifted(state, chi2, &k2, 0.5 * dt), chi2);
    let k4 = rates(&shifted(state, chi2, &k3, dt), chi2);
    let w = dt / 6.0;
    for j in 0..out.len() {
        out.phi[j] += w * (k1.0[j] + 2.0 * k2.0[j] + 2.0 * k3.0[j] + k4.0[j]);
        out.psi[j] += w * (k1.1[j] + 2.0 * k2.1[j] + 2.0 * k3.1[j] + k4.1[j]);
    }
    regularize(&mut out, chi2);
    out
}

fn blowup_reason(state: &WarpedState) -> Option<String> {
    for j in 0..state.len() {
        let (p, q) = (state.phi[j], state.psi[j]);
        if !p.is_finite() || !q.is_finite() {
            return Some(format!("non-finite metric at node {j}"));
        }
        if p <= 0.0 {
            return Some(format!("phi collapsed at node {j}"));
        }
        if !state.is_pole(j) && q <= 0.0 {
            return Some(format!("neckpinch: psi reached zero at node {j}"));
        }
    }
    None
}

/// One RK4 step of the (local) Ricci flow.
pub fn step(state: &WarpedState, chi: Option<&Cutoff>, dt: f64) -> Result<WarpedState> {
    let chi2 = chi_squared(state, chi)?;
    let next = rk4(state, &chi2, dt);
    match blowup_reason(&next) {
        None => Ok(next),
        Some(reason) => {
            let snap = warped_snapshot(state.clone(), geometry(state)?);
            Err(Error::BlowupDetected {
                time: next.time,
                reason,
                last_good: Box::new(FlowTrajectory {
                    series: vec![series_row(&snap, state)],
                    snapshots: vec![snap],
                    ledger: None,
                    chi: chi.cloned(),
                    stop: StopReason::Horizon,
                    steps: 0,
                    controls: FlowControls::default(),
                }),
            })
        }
    }
}

fn warped_snapshot(state: WarpedState, field: CurvatureField) -> Snapshot {
    Snapshot { t: state.time, state: ModelState::Warped(state), curvature: SnapshotCurvature::Warped(field) }
}

fn series_row(snap: &Snapshot, initial: &WarpedState) -> SeriesRow {
    let [sup_rm, sup_ric, sup_dric, sup_d2ric] = snap.sups();
    let mut equivalence = 1.0f64;
    if let ModelState::Warped(s) = &snap.state {
        for j in 0..s.len() {
            equivalence = equivalence.max(ratio2(s.phi[j], initial.phi[j]));
            if !s.is_pole(j) {
                equivalence = equivalence.max(ratio2(s.psi[j], initial.psi[j]));
            }
        }
    }
    SeriesRow { t: snap.t, sup_rm, sup_ric, sup_dric, sup_d2ric, equivalence }
}

fn integrands<'a>(field: &'a CurvatureField, dric: &'a [f64], d2ric: &'a [f64]) -> Integrands<'a> {
    Integrands::Nodal { rm: &field.norm_rm, ric: &field.norm_ric, dric, d2ric }
}

fn weighted(field: &CurvatureField, chi: &Option<Vec<f64>>) -> (Vec<f64>, Vec<f64>) {
    match chi {
        None => (field.dric().to_vec(), field.d2ric().to_vec()),
        Some(c) => (
            field.dric().iter().zip(c).map(|(v, x)| v * x).collect(),
            field.d2ric().iter().zip(c).map(|(v, x)| v * x * x).collect(),
        ),
    }
}

/// Integrates a warped state until `t_end` or a stop predicate fires.
///
/// With a cover, per-ball sups and integrals are accumulated every step over
/// the enlarged balls, located by the initial arclength.
pub fn run_flow(
    state: &WarpedState,
    chi: Option<&Cutoff>,
    controls: &FlowControls,
    cover: Option<&GoodCover>,
) -> Result<FlowTrajectory> {
    controls.validate()?;
    let chi2 = chi_squared(state, chi)?;
    let chi_vals = chi.map(|c| c.chi.clone());
    let initial = state.clone();
    let f0 = geometry(state)?;
    let mut ledger = cover.map(|c| LedgerBuilder::new(c, Some(&f0.s)));
    let (d1, d2) = weighted(&f0, &chi_vals);
    if let Some(l) = ledger.as_mut() {
        l.start(state.time, &integrands(&f0, &d1, &d2));
    }
    let rm0 = sup(&f0.norm_rm);
    let size0 = sup(&state.psi);
    let first = warped_snapshot(state.clone(), f0);
    let mut traj = FlowTrajectory {
        series: vec![series_row(&first, &initial)],
        snapshots: vec![first],
        ledger: None,
        chi: chi.cloned(),
        stop: StopReason::Horizon,
        steps: 0,
        controls: *controls,
    };

    let mut cur = state.clone();
    let mut field = traj.snapshots[0].warped().unwrap().1.clone();
    let mut next_snap = 1usize;
    let t0 = state.time;
    let end = t0 + controls.t_end;
    loop {
        let t = cur.time;
        if t >= end {
            traj.stop = StopReason::Horizon;
            break;
        }
        if traj.steps >= controls.max_steps {
            traj.stop = StopReason::MaxSteps { time: t };
            break;
        }
        let target = t0 + controls.snapshot_time(next_snap);
        let mut dt = match controls.fixed_dt {
            Some(d) => d,
            None => stability_dt(&cur, &field, chi, controls, end - t)?,
        };
        let landing = t + dt >= target - 1e-12 * target.abs().max(1.0);
        if landing {
            dt = target - t;
        }
        let mut next = rk4(&cur, &chi2, dt);
        if landing {
            next.time = target;
        }
        if let Some(reason) = blowup_reason(&next) {
            traj.ledger = ledger.map(LedgerBuilder::finish);
            return Err(Error::BlowupDetected { time: next.time, reason, last_good: Box::new(traj) });
        }
        field = match geometry(&next) {
            Ok(f) => f,
            Err(e) => {
                traj.ledger = ledger.map(LedgerBuilder::finish);
                return Err(Error::BlowupDetected {
                    time: next.time,
                    reason: e.to_string(),
                    last_good: Box::new(traj),
                });
            }
        };
        traj.steps += 1;
        let (d1, d2) = weighted(&field, &chi_vals);
        if let Some(l) = ledger.as_mut() {
            l.advance(next.time, &integrands(&field, &d1, &d2));
        }
        let size_prev = sup(&cur.psi);
        let snap = warped_snapshot(next.clone(), field.clone());
        let row = series_row(&snap, &initial);
        traj.series.push(row);

        let stop = if controls.stop.doubling && row.sup_rm >= 2.0 * rm0 {
            Some(StopReason::Doubling { time: row.t })
        } else if controls.stop.rm_ratio.is_some_and(|r| row.sup_rm >= r * rm0) {
            Some(StopReason::RmRatio { time: row.t })
        } else if controls.stop.extinction_fraction.is_some_and(|f| sup(&next.psi) <= f * size0) {
            // ψ² shrinks linearly near a round extinction
            let (y0, y1) = (size_prev * size_prev, sup(&next.psi).powi(2));
            let rate = (y0 - y1) / (next.time - cur.time);
            let estimate = if rate > 0.0 { next.time + y1 / rate } else { f64::INFINITY };
            Some(StopReason::ExtinctionProximity { time: row.t, estimate })
        } else {
            None
        };
        if landing || stop.is_some() {
            traj.snapshots.push(snap);
            if let Some(l) = ledger.as_mut() {
                l.record(next.time);
            }
            if landing {
                next_snap += 1;
            }
        }
        cur = next;
        if let Some(s) = stop {
            traj.stop = s;
            break;
        }
    }
    traj.ledger = ledger.map(LedgerBuilder::finish);
    Ok(traj)
}
