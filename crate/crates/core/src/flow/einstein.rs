use super::ledger::{Integrands, LedgerBuilder};
use super::{ratio2, FlowControls, FlowTrajectory, ModelState, SeriesRow, Snapshot, SnapshotCurvature, StopReason};
use crate::cover::GoodCover;
use crate::error::{Error, Result};
use crate::metric::{curvature_of, EinsteinProductState};

/// RK4 step of `dc_k/dt = -2λ_k`.
fn rk4(lambda: &[f64], c: &[f64], dt: f64) -> Vec<f64> {
    c.iter()
        .zip(lambda)
        .map(|(&c, &l)| {
            let f = |_: f64| -2.0 * l;
            let k1 = f(c);
            let k2 = f(c + 0.5 * dt * k1);
            let k3 = f(c + 0.5 * dt * k2);
            let k4 = f(c + dt * k3);
            c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        })
        .collect()
}

/// Integrates the scale ODEs of an Einstein product. Extinction inside a step
/// is located by bisection on the step length.
pub fn run_einstein_flow(
    state: &EinsteinProductState,
    controls: &FlowControls,
    cover: Option<&GoodCover>,
) -> Result<FlowTrajectory> {
    controls.validate()?;
    if state.factors.is_empty() || state.scales.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::InvalidArgument("Einstein product needs positive scales".into()));
    }
    let lambda: Vec<f64> = state.factors.iter().map(|f| f.lambda).collect();
    let c0 = state.scales.clone();
    let snap = |t: f64, c: &[f64]| Snapshot {
        t,
        state: ModelState::Einstein(EinsteinProductState {
            factors: state.factors.clone(),
            scales: c.to_vec(),
            time: t,
        }),
        curvature: SnapshotCurvature::Einstein(curvature_of(&state.factors, c)),
    };
    let row = |s: &Snapshot, c: &[f64]| {
        let [sup_rm, sup_ric, sup_dric, sup_d2ric] = s.sups();
        let equivalence = c.iter().zip(&c0).map(|(&a, &b)| ratio2(a.sqrt(), b.sqrt())).fold(1.0, f64::max);
        SeriesRow { t: s.t, sup_rm, sup_ric, sup_dric, sup_d2ric, equivalence }
    };
    let uniform = |s: &Snapshot| Integrands::Uniform(s.sups());

    // fixed nominal step: a fraction of the fastest collapse time
    let collapse = c0
        .iter()
        .zip(&lambda)
        .filter(|(_, &l)| l > 0.0)
        .map(|(&c, &l)| c / (2.0 * l))
        .fold(f64::INFINITY, f64::min);
    let nominal = controls.fixed_dt.unwrap_or_else(|| {
        controls.dt_safety * if collapse.is_finite() { collapse / 64.0 } else { controls.t_end / 64.0 }
    });

    let first = snap(state.time, &c0);
    let mut ledger = cover.map(|c| LedgerBuilder::new(c, None));
    if let Some(l) = ledger.as_mut() {
        l.start(state.time, &uniform(&first));
    }
    let rm0 = first.sups()[0];
    let size0 = c0.iter().copied().fold(f64::INFINITY, f64::min);
    let mut traj = FlowTrajectory {
        series: vec![row(&first, &c0)],
        snapshots: vec![first],
        ledger: None,
        chi: None,
        stop: StopReason::Horizon,
        steps: 0,
        controls: *controls,
    };
    let t0 = state.time;
    let end = t0 + controls.t_end;
    let mut t = t0;
    let mut c = c0.clone();
    let mut next_snap = 1usize;
    loop {
        if t >= end {
            traj.stop = StopReason::Horizon;
            break;
        }
        if traj.steps >= controls.max_steps {
            traj.stop = StopReason::MaxSteps { time: t };
            break;
        }
        let target = t0 + controls.snapshot_time(next_snap);
        let mut dt = nominal;
        let landing = t + dt >= target - 1e-12 * target.abs().max(1.0);
        if landing {
            dt = target - t;
        }
        let trial = rk4(&lambda, &c, dt);
        if trial.iter().any(|&v| v <= 0.0) {
            // bisect for the first time a scale reaches zero
            let (mut lo, mut hi) = (0.0, dt);
            while hi - lo > 4.0 * f64::EPSILON * (t + hi).abs().max(1.0) {
                let mid = 0.5 * (lo + hi);
                if rk4(&lambda, &c, mid).iter().all(|&v| v > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let time = t + hi;
            if lo > 0.0 {
                c = rk4(&lambda, &c, lo);
                t += lo;
                let s = snap(t, &c);
                traj.series.push(row(&s, &c));
                if let Some(l) = ledger.as_mut() {
                    l.advance(t, &uniform(&s));
                    l.record(t);
                }
                traj.snapshots.push(s);
                traj.steps += 1;
            }
            traj.stop = StopReason::Extinction { time };
            break;
        }
        c = trial;
        t = if landing { target } else { t + dt };
        traj.steps += 1;
        let s = snap(t, &c);
        let r = row(&s, &c);
        traj.series.push(r);
        if let Some(l) = ledger.as_mut() {
            l.advance(t, &uniform(&s));
        }
        let min_c = c.iter().copied().fold(f64::INFINITY, f64::min);
        let stop = if controls.stop.doubling && r.sup_rm >= 2.0 * rm0 {
            Some(StopReason::Doubling { time: t })
        } else if controls.stop.rm_ratio.is_some_and(|q| r.sup_rm >= q * rm0) {
            Some(StopReason::RmRatio { time: t })
        } else if controls.stop.extinction_fraction.is_some_and(|f| min_c <= f * size0) {
            let left = c
                .iter()
                .zip(&lambda)
                .filter(|(_, &l)| l > 0.0)
                .map(|(&c, &l)| c / (2.0 * l))
                .fold(f64::INFINITY, f64::min);
            Some(StopReason::ExtinctionProximity { time: t, estimate: t + left })
        } else {
            None
        };
        if landing || stop.is_some() {
            if let Some(l) = ledger.as_mut() {
                l.record(t);
            }
            traj.snapshots.push(s);
            if landing {
                next_snap += 1;
            }
        }
        if let Some(s) = stop {
            traj.stop = s;
            break;
        }
    }
    traj.ledger = ledger.map(LedgerBuilder::finish);
    Ok(traj)
}
