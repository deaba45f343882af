use serde::{Deserialize, Serialize};

use crate::cover::GoodCover;
use crate::error::Result;
use crate::flow::FlowTrajectory;

/// First time the global `sup|Rm|` reaches twice its initial value.
///
/// Uses the per-step series and interpolates `1/sup|Rm|` linearly between
/// rows, which is exact for homothetically shrinking solutions. `None` when
/// the run never doubles (or is Ricci-flat).
pub fn doubling_time(traj: &FlowTrajectory) -> Option<f64> {
    let rows = &traj.series;
    if traj.snapshots.len() < 2 || rows.len() < 2 {
        return None;
    }
    let k0 = rows[0].sup_rm;
    if !(k0 > 0.0) {
        return None;
    }
    let target = 1.0 / (2.0 * k0);
    let k = rows.iter().position(|r| r.sup_rm >= 2.0 * k0)?;
    if k == 0 {
        return Some(rows[0].t);
    }
    let (a, b) = (&rows[k - 1], &rows[k]);
    let (ua, ub) = (1.0 / a.sup_rm, 1.0 / b.sup_rm);
    if ua == ub {
        return Some(b.t);
    }
    Some(a.t + (b.t - a.t) * (ua - target) / (ua - ub))
}

/// The four families of conditions that define the generalized doubling time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `sup_{B̂_i×[0,T]} |Rm| ≤ 2(1+Γ)K_i`
    RmCap,
    /// `∫₀ᵀ sup_{B̂_i} |Ric| ≤ ½ ln 2`
    RicIntegral,
    /// `∫₀ᵀ sup_{B̂_i} χ|∇Ric| ≤ √K_i`
    DricIntegral,
    /// `∫₀ᵀ sup_{B̂_i} χ²|∇²Ric| ≤ K_i`
    D2ricIntegral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub condition: Condition,
    pub ball: usize,
    pub cap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedDoubling {
    /// Largest `T` satisfying every condition, or the horizon.
    pub time: f64,
    /// First condition and ball to bind; `None` if nothing binds within the horizon.
    pub binding: Option<Binding>,
    pub horizon: f64,
}

/// Generalized doubling time from the per-ball ledger of a trajectory.
///
/// Each recorded quantity is nondecreasing in time, so the binding time of a
/// condition is its first crossing, located by linear interpolation between
/// snapshots. Ties go to the earlier condition, then the lower ball index.
pub fn generalized_doubling_time(traj: &FlowTrajectory, cover: &GoodCover) -> Result<GeneralizedDoubling> {
    let ledger = traj.ledger_for(cover)?;
    let times = &ledger.times;
    let horizon = *times.last().unwrap_or(&0.0);
    let half_ln2 = 0.5 * std::f64::consts::LN_2;
    let tables = [
        (Condition::RmCap, &ledger.sup_rm),
        (Condition::RicIntegral, &ledger.int_ric),
        (Condition::DricIntegral, &ledger.int_dric),
        (Condition::D2ricIntegral, &ledger.int_d2ric),
    ];
    let mut best: Option<(f64, Binding)> = None;
    for (i, ball) in cover.balls.iter().enumerate() {
        let caps = [2.0 * (1.0 + cover.gamma) * ball.k, half_ln2, ball.k.sqrt(), ball.k];
        for ((condition, table), cap) in tables.iter().zip(caps) {
            let Some(k) = (0..times.len()).find(|&k| table[k][i] > cap) else { continue };
            let t = if k == 0 {
                times[0]
            } else {
                let (va, vb) = (table[k - 1][i], table[k][i]);
                times[k - 1] + (times[k] - times[k - 1]) * (cap - va) / (vb - va)
            };
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, Binding { condition: *condition, ball: i, cap }));
            }
        }
    }
    Ok(match best {
        Some((time, b)) => GeneralizedDoubling { time, binding: Some(b), horizon },
        None => GeneralizedDoubling { time: horizon, binding: None, horizon },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    /// `sup max(g(t)/g(0), g(0)/g(t))` over nodes, directions and times up to `until`.
    pub factor: f64,
    /// First time the factor exceeds 2, if it does before `until`.
    pub exceeds_two_at: Option<f64>,
    pub until: f64,
}

/// Equivalence factor over the whole run.
pub fn equivalence_factor(traj: &FlowTrajectory) -> Equivalence {
    equivalence_factor_until(traj, traj.horizon())
}

/// Equivalence factor for `t ≤ until`, interpolating the last partial step.
pub fn equivalence_factor_until(traj: &FlowTrajectory, until: f64) -> Equivalence {
    let rows = &traj.series;
    let mut factor = 1.0f64;
    let mut exceeds_two_at = None;
    let mut last: Option<(f64, f64)> = None;
    for r in rows {
        let (t, e) = if r.t <= until {
            (r.t, r.equivalence)
        } else {
            match last {
                Some((t0, e0)) if r.t > t0 => (until, e0 + (r.equivalence - e0) * (until - t0) / (r.t - t0)),
                _ => break,
            }
        };
        if exceeds_two_at.is_none() && e > 2.0 {
            exceeds_two_at = Some(match last {
                Some((t0, e0)) if e != e0 => t0 + (t - t0) * (2.0 - e0) / (e - e0),
                _ => t,
            });
        }
        factor = factor.max(e);
        if r.t > until {
            break;
        }
        last = Some((t, e));
    }
    Equivalence { factor, exceeds_two_at, until }
}

/// For balls whose cap is attained at `t = 0` (`sup_{B̂_i}|Rm|(0) ≥ (1-tol)K_i`),
/// checks that the running sup stays at least `(2/3)K_i` at every recorded
/// time up to `until`. Returns the offending ball indices.
pub fn unboundedness_preserved(
    traj: &FlowTrajectory,
    cover: &GoodCover,
    until: f64,
    tol: f64,
) -> Result<Vec<usize>> {
    let ledger = traj.ledger_for(cover)?;
    let Some(first) = ledger.sup_rm.first() else { return Ok(Vec::new()) };
    let mut bad = Vec::new();
    for (i, ball) in cover.balls.iter().enumerate() {
        if first[i] < (1.0 - tol) * ball.k {
            continue;
        }
        let ok = ledger
            .times
            .iter()
            .zip(&ledger.sup_rm)
            .filter(|(t, _)| **t <= until)
            .all(|(_, row)| row[i] >= 2.0 / 3.0 * ball.k);
        if !ok {
            bad.push(i);
        }
    }
    Ok(bad)
}
