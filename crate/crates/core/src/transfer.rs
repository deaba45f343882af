//! Spatial decay of curvature along the (local) flow: the Gaussian decay
//! hypothesis on initial data, log-linear fits of `|∇^m Ric|` against
//! `(1+d)²`, and the temporal growth of the metric.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::metric::CurvatureField;

/// Values below this are treated as satisfying any Gaussian bound.
pub const FIT_FLOOR: f64 = 1e-14;
/// Minimum number of usable samples for a fit.
pub const MIN_SAMPLES: usize = 8;

/// Distance `|s - s_p|` to the base node in the initial arclength.
fn distances(s: &[f64], p: usize) -> Vec<f64> {
    s.iter().map(|&x| (x - s[p]).abs()).collect()
}

fn outside(s: f64, omega0: (f64, f64)) -> bool {
    s < omega0.0 || s > omega0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    /// `"ric"`, `"dric"`, `"d2ric"` or `"rm"`.
    pub quantity: String,
    pub passed: bool,
    /// `min (bound − value)` over checked nodes.
    pub margin: f64,
    /// `max value/bound`; 0 when the quantity vanishes outside `Ω₀`.
    pub worst_ratio: f64,
    /// Node attaining the margin.
    pub worst_node: Option<usize>,
    pub worst_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub alpha: f64,
    pub base_node: usize,
    pub omega0: (f64, f64),
    pub nodes_checked: usize,
    pub checks: Vec<HypothesisCheck>,
    pub passed: bool,
}

/// Checks `|∇^m Ric| ≤ (1+d)^{2+m} e^{-α(1+d)²}` for `m = 0, 1, 2` and
/// `|Rm| ≤ (1+d)²` at every node of `field` outside `Ω₀` (an `s`-interval).
/// Equality passes; a relative slack of `1e-12` absorbs rounding. Values
/// below [`FIT_FLOOR`] satisfy any bound and are left out of the margin, so
/// a quantity vanishing outside `Ω₀` has infinite margin.
pub fn check_decay_hypothesis(field: &CurvatureField, omega0: (f64, f64), alpha: f64, p: usize) -> HypothesisReport {
    let d = distances(&field.s, p);
    let nodes: Vec<usize> = (0..field.len()).filter(|&j| outside(field.s[j], omega0)).collect();
    let mut checks = Vec::new();
    let quantities: [(&str, &[f64], Box<dyn Fn(f64) -> f64>); 4] = [
        ("ric", &field.norm_ric, Box::new(move |r: f64| r.powi(2) * (-alpha * r * r).exp())),
        ("dric", field.dric(), Box::new(move |r: f64| r.powi(3) * (-alpha * r * r).exp())),
        ("d2ric", field.d2ric(), Box::new(move |r: f64| r.powi(4) * (-alpha * r * r).exp())),
        ("rm", &field.norm_rm, Box::new(|r: f64| r * r)),
    ];
    for (name, values, bound) in quantities {
        let mut c = HypothesisCheck {
            quantity: name.into(),
            passed: true,
            margin: f64::INFINITY,
            worst_ratio: 0.0,
            worst_node: None,
            worst_distance: None,
        };
        for &j in &nodes {
            let b = bound(1.0 + d[j]);
            let v = values[j];
            if v < FIT_FLOOR {
                continue;
            }
            if v > b * (1.0 + 1e-12) {
                c.passed = false;
            }
            if b - v < c.margin {
                c.margin = b - v;
                c.worst_node = Some(j);
                c.worst_distance = Some(d[j]);
            }
            if b > 0.0 {
                c.worst_ratio = c.worst_ratio.max(v / b);
            } else if v > 0.0 {
                c.worst_ratio = f64::INFINITY;
            }
        }
        checks.push(c);
    }
    HypothesisReport {
        alpha,
        base_node: p,
        omega0,
        nodes_checked: nodes.len(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Derivative order, or `None` for the temporal growth profile.
    pub m: Option<usize>,
    pub c1: f64,
    /// Decay rate, in length⁻².
    pub c2: f64,
    pub r2: f64,
    pub d_range: (f64, f64),
    pub samples: usize,
    /// Samples in range dropped by the floor rule.
    pub below_floor: usize,
}

impl DecayFit {
    /// `C₁ (1+d)^{2+m} e^{-C₂(1+d)²}` (without the power for growth fits).
    pub fn eval(&self, d: f64) -> f64 {
        let r = 1.0 + d;
        let power = self.m.map_or(0, |m| 2 + m as i32);
        self.c1 * r.powi(power) * (-self.c2 * r * r).exp()
    }
}

/// Least-squares fit of `ln(v/(1+d)^{2+m})` (or `ln v` when `m` is `None`)
/// against `(1+d)²` over samples with `d` in `range` and `v` above
/// [`FIT_FLOOR`]; slope `-C₂`, intercept `ln C₁`.
pub fn fit_decay_samples(d: &[f64], v: &[f64], m: Option<usize>, range: (f64, f64)) -> Result<DecayFit> {
    let power = m.map_or(0, |m| 2 + m as i32);
    let in_range: Vec<usize> = (0..d.len()).filter(|&j| d[j] >= range.0 && d[j] <= range.1).collect();
    if in_range.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_SAMPLES, got: in_range.len() });
    }
    let usable: Vec<usize> = in_range.iter().copied().filter(|&j| v[j] > FIT_FLOOR).collect();
    if usable.is_empty() {
        return Err(Error::AllBelowFloor);
    }
    if usable.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_SAMPLES, got: usable.len() });
    }
    let pts: Vec<(f64, f64)> = usable
        .iter()
        .map(|&j| {
            let r = 1.0 + d[j];
            (r * r, (v[j] / r.powi(power)).ln())
        })
        .collect();
    let nf = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit samples share one distance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(DecayFit {
        m,
        c1: intercept.exp(),
        c2: -slope,
        r2,
        d_range: range,
        samples: usable.len(),
        below_floor: in_range.len() - usable.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    /// Excluded near region, an interval of initial arclength.
    pub omega0: (f64, f64),
    pub base_node: usize,
    /// Fitting range of `d`; defaults to everything.
    pub d_range: Option<(f64, f64)>,
}

impl DecayOptions {
    fn range(&self) -> (f64, f64) {
        self.d_range.unwrap_or((0.0, f64::INFINITY))
    }
}

fn initial_s(traj: &FlowTrajectory) -> Result<&[f64]> {
    traj.initial()
        .warped()
        .map(|(_, f)| f.s.as_slice())
        .ok_or_else(|| Error::InvalidArgument("transfer-rate analysis needs a warped trajectory".into()))
}

/// `|∇^m Ric|` at time `t`, interpolated linearly between snapshots.
fn ric_derivative_at(traj: &FlowTrajectory, m: usize, t: f64) -> Result<Vec<f64>> {
    let snaps = &traj.snapshots;
    let tol = 1e-12 * t.abs().max(1.0);
    let field = |k: usize| snaps[k].warped().map(|(_, f)| f.ric_derivative(m)).expect("warped snapshots");
    if let Some(k) = snaps.iter().position(|s| (s.t - t).abs() <= tol) {
        return Ok(field(k).to_vec());
    }
    let k = snaps.partition_point(|s| s.t < t);
    if k == 0 || k == snaps.len() {
        return Err(Error::InvalidArgument(format!("t = {t} lies outside the recorded snapshots")));
    }
    let (a, b) = (field(k - 1), field(k));
    let w = (t - snaps[k - 1].t) / (snaps[k].t - snaps[k - 1].t);
    Ok(a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect())
}

/// Fits the Gaussian decay of `|∇^m Ric|` at time `t` over nodes outside `Ω₀`.
pub fn fit_gaussian_decay(traj: &FlowTrajectory, opts: &DecayOptions, m: usize, t: f64) -> Result<DecayFit> {
    if m > 2 {
        return Err(Error::InvalidArgument(format!("derivative order m = {m} exceeds 2")));
    }
    let s = initial_s(traj)?;
    if opts.base_node >= s.len() {
        return Err(Error::InvalidArgument("base node out of range".into()));
    }
    let v = ric_derivative_at(traj, m, t)?;
    let d = distances(s, opts.base_node);
    let keep: Vec<usize> = (0..s.len()).filter(|&j| outside(s[j], opts.omega0)).collect();
    let dk: Vec<f64> = keep.iter().map(|&j| d[j]).collect();
    let vk: Vec<f64> = keep.iter().map(|&j| v[j]).collect();
    fit_decay_samples(&dk, &vk, Some(m), opts.range())
}

/// Largest snapshot time `T` such that the fit at every snapshot in `(0, T]`
/// has `C₂ > 0` and `R² ≥ r2_min` (vacuous fits count as holding).
pub fn decay_horizon(traj: &FlowTrajectory, opts: &DecayOptions, m: usize, r2_min: f64) -> Result<Option<f64>> {
    let mut horizon = None;
    for snap in traj.snapshots.iter().skip(1) {
        let holds = match fit_gaussian_decay(traj, opts, m, snap.t) {
            Ok(f) => f.c2 > 0.0 && f.r2 >= r2_min,
            Err(Error::AllBelowFloor) => true,
            Err(Error::InsufficientSamples { .. }) => false,
            Err(e) => return Err(e),
        };
        if !holds {
            break;
        }
        horizon = Some(snap.t);
    }
    Ok(horizon)
}

/// Outcome of a fit that may be vacuous or impossible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum FitOutcome {
    Fitted(DecayFit),
    /// Every sample is below the floor: any Gaussian bound holds.
    Vacuous,
    Rejected { reason: String },
}

impl FitOutcome {
    fn from(r: Result<DecayFit>) -> Result<Self> {
        match r {
            Ok(f) => Ok(FitOutcome::Fitted(f)),
            Err(Error::AllBelowFloor) => Ok(FitOutcome::Vacuous),
            Err(e @ Error::InsufficientSamples { .. }) => Ok(FitOutcome::Rejected { reason: e.to_string() }),
            Err(e) => Err(e),
        }
    }

    pub fn fit(&self) -> Option<&DecayFit> {
        match self {
            FitOutcome::Fitted(f) => Some(f),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthProfile {
    pub base_node: usize,
    pub d: Vec<f64>,
    /// `G(x) = sup_t max(|ln φ(t)/φ(0)|, |ln ψ(t)/ψ(0)|)`
    pub g: Vec<f64>,
    /// `sup_t ||Rm|(x,t) − |Rm|(x,0)|`
    pub rm_change: Vec<f64>,
    /// Fit of `ln G` against `(1+d)²` outside `Ω₀`.
    pub fit: FitOutcome,
}

/// Temporal growth of the metric at each node, with its Gaussian fit.
/// Pole nodes, where `ψ = 0`, use the `φ` ratio only.
pub fn temporal_growth_profile(traj: &FlowTrajectory, opts: &DecayOptions) -> Result<GrowthProfile> {
    let s = initial_s(traj)?;
    if opts.base_node >= s.len() {
        return Err(Error::InvalidArgument("base node out of range".into()));
    }
    let (w0, f0) = traj.initial().warped().expect("checked above");
    let len = s.len();
    let mut g = vec![0.0f64; len];
    let mut rm_change = vec![0.0f64; len];
    for snap in &traj.snapshots {
        let (w, f) = snap.warped().expect("warped snapshots");
        for j in 0..len {
            let mut v = (w.phi[j] / w0.phi[j]).ln().abs();
            if !w0.is_pole(j) {
                v = v.max((w.psi[j] / w0.psi[j]).ln().abs());
            }
            g[j] = g[j].max(v);
            rm_change[j] = rm_change[j].max((f.norm_rm[j] - f0.norm_rm[j]).abs());
        }
    }
    let d = distances(s, opts.base_node);
    let keep: Vec<usize> = (0..len).filter(|&j| outside(s[j], opts.omega0)).collect();
    let dk: Vec<f64> = keep.iter().map(|&j| d[j]).collect();
    let gk: Vec<f64> = keep.iter().map(|&j| g[j]).collect();
    let fit = FitOutcome::from(fit_decay_samples(&dk, &gk, None, opts.range()))?;
    Ok(GrowthProfile { base_node: opts.base_node, d, g, rm_change, fit })
}

/// CSV of `(d, value, fitted)` triples for plotting; `fitted` is empty
/// without a fit.
pub fn write_fit_csv(path: &Path, d: &[f64], values: &[f64], fit: Option<&DecayFit>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["d", "value", "fitted"])?;
    for (x, v) in d.iter().zip(values) {
        let fitted = fit.map_or(String::new(), |f| f.eval(*x).to_string());
        w.write_record([x.to_string(), v.to_string(), fitted])?;
    }
    w.flush()?;
    Ok(())
}
