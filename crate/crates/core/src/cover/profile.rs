use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{CurvatureField, Topology};

/// What lies beyond an end of a sampled profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    /// The base folds over at a pole; balls are clipped.
    Pole,
    /// Flat continuation; curvature vanishes beyond the end.
    FlatExtension,
    /// No information beyond the end.
    Truncated,
}

/// Sampled curvature norms `[|Rm|, |Ric|, |∇Ric|, |∇²Ric|]` on an arclength grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledProfile {
    pub n: usize,
    pub s: Vec<f64>,
    pub values: [Vec<f64>; 4],
    pub left: EdgeKind,
    pub right: EdgeKind,
}

pub type Sampler = Arc<dyn Fn(f64) -> [f64; 4] + Send + Sync>;

/// Closed-form curvature norms on a (possibly unbounded) interval.
#[derive(Clone)]
pub struct SyntheticProfile {
    pub n: usize,
    pub domain: (f64, f64),
    /// Sampling step for ball sups.
    pub resolution: f64,
    pub sampler: Sampler,
}

impl fmt::Debug for SyntheticProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SyntheticProfile")
            .field("n", &self.n)
            .field("domain", &self.domain)
            .field("resolution", &self.resolution)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum CurvatureProfile {
    Sampled(SampledProfile),
    Synthetic(SyntheticProfile),
}

/// Index of each norm in a profile sample.
pub const RM: usize = 0;
pub const RIC: usize = 1;
pub const DRIC: usize = 2;
pub const D2RIC: usize = 3;

/// Upper bound on samples per ball for synthetic profiles.
const MAX_BALL_SAMPLES: usize = 8192;

impl CurvatureProfile {
    /// Profile of a curvature field, with edges implied by the topology.
    pub fn from_field(field: &CurvatureField, topology: Topology) -> Self {
        let (left, right) = match topology {
            Topology::Sphere => (EdgeKind::Pole, EdgeKind::Pole),
            Topology::Plane => (EdgeKind::Pole, EdgeKind::FlatExtension),
            Topology::Cylinder => (EdgeKind::Truncated, EdgeKind::Truncated),
        };
        CurvatureProfile::Sampled(SampledProfile {
            n: field.n,
            s: field.s.clone(),
            values: [
                field.norm_rm.clone(),
                field.norm_ric.clone(),
                field.dric().to_vec(),
                field.d2ric().to_vec(),
            ],
            left,
            right,
        })
    }

    pub fn synthetic(
        n: usize,
        domain: (f64, f64),
        resolution: f64,
        f: impl Fn(f64) -> [f64; 4] + Send + Sync + 'static,
    ) -> Self {
        CurvatureProfile::Synthetic(SyntheticProfile { n, domain, resolution, sampler: Arc::new(f) })
    }

    pub fn n(&self) -> usize {
        match self {
            CurvatureProfile::Sampled(p) => p.n,
            CurvatureProfile::Synthetic(p) => p.n,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            CurvatureProfile::Sampled(p) => (p.s[0], p.s[p.s.len() - 1]),
            CurvatureProfile::Synthetic(p) => p.domain,
        }
    }

    /// Candidate ball centres in `[a, b]`, ascending.
    pub fn sample_points(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            CurvatureProfile::Sampled(p) => {
                p.s.iter().copied().filter(|&s| s >= a && s <= b).collect()
            }
            CurvatureProfile::Synthetic(p) => {
                let lo = a.max(p.domain.0);
                let hi = b.min(p.domain.1);
                let count = ((hi - lo) / p.resolution).floor() as usize;
                let mut v: Vec<f64> = (0..=count).map(|k| lo + k as f64 * p.resolution).collect();
                if v.last().is_some_and(|&l| l < hi) {
                    v.push(hi);
                }
                v
            }
        }
    }

    /// Pointwise values (linear interpolation between samples).
    pub fn at(&self, s: f64) -> [f64; 4] {
        match self {
            CurvatureProfile::Sampled(p) => p.interpolate(s),
            CurvatureProfile::Synthetic(p) => (p.sampler)(s),
        }
    }

    /// Largest radius for which a ball around `c` stays within available data.
    pub fn max_radius(&self, c: f64) -> f64 {
        match self {
            CurvatureProfile::Sampled(p) => {
                let n = p.s.len();
                let l = if p.left == EdgeKind::Truncated { c - p.s[0] } else { f64::INFINITY };
                let r = if p.right == EdgeKind::Truncated { p.s[n - 1] - c } else { f64::INFINITY };
                l.min(r)
            }
            CurvatureProfile::Synthetic(p) => (c - p.domain.0).min(p.domain.1 - c),
        }
    }

    /// Sup of each norm over the closed interval `[c - r, c + r]`, clipped at
    /// poles and flat extensions.
    pub fn ball_sup(&self, c: f64, r: f64) -> Result<[f64; 4]> {
        match self {
            CurvatureProfile::Sampled(p) => p.ball_sup(c, r),
            CurvatureProfile::Synthetic(p) => {
                let (lo, hi) = (c - r, c + r);
                if lo < p.domain.0 || hi > p.domain.1 {
                    return Err(Error::DomainTooSmall { center: c, radius: r });
                }
                let steps = ((hi - lo) / p.resolution).ceil().clamp(1.0, MAX_BALL_SAMPLES as f64) as usize;
                let mut sup = (p.sampler)(c);
                for k in 0..=steps {
                    let v = (p.sampler)(lo + (hi - lo) * k as f64 / steps as f64);
                    for q in 0..4 {
                        sup[q] = sup[q].max(v[q]);
                    }
                }
                Ok(sup)
            }
        }
    }
}

impl SampledProfile {
    fn interpolate(&self, s: f64) -> [f64; 4] {
        let n = self.s.len();
        if s <= self.s[0] {
            return self.values.each_ref().map(|v| v[0]);
        }
        if s >= self.s[n - 1] {
            return self.values.each_ref().map(|v| v[n - 1]);
        }
        let j = self.s.partition_point(|&x| x <= s) - 1;
        let t = (s - self.s[j]) / (self.s[j + 1] - self.s[j]);
        self.values.each_ref().map(|v| v[j] + t * (v[j + 1] - v[j]))
    }

    fn ball_sup(&self, c: f64, r: f64) -> Result<[f64; 4]> {
        let n = self.s.len();
        let (s0, s1) = (self.s[0], self.s[n - 1]);
        let mut lo = c - r;
        let mut hi = c + r;
        let mut sup = [0.0f64; 4];
        if lo < s0 {
            match self.left {
                EdgeKind::Truncated => return Err(Error::DomainTooSmall { center: c, radius: r }),
                EdgeKind::FlatExtension | EdgeKind::Pole => lo = s0,
            }
        }
        if hi > s1 {
            match self.right {
                EdgeKind::Truncated => return Err(Error::DomainTooSmall { center: c, radius: r }),
                EdgeKind::FlatExtension | EdgeKind::Pole => hi = s1,
            }
        }
        if lo > hi {
            return Ok(sup);
        }
        for end in [lo, hi] {
            let v = self.interpolate(end);
            for q in 0..4 {
                sup[q] = sup[q].max(v[q]);
            }
        }
        let start = self.s.partition_point(|&x| x < lo);
        let stop = self.s.partition_point(|&x| x <= hi);
        for j in start..stop {
            for q in 0..4 {
                sup[q] = sup[q].max(self.values[q][j]);
            }
        }
        Ok(sup)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleOptions {
    /// Cap standing in for "infinite" curvature scale on flat regions.
    pub rho_max: f64,
    /// Relative bisection tolerance.
    pub rel_tol: f64,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        Self { rho_max: 1e6, rel_tol: 1e-12 }
    }
}

fn scale_predicate(n: usize, sup: [f64; 4], rho: f64) -> bool {
    let m = (n - 1) as f64;
    sup[RM] <= rho.powi(-2) && sup[DRIC] <= m * rho.powi(-3) && sup[D2RIC] <= m * rho.powi(-4)
}

/// Second-order curvature scale: the largest `ρ` with `sup_{B(s,ρ)} |Rm| ≤ ρ⁻²`
/// and `sup_{B(s,ρ)} |∇^m Ric| ≤ (n-1)ρ^{-(2+m)}` for `m = 1, 2`.
pub fn curvature_scale(profile: &CurvatureProfile, s: f64, opts: &ScaleOptions) -> Result<f64> {
    let n = profile.n();
    let holds = |rho: f64| -> Result<bool> { Ok(scale_predicate(n, profile.ball_sup(s, rho)?, rho)) };

    let reach = profile.max_radius(s);
    if !(reach > 0.0) {
        return Err(Error::DomainTooSmall { center: s, radius: 0.0 });
    }
    // Bracket the threshold by doubling, never past the available data.
    let mut lo = 0.0;
    let mut hi = 1e-3f64.min(opts.rho_max).min(reach);
    loop {
        if !holds(hi)? {
            break;
        }
        if hi >= opts.rho_max {
            return Ok(opts.rho_max);
        }
        if hi >= reach {
            return Err(Error::DomainTooSmall { center: s, radius: reach });
        }
        lo = hi;
        hi = (hi * 2.0).min(opts.rho_max).min(reach);
    }
    if lo == 0.0 {
        // Shrink until the predicate holds; it always does for small enough ρ.
        let mut r = hi;
        while !holds(r)? {
            hi = r;
            r *= 0.5;
            if r < 1e-300 {
                return Ok(0.0);
            }
        }
        lo = r;
    }
    while hi - lo > opts.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_curvature_scale() {
        let p = CurvatureProfile::synthetic(3, (-1e7, 1e7), 1e-3, |_| [4.0, 0.0, 0.0, 0.0]);
        let rho = curvature_scale(&p, 0.0, &ScaleOptions::default()).unwrap();
        assert!((rho - 0.5).abs() < 1e-10);
    }

    #[test]
    fn flat_profile_hits_the_cap() {
        let p = CurvatureProfile::synthetic(3, (-1e7, 1e7), 1e-3, |_| [0.0; 4]);
        let rho = curvature_scale(&p, 0.0, &ScaleOptions::default()).unwrap();
        assert_eq!(rho, 1e6);
    }

    #[test]
    fn truncated_domain_is_reported() {
        let p = CurvatureProfile::synthetic(3, (-1.0, 1.0), 1e-3, |_| [0.0; 4]);
        assert!(matches!(
            curvature_scale(&p, 0.0, &ScaleOptions::default()),
            Err(Error::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn quadratic_growth_fixed_point() {
        let p = CurvatureProfile::synthetic(3, (-1e7, 1e7), 1e-4, |s: f64| {
            [(1.0 + s.abs()).powi(2), 0.0, 0.0, 0.0]
        });
        let rho = curvature_scale(&p, 0.0, &ScaleOptions::default()).unwrap();
        // (1 + ρ)ρ = 1
        let expected = (5f64.sqrt() - 1.0) / 2.0;
        assert!((rho - expected).abs() < 1e-9, "{rho} vs {expected}");
    }

    #[test]
    fn sampled_sup_clips_at_poles_and_flat_ends() {
        let s: Vec<f64> = (0..11).map(|j| j as f64).collect();
        let v: Vec<f64> = s.iter().map(|x| 10.0 - x).collect();
        let p = CurvatureProfile::Sampled(SampledProfile {
            n: 3,
            s: s.clone(),
            values: [v.clone(), v.clone(), v.clone(), v],
            left: EdgeKind::Pole,
            right: EdgeKind::FlatExtension,
        });
        assert_eq!(p.ball_sup(2.0, 5.0).unwrap()[RM], 10.0);
        assert_eq!(p.ball_sup(9.0, 5.0).unwrap()[RM], 6.0);
        assert_eq!(p.ball_sup(9.5, 1.0).unwrap()[RM], 1.5);
        assert_eq!(p.ball_sup(4.5, 0.25).unwrap()[RM], 5.75);
    }
}
