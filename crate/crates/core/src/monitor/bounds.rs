use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cover::GoodCover;

/// `α = min{ln(4/3)/6, 1/8}` from the proof of the improved estimate.
pub fn proof_alpha() -> f64 {
    ((4.0f64 / 3.0).ln() / 6.0).min(0.125)
}

/// A lower bound on a lifespan; `Infinite` when `A = ∞` or `K = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    Finite(f64),
    Infinite,
}

impl Bound {
    fn of(v: f64) -> Self {
        if v.is_finite() {
            Bound::Finite(v)
        } else {
            Bound::Infinite
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Bound::Finite(v) => v,
            Bound::Infinite => f64::INFINITY,
        }
    }

    /// `self ≤ t` up to a relative rounding slack.
    pub fn holds_below(self, t: f64) -> bool {
        match self {
            Bound::Finite(v) => v <= t * (1.0 + 1e-12),
            Bound::Infinite => t == f64::INFINITY,
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(v) => s.serialize_f64(*v),
            Bound::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Bound::Finite(v)),
            Raw::Str(s) if s == "infinite" => Ok(Bound::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unknown bound {s:?}"))),
        }
    }
}

/// Numeric stand-ins for the implicit constants of the lifespan estimates.
///
/// Defaults: `c(n) = 1/16`, the constant obtained by integrating
/// `∂_t|Rm| ≤ 8|Rm|²` up to the doubling time; `c(n,Γ) = c(n)/(1+Γ)`;
/// `C₁ = … = C₇ = 16`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct LifespanConstants {
    pub c_n: f64,
    /// Overrides `c(n)/(1+Γ)` in the slow-growth bound.
    pub c_n_gamma: Option<f64>,
    pub c: [f64; 7],
}

impl Default for LifespanConstants {
    fn default() -> Self {
        Self { c_n: 1.0 / 16.0, c_n_gamma: None, c: [16.0; 7] }
    }
}

impl LifespanConstants {
    pub fn c_n_gamma(&self, gamma: f64) -> f64 {
        self.c_n_gamma.unwrap_or(self.c_n / (1.0 + gamma))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifespanBounds {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "A")]
    pub a: f64,
    /// `c(n)/K`
    pub hamilton: Bound,
    /// `c(n) max{A, 1/K}`
    pub improved: Bound,
    /// `c(n,Γ)/I · max{A, 1/max K_i}`, when a cover is given.
    pub slow_growth: Option<Bound>,
    /// `αA/((α+1)(C₁+C₇))`
    pub proof_form: Bound,
    pub constants: LifespanConstants,
}

impl LifespanBounds {
    /// Every available bound lies below `t`.
    pub fn all_below(&self, t: f64) -> bool {
        [Some(self.hamilton), Some(self.improved), self.slow_growth, Some(self.proof_form)]
            .into_iter()
            .flatten()
            .all(|b| b.holds_below(t))
    }
}

/// Evaluates the three lifespan lower bounds with the given constants.
/// `a = f64::INFINITY` stands for a Ricci-flat model.
pub fn theoretical_lifespan_bounds(
    n: usize,
    k: f64,
    a: f64,
    cover: Option<&GoodCover>,
    constants: &LifespanConstants,
) -> LifespanBounds {
    let cn = constants.c_n;
    let alpha = proof_alpha();
    let slow_growth = cover.map(|c| {
        let kmax = c.max_k();
        Bound::of(constants.c_n_gamma(c.gamma) / c.intersections.max(1) as f64 * a.max(1.0 / kmax))
    });
    LifespanBounds {
        n,
        k,
        a,
        hamilton: Bound::of(cn / k),
        improved: Bound::of(cn * a.max(1.0 / k)),
        slow_growth,
        proof_form: Bound::of(alpha * a / ((alpha + 1.0) * (constants.c[0] + constants.c[6]))),
        constants: constants.clone(),
    }
}

/// One measured run for constant calibration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRun {
    pub measured: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "A")]
    pub a: f64,
}

/// Largest constants consistent with every measured run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Largest `c` with `c/K ≤ T_d` on every run.
    pub hamilton: f64,
    /// Largest `c` with `c·max{A, 1/K} ≤ T_d` on every run.
    pub improved: f64,
    pub runs: usize,
}

pub fn calibrate(runs: &[CalibrationRun]) -> Calibration {
    let finite = runs.iter().filter(|r| r.measured.is_finite());
    let mut hamilton = f64::INFINITY;
    let mut improved = f64::INFINITY;
    for r in finite {
        hamilton = hamilton.min(r.measured * r.k);
        improved = improved.min(r.measured / r.a.max(1.0 / r.k));
    }
    Calibration { hamilton, improved, runs: runs.len() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HInf {
    pub inf: f64,
    pub argmin: f64,
    /// `αβ/(α+1)`
    pub bound: f64,
}

/// `h(α,β)(s) = ln(αe^{βs} + 1)/s`, evaluated without overflow.
fn h(alpha: f64, beta: f64, s: f64) -> f64 {
    let z = alpha.ln() + beta * s;
    let l = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    l / s
}

/// Numeric infimum of `h(α,β)` over `(0, s_max]`: a log-spaced scan
/// followed by golden-section refinement around the best sample.
pub fn h_inf(alpha: f64, beta: f64, s_max: f64) -> HInf {
    const SAMPLES: usize = 2000;
    let lo = s_max * 1e-9;
    let ratio = (s_max / lo).ln() / (SAMPLES - 1) as f64;
    let grid: Vec<f64> = (0..SAMPLES).map(|i| (lo.ln() + ratio * i as f64).exp().min(s_max)).collect();
    let (mut best, mut arg) = (f64::INFINITY, s_max);
    let mut at = 0;
    for (i, &s) in grid.iter().enumerate() {
        let v = h(alpha, beta, s);
        if v < best {
            (best, arg, at) = (v, s, i);
        }
    }
    let (mut a, mut b) = (grid[at.saturating_sub(1)], grid[(at + 1).min(SAMPLES - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if h(alpha, beta, c) < h(alpha, beta, d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let m = 0.5 * (a + b);
    let v = h(alpha, beta, m);
    if v < best {
        (best, arg) = (v, m);
    }
    HInf { inf: best, argmin: arg, bound: alpha * beta / (alpha + 1.0) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proof_alpha_is_the_logarithmic_candidate() {
        assert!((proof_alpha() - 0.047_947_012_075_296_81).abs() < 1e-15);
    }

    #[test]
    fn h_is_stable_for_large_arguments() {
        assert!((h(1.0, 1.0, 1e6) - 1.0).abs() < 1e-12);
        assert!((h(2.0, 1.0, 1e-3) - (2.0 * 1e-3f64.exp() + 1.0).ln() / 1e-3).abs() < 1e-9);
    }
}
