use serde::{Deserialize, Serialize};

use super::profile::{curvature_scale, CurvatureProfile, EdgeKind, ScaleOptions, D2RIC, DRIC, RIC, RM};
use crate::error::{Error, Result};
use crate::par;

/// Enlargement factor of the balls `B̂_i = B(x_i, 16 r_i)`.
pub const HAT: f64 = 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    /// Radii from the curvature scale, `r = min(ρ/16, 1)`.
    Existence,
    /// Radii from the distance to a base point, `K = 64 r̄²(1+d)²`.
    Transfer,
}

/// Which form of the per-ball constants `P_i` (and adjacency bound) applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `P_i = (n-1) K_i e^{A(K̄-K_i)}`, `K_j ≤ K_i + Γ`.
    Assumption1,
    /// `P_i = (n-1) K_i e^{-A K_i}`, `K_j ≤ K_i + Γ min(1/A, 1)`.
    Assumption2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverParams {
    pub recipe: Recipe,
    pub variant: Variant,
    pub rbar: f64,
    /// Decay rate `α` of the Ricci hypothesis.
    pub alpha: f64,
    /// Overrides the recipe's `K̄`.
    pub kbar: Option<f64>,
    /// Base point `p` (arclength) for the transfer recipe.
    pub base_point: f64,
    pub scale: ScaleOptions,
}

impl Default for CoverParams {
    fn default() -> Self {
        Self {
            recipe: Recipe::Existence,
            variant: Variant::Assumption1,
            rbar: 1.0,
            alpha: 1.0,
            kbar: None,
            base_point: 0.0,
            scale: ScaleOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: f64,
    pub radius: f64,
    pub k: f64,
    pub p: f64,
    /// Curvature scale at the centre (existence recipe only).
    pub rho: Option<f64>,
}

impl Ball {
    pub fn hat_radius(&self) -> f64 {
        HAT * self.radius
    }

    pub fn contains(&self, s: f64) -> bool {
        (s - self.center).abs() <= self.radius
    }

    pub fn hat_contains(&self, s: f64) -> bool {
        (s - self.center).abs() <= self.hat_radius()
    }
}

/// Constants of the initial-data hypothesis inferred from a profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodCover {
    pub n: usize,
    pub recipe: Recipe,
    pub variant: Variant,
    pub domain: (f64, f64),
    pub rbar: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "Kbar")]
    pub kbar: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "I")]
    pub intersections: usize,
    /// Ratio `r_i / (radius of the disjoint shrunken ball)`.
    pub shrink: f64,
    /// Poles of the base, where enlarged balls fold over and are clipped.
    pub poles: (Option<f64>, Option<f64>),
    pub hypothesis: Option<Hypothesis>,
    pub balls: Vec<Ball>,
}

pub fn p_value(variant: Variant, n: usize, k: f64, a: f64, kbar: f64) -> f64 {
    let m = (n - 1) as f64;
    match variant {
        Variant::Assumption1 => m * k * (a * (kbar - k)).exp(),
        Variant::Assumption2 => m * k * (-a * k).exp(),
    }
}

impl GoodCover {
    /// `B̂_i` as a closed interval, clipped at poles.
    pub fn hat_interval(&self, i: usize) -> (f64, f64) {
        let b = &self.balls[i];
        let mut lo = b.center - b.hat_radius();
        let mut hi = b.center + b.hat_radius();
        if let Some(p) = self.poles.0 {
            lo = lo.max(p);
        }
        if let Some(p) = self.poles.1 {
            hi = hi.min(p);
        }
        (lo, hi)
    }

    pub fn hats_meet(&self, i: usize, j: usize) -> bool {
        let (a0, a1) = self.hat_interval(i);
        let (b0, b1) = self.hat_interval(j);
        a0 <= b1 && b0 <= a1
    }

    /// The cover by one ball `B_1 = M` with cap `k`, for homogeneous models
    /// or bookkeeping that should not split the manifold.
    pub fn single_ball(n: usize, domain: (f64, f64), k: f64, poles: (Option<f64>, Option<f64>)) -> Self {
        let center = 0.5 * (domain.0 + domain.1);
        let radius = 0.5 * (domain.1 - domain.0);
        Self {
            n,
            recipe: Recipe::Existence,
            variant: Variant::Assumption2,
            domain,
            rbar: 1.0,
            a: 0.0,
            kbar: 0.0,
            gamma: 0.0,
            intersections: 1,
            shrink: 1.0,
            poles,
            hypothesis: None,
            balls: vec![Ball { center, radius, k, p: p_value(Variant::Assumption2, n, k, 0.0, 0.0), rho: None }],
        }
    }

    /// Uniform Ricci bound `(n-1) A⁻¹ e^{AK̄-1}` implied by the cover.
    pub fn uniform_ricci_bound(&self) -> f64 {
        (self.n - 1) as f64 / self.a * (self.a * self.kbar - 1.0).exp()
    }

    pub fn max_k(&self) -> f64 {
        self.balls.iter().map(|b| b.k).fold(0.0, f64::max)
    }

    /// Recomputes every `P_i` for the current `A`, `K̄` and variant.
    pub fn refresh_p(&mut self) {
        let (v, n, a, kbar) = (self.variant, self.n, self.a, self.kbar);
        for b in &mut self.balls {
            b.p = p_value(v, n, b.k, a, kbar);
        }
    }

    /// Smallest `K̄ ≥ 0` for which item (c) of the first assumption holds.
    pub fn fit_kbar(&mut self, profile: &CurvatureProfile) -> Result<f64> {
        let m = (self.n - 1) as f64;
        let a = self.a;
        let needs = par::try_map(&self.balls, |b| -> Result<f64> {
            let sup = profile.ball_sup_clipped(b.center, b.hat_radius())?;
            let mut need = 0.0f64;
            for (order, q) in [(0, RIC), (1, DRIC), (2, D2RIC)] {
                let bound = b.k.powf(order as f64 / 2.0) * m * b.k * (-a * b.k).exp();
                if sup[q] > 0.0 {
                    need = need.max((sup[q] / bound).ln() / a);
                }
            }
            Ok(need)
        })?;
        self.kbar = needs.into_iter().fold(0.0, f64::max);
        self.refresh_p();
        Ok(self.kbar)
    }
}

impl CurvatureProfile {
    /// `ball_sup` that tolerates balls leaving a truncated domain by clipping
    /// to the data; used where the ball is a bookkeeping device, not a scale test.
    pub fn ball_sup_clipped(&self, c: f64, r: f64) -> Result<[f64; 4]> {
        let reach = self.max_radius(c);
        self.ball_sup(c, r.min(reach))
    }

    fn poles(&self) -> (Option<f64>, Option<f64>) {
        match self {
            CurvatureProfile::Sampled(p) => (
                (p.left == EdgeKind::Pole).then(|| p.s[0]),
                (p.right == EdgeKind::Pole).then(|| p.s[p.s.len() - 1]),
            ),
            CurvatureProfile::Synthetic(_) => (None, None),
        }
    }
}

/// Max number of closed intervals sharing a common point (sweep over endpoints).
pub fn max_overlap(intervals: &[(f64, f64)]) -> usize {
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * intervals.len());
    for &(a, b) in intervals {
        events.push((a, 1));
        events.push((b, -1));
    }
    // openings before closings at equal coordinates: touching intervals meet
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
    let mut cur = 0i32;
    let mut best = 0i32;
    for (_, d) in events {
        cur += d;
        best = best.max(cur);
    }
    best as usize
}

/// First point of `[a, b]` not covered by the given closed intervals.
pub fn first_uncovered(intervals: &[(f64, f64)], a: f64, b: f64) -> Option<f64> {
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut reach = a;
    let mut covered_a = false;
    for (lo, hi) in sorted {
        if lo > reach && (covered_a || lo > a) {
            return Some(reach);
        }
        if hi >= reach {
            reach = hi;
            covered_a = true;
        }
        if reach >= b && covered_a {
            return None;
        }
    }
    Some(reach)
}

/// Hypothesis constants `β` and `γ` for the given `α` from curvature scales
/// sampled at `points`.
fn infer_hypothesis(
    profile: &CurvatureProfile,
    points: &[f64],
    rho: &[f64],
    alpha: f64,
) -> Hypothesis {
    let m = (profile.n() - 1) as f64;
    let beta_parts = par::map(&(0..points.len()).collect::<Vec<_>>(), |&i| {
        let v = profile.at(points[i]);
        let mut b = f64::NEG_INFINITY;
        for (order, q) in [(0i32, RIC), (1, DRIC), (2, D2RIC)] {
            if v[q] > 0.0 {
                b = b.max((v[q] * rho[i].powi(2 + order) / m).ln() + alpha / (rho[i] * rho[i]));
            }
        }
        b
    });
    let beta = beta_parts.into_iter().fold(0.0, f64::max);
    let rho_max = rho.iter().copied().fold(0.0, f64::max);
    let gamma_parts = par::map(&(0..points.len()).collect::<Vec<_>>(), |&i| {
        let mut g = 0.0f64;
        // points are ascending, so only a window of width ρ_i + max ρ can pair with i
        let lo = points.partition_point(|&y| y <= points[i] - rho[i] - rho_max);
        let hi = points.partition_point(|&y| y < points[i] + rho[i] + rho_max);
        for j in lo..hi {
            if (points[i] - points[j]).abs() < rho[i] + rho[j] {
                g = g.max((rho[i].powi(-2) - rho[j].powi(-2)).abs());
            }
        }
        g
    });
    let gamma = gamma_parts.into_iter().fold(0.0, f64::max);
    Hypothesis { alpha, beta, gamma }
}

/// Greedy left-to-right maximal set of points whose shrunken balls
/// `B(x, r_x/shrink)` are pairwise disjoint.
fn greedy_centers(points: &[f64], radius: &[f64], shrink: f64) -> Vec<usize> {
    let mut chosen = Vec::new();
    let mut reach = f64::NEG_INFINITY;
    for (i, (&x, &r)) in points.iter().zip(radius).enumerate() {
        let rs = r / shrink;
        if x - rs >= reach {
            chosen.push(i);
            reach = x + rs;
        }
    }
    chosen
}

struct Radii {
    radius: Vec<f64>,
    rho: Option<Vec<f64>>,
    hypothesis: Option<Hypothesis>,
    shrink: f64,
}

fn radii(profile: &CurvatureProfile, points: &[f64], params: &CoverParams) -> Result<Radii> {
    match params.recipe {
        Recipe::Existence => {
            let rho = par::try_map(points, |&x| curvature_scale(profile, x, &params.scale))?;
            let hyp = infer_hypothesis(profile, points, &rho, params.alpha);
            Ok(Radii {
                radius: rho.iter().map(|r| (r / HAT).min(1.0)).collect(),
                rho: Some(rho),
                shrink: 17.0 * (1.0 + hyp.gamma).sqrt(),
                hypothesis: Some(hyp),
            })
        }
        Recipe::Transfer => Ok(Radii {
            radius: points.iter().map(|&x| 1.0 / (8.0 * (1.0 + (x - params.base_point).abs()))).collect(),
            rho: None,
            hypothesis: None,
            shrink: 3.0,
        }),
    }
}

/// Inserts candidates between samples whose spacing exceeds a shrunken radius.
fn refine(points: &[f64], radius: &[f64], shrink: f64) -> Vec<f64> {
    const MAX_SPLIT: f64 = 4096.0;
    let mut out = Vec::with_capacity(points.len());
    for j in 0..points.len() {
        out.push(points[j]);
        if j + 1 == points.len() {
            break;
        }
        let gap = points[j + 1] - points[j];
        let m = (gap * shrink / radius[j].min(radius[j + 1])).ceil().clamp(1.0, MAX_SPLIT) as usize;
        out.extend((1..m).map(|k| points[j] + gap * k as f64 / m as f64));
    }
    out
}

/// Good cover of `domain` following one of the two constructive recipes.
///
/// Candidate centres are the profile's sample points, refined where the
/// samples are coarser than the shrunken balls.
pub fn build_cover(
    profile: &CurvatureProfile,
    domain: (f64, f64),
    params: &CoverParams,
) -> Result<GoodCover> {
    let (a, b) = domain;
    if !(a <= b) {
        return Err(Error::InvalidArgument(format!("bad cover domain [{a}, {b}]")));
    }
    let n = profile.n();
    let mut points = profile.sample_points(a, b);
    if points.is_empty() {
        return Err(Error::CoverageFailure { uncovered: a });
    }
    let mut sc = radii(profile, &points, params)?;
    let fine = refine(&points, &sc.radius, sc.shrink);
    if fine.len() > points.len() {
        points = fine;
        sc = radii(profile, &points, params)?;
    }

    let rbar = params.rbar;
    let (a_const, kbar, gamma) = match (params.recipe, sc.hypothesis) {
        (Recipe::Existence, Some(h)) => {
            let a_const = params.alpha / (1024.0 * (1.0 + h.gamma) * rbar * rbar);
            let kbar = params.kbar.unwrap_or((h.beta / a_const).max(params.alpha / (4.0 * a_const)));
            (a_const, kbar, 256.0 * (1.0 + h.gamma) * h.gamma * rbar * rbar)
        }
        _ => (
            params.alpha / (2000.0 * rbar * rbar),
            params.kbar.unwrap_or(0.0),
            (16.0 * (2.0 + 2f64.sqrt()).powi(15) + 1024.0) * rbar * rbar,
        ),
    };
    let k_of = |x: f64, r: f64| match sc.hypothesis {
        Some(h) => ((1.0 + h.gamma) * rbar * rbar / (r * r)).max(1.0),
        None => 64.0 * rbar * rbar * (1.0 + (x - params.base_point).abs()).powi(2),
    };

    let chosen = greedy_centers(&points, &sc.radius, sc.shrink);
    let balls: Vec<Ball> = chosen
        .iter()
        .map(|&i| {
            let k = k_of(points[i], sc.radius[i]);
            let radius = match params.recipe {
                Recipe::Existence => sc.radius[i],
                Recipe::Transfer => rbar / k.sqrt(),
            };
            Ball {
                center: points[i],
                radius,
                k,
                p: p_value(params.variant, n, k, a_const, kbar),
                rho: sc.rho.as_ref().map(|r| r[i]),
            }
        })
        .collect();

    let intervals: Vec<(f64, f64)> = balls.iter().map(|b| (b.center - b.radius, b.center + b.radius)).collect();
    if let Some(uncovered) = first_uncovered(&intervals, a, b) {
        return Err(Error::CoverageFailure { uncovered });
    }

    let mut cover = GoodCover {
        n,
        recipe: params.recipe,
        variant: params.variant,
        domain,
        rbar,
        a: a_const,
        kbar,
        gamma,
        intersections: 0,
        shrink: sc.shrink,
        poles: profile.poles(),
        hypothesis: sc.hypothesis,
        balls,
    };
    let hats: Vec<(f64, f64)> = (0..cover.balls.len()).map(|i| cover.hat_interval(i)).collect();
    cover.intersections = max_overlap(&hats);
    Ok(cover)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub ball: Option<usize>,
    pub other: Option<usize>,
    /// Derivative order for item (c).
    pub m: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemCheck {
    pub item: String,
    pub passed: bool,
    /// Smallest relative slack `(rhs - lhs)/rhs` over all checked inequalities.
    pub margin: f64,
    pub violations: Vec<Violation>,
}

impl ItemCheck {
    fn new(item: &str) -> Self {
        Self { item: item.into(), passed: true, margin: f64::INFINITY, violations: Vec::new() }
    }

    fn check(&mut self, lhs: f64, rhs: f64, v: impl FnOnce() -> Violation) {
        let slack = if rhs != 0.0 { (rhs - lhs) / rhs.abs() } else { -lhs };
        self.margin = self.margin.min(slack);
        if !(lhs <= rhs * (1.0 + 1e-12)) {
            self.passed = false;
            let mut viol = v();
            viol.lhs = lhs;
            viol.rhs = rhs;
            self.violations.push(viol);
        }
    }

    fn fail(&mut self, violation: Violation) {
        self.passed = false;
        self.margin = self.margin.min(-1.0);
        self.violations.push(violation);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub variant: Variant,
    pub items: Vec<ItemCheck>,
    pub intersection_count: usize,
    pub uniform_ricci_bound: f64,
    pub all_passed: bool,
}

impl AssumptionReport {
    pub fn item(&self, name: &str) -> Option<&ItemCheck> {
        self.items.iter().find(|c| c.item == name)
    }
}

fn viol(ball: Option<usize>, other: Option<usize>, m: Option<usize>, detail: &str) -> Violation {
    Violation { ball, other, m, lhs: 0.0, rhs: 0.0, detail: detail.into() }
}

/// Checks the cover items (a) to (e) against a profile. Violations are
/// reported, never raised.
pub fn verify_cover(cover: &GoodCover, profile: &CurvatureProfile, variant: Variant) -> AssumptionReport {
    let nb = cover.balls.len();

    let mut a = ItemCheck::new("a");
    let intervals: Vec<(f64, f64)> =
        cover.balls.iter().map(|b| (b.center - b.radius, b.center + b.radius)).collect();
    match first_uncovered(&intervals, cover.domain.0, cover.domain.1) {
        Some(u) => a.fail(Violation { lhs: u, ..viol(None, None, None, "uncovered point") }),
        None => a.margin = 0.0,
    }

    let sups: Vec<Result<[f64; 4]>> =
        par::map(&cover.balls, |b| profile.ball_sup_clipped(b.center, b.hat_radius()));

    let mut bchk = ItemCheck::new("b");
    let c_name = match variant {
        Variant::Assumption1 => "c",
        Variant::Assumption2 => "c'",
    };
    let mut c = ItemCheck::new(c_name);
    for (i, (ball, sup)) in cover.balls.iter().zip(&sups).enumerate() {
        let Ok(sup) = sup else {
            bchk.fail(viol(Some(i), None, None, "enlarged ball leaves the profile data"));
            continue;
        };
        bchk.check(sup[RM], ball.k, || viol(Some(i), None, None, "sup |Rm| over enlarged ball exceeds K"));
        let floor = (cover.rbar * cover.rbar / (ball.radius * ball.radius)).max(1.0);
        bchk.check(floor, ball.k, || viol(Some(i), None, None, "K below max(rbar²/r², 1)"));
        let p = p_value(variant, cover.n, ball.k, cover.a, cover.kbar);
        for (order, q) in [(0usize, RIC), (1, DRIC), (2, D2RIC)] {
            let rhs = ball.k.powf(order as f64 / 2.0) * p;
            c.check(sup[q], rhs, || viol(Some(i), None, Some(order), "derivative bound exceeded"));
        }
    }

    let d_name = match variant {
        Variant::Assumption1 => "d",
        Variant::Assumption2 => "d'",
    };
    let gap = match variant {
        Variant::Assumption1 => cover.gamma,
        Variant::Assumption2 => cover.gamma * (1.0 / cover.a).min(1.0),
    };
    let mut d = ItemCheck::new(d_name);
    let pairs: Vec<Vec<(usize, f64, f64)>> = par::map(&(0..nb).collect::<Vec<_>>(), |&i| {
        (0..nb)
            .filter(|&j| j != i && cover.hats_meet(i, j))
            .map(|j| (j, cover.balls[j].k, cover.balls[i].k + gap))
            .collect()
    });
    for (i, row) in pairs.into_iter().enumerate() {
        for (j, lhs, rhs) in row {
            d.check(lhs, rhs, || viol(Some(j), Some(i), None, "adjacent K gap exceeds bound"));
        }
    }

    let mut e = ItemCheck::new("e");
    let hats: Vec<(f64, f64)> = (0..nb).map(|i| cover.hat_interval(i)).collect();
    let count = max_overlap(&hats);
    e.check(count as f64, cover.intersections as f64, || {
        viol(None, None, None, "intersection count exceeds recorded I")
    });

    let items = vec![a, bchk, c, d, e];
    let all_passed = items.iter().all(|c| c.passed);
    AssumptionReport {
        variant,
        items,
        intersection_count: count,
        uniform_ricci_bound: cover.uniform_ricci_bound(),
        all_passed,
    }
}
