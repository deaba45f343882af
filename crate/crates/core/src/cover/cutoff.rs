use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::build::{first_uncovered, GoodCover, HAT};
use super::transition::{cutoff_transition, Transition};
use crate::error::{Error, Result};
use crate::par;

/// Radial bump `ψ̂(λ|s - c|)` with `λ = √K / (√K r + r̄)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallCutoff {
    pub center: f64,
    pub radius: f64,
    pub k: f64,
    pub lambda: f64,
    pub transition: Transition,
}

impl BallCutoff {
    pub fn new(center: f64, radius: f64, k: f64, rbar: f64) -> Result<Self> {
        let minimum = rbar / k.sqrt();
        if !(radius >= minimum) {
            return Err(Error::RadiusTooSmall { radius, minimum });
        }
        let sk = k.sqrt();
        Ok(Self { center, radius, k, lambda: sk / (sk * radius + rbar), transition: cutoff_transition() })
    }

    /// Radius of the region where the bump equals 1.
    pub fn plateau(&self) -> f64 {
        self.transition.a / self.lambda
    }

    /// Radius beyond which the bump vanishes.
    pub fn support(&self) -> f64 {
        self.transition.b / self.lambda
    }

    /// Value and first three signed arclength derivatives at `s`.
    pub fn eval(&self, s: f64) -> [f64; 4] {
        let d = s - self.center;
        let t = self.lambda * d.abs();
        if t <= self.transition.a {
            return [1.0, 0.0, 0.0, 0.0];
        }
        if t >= self.transition.b {
            return [0.0; 4];
        }
        let sg = d.signum();
        let l = self.lambda;
        let tr = &self.transition;
        [
            tr.value(t),
            tr.derivative(t, 1) * l * sg,
            tr.derivative(t, 2) * l * l,
            tr.derivative(t, 3) * l * l * l * sg,
        ]
    }
}

/// Nodal samples of a cutoff and its signed arclength derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub s: Vec<f64>,
    pub chi: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    /// Closed interval outside which `χ` vanishes.
    pub support: (f64, f64),
    /// Measured `max |χ^{(k)}| / K_i^{k/2}` over balls, `k = 1, 2, 3`.
    pub constants: Option<[f64; 3]>,
}

impl Cutoff {
    /// `χ ≡ value` on the grid.
    pub fn constant(s: &[f64], value: f64) -> Self {
        let len = s.len();
        let support = if value == 0.0 { (f64::NAN, f64::NAN) } else { (s[0], s[len - 1]) };
        Self {
            s: s.to_vec(),
            chi: vec![value; len],
            d1: vec![0.0; len],
            d2: vec![0.0; len],
            d3: vec![0.0; len],
            support,
            constants: None,
        }
    }

    fn from_samples(s: &[f64], samples: Vec<[f64; 4]>) -> Self {
        let mut c = Self::constant(s, 0.0);
        for (j, v) in samples.into_iter().enumerate() {
            c.chi[j] = v[0];
            c.d1[j] = v[1];
            c.d2[j] = v[2];
            c.d3[j] = v[3];
        }
        let nz: Vec<usize> = (0..s.len()).filter(|&j| c.chi[j] != 0.0).collect();
        if let (Some(&a), Some(&b)) = (nz.first(), nz.last()) {
            c.support = (s[a.saturating_sub(1)], s[(b + 1).min(s.len() - 1)]);
        }
        c
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Signed derivative of order `m ≤ 3`.
    pub fn derivative(&self, m: usize) -> &[f64] {
        match m {
            0 => &self.chi,
            1 => &self.d1,
            2 => &self.d2,
            3 => &self.d3,
            _ => panic!("derivative order {m} not stored"),
        }
    }

    /// `|∇²χ|` of the radial extension, given `H = ψ_s/ψ` at each node.
    pub fn hessian_norm(&self, n: usize, mean_curv: &[f64]) -> Vec<f64> {
        let m = (n - 1) as f64;
        (0..self.len())
            .map(|j| (self.d2[j].powi(2) + m * (mean_curv[j] * self.d1[j]).powi(2)).sqrt())
            .collect()
    }

    /// CSV with columns `node,chi,d1,d2,d3,s`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["node", "chi", "d1", "d2", "d3", "s"])?;
        for j in 0..self.len() {
            w.write_record(&[
                j.to_string(),
                self.chi[j].to_string(),
                self.d1[j].to_string(),
                self.d2[j].to_string(),
                self.d3[j].to_string(),
                self.s[j].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples one ball cutoff on the grid `s`.
pub fn ball_cutoff(s: &[f64], center: f64, radius: f64, k: f64, rbar: f64) -> Result<Cutoff> {
    let b = BallCutoff::new(center, radius, k, rbar)?;
    Ok(Cutoff::from_samples(s, s.iter().map(|&x| b.eval(x)).collect()))
}

/// Inner region `Ω` and enclosing region `Ω̂`, both closed intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regions {
    pub omega: (f64, f64),
    pub omega_hat: (f64, f64),
}

fn inside(inner: (f64, f64), outer: (f64, f64)) -> bool {
    inner.0 >= outer.0 && inner.1 <= outer.1
}

fn meets(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// Partition of the cover into balls inside `Ω̂` and balls straddling its boundary.
pub fn split_balls(cover: &GoodCover, regions: &Regions) -> Result<(Vec<usize>, Vec<usize>)> {
    let Regions { omega, omega_hat } = *regions;
    if !inside(omega, omega_hat) {
        return Err(Error::SeparationViolation(format!("{omega:?} is not inside {omega_hat:?}")));
    }
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for i in 0..cover.balls.len() {
        let hat = cover.hat_interval(i);
        if inside(hat, omega_hat) {
            inner.push(i);
        } else if meets(hat, omega_hat) {
            if meets(hat, omega) {
                return Err(Error::SeparationViolation(format!(
                    "ball {i} at s = {} meets both the boundary of the outer region and the inner region",
                    cover.balls[i].center
                )));
            }
            outer.push(i);
        }
    }
    let ball = |i: &usize| {
        let b = &cover.balls[*i];
        (b.center - b.radius, b.center + b.radius)
    };
    let inner_iv: Vec<_> = inner.iter().map(ball).collect();
    if let Some(u) = first_uncovered(&inner_iv, omega.0, omega.1) {
        return Err(Error::SeparationViolation(format!("inner balls miss s = {u} of the inner region")));
    }
    Ok((inner, outer))
}

/// Global cutoff `χ = Σ_{inner} φ_i / max(Σ_{inner ∪ outer} φ_j, 1)` sampled on
/// `s`, with `φ_i` the cutoff of `B(x_i, 16 r_i)` at scale `K_i`. Each `φ_j` is 1
/// on `B_j`, so the denominator is at least 1 wherever the balls cover and the
/// `max` only matters for covers that leave part of `Ω̂` bare.
pub fn build_chi(cover: &GoodCover, regions: &Regions, s: &[f64]) -> Result<Cutoff> {
    let (inner, outer) = split_balls(cover, regions)?;
    let bumps = |idx: &[usize]| -> Result<Vec<BallCutoff>> {
        idx.iter()
            .map(|&i| {
                let b = &cover.balls[i];
                BallCutoff::new(b.center, HAT * b.radius, b.k, cover.rbar)
            })
            .collect()
    };
    let num = bumps(&inner)?;
    let den_extra = bumps(&outer)?;

    let samples = par::map(s, |&x| {
        let mut nsum = [0.0f64; 4];
        for b in num.iter().filter(|b| (x - b.center).abs() < b.support()) {
            let v = b.eval(x);
            for k in 0..4 {
                nsum[k] += v[k];
            }
        }
        if nsum == [0.0; 4] {
            return [0.0; 4];
        }
        let mut extra = [0.0f64; 4];
        for b in den_extra.iter().filter(|b| (x - b.center).abs() < b.support()) {
            let v = b.eval(x);
            for k in 0..4 {
                extra[k] += v[k];
            }
        }
        if extra == [0.0; 4] && nsum[0] >= 1.0 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        let d: [f64; 4] = std::array::from_fn(|k| nsum[k] + extra[k]);
        if d[0] < 1.0 {
            // only reachable when the enlarged region is not covered by the balls
            return nsum;
        }
        // R = 1/D and its derivatives
        let r0 = 1.0 / d[0];
        let r1 = -d[1] * r0 * r0;
        let r2 = -d[2] * r0 * r0 + 2.0 * d[1] * d[1] * r0.powi(3);
        let r3 = -d[3] * r0 * r0 + 6.0 * d[1] * d[2] * r0.powi(3) - 6.0 * d[1].powi(3) * r0.powi(4);
        let nn = nsum;
        [
            (nn[0] / d[0]).clamp(0.0, 1.0),
            nn[1] * r0 + nn[0] * r1,
            nn[2] * r0 + 2.0 * nn[1] * r1 + nn[0] * r2,
            nn[3] * r0 + 3.0 * nn[2] * r1 + 3.0 * nn[1] * r2 + nn[0] * r3,
        ]
    });
    let mut chi = Cutoff::from_samples(s, samples);
    chi.constants = Some(measured_constants(cover, &chi));
    Ok(chi)
}

/// `max_i max_{B̂_i} |χ^{(k)}| / K_i^{k/2}` for `k = 1, 2, 3`.
pub fn measured_constants(cover: &GoodCover, chi: &Cutoff) -> [f64; 3] {
    let per_ball = par::map(&(0..cover.balls.len()).collect::<Vec<_>>(), |&i| {
        let (a, b) = cover.hat_interval(i);
        let k = cover.balls[i].k;
        let lo = chi.s.partition_point(|&x| x < a);
        let hi = chi.s.partition_point(|&x| x <= b);
        let mut out = [0.0f64; 3];
        for j in lo..hi {
            for m in 1..=3 {
                out[m - 1] = out[m - 1].max(chi.derivative(m)[j].abs() / k.powf(m as f64 / 2.0));
            }
        }
        out
    });
    per_ball.into_iter().fold([0.0; 3], |acc, v| [acc[0].max(v[0]), acc[1].max(v[1]), acc[2].max(v[2])])
}

/// Writes a cover as JSON.
pub fn write_cover_json(cover: &GoodCover, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, cover)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_cover_json(path: &Path) -> Result<GoodCover> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}
