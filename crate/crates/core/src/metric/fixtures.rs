//! Exact and synthetic warped profiles used as initial data and test fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Topology, WarpedState};
use crate::error::{Error, Result};

/// Grid spacing used for flat directions; a power of two keeps linear data exact.
pub const FLAT_SPACING: f64 = 1.0 / 16.0;

fn grid(x0: f64, h: f64, nodes: usize) -> Vec<f64> {
    (0..nodes).map(|j| x0 + j as f64 * h).collect()
}

/// Round sphere, flat plane or round cylinder of sectional curvature `k`.
///
/// The cylinder has orbit spheres of curvature `k` and a flat line factor.
pub fn constant_curvature_state(
    n: usize,
    k: f64,
    topology: Topology,
    nodes: usize,
) -> Result<WarpedState> {
    if k < 0.0 {
        return Err(Error::UnsupportedTopology(format!("negative curvature k = {k}")));
    }
    if nodes < 2 {
        return Err(Error::GridTooSmall { required: super::MIN_NODES, got: nodes });
    }
    let last = nodes - 1;
    let (x, psi) = match topology {
        Topology::Sphere => {
            if k == 0.0 {
                return Err(Error::UnsupportedTopology("sphere needs k > 0".into()));
            }
            let r = k.sqrt();
            let h = std::f64::consts::PI / r / last as f64;
            let x = grid(0.0, h, nodes);
            let mut psi: Vec<f64> = x.iter().map(|&s| (r * s).sin() / r).collect();
            psi[0] = 0.0;
            psi[last] = 0.0;
            (x, psi)
        }
        Topology::Plane => {
            if k != 0.0 {
                return Err(Error::UnsupportedTopology("plane needs k = 0".into()));
            }
            let x = grid(0.0, FLAT_SPACING, nodes);
            (x.clone(), x)
        }
        Topology::Cylinder => {
            if k == 0.0 {
                return Err(Error::UnsupportedTopology("cylinder needs k > 0".into()));
            }
            let x = grid(-(last as f64) * FLAT_SPACING / 2.0, FLAT_SPACING, nodes);
            let psi = vec![1.0 / k.sqrt(); nodes];
            (x, psi)
        }
    };
    WarpedState::new(n, topology, x, vec![1.0; nodes], psi)
}

/// Compactly supported smooth bump with `β(0) = 1`, vanishing for `|u| ≥ 1`.
pub fn compact_bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// Flat plane with a compactly supported curvature bump around the pole:
/// `ψ = s + ε s³ β(s/w)` on `[0, length]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpOnFlat {
    pub n: usize,
    pub amplitude: f64,
    pub support: f64,
    pub length: f64,
    pub nodes: usize,
}

impl BumpOnFlat {
    pub fn psi(&self, s: f64) -> f64 {
        s + self.amplitude * s.powi(3) * compact_bump(s / self.support)
    }

    pub fn state(&self) -> Result<WarpedState> {
        let h = self.length / (self.nodes - 1) as f64;
        let x = grid(0.0, h, self.nodes);
        let mut psi: Vec<f64> = x.iter().map(|&s| self.psi(s)).collect();
        psi[0] = 0.0;
        WarpedState::new(self.n, Topology::Plane, x, vec![1.0; self.nodes], psi)
    }
}

impl Default for BumpOnFlat {
    fn default() -> Self {
        Self { n: 3, amplitude: 0.02, support: 2.0, length: 12.0, nodes: 385 }
    }
}

/// Pole-free profile `ψ = s + a·exp(-((s-c)/w)²)`, `φ = 1 + b·exp(-((x-d)/v)²)`
/// on a cylinder-type grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub n: usize,
    pub psi_amp: f64,
    pub psi_center: f64,
    pub psi_width: f64,
    pub phi_amp: f64,
    pub phi_center: f64,
    pub phi_width: f64,
    pub x0: f64,
    pub x1: f64,
    pub nodes: usize,
}

impl GaussianBump {
    /// `ψ = s + 0.1·exp(-(s-3)²)` with `φ = 1`.
    pub fn simple(n: usize) -> Self {
        Self {
            n,
            psi_amp: 0.1,
            psi_center: 3.0,
            psi_width: 1.0,
            phi_amp: 0.0,
            phi_center: 3.0,
            phi_width: 1.0,
            x0: 1.0,
            x1: 7.0,
            nodes: 769,
        }
    }

    /// Seeded random member of the family, always with `ψ > 0` and `φ > 0`.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            n,
            psi_amp: rng.random_range(-0.3..0.3),
            psi_center: rng.random_range(2.5..5.5),
            psi_width: rng.random_range(0.7..1.5),
            phi_amp: rng.random_range(-0.2..0.2),
            phi_center: rng.random_range(2.5..5.5),
            phi_width: rng.random_range(0.8..1.6),
            ..Self::simple(n)
        }
    }

    pub fn state(&self) -> Result<WarpedState> {
        let h = (self.x1 - self.x0) / (self.nodes - 1) as f64;
        let x = grid(self.x0, h, self.nodes);
        let phi: Vec<f64> = x
            .iter()
            .map(|&x| 1.0 + self.phi_amp * (-((x - self.phi_center) / self.phi_width).powi(2)).exp())
            .collect();
        // ψ is specified in arclength, so integrate φ first.
        let mut s = vec![0.0; x.len()];
        for j in 1..x.len() {
            s[j] = s[j - 1]
                + gauss_legendre(|t| self.phi_at(t), x[j - 1], x[j]);
        }
        let psi = s
            .iter()
            .map(|&s| {
                let s = s + self.x0;
                s + self.psi_amp * (-((s - self.psi_center) / self.psi_width).powi(2)).exp()
            })
            .collect();
        WarpedState::new(self.n, Topology::Cylinder, x, phi, psi)
    }

    fn phi_at(&self, x: f64) -> f64 {
        1.0 + self.phi_amp * (-((x - self.phi_center) / self.phi_width).powi(2)).exp()
    }
}

/// Five-point Gauss-Legendre quadrature on `[a, b]`.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        0.538_469_310_105_683_1,
        -0.538_469_310_105_683_1,
        0.906_179_845_938_664,
        -0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    X.iter().zip(W).map(|(&x, w)| w * f(m + r * x)).sum::<f64>() * r
}

/// Random smooth radial perturbations of a round sphere, `ψ = sin(s)(1 + Σ a_k cos(k s))`
/// truncated to even modes so that both poles stay regular.
pub fn random_sphere_perturbation(n: usize, seed: u64, amplitude: f64, nodes: usize) -> Result<WarpedState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-amplitude..amplitude)).collect();
    let mut st = constant_curvature_state(n, 1.0, Topology::Sphere, nodes)?;
    for (j, &x) in st.x.iter().enumerate() {
        let pert: f64 = coeffs.iter().enumerate().map(|(i, a)| a * (2.0 * (i + 1) as f64 * x).cos()).sum();
        st.psi[j] *= 1.0 + pert - coeffs.iter().sum::<f64>();
    }
    st.psi[0] = 0.0;
    st.psi[nodes - 1] = 0.0;
    st.check_metric()?;
    Ok(st)
}
