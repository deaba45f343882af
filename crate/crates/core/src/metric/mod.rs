//! Symmetry-reduced geometries and their curvature.
//!
//! Two model classes are supported: rotationally symmetric warped products
//! `g = φ(x)² dx² + ψ(x)² g_{S^{n-1}}` sampled on a uniform `x`-grid, and
//! products of Einstein factors whose flow is a set of linear scale ODEs.

mod einstein;
pub mod fixtures;
pub mod io;
mod oracle;
pub mod stencil;
mod warped;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use stencil::{EndRule, Stencil};

pub use einstein::{einstein_product_state, EinsteinFactor, EinsteinProductState, ProductCurvature};
pub(crate) use einstein::curvature_of;
pub use oracle::{
    oracle_curvature_grid, oracle_sample_nodes, relative_error, validate_against_oracle, OracleOptions, OracleSample,
    OracleValues, StencilOrder,
};
pub use warped::{eval_warped_geometry, geometry, ricci_covariant_derivatives, rm_norm};
pub(crate) use warped::{mean_curvature, pole_slopes, sectional_curvatures};

/// Minimum number of grid nodes accepted by the geometry evaluator.
pub const MIN_NODES: usize = 9;

/// Tolerance on `|ψ_s| = 1` at pole nodes.
pub const POLE_SLOPE_TOL: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Poles at both ends of the grid.
    Sphere,
    /// Pole at the left end; flat extension beyond the right end.
    Plane,
    /// No poles; both ends are truncations.
    Cylinder,
}

impl Topology {
    pub fn left_pole(self) -> bool {
        matches!(self, Topology::Sphere | Topology::Plane)
    }

    pub fn right_pole(self) -> bool {
        matches!(self, Topology::Sphere)
    }
}

/// Rotationally symmetric metric `φ²dx² + ψ²g_{S^{n-1}}` on a fixed uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpedState {
    pub n: usize,
    pub topology: Topology,
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub time: f64,
}

impl WarpedState {
    pub fn new(
        n: usize,
        topology: Topology,
        x: Vec<f64>,
        phi: Vec<f64>,
        psi: Vec<f64>,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("dimension n = {n} must be at least 3")));
        }
        if x.len() != phi.len() || x.len() != psi.len() {
            return Err(Error::InvalidArgument("x, phi and psi lengths differ".into()));
        }
        let state = Self { n, topology, x, phi, psi, time: 0.0 };
        state.check_grid()?;
        state.check_metric()?;
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn h(&self) -> f64 {
        (self.x[self.x.len() - 1] - self.x[0]) / (self.x.len() - 1) as f64
    }

    pub fn stencil(&self) -> Stencil {
        let rule = |pole: bool| if pole { EndRule::Reflect } else { EndRule::OneSided };
        Stencil::new(
            self.h(),
            rule(self.topology.left_pole()),
            rule(self.topology.right_pole()),
        )
    }

    pub fn is_pole(&self, j: usize) -> bool {
        (j == 0 && self.topology.left_pole())
            || (j + 1 == self.len() && self.topology.right_pole())
    }

    /// Arclength along the base measured from the first node (trapezoid rule in `x`).
    pub fn arclength(&self) -> Vec<f64> {
        let h = self.h();
        let mut s = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        s.push(0.0);
        for w in self.phi.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            s.push(acc);
        }
        s
    }

    /// Smallest arclength spacing between neighbouring nodes.
    pub fn min_arclength_spacing(&self) -> f64 {
        let h = self.h();
        self.phi
            .windows(2)
            .map(|w| 0.5 * h * (w[0] + w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// The homothetic metric `c·g`.
    pub fn scaled(&self, c: f64) -> Self {
        let r = c.sqrt();
        Self {
            phi: self.phi.iter().map(|v| v * r).collect(),
            psi: self.psi.iter().map(|v| v * r).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn check_grid(&self) -> Result<()> {
        if self.len() < MIN_NODES {
            return Err(Error::GridTooSmall { required: MIN_NODES, got: self.len() });
        }
        let h = self.h();
        if !(h > 0.0) {
            return Err(Error::NonUniformGrid { node: 0 });
        }
        for (j, w) in self.x.windows(2).enumerate() {
            let d = w[1] - w[0];
            if !(d > 0.0) || (d - h).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::NonUniformGrid { node: j });
            }
        }
        Ok(())
    }

    /// Positivity and pole regularity.
    pub(crate) fn check_metric(&self) -> Result<()> {
        for (j, (&p, &q)) in self.phi.iter().zip(&self.psi).enumerate() {
            if !(p > 0.0) {
                return Err(Error::NonPositiveMetric { field: "phi", node: j, value: p });
            }
            if !self.is_pole(j) && !(q > 0.0) {
                return Err(Error::NonPositiveMetric { field: "psi", node: j, value: q });
            }
        }
        let slopes = warped::pole_slopes(self);
        let last = self.len() - 1;
        for ((j, expected), psi_x) in [(0usize, 1.0), (last, -1.0)].into_iter().zip(slopes) {
            let Some(psi_x) = psi_x else { continue };
            if self.psi[j] != 0.0 {
                return Err(Error::PoleRegularityViolation {
                    node: j,
                    detail: format!("psi = {} instead of 0", self.psi[j]),
                });
            }
            let slope = psi_x / self.phi[j];
            if (slope - expected).abs() > POLE_SLOPE_TOL {
                return Err(Error::PoleRegularityViolation {
                    node: j,
                    detail: format!("psi_s = {slope}, expected {expected}"),
                });
            }
        }
        Ok(())
    }
}

/// Per-node curvature of a warped state. Units: length⁻² for `Rm`/`Ric`,
/// length⁻³ for `∇Ric`, length⁻⁴ for `∇²Ric`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureField {
    pub n: usize,
    /// Arclength coordinate of each node.
    pub s: Vec<f64>,
    /// Sectional curvature of planes containing the radial direction, `-ψ_ss/ψ`.
    pub k_rad: Vec<f64>,
    /// Sectional curvature of planes tangent to the orbit spheres, `(1-ψ_s²)/ψ²`.
    pub k_sph: Vec<f64>,
    /// `Ric(e_s, e_s)`.
    pub ric_a: Vec<f64>,
    /// `Ric(e_i, e_i)` for a unit vector tangent to the orbit.
    pub ric_b: Vec<f64>,
    pub norm_rm: Vec<f64>,
    pub norm_ric: Vec<f64>,
    /// Filled by [`ricci_covariant_derivatives`].
    pub norm_dric: Option<Vec<f64>>,
    /// Filled by [`ricci_covariant_derivatives`].
    pub norm_d2ric: Option<Vec<f64>>,
}

impl CurvatureField {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn dric(&self) -> &[f64] {
        self.norm_dric.as_deref().expect("covariant derivatives not evaluated")
    }

    pub fn d2ric(&self) -> &[f64] {
        self.norm_d2ric.as_deref().expect("covariant derivatives not evaluated")
    }

    /// `|∇^m Ric|` for `m = 0, 1, 2`.
    pub fn ric_derivative(&self, m: usize) -> &[f64] {
        match m {
            0 => &self.norm_ric,
            1 => self.dric(),
            2 => self.d2ric(),
            _ => panic!("derivative order {m} not tracked"),
        }
    }
}
