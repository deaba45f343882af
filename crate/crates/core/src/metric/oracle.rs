//! Brute-force coordinate curvature: the full n-dimensional metric in a
//! hyperspherical chart, differentiated by nested finite differences.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{CurvatureField, WarpedState};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl StencilOrder {
    fn offsets(self) -> &'static [(isize, f64)] {
        match self {
            StencilOrder::Second => &[(-1, -0.5), (1, 0.5)],
            StencilOrder::Fourth => {
                &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)]
            }
        }
    }

    fn half_width(self) -> usize {
        match self {
            StencilOrder::Second => 1,
            StencilOrder::Fourth => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub order: StencilOrder,
    /// Radial difference step in grid nodes.
    pub x_stride: usize,
    /// Angular difference step in radians.
    pub angle_step: f64,
    /// Minimum `sin θ` allowed anywhere in the stencil footprint.
    pub guard: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { order: StencilOrder::Fourth, x_stride: 1, angle_step: 1e-2, guard: 5e-2 }
    }
}

impl OracleOptions {
    /// Nodes the stencil footprint reaches on each side of a sample.
    pub fn clearance(&self) -> usize {
        4 * self.order.half_width() * self.x_stride
    }
}

/// A grid node together with a point on the orbit sphere (chart angles).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSample {
    pub node: usize,
    pub angles: Vec<f64>,
}

impl OracleSample {
    /// Sample at a generic point of the orbit sphere.
    pub fn at(node: usize) -> Self {
        Self { node, angles: vec![1.1, 1.3, 0.4] }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleValues {
    pub norm_rm: f64,
    pub norm_ric: f64,
    pub norm_dric: f64,
    pub norm_d2ric: f64,
}

impl OracleValues {
    pub fn get(&self, m: usize) -> f64 {
        [self.norm_ric, self.norm_dric, self.norm_d2ric][m]
    }
}

#[derive(Clone, Copy)]
struct Pt {
    k: isize,
    th: [f64; 3],
}

struct Chart<'a> {
    state: &'a WarpedState,
    n: usize,
    j0: usize,
    hx: f64,
    stride: isize,
    opts: &'a OracleOptions,
}

type TensorFn<'f> = &'f dyn Fn(&Pt) -> Vec<f64>;

impl Chart<'_> {
    fn metric(&self, p: &Pt) -> Vec<f64> {
        let n = self.n;
        let j = (self.j0 as isize + p.k) as usize;
        let (phi, psi) = (self.state.phi[j], self.state.psi[j]);
        let mut g = vec![0.0; n * n];
        g[0] = phi * phi;
        let mut w = psi * psi;
        for a in 1..n {
            g[a * n + a] = w;
            w *= p.th[a - 1].sin().powi(2);
        }
        g
    }

    fn inverse(&self, g: &[f64]) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.n, self.n, g);
        m.try_inverse().expect("metric is positive definite").as_slice().to_vec()
    }

    /// Coordinate derivative of a tensor field along direction `a`.
    fn partial(&self, p: &Pt, a: usize, f: TensorFn) -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        let step = if a == 0 { self.hx * self.stride as f64 } else { self.opts.angle_step };
        for &(o, w) in self.opts.order.offsets() {
            let mut q = *p;
            if a == 0 {
                q.k += o * self.stride;
            } else {
                q.th[a - 1] += o as f64 * self.opts.angle_step;
            }
            let v = f(&q);
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (s, x) in acc.iter_mut().zip(v) {
                *s += w * x;
            }
        }
        acc.iter_mut().for_each(|v| *v /= step);
        acc
    }

    /// `Γ^k_{ij}` stored as `[k][i][j]`.
    fn christoffel(&self, p: &Pt) -> Vec<f64> {
        let n = self.n;
        let ginv = self.inverse(&self.metric(p));
        let dg: Vec<Vec<f64>> = (0..n).map(|a| self.partial(p, a, &|q| self.metric(q))).collect();
        let mut gam = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[k * n + l]
                            * (dg[i][j * n + l] + dg[j][i * n + l] - dg[l][i * n + j]);
                    }
                    gam[(k * n + i) * n + j] = 0.5 * s;
                }
            }
        }
        gam
    }

    /// `R^l_{ijk}` stored as `[l][i][j][k]`.
    fn riemann(&self, p: &Pt) -> Vec<f64> {
        let n = self.n;
        let gam = self.christoffel(p);
        let dgam: Vec<Vec<f64>> =
            (0..n).map(|a| self.partial(p, a, &|q| self.christoffel(q))).collect();
        let g = |k: usize, i: usize, j: usize| gam[(k * n + i) * n + j];
        let mut r = vec![0.0; n * n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = dgam[i][(l * n + j) * n + k] - dgam[j][(l * n + i) * n + k];
                        for m in 0..n {
                            v += g(l, i, m) * g(m, j, k) - g(l, j, m) * g(m, i, k);
                        }
                        r[((l * n + i) * n + j) * n + k] = v;
                    }
                }
            }
        }
        r
    }

    fn ricci_from(&self, r: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut ric = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                ric[j * n + k] = (0..n).map(|i| r[((i * n + i) * n + j) * n + k]).sum();
            }
        }
        ric
    }

    fn ricci(&self, p: &Pt) -> Vec<f64> {
        self.ricci_from(&self.riemann(p))
    }

    /// Covariant derivative of a covariant tensor of the given rank; the new
    /// index comes first.
    fn nabla(&self, p: &Pt, rank: usize, f: TensorFn) -> Vec<f64> {
        let n = self.n;
        let gam = self.christoffel(p);
        let t = f(p);
        let size = n.pow(rank as u32);
        let mut out = vec![0.0; n * size];
        for e in 0..n {
            let dt = self.partial(p, e, f);
            for idx in 0..size {
                let mut v = dt[idx];
                for slot in 0..rank {
                    let stride = n.pow((rank - 1 - slot) as u32);
                    let a = (idx / stride) % n;
                    let base = idx - a * stride;
                    for d in 0..n {
                        v -= gam[(d * n + e) * n + a] * t[base + d * stride];
                    }
                }
                out[e * size + idx] = v;
            }
        }
        out
    }

    fn nabla_ric(&self, p: &Pt) -> Vec<f64> {
        self.nabla(p, 2, &|q| self.ricci(q))
    }

    fn nabla2_ric(&self, p: &Pt) -> Vec<f64> {
        self.nabla(p, 3, &|q| self.nabla_ric(q))
    }
}

/// `|T|²` for a covariant tensor, contracting every slot with `g^{-1}`.
fn norm_sq(t: &[f64], n: usize, rank: usize, ginv: &[f64]) -> f64 {
    let mut up = t.to_vec();
    for slot in 0..rank {
        let stride = n.pow((rank - 1 - slot) as u32);
        let mut next = vec![0.0; up.len()];
        for (idx, out) in next.iter_mut().enumerate() {
            let a = (idx / stride) % n;
            let base = idx - a * stride;
            *out = (0..n).map(|b| ginv[a * n + b] * up[base + b * stride]).sum();
        }
        up = next;
    }
    t.iter().zip(&up).map(|(a, b)| a * b).sum()
}

/// Curvature norms at one point computed from the coordinate metric alone.
pub fn oracle_curvature_grid(
    state: &WarpedState,
    sample: &OracleSample,
    opts: &OracleOptions,
) -> Result<OracleValues> {
    let n = state.n;
    if n > 4 {
        return Err(Error::InvalidArgument(format!("oracle supports n <= 4, got {n}")));
    }
    if sample.angles.len() < n - 1 {
        return Err(Error::InvalidArgument("not enough chart angles".into()));
    }
    let xr = opts.clearance();
    let j0 = sample.node;
    if j0 < xr || j0 + xr >= state.len() {
        return Err(Error::SingularChart(format!(
            "node {j0} needs {xr} nodes of clearance on a grid of {}",
            state.len()
        )));
    }
    if (j0 - xr..=j0 + xr).any(|j| state.is_pole(j)) {
        return Err(Error::SingularChart(format!("node {j0} is within {xr} nodes of a pole")));
    }
    let ar = (4 * opts.order.half_width()) as f64 * opts.angle_step;
    for &th in &sample.angles[..n.saturating_sub(2)] {
        let lo = th - ar;
        let hi = th + ar;
        let sin_min = lo.sin().min(hi.sin());
        if lo <= 0.0 || hi >= std::f64::consts::PI || sin_min < opts.guard {
            return Err(Error::SingularChart(format!("angle {th} too close to the chart axis")));
        }
    }

    let mut th = [0.0; 3];
    th[..n - 1].copy_from_slice(&sample.angles[..n - 1]);
    let chart = Chart {
        state,
        n,
        j0,
        hx: state.h(),
        stride: opts.x_stride as isize,
        opts,
    };
    let p = Pt { k: 0, th };
    let g = chart.metric(&p);
    let ginv = chart.inverse(&g);

    let r_up = chart.riemann(&p);
    let mut r_low = vec![0.0; r_up.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    r_low[((i * n + j) * n + k) * n + l] =
                        (0..n).map(|m| g[l * n + m] * r_up[((m * n + i) * n + j) * n + k]).sum();
                }
            }
        }
    }
    let ric = chart.ricci_from(&r_up);
    let dric = chart.nabla_ric(&p);
    let d2ric = chart.nabla2_ric(&p);

    Ok(OracleValues {
        norm_rm: norm_sq(&r_low, n, 4, &ginv).max(0.0).sqrt(),
        norm_ric: norm_sq(&ric, n, 2, &ginv).max(0.0).sqrt(),
        norm_dric: norm_sq(&dric, n, 3, &ginv).max(0.0).sqrt(),
        norm_d2ric: norm_sq(&d2ric, n, 4, &ginv).max(0.0).sqrt(),
    })
}

/// Relative discrepancy `|fast - oracle| / max(|oracle|, floor)`.
pub fn relative_error(fast: f64, oracle: f64, floor: f64) -> f64 {
    (fast - oracle).abs() / oracle.abs().max(floor)
}

/// `count` evenly spaced nodes, clear of the grid ends by the oracle's
/// footprint, among those where every norm is at least `significance` times
/// its own sup. Below that the fourth derivatives of `ψ` are dominated by
/// rounding (about `ulp(ψ)/h⁴`) and relative errors say nothing.
pub fn oracle_sample_nodes(field: &CurvatureField, opts: &OracleOptions, count: usize, significance: f64) -> Vec<usize> {
    let len = field.len();
    let quantities = [&field.norm_rm[..], &field.norm_ric[..], field.dric(), field.d2ric()];
    let sups: Vec<f64> = quantities.iter().map(|q| q.iter().fold(0.0, |m: f64, v| m.max(v.abs()))).collect();
    let c = opts.clearance();
    let candidates: Vec<usize> = (c..len.saturating_sub(c))
        .filter(|&j| quantities.iter().zip(&sups).all(|(q, &sup)| q[j].abs() >= significance * sup))
        .collect();
    match (candidates.len(), count) {
        (0, _) | (_, 0) => Vec::new(),
        (m, 1) => vec![candidates[m / 2]],
        (m, k) => {
            let mut nodes: Vec<usize> = (0..k).map(|i| candidates[i * (m - 1) / (k - 1)]).collect();
            nodes.dedup();
            nodes
        }
    }
}

/// Compares a fast-path field against the oracle at the given samples and
/// fails on the first quantity whose relative error exceeds `rel_tol`.
pub fn validate_against_oracle(
    state: &WarpedState,
    field: &CurvatureField,
    samples: &[OracleSample],
    opts: &OracleOptions,
    rel_tol: f64,
    floor: f64,
) -> Result<Vec<OracleValues>> {
    let values = crate::par::try_map(samples, |s| oracle_curvature_grid(state, s, opts))?;
    for (s, o) in samples.iter().zip(&values) {
        let j = s.node;
        let pairs = [
            ("normRm", field.norm_rm[j], o.norm_rm),
            ("normRic", field.norm_ric[j], o.norm_ric),
            ("normDRic", field.dric()[j], o.norm_dric),
            ("normD2Ric", field.d2ric()[j], o.norm_d2ric),
        ];
        for (quantity, fast, oracle) in pairs {
            if relative_error(fast, oracle, floor) > rel_tol {
                return Err(Error::OracleMismatch { quantity, node: j, fast, oracle });
            }
        }
    }
    Ok(values)
}
