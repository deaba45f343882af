use std::cell::RefCell;
use std::rc::Rc;

use super::stencil::{extrapolate_even, Parity, Stencil};
use super::{CurvatureField, Topology, WarpedState};
use crate::error::Result;

/// Arclength derivative `f_x / φ` of a nodal field.
fn ds(st: &Stencil, f: &[f64], parity: Parity, phi: &[f64]) -> Vec<f64> {
    st.d1(f, parity).into_iter().zip(phi).map(|(d, p)| d / p).collect()
}

/// Overwrite pole entries of an even field by extrapolation from the interior.
fn fill_poles_even(state: &WarpedState, s: &[f64], f: &mut [f64]) {
    let last = f.len() - 1;
    if state.is_pole(0) {
        f[0] = extrapolate_even([1, 2, 3].map(|i| s[i] - s[0]), [f[1], f[2], f[3]]);
    }
    if state.is_pole(last) {
        let src = [last - 1, last - 2, last - 3];
        f[last] = extrapolate_even(src.map(|i| s[last] - s[i]), src.map(|i| f[i]));
    }
}

type Weights = (Vec<f64>, Vec<f64>, Vec<f64>);

thread_local! {
    static WEIGHTS: RefCell<Option<((usize, u64, u64), Rc<Weights>)>> = const { RefCell::new(None) };
}

/// Analytic weight `w(x)`, odd about every pole, with its first two derivatives.
///
/// The sphere weight is memoized per grid since flows re-evaluate it every stage.
fn pole_weight(state: &WarpedState) -> Rc<Weights> {
    let len = state.len();
    let x0 = state.x[0];
    match state.topology {
        Topology::Cylinder => Rc::new((vec![1.0; len], vec![0.0; len], vec![0.0; len])),
        Topology::Plane => {
            Rc::new((state.x.iter().map(|x| x - x0).collect(), vec![1.0; len], vec![0.0; len]))
        }
        Topology::Sphere => {
            let key = (len, x0.to_bits(), state.x[len - 1].to_bits());
            if let Some(w) = WEIGHTS.with_borrow(|c| c.as_ref().filter(|(k, _)| *k == key).map(|(_, w)| w.clone())) {
                return w;
            }
            let k = std::f64::consts::PI / (state.x[len - 1] - x0);
            let mut w: Vec<f64> = state.x.iter().map(|x| (k * (x - x0)).sin() / k).collect();
            w[0] = 0.0;
            w[len - 1] = 0.0;
            let wx = state.x.iter().map(|x| (k * (x - x0)).cos()).collect();
            let wxx = w.iter().map(|w| -k * k * w).collect();
            let out = Rc::new((w, wx, wxx));
            WEIGHTS.with_borrow_mut(|c| *c = Some((key, out.clone())));
            out
        }
    }
}

/// `ψ_x` at the two end nodes, through the same even extrapolation of `ψ/w`
/// used by [`psi_derivatives`]; `None` at an end that is not a pole.
pub(crate) fn pole_slopes(state: &WarpedState) -> [Option<f64>; 2] {
    let last = state.len() - 1;
    if !(state.is_pole(0) || state.is_pole(last)) {
        return [None, None];
    }
    let weights = pole_weight(state);
    let (w, wx) = (&weights.0, &weights.1);
    let x = &state.x;
    let u = |i: usize| state.psi[i] / w[i];
    let left = state.is_pole(0).then(|| {
        extrapolate_even([1, 2, 3].map(|i| x[i] - x[0]), [u(1), u(2), u(3)]) * wx[0]
    });
    let right = state.is_pole(last).then(|| {
        let src = [last - 1, last - 2, last - 3];
        extrapolate_even(src.map(|i| x[last] - x[i]), src.map(u)) * wx[last]
    });
    [left, right]
}

/// `ψ_x` and `ψ_xx` computed through the even factor `u = ψ/w`, which keeps
/// the difference errors proportional to the distance from a pole.
pub(crate) fn psi_derivatives(state: &WarpedState) -> (Vec<f64>, Vec<f64>) {
    let weights = pole_weight(state);
    let (w, wx, wxx) = (&weights.0, &weights.1, &weights.2);
    let len = state.len();
    let mut u: Vec<f64> = (0..len)
        .map(|j| if state.is_pole(j) { 0.0 } else { state.psi[j] / w[j] })
        .collect();
    let x = &state.x;
    fill_poles_even(state, x, &mut u);
    let st = state.stencil();
    let ux = st.d1(&u, Parity::Even);
    let uxx = st.d2(&u, Parity::Even);
    let psi_x = (0..len).map(|j| ux[j] * w[j] + u[j] * wx[j]).collect();
    let psi_xx = (0..len)
        .map(|j| uxx[j] * w[j] + 2.0 * ux[j] * wx[j] + u[j] * wxx[j])
        .collect();
    (psi_x, psi_xx)
}

/// `H = ψ_s/ψ`, set to 0 at pole nodes.
pub(crate) fn mean_curvature(state: &WarpedState) -> Vec<f64> {
    let (psi_x, _) = psi_derivatives(state);
    (0..state.len())
        .map(|j| if state.is_pole(j) { 0.0 } else { psi_x[j] / state.phi[j] / state.psi[j] })
        .collect()
}

/// Arclength, `kRad` and `kSph`; pole nodes are filled by even extrapolation.
pub(crate) fn sectional_curvatures(state: &WarpedState) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let st = state.stencil();
    let (phi, psi) = (&state.phi, &state.psi);
    let (psi_x, psi_xx) = psi_derivatives(state);
    let phi_x = st.d1(phi, Parity::Even);
    let s = state.arclength();

    let len = state.len();
    let mut k_rad = vec![0.0; len];
    let mut k_sph = vec![0.0; len];
    for j in 0..len {
        if state.is_pole(j) {
            continue;
        }
        let p = phi[j];
        let psi_ss = (psi_xx[j] * p - psi_x[j] * phi_x[j]) / (p * p * p);
        k_rad[j] = -psi_ss / psi[j];
        k_sph[j] = (p - psi_x[j]) * (p + psi_x[j]) / (p * p * psi[j] * psi[j]);
    }
    fill_poles_even(state, &s, &mut k_rad);
    for j in [0, len - 1] {
        if state.is_pole(j) {
            k_sph[j] = k_rad[j];
        }
    }
    (s, k_rad, k_sph)
}

/// `|Rm|` of a warped product with radial and sphere-plane sectional
/// curvatures `k_rad` and `k_sph`.
pub fn rm_norm(n: usize, k_rad: f64, k_sph: f64) -> f64 {
    let n = n as f64;
    (4.0 * (n - 1.0) * k_rad * k_rad + 2.0 * (n - 1.0) * (n - 2.0) * k_sph * k_sph).sqrt()
}

/// Sectional curvatures, frame Ricci components and the `Rm`/`Ric` norms.
pub fn eval_warped_geometry(state: &WarpedState) -> Result<CurvatureField> {
    state.check_grid()?;
    state.check_metric()?;
    let n = state.n as f64;
    let (s, k_rad, k_sph) = sectional_curvatures(state);

    let ric_a: Vec<f64> = k_rad.iter().map(|k| (n - 1.0) * k).collect();
    let ric_b: Vec<f64> = k_rad.iter().zip(&k_sph).map(|(kr, ks)| kr + (n - 2.0) * ks).collect();
    let norm_rm = k_rad.iter().zip(&k_sph).map(|(&kr, &ks)| rm_norm(state.n, kr, ks)).collect();
    let norm_ric = ric_a
        .iter()
        .zip(&ric_b)
        .map(|(a, b)| (a * a + (n - 1.0) * b * b).sqrt())
        .collect();

    Ok(CurvatureField {
        n: state.n,
        s,
        k_rad,
        k_sph,
        ric_a,
        ric_b,
        norm_rm,
        norm_ric,
        norm_dric: None,
        norm_d2ric: None,
    })
}

/// Adds `|∇Ric|` and `|∇²Ric|` to a field computed from the same state.
///
/// With `a = Ric(e_s,e_s)`, `b = Ric(e_i,e_i)`, `H = ψ_s/ψ` and `m = n-1`, the
/// independent components of `∇Ric` are `p = a_s`, `q = b_s` and
/// `c = (a-b)H`. One more frame derivative gives
/// `|∇²Ric|² = p_s² + m q_s² + 2m c_s²
///   + H²[2m(p-q-c)² + m(p-2c)² + m²(q²+2c²) + 2m(2qc+c²)]`.
pub fn ricci_covariant_derivatives(
    state: &WarpedState,
    field: &CurvatureField,
) -> Result<CurvatureField> {
    let m = (state.n - 1) as f64;
    let st = state.stencil();
    let phi = &state.phi;
    let len = state.len();
    let h = mean_curvature(state);
    let p = ds(&st, &field.ric_a, Parity::Even, phi);
    let q = ds(&st, &field.ric_b, Parity::Even, phi);
    let c: Vec<f64> = (0..len).map(|j| (field.ric_a[j] - field.ric_b[j]) * h[j]).collect();
    let p_s = ds(&st, &p, Parity::Odd, phi);
    let q_s = ds(&st, &q, Parity::Odd, phi);
    let c_s = ds(&st, &c, Parity::Odd, phi);

    let mut d1 = vec![0.0; len];
    let mut d2 = vec![0.0; len];
    for j in 0..len {
        let (p, q, c, hh) = (p[j], q[j], c[j], h[j]);
        d1[j] = p * p + m * q * q + 2.0 * m * c * c;
        let conn = 2.0 * m * (p - q - c).powi(2)
            + m * (p - 2.0 * c).powi(2)
            + m * m * (q * q + 2.0 * c * c)
            + 2.0 * m * (2.0 * q * c + c * c);
        d2[j] = p_s[j].powi(2) + m * q_s[j].powi(2) + 2.0 * m * c_s[j].powi(2) + hh * hh * conn;
    }
    fill_poles_even(state, &field.s, &mut d2);

    let mut out = field.clone();
    out.norm_dric = Some(d1.into_iter().map(|v| v.max(0.0).sqrt()).collect());
    out.norm_d2ric = Some(d2.into_iter().map(|v| v.max(0.0).sqrt()).collect());
    Ok(out)
}

/// Full curvature field including the derivative norms.
pub fn geometry(state: &WarpedState) -> Result<CurvatureField> {
    let f = eval_warped_geometry(state)?;
    ricci_covariant_derivatives(state, &f)
}
