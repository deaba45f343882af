use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An abstract Einstein factor `Ric = λ g` of the given dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EinsteinFactor {
    pub dim: usize,
    pub lambda: f64,
    /// `|Rm|` of the factor at unit scale.
    pub rm_norm: f64,
    /// Scale coefficient at `t = 0`.
    pub initial_scale: f64,
}

impl EinsteinFactor {
    pub fn new(dim: usize, lambda: f64, rm_norm: f64, initial_scale: f64) -> Self {
        Self { dim, lambda, rm_norm, initial_scale }
    }

    /// Unit round sphere `S^d`.
    pub fn round_sphere(dim: usize) -> Self {
        let d = dim as f64;
        Self::new(dim, d - 1.0, (2.0 * d * (d - 1.0)).sqrt(), 1.0)
    }

    pub fn scale_at(&self, t: f64) -> f64 {
        self.initial_scale - 2.0 * self.lambda * t
    }
}

/// Product `Π c_k(t) g_k` at a fixed time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EinsteinProductState {
    pub factors: Vec<EinsteinFactor>,
    pub scales: Vec<f64>,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductCurvature {
    pub norm_rm: f64,
    pub norm_ric: f64,
    /// Always zero: the Ricci tensor of an Einstein product is parallel.
    pub norm_dric: f64,
    pub norm_d2ric: f64,
}

impl EinsteinProductState {
    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).sum()
    }

    /// First time at which some factor collapses, if any factor has `λ > 0`.
    pub fn extinction_time(factors: &[EinsteinFactor]) -> Option<f64> {
        factors
            .iter()
            .filter(|f| f.lambda > 0.0)
            .map(|f| f.initial_scale / (2.0 * f.lambda))
            .reduce(f64::min)
    }

    pub fn curvature(&self) -> ProductCurvature {
        curvature_of(&self.factors, &self.scales)
    }
}

pub(crate) fn curvature_of(factors: &[EinsteinFactor], scales: &[f64]) -> ProductCurvature {
    let mut rm2 = 0.0;
    let mut ric2 = 0.0;
    for (f, &c) in factors.iter().zip(scales) {
        rm2 += (f.rm_norm / c).powi(2);
        ric2 += f.dim as f64 * (f.lambda / c).powi(2);
    }
    ProductCurvature { norm_rm: rm2.sqrt(), norm_ric: ric2.sqrt(), norm_dric: 0.0, norm_d2ric: 0.0 }
}

/// Closed-form flow of an Einstein product: `c_k(t) = c_k(0) - 2λ_k t`.
pub fn einstein_product_state(
    factors: &[EinsteinFactor],
    t: f64,
) -> Result<(EinsteinProductState, ProductCurvature)> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("product needs at least one factor".into()));
    }
    for f in factors {
        if f.dim == 0 || !(f.initial_scale > 0.0) {
            return Err(Error::InvalidArgument(format!("bad factor {f:?}")));
        }
    }
    let scales: Vec<f64> = factors.iter().map(|f| f.scale_at(t)).collect();
    if scales.iter().any(|&c| c <= 0.0) {
        let extinction_time = EinsteinProductState::extinction_time(factors).unwrap_or(t);
        return Err(Error::Extinction { extinction_time });
    }
    let state = EinsteinProductState { factors: factors.to_vec(), scales, time: t };
    let curv = state.curvature();
    Ok((state, curv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_three_sphere_goes_extinct_at_a_quarter() {
        let f = [EinsteinFactor::round_sphere(3)];
        assert_eq!(EinsteinProductState::extinction_time(&f), Some(0.25));
        match einstein_product_state(&f, 0.25) {
            Err(Error::Extinction { extinction_time }) => assert_eq!(extinction_time, 0.25),
            other => panic!("{other:?}"),
        }
        let (_, c) = einstein_product_state(&f, 0.0).unwrap();
        assert!((c.norm_rm - 12f64.sqrt()).abs() < 1e-14);
        assert!((c.norm_ric - 2.0 * 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn flat_factor_is_static() {
        let f = [EinsteinFactor::new(4, 0.0, 0.0, 2.0)];
        let (s, c) = einstein_product_state(&f, 1e6).unwrap();
        assert_eq!(s.scales, vec![2.0]);
        assert_eq!(c.norm_ric, 0.0);
    }

    #[test]
    fn small_ricci_factor_doubles_at_one_over_four_epsilon() {
        let eps = 0.01;
        let f = [EinsteinFactor::new(4, eps, 100.0, 1.0)];
        let (_, c) = einstein_product_state(&f, 25.0).unwrap();
        assert!((c.norm_rm - 200.0).abs() < 1e-10);
        let (_, c) = einstein_product_state(&f, 10.0).unwrap();
        assert!((c.norm_rm - 100.0 / (1.0 - 0.02 * 10.0)).abs() < 1e-10);
    }
}
