//! Fourth-order finite differences on a uniform grid.
//!
//! Weights are kept as small integers over a common denominator so that
//! linear data on a dyadic grid differentiates to exactly zero curvature.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Treatment of one end of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndRule {
    /// Ghost nodes by reflection about the end node (a pole).
    Reflect,
    /// One-sided fourth-order stencils.
    OneSided,
}

#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub h: f64,
    pub left: EndRule,
    pub right: EndRule,
}

impl Stencil {
    pub fn new(h: f64, left: EndRule, right: EndRule) -> Self {
        Self { h, left, right }
    }

    /// Value at index `j + k`, reflecting through a pole end when needed.
    #[inline]
    fn at(&self, f: &[f64], j: usize, k: isize, parity: Parity) -> f64 {
        let last = f.len() as isize - 1;
        let i = j as isize + k;
        if i < 0 {
            debug_assert_eq!(self.left, EndRule::Reflect);
            parity.sign() * f[(-i) as usize]
        } else if i > last {
            debug_assert_eq!(self.right, EndRule::Reflect);
            parity.sign() * f[(2 * last - i) as usize]
        } else {
            f[i as usize]
        }
    }

    /// Exact zeros at a reflecting end forced by symmetry.
    fn pole_zero(&self, len: usize, j: usize) -> bool {
        (j == 0 && self.left == EndRule::Reflect) || (j + 1 == len && self.right == EndRule::Reflect)
    }

    fn centered_ok(&self, len: usize, j: usize) -> bool {
        (j >= 2 || self.left == EndRule::Reflect) && (j + 2 < len || self.right == EndRule::Reflect)
    }

    /// First derivative at an edge node (within two of an end).
    fn d1_edge(&self, f: &[f64], j: usize, parity: Parity) -> f64 {
        let len = f.len();
        let inv = 1.0 / (12.0 * self.h);
        if parity == Parity::Even && self.pole_zero(len, j) {
            0.0
        } else if self.centered_ok(len, j) {
            let v = self.at(f, j, -2, parity) - 8.0 * self.at(f, j, -1, parity)
                + 8.0 * self.at(f, j, 1, parity)
                - self.at(f, j, 2, parity);
            v * inv
        } else if j < 2 {
            let g = |k: usize| f[k];
            let v = if j == 0 {
                -25.0 * g(0) + 48.0 * g(1) - 36.0 * g(2) + 16.0 * g(3) - 3.0 * g(4)
            } else {
                -3.0 * g(0) - 10.0 * g(1) + 18.0 * g(2) - 6.0 * g(3) + g(4)
            };
            v * inv
        } else {
            let g = |k: usize| f[len - 1 - k];
            let v = if j == len - 1 {
                -25.0 * g(0) + 48.0 * g(1) - 36.0 * g(2) + 16.0 * g(3) - 3.0 * g(4)
            } else {
                -3.0 * g(0) - 10.0 * g(1) + 18.0 * g(2) - 6.0 * g(3) + g(4)
            };
            -v * inv
        }
    }

    /// Second derivative at an edge node (within two of an end).
    fn d2_edge(&self, f: &[f64], j: usize, parity: Parity) -> f64 {
        let len = f.len();
        let inv = 1.0 / (12.0 * self.h * self.h);
        let v = if parity == Parity::Odd && self.pole_zero(len, j) {
            0.0
        } else if self.centered_ok(len, j) {
            -self.at(f, j, -2, parity) + 16.0 * self.at(f, j, -1, parity) - 30.0 * f[j]
                + 16.0 * self.at(f, j, 1, parity)
                - self.at(f, j, 2, parity)
        } else {
            let from_left = j < 2;
            let g = |k: usize| if from_left { f[k] } else { f[len - 1 - k] };
            let edge = if from_left { j } else { len - 1 - j };
            if edge == 0 {
                45.0 * g(0) - 154.0 * g(1) + 214.0 * g(2) - 156.0 * g(3) + 61.0 * g(4) - 10.0 * g(5)
            } else {
                10.0 * g(0) - 15.0 * g(1) - 4.0 * g(2) + 14.0 * g(3) - 6.0 * g(4) + g(5)
            }
        };
        v * inv
    }

    fn edges(len: usize) -> impl Iterator<Item = usize> {
        [0, 1, len - 2, len - 1].into_iter()
    }

    /// First derivative of the sampled field.
    pub fn d1(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        let len = f.len();
        let inv = 1.0 / (12.0 * self.h);
        let mut out = vec![0.0; len];
        for (o, w) in out[2..len - 2].iter_mut().zip(f.windows(5)) {
            *o = (w[0] - 8.0 * w[1] + 8.0 * w[3] - w[4]) * inv;
        }
        for j in Self::edges(len) {
            out[j] = self.d1_edge(f, j, parity);
        }
        out
    }

    /// Second derivative of the sampled field.
    pub fn d2(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        let len = f.len();
        let inv = 1.0 / (12.0 * self.h * self.h);
        let mut out = vec![0.0; len];
        for (o, w) in out[2..len - 2].iter_mut().zip(f.windows(5)) {
            *o = (-w[0] + 16.0 * w[1] - 30.0 * w[2] + 16.0 * w[3] - w[4]) * inv;
        }
        for j in Self::edges(len) {
            out[j] = self.d2_edge(f, j, parity);
        }
        out
    }
}

/// Value at a pole of an even function, extrapolated from the three nearest
/// interior samples as a quadratic in the squared distance to the pole.
pub fn extrapolate_even(dist: [f64; 3], values: [f64; 3]) -> f64 {
    if values[0] == values[1] && values[1] == values[2] {
        return values[0];
    }
    let u = dist.map(|d| d * d);
    let mut acc = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for k in 0..3 {
            if k != i {
                w *= (0.0 - u[k]) / (u[i] - u[k]);
            }
        }
        acc += w * values[i];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(x: f64) -> f64 {
        1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x.powi(3) + 0.1 * x.powi(4)
    }
    fn dpoly(x: f64) -> f64 {
        -2.0 + x - 0.75 * x * x + 0.4 * x.powi(3)
    }
    fn ddpoly(x: f64) -> f64 {
        1.0 - 1.5 * x + 1.2 * x * x
    }

    #[test]
    fn quartics_are_differentiated_exactly_everywhere() {
        let h = 0.1;
        let xs: Vec<f64> = (0..12).map(|j| j as f64 * h).collect();
        let f: Vec<f64> = xs.iter().map(|&x| poly(x)).collect();
        let st = Stencil::new(h, EndRule::OneSided, EndRule::OneSided);
        let d1 = st.d1(&f, Parity::Even);
        let d2 = st.d2(&f, Parity::Even);
        for (j, &x) in xs.iter().enumerate() {
            assert!((d1[j] - dpoly(x)).abs() < 1e-10, "d1 at {j}");
            assert!((d2[j] - ddpoly(x)).abs() < 1e-8, "d2 at {j}");
        }
    }

    #[test]
    fn reflection_matches_odd_and_even_extensions() {
        let h = std::f64::consts::PI / 64.0;
        let xs: Vec<f64> = (0..=64).map(|j| j as f64 * h).collect();
        let s: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let c: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let st = Stencil::new(h, EndRule::Reflect, EndRule::Reflect);
        let ds = st.d1(&s, Parity::Odd);
        let dds = st.d2(&s, Parity::Odd);
        let dc = st.d1(&c, Parity::Even);
        for (j, &x) in xs.iter().enumerate() {
            assert!((ds[j] - x.cos()).abs() < 1e-6);
            assert!((dds[j] + x.sin()).abs() < 1e-6);
            assert!((dc[j] + x.sin()).abs() < 1e-6);
        }
        assert_eq!(dds[0], 0.0);
        assert_eq!(dc[0], 0.0);
    }

    #[test]
    fn linear_data_on_dyadic_grid_has_exactly_zero_second_derivative() {
        let h = 1.0 / 16.0;
        let f: Vec<f64> = (0..200).map(|j| j as f64 * h).collect();
        let st = Stencil::new(h, EndRule::Reflect, EndRule::OneSided);
        assert!(st.d2(&f, Parity::Odd).iter().all(|&v| v == 0.0));
        assert!(st.d1(&f, Parity::Odd).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn even_extrapolation_is_exact_for_quadratics_in_distance_squared() {
        let f = |d: f64| 3.0 - 2.0 * d * d + 0.5 * d.powi(4);
        let d = [0.1, 0.2, 0.3];
        let v = extrapolate_even(d, d.map(f));
        assert!((v - 3.0).abs() < 1e-12);
    }
}
