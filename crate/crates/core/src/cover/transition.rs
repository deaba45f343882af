use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Degree-7 smoothstep `S(u) = 35u⁴ - 84u⁵ + 70u⁶ - 20u⁷` and its derivatives.
fn smoothstep(u: f64, m: usize) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return if m == 0 && u > 1.0 { 1.0 } else { 0.0 };
    }
    let v = 1.0 - u;
    match m {
        0 => u.powi(4) * (35.0 - 84.0 * u + 70.0 * u * u - 20.0 * u.powi(3)),
        1 => 140.0 * (u * v).powi(3),
        2 => 420.0 * (u * v).powi(2) * (1.0 - 2.0 * u),
        3 => 840.0 * u * v * (1.0 - 5.0 * u * v),
        _ => panic!("derivative order {m} not available"),
    }
}

/// C³ profile equal to 1 on `(-∞, a]`, 0 on `[b, ∞)` and decreasing in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub a: f64,
    pub b: f64,
    /// Measured `max |ψ̂^{(m)}|` for `m = 1, 2, 3`.
    pub bounds: [f64; 3],
}

impl Transition {
    pub fn value(&self, t: f64) -> f64 {
        1.0 - smoothstep((t - self.a) / (self.b - self.a), 0)
    }

    /// `m`-th derivative, `m ≤ 3`.
    pub fn derivative(&self, t: f64, m: usize) -> f64 {
        if m == 0 {
            return self.value(t);
        }
        let w = self.b - self.a;
        -smoothstep((t - self.a) / w, m) / w.powi(m as i32)
    }

    /// `D₁ + D₂ + D₃`, the constant bounding `|ψ̂'| + |ψ̂''| + |ψ̂'''|`.
    pub fn budget(&self) -> f64 {
        self.bounds.iter().sum()
    }
}

/// Builds the transition on `[a, b]` and measures its derivative bounds on a
/// dense sample of the transition interval.
pub fn smooth_transition(a: f64, b: f64) -> Transition {
    assert!(a < b, "transition needs a < b");
    let mut t = Transition { a, b, bounds: [0.0; 3] };
    const SAMPLES: usize = 20_000;
    let mut bounds = [0.0f64; 3];
    for k in 0..=SAMPLES {
        let x = a + (b - a) * k as f64 / SAMPLES as f64;
        for (m, bound) in bounds.iter_mut().enumerate() {
            *bound = bound.max(t.derivative(x, m + 1).abs());
        }
    }
    t.bounds = bounds;
    t
}

/// Transition used by the ball cutoffs: 1 below 1/4, 0 above 1/3.
pub fn cutoff_transition() -> Transition {
    static CUTOFF: OnceLock<Transition> = OnceLock::new();
    *CUTOFF.get_or_init(|| smooth_transition(0.25, 1.0 / 3.0))
}
