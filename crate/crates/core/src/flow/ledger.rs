use serde::{Deserialize, Serialize};

use crate::cover::GoodCover;

/// FNV-1a hash of the cover's JSON form.
pub fn cover_fingerprint(cover: &GoodCover) -> u64 {
    let bytes = serde_json::to_vec(cover).expect("covers serialize");
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Per-ball running sups and time integrals, sampled at snapshot times.
///
/// At each recorded time `k`, `sup_rm[k][i]` is the sup over `B̂_i × [0, t_k]`
/// of `|Rm|`, and the three integrals are trapezoid accumulations of the
/// per-step sups over `B̂_i` of `|Ric|`, `χ|∇Ric|` and `χ²|∇²Ric|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallLedger {
    pub fingerprint: u64,
    pub times: Vec<f64>,
    pub sup_rm: Vec<Vec<f64>>,
    pub int_ric: Vec<Vec<f64>>,
    pub int_dric: Vec<Vec<f64>>,
    pub int_d2ric: Vec<Vec<f64>>,
}

/// Running accumulator behind a [`BallLedger`].
#[derive(Clone, Debug)]
pub(crate) struct LedgerBuilder {
    /// Node range `[lo, hi)` of each `B̂_i`, or `None` for homogeneous models.
    ranges: Option<Vec<(usize, usize)>>,
    balls: usize,
    last_t: f64,
    prev: [Vec<f64>; 3],
    run_sup: Vec<f64>,
    acc: [Vec<f64>; 3],
    out: BallLedger,
}

/// Per-node (or homogeneous) integrands for one time level.
pub(crate) enum Integrands<'a> {
    Nodal { rm: &'a [f64], ric: &'a [f64], dric: &'a [f64], d2ric: &'a [f64] },
    Uniform([f64; 4]),
}

impl LedgerBuilder {
    /// `s` are the initial arclength positions of the nodes (`None` for
    /// homogeneous models).
    pub(crate) fn new(cover: &GoodCover, s: Option<&[f64]>) -> Self {
        let balls = cover.balls.len();
        let ranges = s.map(|s| {
            (0..balls)
                .map(|i| {
                    let (a, b) = cover.hat_interval(i);
                    (s.partition_point(|&x| x < a), s.partition_point(|&x| x <= b))
                })
                .collect()
        });
        let zeros = vec![0.0; balls];
        Self {
            ranges,
            balls,
            last_t: 0.0,
            prev: [zeros.clone(), zeros.clone(), zeros.clone()],
            run_sup: zeros.clone(),
            acc: [zeros.clone(), zeros.clone(), zeros],
            out: BallLedger {
                fingerprint: cover_fingerprint(cover),
                times: Vec::new(),
                sup_rm: Vec::new(),
                int_ric: Vec::new(),
                int_dric: Vec::new(),
                int_d2ric: Vec::new(),
            },
        }
    }

    fn ball_sups(&self, f: &Integrands) -> [Vec<f64>; 4] {
        match (f, &self.ranges) {
            (Integrands::Uniform(v), _) => v.map(|x| vec![x; self.balls]),
            (Integrands::Nodal { rm, ric, dric, d2ric }, Some(r)) => [*rm, *ric, *dric, *d2ric].map(|v| {
                r.iter().map(|&(lo, hi)| v[lo..hi].iter().fold(0.0, |m: f64, &x| m.max(x))).collect()
            }),
            (Integrands::Nodal { .. }, None) => unreachable!("nodal integrands need node ranges"),
        }
    }

    pub(crate) fn start(&mut self, t: f64, f: &Integrands) {
        let [rm, ric, dric, d2ric] = self.ball_sups(f);
        self.last_t = t;
        self.run_sup = rm;
        self.prev = [ric, dric, d2ric];
        self.record(t);
    }

    pub(crate) fn advance(&mut self, t: f64, f: &Integrands) {
        let [rm, ric, dric, d2ric] = self.ball_sups(f);
        let dt = t - self.last_t;
        for (i, v) in rm.iter().enumerate() {
            self.run_sup[i] = self.run_sup[i].max(*v);
        }
        for (q, cur) in [ric, dric, d2ric].into_iter().enumerate() {
            for i in 0..self.balls {
                self.acc[q][i] += 0.5 * dt * (self.prev[q][i] + cur[i]);
            }
            self.prev[q] = cur;
        }
        self.last_t = t;
    }

    pub(crate) fn record(&mut self, t: f64) {
        if self.out.times.last() == Some(&t) {
            return;
        }
        self.out.times.push(t);
        self.out.sup_rm.push(self.run_sup.clone());
        self.out.int_ric.push(self.acc[0].clone());
        self.out.int_dric.push(self.acc[1].clone());
        self.out.int_d2ric.push(self.acc[2].clone());
    }

    pub(crate) fn finish(self) -> BallLedger {
        self.out
    }
}
