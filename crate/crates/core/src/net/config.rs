use serde::{Deserialize, Serialize};

use super::NetError;
use crate::plasticity::{AnnealParams, AverageParams, IcoParams};
use crate::world::ColorClass;

/// `f(y) = 1 / (1 + e^{−a(y−b)})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigmoid {
    pub a: f32,
    pub b: f32,
}

impl Default for Sigmoid {
    fn default() -> Self {
        Sigmoid { a: 0.1, b: 100.0 }
    }
}

impl Sigmoid {
    #[inline]
    pub fn eval(&self, y: f32) -> f32 {
        1.0 / (1.0 + (-self.a * (y - self.b)).exp())
    }
}

/// Conventional Hebbian learning on the feedback connections.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HebbParams {
    pub mu0: f32,
    pub anneal: AnnealParams,
}

impl Default for HebbParams {
    fn default() -> Self {
        HebbParams {
            mu0: 1.0,
            anneal: AnnealParams::new(0.99, 0.9),
        }
    }
}

/// Above-average Hebbian learning on the feed-forward paths above layer 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AboveAverageParams {
    /// Initial rate for sharpening layers 1–3 and the feed-forward branch of Big 3.
    pub mu0_layer123: f32,
    pub mu0_and1: f32,
    pub mu0_and2: f32,
    pub avg: AverageParams,
    /// Annealing of the first sharpening layer.
    pub anneal_layer1: AnnealParams,
    /// Annealing of every other above-average pool.
    pub anneal_rest: AnnealParams,
    pub w0: f32,
}

impl Default for AboveAverageParams {
    fn default() -> Self {
        AboveAverageParams {
            mu0_layer123: 5.0,
            mu0_and1: 0.05,
            mu0_and2: 0.025,
            avg: AverageParams {
                g_u: 0.9,
                r_u: 1.0,
                g_v: 0.9,
                r_v: 0.1,
            },
            anneal_layer1: AnnealParams::new(0.99, 0.9),
            anneal_rest: AnnealParams::new(0.995, 0.1),
            w0: 0.01,
        }
    }
}

/// Balanced Hebbian/anti-Hebbian learning on the relational branch of Big 3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalancedParams {
    pub mu0: f32,
    pub avg: AverageParams,
    pub anneal: AnnealParams,
    pub w0: f32,
}

impl Default for BalancedParams {
    fn default() -> Self {
        BalancedParams {
            mu0: 0.05,
            avg: AverageParams {
                g_u: 0.9,
                r_u: 1.0,
                g_v: 0.9,
                r_v: 1.0,
            },
            anneal: AnnealParams::new(0.995, 0.1),
            w0: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    /// Randomized passes over the training set with only layer 0 learning.
    pub ico_passes: usize,
    /// Presentations in the phase where everything learns.
    pub unsupervised_presentations: usize,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        TrainingSchedule {
            ico_passes: 1,
            unsupervised_presentations: 13710,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AanConfig {
    pub seed: u64,
    /// Number of sharpening layers the conjecture stream and Big 3 build on.
    pub depth: usize,
    /// Colour probed by the conjecture stream.
    pub color: ColorClass,
    pub pool_size: usize,
    pub fan_in: usize,
    /// Motor trigger: a layer-0 pool fires when its summed output exceeds this.
    pub motor_threshold: f32,
    pub sigmoid: Sigmoid,
    pub ico: IcoParams,
    pub hebb: HebbParams,
    pub aa: AboveAverageParams,
    pub bal: BalancedParams,
    pub schedule: TrainingSchedule,
}

pub const MAX_DEPTH: usize = 3;

impl Default for AanConfig {
    fn default() -> Self {
        AanConfig {
            seed: 0,
            depth: MAX_DEPTH,
            color: ColorClass::Yellow,
            pool_size: 300,
            fan_in: 50,
            motor_threshold: 20.0,
            sigmoid: Sigmoid::default(),
            ico: IcoParams::default(),
            hebb: HebbParams::default(),
            aa: AboveAverageParams::default(),
            bal: BalancedParams::default(),
            schedule: TrainingSchedule::default(),
        }
    }
}

impl AanConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        if self.depth > MAX_DEPTH {
            return bad(format!("depth {} outside 0..={MAX_DEPTH}", self.depth));
        }
        if self.color == ColorClass::Cyan {
            return bad("conjecture colour must be yellow or magenta".into());
        }
        if self.pool_size == 0 || self.fan_in == 0 || !self.fan_in.is_multiple_of(2) {
            return bad("pool size must be positive and fan-in positive and even".into());
        }
        if self.fan_in > self.pool_size {
            return bad("fan-in exceeds pool size".into());
        }
        for (name, a) in [
            ("hebb", self.hebb.anneal),
            ("aa layer 1", self.aa.anneal_layer1),
            ("aa rest", self.aa.anneal_rest),
            ("bal", self.bal.anneal),
        ] {
            if !(a.c > 0.0 && a.c < 1.0 && a.theta > 0.0 && a.theta < 1.0) {
                return bad(format!("{name} annealing needs 0 < c < 1 and 0 < theta < 1"));
            }
        }
        let rates = [
            self.ico.mu_pos,
            self.ico.mu_neg,
            self.ico.phi,
            self.hebb.mu0,
            self.aa.mu0_layer123,
            self.aa.mu0_and1,
            self.aa.mu0_and2,
            self.bal.mu0,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("learning rates and the ICO threshold must be positive".into());
        }
        if self.schedule.ico_passes == 0 && self.schedule.unsupervised_presentations == 0 {
            return bad("training schedule has zero length".into());
        }
        Ok(())
    }
}
