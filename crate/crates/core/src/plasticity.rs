//! Learning rules and their learning-rate annealing.
//!
//! Every rule is an in-place update of one neuron's weight slice given the
//! gathered inputs `u` (and, where needed, the sliding averages `U` of those
//! same input channels). Weights never go below zero.

use serde::{Deserialize, Serialize};

/// Reflex-avoidance (input correlation) learning parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcoParams {
    pub mu_pos: f32,
    pub mu_neg: f32,
    /// Inputs at or below this value do not take part in learning.
    pub phi: f32,
}

impl Default for IcoParams {
    fn default() -> Self {
        IcoParams {
            mu_pos: 80.0,
            mu_neg: 34.0,
            phi: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    /// Output level above which the learning rate is decayed.
    pub theta: f32,
    /// Decay factor, `0 < c < 1`.
    pub c: f32,
}

impl AnnealParams {
    pub const fn new(theta: f32, c: f32) -> Self {
        AnnealParams { theta, c }
    }
}

/// Per-neuron learning rate together with its annealing schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealState {
    pub mu: f32,
    pub params: AnnealParams,
}

impl AnnealState {
    pub fn new(mu: f32, params: AnnealParams) -> Self {
        AnnealState { mu, params }
    }

    /// Decays `mu` if `v` exceeds the threshold. Returns whether it did.
    pub fn anneal(&mut self, v: f32) -> bool {
        let fire = v > self.params.theta;
        if fire {
            self.mu = decay(self.mu, self.params.c);
        }
        fire
    }
}

/// `mu ← c·mu` if `v > Θ`.
pub fn anneal(mu: f32, v: f32, p: AnnealParams) -> f32 {
    if v > p.theta {
        decay(mu, p.c)
    } else {
        mu
    }
}

/// Learning rates below this are flushed to zero. Weights start at 0.01 and
/// inputs are at most 1, so such a rate moves nothing representable, while
/// the subnormal products it would feed are very slow.
pub const MIN_RATE: f32 = 1e-20;

/// `c·mu`, flushed to zero below [`MIN_RATE`].
#[inline]
pub fn decay(mu: f32, c: f32) -> f32 {
    let m = c * mu;
    if m >= MIN_RATE {
        m
    } else {
        0.0
    }
}

/// Exponentially weighted history, `value ← g·value + (1−g)·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlidingAverage {
    pub value: f32,
    pub g: f32,
}

impl SlidingAverage {
    pub fn new(g: f32) -> Self {
        SlidingAverage { value: 0.0, g }
    }

    pub fn update(&mut self, x: f32) -> f32 {
        self.value = sliding_update(self.value, x, self.g);
        self.value
    }
}

#[inline]
pub fn sliding_update(value: f32, x: f32, g: f32) -> f32 {
    g * value + (1.0 - g) * x
}

/// Amount by which `x` exceeds `r·avg`, or 0.
#[inline]
pub fn above_average(x: f32, avg: f32, r: f32) -> f32 {
    let t = r * avg;
    if x > t {
        x - t
    } else {
        0.0
    }
}

#[inline]
pub fn ico_input(u: f32, phi: f32) -> f32 {
    if u > phi {
        u
    } else {
        0.0
    }
}

/// Which way an ICO update goes for a (required, present) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IcoSignal {
    Potentiate,
    Depress,
    Hold,
}

impl IcoSignal {
    pub fn new(required: bool, present: bool) -> Self {
        match (required, present) {
            (true, false) => IcoSignal::Potentiate,
            (false, true) => IcoSignal::Depress,
            _ => IcoSignal::Hold,
        }
    }
}

/// Grows weights when the reaction was required but missing, shrinks them
/// when it fired without being required. Returns whether any weight moved.
pub fn ico_update(w: &mut [f32], u: &[f32], required: bool, present: bool, p: &IcoParams) -> bool {
    debug_assert_eq!(w.len(), u.len());
    let step = match IcoSignal::new(required, present) {
        IcoSignal::Potentiate => p.mu_pos,
        IcoSignal::Depress => -p.mu_neg,
        IcoSignal::Hold => return false,
    };
    let mut changed = false;
    for (wi, &ui) in w.iter_mut().zip(u) {
        let x = ico_input(ui, p.phi);
        if x != 0.0 {
            let before = *wi;
            *wi = (*wi + step * x).max(0.0);
            changed |= *wi != before;
        }
    }
    changed
}

/// Plain Hebbian step `w ← w + mu·u·v`.
pub fn hebb_update(w: &mut [f32], u: &[f32], v: f32, mu: f32) {
    debug_assert_eq!(w.len(), u.len());
    let s = mu * v;
    if s == 0.0 {
        return;
    }
    for (wi, &ui) in w.iter_mut().zip(u) {
        *wi = (*wi + s * ui).max(0.0);
    }
}

/// Sliding-average parameters for the two thresholded Hebbian rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageParams {
    pub g_u: f32,
    pub r_u: f32,
    pub g_v: f32,
    pub r_v: f32,
}

/// Potentiates inputs above their own history, but only while the output is
/// above its history: `w ← w + mu·u^Δ·H(v^Δ)` with `H(0) = 0`.
pub fn above_avg_hebb_update(w: &mut [f32], u: &[f32], u_avg: &[f32], v: f32, v_avg: f32, p: &AverageParams, mu: f32) {
    debug_assert!(w.len() == u.len() && u.len() == u_avg.len());
    if mu == 0.0 || above_average(v, v_avg, p.r_v) <= 0.0 {
        return;
    }
    for ((wi, &ui), &ai) in w.iter_mut().zip(u).zip(u_avg) {
        *wi += mu * above_average(ui, ai, p.r_u);
    }
}

/// Like [`above_avg_hebb_update`] but the output term is the sign of the
/// unclamped `v − r_V·V`, so weights shrink when the output is below its
/// history. Clamped at zero.
pub fn balanced_hebb_update(w: &mut [f32], u: &[f32], u_avg: &[f32], v: f32, v_avg: f32, p: &AverageParams, mu: f32) {
    debug_assert!(w.len() == u.len() && u.len() == u_avg.len());
    let d = v - p.r_v * v_avg;
    let sign = if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        return;
    };
    if mu == 0.0 {
        return;
    }
    for ((wi, &ui), &ai) in w.iter_mut().zip(u).zip(u_avg) {
        let du = above_average(ui, ai, p.r_u);
        if du != 0.0 {
            *wi = (*wi + sign * mu * du).max(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    const AA: AverageParams = AverageParams {
        g_u: 0.9,
        r_u: 1.0,
        g_v: 0.9,
        r_v: 0.1,
    };
    const BAL: AverageParams = AverageParams {
        g_u: 0.9,
        r_u: 1.0,
        g_v: 0.9,
        r_v: 1.0,
    };

    fn close(a: f32, b: f32) -> bool {
        (a - b).abs() <= 1e-5 * (1.0 + b.abs())
    }

    #[test]
    fn ico_potentiates_missing_reaction() {
        let mut w = [0.0];
        assert!(ico_update(&mut w, &[0.5], true, false, &IcoParams::default()));
        assert_eq!(w[0], 40.0);
    }

    #[test]
    fn ico_depression_clamps_at_zero() {
        let mut w = [10.0];
        ico_update(&mut w, &[0.5], false, true, &IcoParams::default());
        assert_eq!(w[0], 0.0);
    }

    #[test]
    fn ico_ignores_subthreshold_inputs() {
        let p = IcoParams::default();
        for (req, pres) in [(true, false), (false, true), (true, true), (false, false)] {
            let mut w = [3.0];
            assert!(!ico_update(&mut w, &[0.005], req, pres, &p));
            assert_eq!(w[0], 3.0);
        }
        let mut w = [3.0];
        ico_update(&mut w, &[0.01], true, false, &p);
        assert_eq!(w[0], 3.0, "threshold is strict");
    }

    #[test]
    fn ico_holds_when_reaction_matches() {
        let mut w = [1.0, 2.0];
        assert!(!ico_update(&mut w, &[1.0, 1.0], true, true, &IcoParams::default()));
        assert!(!ico_update(&mut w, &[1.0, 1.0], false, false, &IcoParams::default()));
        assert_eq!(w, [1.0, 2.0]);
    }

    #[test]
    fn hebb_examples() {
        let mut w = [0.0];
        hebb_update(&mut w, &[0.5], 0.8, 1.0);
        assert!(close(w[0], 0.4));
        let mut w = [0.3];
        hebb_update(&mut w, &[0.5], 0.0, 1.0);
        assert_eq!(w[0], 0.3);
        hebb_update(&mut w, &[0.5], 0.9, 0.0);
        assert_eq!(w[0], 0.3);
    }

    #[test]
    fn anneal_examples() {
        let p = AnnealParams::new(0.995, 0.1);
        assert!(close(anneal(5.0, 0.996, p), 0.5));
        assert_eq!(anneal(5.0, 0.9, p), 5.0);
        assert_eq!(anneal(5.0, 0.995, p), 5.0, "threshold is strict");
        let mut s = AnnealState::new(5.0, p);
        for k in 1..=6 {
            assert!(s.anneal(1.0));
            assert!(close(s.mu, 5.0 * 0.1f32.powi(k)));
        }
    }

    #[test]
    fn decay_flushes_tiny_rates() {
        let mut mu = 1.0f32;
        for _ in 0..2000 {
            mu = decay(mu, 0.9);
            assert!(mu == 0.0 || mu >= MIN_RATE);
        }
        assert_eq!(mu, 0.0);
        assert_eq!(decay(MIN_RATE * 2.0, 0.5), MIN_RATE);
        let mut w = [0.01f32];
        hebb_update(&mut w, &[1.0], 1.0, MIN_RATE);
        assert_eq!(w[0], 0.01);
    }

    #[test]
    fn sliding_examples() {
        assert!(close(sliding_update(0.0, 1.0, 0.9), 0.1));
        assert_eq!(sliding_update(0.3, 0.3, 0.9), 0.3);
        let mut s = SlidingAverage::new(0.9);
        let mut prev = s.value;
        for _ in 0..200 {
            let v = s.update(0.5);
            assert!(v >= prev && v <= 0.5);
            prev = v;
        }
        assert!(close(prev, 0.5));
    }

    #[test]
    fn above_average_examples() {
        let mut w = [0.01];
        above_avg_hebb_update(&mut w, &[0.8], &[0.5], 0.7, 0.5, &AA, 5.0);
        assert!(close(w[0], 0.01 + 1.5));
        let mut w = [0.01];
        above_avg_hebb_update(&mut w, &[0.4], &[0.5], 0.7, 0.5, &AA, 5.0);
        assert_eq!(w[0], 0.01);
        let mut w = [0.01];
        above_avg_hebb_update(&mut w, &[1.0], &[0.0], 0.05, 0.5, &AA, 5.0);
        assert_eq!(w[0], 0.01, "v at or below r_V·V blocks learning");
        above_avg_hebb_update(&mut w, &[1.0], &[0.0], 0.05, 0.0, &AA, 5.0);
        assert!(w[0] > 0.01, "v^Δ > 0 from empty history lets learning start");
    }

    #[test]
    fn bootstrap_from_empty_history() {
        let mut w = [0.01; 4];
        above_avg_hebb_update(&mut w, &[1.0; 4], &[0.0; 4], 4.6e-5, 0.0, &AA, 5.0);
        assert!(w.iter().all(|&x| x > 0.01));
    }

    #[test]
    fn balanced_examples() {
        // u = 0.8 over an average of 0.5 gives u^Δ = 0.3.
        let mut w = [0.5];
        balanced_hebb_update(&mut w, &[0.8], &[0.5], 0.8, 0.5, &BAL, 0.05);
        assert!(close(w[0], 0.515));
        let mut w = [0.5];
        balanced_hebb_update(&mut w, &[0.8], &[0.5], 0.2, 0.5, &BAL, 0.05);
        assert!(close(w[0], 0.485));
        let mut w = [0.01];
        balanced_hebb_update(&mut w, &[0.8], &[0.5], 0.2, 0.5, &BAL, 0.05);
        assert_eq!(w[0], 0.0);
        let mut w = [0.5];
        balanced_hebb_update(&mut w, &[0.8], &[0.5], 0.5, 0.5, &BAL, 0.05);
        assert_eq!(w[0], 0.5);
    }

    #[test]
    fn ico_toy_problem_converges() {
        // 300 neurons, one informative binary input and one noise input.
        let (n, f) = (300usize, 20.0f32);
        let p = IcoParams::default();
        let sig = |y: f32| 1.0 / (1.0 + (-0.1 * (y - 100.0)).exp());
        let mut rng = crate::seed::rng(3, &[]);
        let mut w = vec![0.0f32; n * 2];
        let mut last_error = None;
        let mut last_change = None;
        for t in 0..600 {
            let x = rng.gen_bool(0.5);
            let u: Vec<[f32; 2]> = (0..n).map(|_| [x as u8 as f32, rng.gen::<f32>()]).collect();
            let total: f32 = (0..n).map(|j| sig(w[2 * j] * u[j][0] + w[2 * j + 1] * u[j][1])).sum();
            let present = total > f;
            if present != x {
                last_error = Some(t);
            }
            for j in 0..n {
                if ico_update(&mut w[2 * j..2 * j + 2], &u[j], x, present, &p) {
                    last_change = Some(t);
                }
            }
        }
        let e = last_error.expect("untrained pool must err");
        assert!(e < 200, "last error at {e}");
        assert!(last_change.unwrap() < 200);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn weights_stay_non_negative(seed in any::<u64>()) {
            let mut rng = crate::seed::rng(seed, &[]);
            let n = 8;
            let mut w: Vec<f32> = (0..n).map(|_| rng.gen::<f32>() * 0.02).collect();
            let ico = IcoParams::default();
            for _ in 0..100_000 / 16 {
                let u: Vec<f32> = (0..n).map(|_| rng.gen()).collect();
                let a: Vec<f32> = (0..n).map(|_| rng.gen()).collect();
                let (v, va): (f32, f32) = (rng.gen(), rng.gen());
                match rng.gen_range(0..4) {
                    0 => { ico_update(&mut w, &u, rng.gen(), rng.gen(), &ico); }
                    1 => hebb_update(&mut w, &u, v, rng.gen::<f32>() * 2.0),
                    2 => above_avg_hebb_update(&mut w, &u, &a, v, va, &AA, rng.gen::<f32>() * 5.0),
                    _ => balanced_hebb_update(&mut w, &u, &a, v, va, &BAL, rng.gen::<f32>()),
                }
                prop_assert!(w.iter().all(|&x| x >= 0.0));
            }
        }

        #[test]
        fn annealing_never_increases(theta in 0.01f32..0.999, c in 0.01f32..0.99, vs in prop::collection::vec(0.0f32..1.0, 1..200)) {
            let mut s = AnnealState::new(1.0, AnnealParams::new(theta, c));
            let mut prev = s.mu;
            for v in vs {
                s.anneal(v);
                prop_assert!(s.mu <= prev && s.mu >= 0.0);
                prev = s.mu;
            }
        }

        #[test]
        fn sliding_average_contracts(start in 0.0f32..1.0, target in 0.0f32..1.0, g in 0.0f32..0.99) {
            let mut v = start;
            for _ in 0..50 {
                let next = sliding_update(v, target, g);
                let expect = g * (v - target).abs();
                prop_assert!(((next - target).abs() - expect).abs() <= 1e-6);
                prop_assert!((0.0..=1.0).contains(&next));
                v = next;
            }
        }
    }
}
