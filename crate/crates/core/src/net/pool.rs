use rand::seq::index;
use rand::Rng;

use super::config::Sigmoid;
use crate::plasticity::{
    above_avg_hebb_update, balanced_hebb_update, ico_update, sliding_update, AnnealParams, AverageParams, IcoParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    Big,
    /// The conjecture colour (yellow, or magenta in the control).
    Color,
    Left,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Big, Feature::Color, Feature::Left];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Where a pool sits in the architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolRole {
    /// Layer `n` of the sharpening chain for one feature; layer 0 is the
    /// reflex layer fed by the reservoir.
    Chain(Feature, usize),
    /// Conjunction pool 1 or 2.
    And(usize),
    /// Output of the feed-forward Big chain combined with the conjecture.
    Big3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// Reservoir features.
    Features,
    Pool(usize),
    /// Two pools concatenated; half of every neuron's inputs come from each.
    Pair(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rule {
    Ico(IcoParams),
    AboveAverage { avg: AverageParams, anneal: AnnealParams },
    Balanced { avg: AverageParams, anneal: AnnealParams },
}

impl Rule {
    fn averages(&self) -> Option<&AverageParams> {
        match self {
            Rule::Ico(_) => None,
            Rule::AboveAverage { avg, .. } | Rule::Balanced { avg, .. } => Some(avg),
        }
    }

    fn anneal_params(&self) -> Option<AnnealParams> {
        match *self {
            Rule::Ico(_) => None,
            Rule::AboveAverage { anneal, .. } | Rule::Balanced { anneal, .. } => Some(anneal),
        }
    }
}

/// One dendritic branch of every neuron in a pool: sparse wiring, weights
/// and learning state.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub rule: Rule,
    pub source: Source,
    pub fan_in: usize,
    /// `neurons × fan_in` indices into the source vector.
    pub indices: Vec<u32>,
    pub weights: Vec<f32>,
    /// Per-neuron learning rate (unused by ICO).
    pub mu: Vec<f32>,
    /// Sliding average of every source channel.
    pub u_avg: Vec<f32>,
    /// Sliding average of every neuron's output.
    pub v_avg: Vec<f32>,
}

impl Branch {
    /// Wires `neurons` neurons to a source of `source_len` channels. For a
    /// pair source the first and second halves of the fan-in are drawn from
    /// the two halves of the concatenated input.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        rng: &mut R,
        rule: Rule,
        source: Source,
        source_len: usize,
        neurons: usize,
        fan_in: usize,
        w0: f32,
        mu0: f32,
    ) -> Self {
        let mut indices = Vec::with_capacity(neurons * fan_in);
        for _ in 0..neurons {
            match source {
                Source::Pair(..) => {
                    let half = source_len / 2;
                    indices.extend(index::sample(rng, half, fan_in / 2).into_iter().map(|i| i as u32));
                    indices.extend(index::sample(rng, half, fan_in / 2).into_iter().map(|i| (i + half) as u32));
                }
                _ => indices.extend(index::sample(rng, source_len, fan_in).into_iter().map(|i| i as u32)),
            }
        }
        let (u_avg, v_avg) = if rule.averages().is_some() {
            (vec![0.0; source_len], vec![0.0; neurons])
        } else {
            (Vec::new(), Vec::new())
        };
        Branch {
            rule,
            source,
            fan_in,
            indices,
            weights: vec![w0; neurons * fan_in],
            mu: vec![mu0; neurons],
            u_avg,
            v_avg,
        }
    }

    pub fn neurons(&self) -> usize {
        self.mu.len()
    }

    pub fn neuron_weights(&self, j: usize) -> &[f32] {
        &self.weights[j * self.fan_in..(j + 1) * self.fan_in]
    }

    pub fn neuron_indices(&self, j: usize) -> &[u32] {
        &self.indices[j * self.fan_in..(j + 1) * self.fan_in]
    }

    /// `v_j = f(ω_jᵀ u_j)` for every neuron.
    pub fn forward(&self, input: &[f32], f: &Sigmoid, out: &mut [f32]) {
        for (j, o) in out.iter_mut().enumerate() {
            let w = self.neuron_weights(j);
            let idx = self.neuron_indices(j);
            let y: f32 = w.iter().zip(idx).map(|(&wk, &k)| wk * input[k as usize]).sum();
            *o = f.eval(y);
        }
    }

    /// Advances the input and output histories by one presentation.
    pub fn update_averages(&mut self, input: &[f32], v: &[f32]) {
        if let Some(p) = self.rule.averages().copied() {
            for (a, &x) in self.u_avg.iter_mut().zip(input) {
                *a = sliding_update(*a, x, p.g_u);
            }
            for (a, &x) in self.v_avg.iter_mut().zip(v) {
                *a = sliding_update(*a, x, p.g_v);
            }
        }
    }

    /// Hebbian-type update of every neuron against the shared pool output `v`.
    pub fn hebbian_update(&mut self, input: &[f32], v: &[f32]) {
        let n = self.fan_in;
        let mut u = vec![0.0f32; n];
        let mut a = vec![0.0f32; n];
        for (j, &vj) in v.iter().enumerate().take(self.neurons()) {
            let idx = &self.indices[j * n..(j + 1) * n];
            for (k, &i) in idx.iter().enumerate() {
                u[k] = input[i as usize];
                a[k] = self.u_avg[i as usize];
            }
            let w = &mut self.weights[j * n..(j + 1) * n];
            match &self.rule {
                Rule::AboveAverage { avg, .. } => above_avg_hebb_update(w, &u, &a, vj, self.v_avg[j], avg, self.mu[j]),
                Rule::Balanced { avg, .. } => balanced_hebb_update(w, &u, &a, vj, self.v_avg[j], avg, self.mu[j]),
                Rule::Ico(_) => {}
            }
        }
    }

    /// Error-driven update of every neuron. Returns whether any weight moved.
    pub fn ico_update(&mut self, input: &[f32], required: bool, present: bool) -> bool {
        let Rule::Ico(p) = self.rule else {
            return false;
        };
        if required == present {
            return false;
        }
        let n = self.fan_in;
        let mut u = vec![0.0f32; n];
        let mut changed = false;
        for j in 0..self.neurons() {
            for (k, &i) in self.indices[j * n..(j + 1) * n].iter().enumerate() {
                u[k] = input[i as usize];
            }
            changed |= ico_update(&mut self.weights[j * n..(j + 1) * n], &u, required, present, &p);
        }
        changed
    }

    /// Decays each neuron's rate when this branch's own output exceeds Θ.
    pub fn anneal(&mut self, branch_out: &[f32]) {
        if let Some(p) = self.rule.anneal_params() {
            for (mu, &v) in self.mu.iter_mut().zip(branch_out) {
                *mu = crate::plasticity::anneal(*mu, v, p);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pool {
    pub name: String,
    pub role: PoolRole,
    /// One branch, or two for a dual-dendrite pool whose output is the
    /// per-neuron maximum of the branches.
    pub branches: Vec<Branch>,
}

impl Pool {
    pub fn neurons(&self) -> usize {
        self.branches[0].neurons()
    }

    pub fn is_dual(&self) -> bool {
        self.branches.len() > 1
    }
}

/// Output of a two-branch neuron.
#[inline]
pub fn dendrite_forward(v1: f32, v2: f32) -> f32 {
    v1.max(v2)
}

/// A layer-0 pool fires when its summed output strictly exceeds `threshold`.
pub fn motor_trigger(v: &[f32], threshold: f32) -> bool {
    v.iter().map(|&x| x as f64).sum::<f64>() > threshold as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn aa() -> Rule {
        Rule::AboveAverage {
            avg: AverageParams {
                g_u: 0.9,
                r_u: 1.0,
                g_v: 0.9,
                r_v: 0.1,
            },
            anneal: AnnealParams::new(0.995, 0.1),
        }
    }

    #[test]
    fn wiring_is_sampled_without_replacement() {
        let mut rng = crate::seed::rng(1, &[]);
        let b = Branch::new(&mut rng, aa(), Source::Pool(0), 300, 300, 50, 0.01, 5.0);
        for j in 0..300 {
            let set: HashSet<_> = b.neuron_indices(j).iter().collect();
            assert_eq!(set.len(), 50);
            assert!(b.neuron_indices(j).iter().all(|&i| i < 300));
        }
        assert!(b.weights.iter().all(|&w| w == 0.01));
    }

    #[test]
    fn pair_wiring_splits_evenly() {
        let mut rng = crate::seed::rng(2, &[]);
        let b = Branch::new(&mut rng, aa(), Source::Pair(0, 1), 600, 300, 50, 0.01, 0.05);
        for j in 0..300 {
            let idx = b.neuron_indices(j);
            assert_eq!(idx.iter().filter(|&&i| i < 300).count(), 25);
            assert_eq!(idx.iter().filter(|&&i| i >= 300).count(), 25);
        }
        assert_eq!(b.u_avg.len(), 600);
    }

    #[test]
    fn dendrite_is_max() {
        assert_eq!(dendrite_forward(0.9, 0.1), 0.9);
        assert_eq!(dendrite_forward(0.0, 0.0), 0.0);
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let or = (a == 1.0) || (b == 1.0);
            assert_eq!(dendrite_forward(a, b) == 1.0, or);
        }
    }

    #[test]
    fn motor_trigger_is_strict() {
        assert!(motor_trigger(&[0.1; 300], 20.0));
        assert!(!motor_trigger(&[0.05; 300], 20.0));
        let mut v = vec![0.0f32; 300];
        v[..20].iter_mut().for_each(|x| *x = 1.0);
        assert!(!motor_trigger(&v, 20.0));
    }

    #[test]
    fn forward_uses_selected_inputs() {
        let mut rng = crate::seed::rng(3, &[]);
        let mut b = Branch::new(&mut rng, aa(), Source::Pool(0), 4, 2, 2, 0.0, 1.0);
        b.indices = vec![0, 3, 1, 2];
        b.weights = vec![100.0, 100.0, 0.0, 0.0];
        let mut out = [0.0; 2];
        b.forward(&[1.0, 0.0, 0.0, 1.0], &Sigmoid::default(), &mut out);
        let f = Sigmoid::default();
        assert!((out[0] - f.eval(200.0)).abs() < 1e-7);
        assert!((out[1] - f.eval(0.0)).abs() < 1e-9);
    }
}
