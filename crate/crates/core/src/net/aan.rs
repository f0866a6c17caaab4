use std::borrow::Cow;

use super::config::AanConfig;
use super::pool::{motor_trigger, Branch, Feature, Pool, PoolRole, Rule, Source};
use super::NetError;
use crate::plasticity::hebb_update;
use crate::reservoir::FEATURE_DIM;
use crate::seed;
use crate::world::ImageLabel;

const STREAM_WIRING: u64 = 11;

/// Dense feedback from every Big 3 neuron onto the second dendrite of every
/// reservoir neuron, with one learning rate shared by the whole pathway.
#[derive(Clone, Debug, PartialEq)]
pub struct Feedback {
    /// `big3 neurons × reservoir neurons`, row-major by Big 3 neuron.
    pub weights: Vec<f32>,
    pub mu: f32,
    pub dim: usize,
}

/// Activations of every pool for one presented image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkState {
    /// Pool outputs, indexed like [`Aan::pools`].
    pub out: Vec<Vec<f32>>,
    /// Per-branch outputs, `branch_out[pool][branch]`.
    pub branch_out: Vec<Vec<Vec<f32>>>,
    /// Motor triggers of the Big, colour and Left reflex pools.
    pub triggers: [bool; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pathway {
    FeedForward,
    Feedback,
}

/// Layer-0 outputs and triggers, recomputed from some reservoir vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer0 {
    pub out: [Vec<f32>; 3],
    pub triggers: [bool; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub run: bool,
    /// Which pass made Big 0 fire, if any.
    pub pathway: Option<Pathway>,
    /// Reflex triggers after the decision (feedback-pass triggers when
    /// feedback was needed).
    pub triggers: [bool; 3],
    pub state: NetworkState,
}

/// Which parts of the network learn during one presentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Learning {
    pub reflex: bool,
    pub associative: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aan {
    config: AanConfig,
    pools: Vec<Pool>,
    layer0: [usize; 3],
    big3: usize,
    feedback: Feedback,
}

fn chain_name(config: &AanConfig, f: Feature, layer: usize) -> String {
    match f {
        Feature::Big => format!("Big {layer}"),
        Feature::Color => format!("{} {layer}", capitalize(config.color.as_str())),
        Feature::Left => format!("Left {layer}"),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

impl Aan {
    pub fn new(config: AanConfig) -> Result<Self, NetError> {
        Self::with_feature_dim(config, FEATURE_DIM)
    }

    /// Builds the pools for `config.depth` and `config.color`. Wiring is a
    /// pure function of `config.seed`.
    pub fn with_feature_dim(config: AanConfig, dim: usize) -> Result<Self, NetError> {
        config.validate()?;
        if dim < config.fan_in {
            return Err(NetError::Config(format!("feature dimension {dim} below fan-in")));
        }
        let (n, fan_in) = (config.pool_size, config.fan_in);
        let d = config.depth;
        let aa = config.aa;
        let mut pools: Vec<Pool> = Vec::new();
        let push = |pools: &mut Vec<Pool>, name: String, role: PoolRole, specs: Vec<(Rule, Source, f32, f32)>| {
            let id = pools.len() as u64;
            let branches = specs
                .into_iter()
                .enumerate()
                .map(|(b, (rule, source, w0, mu0))| {
                    let len = match source {
                        Source::Features => dim,
                        Source::Pool(_) => n,
                        Source::Pair(..) => 2 * n,
                    };
                    let mut rng = seed::rng(config.seed, &[STREAM_WIRING, id, b as u64]);
                    Branch::new(&mut rng, rule, source, len, n, fan_in, w0, mu0)
                })
                .collect();
            pools.push(Pool { name, role, branches });
            id as usize
        };
        let sharpen = |layer: usize, mu0: f32| {
            let anneal = if layer == 1 { aa.anneal_layer1 } else { aa.anneal_rest };
            (Rule::AboveAverage { avg: aa.avg, anneal }, mu0)
        };

        let mut last = [0usize; 3];
        for f in Feature::ALL {
            last[f.index()] = push(
                &mut pools,
                chain_name(&config, f, 0),
                PoolRole::Chain(f, 0),
                vec![(Rule::Ico(config.ico), Source::Features, 0.0, 0.0)],
            );
        }
        let layer0 = last;
        for layer in 1..=d {
            for f in Feature::ALL {
                // The Big chain's top layer is Big 3 itself.
                if f == Feature::Big && layer == d {
                    continue;
                }
                let (rule, mu0) = sharpen(layer, aa.mu0_layer123);
                last[f.index()] = push(
                    &mut pools,
                    chain_name(&config, f, layer),
                    PoolRole::Chain(f, layer),
                    vec![(rule, Source::Pool(last[f.index()]), aa.w0, mu0)],
                );
            }
        }
        let color = capitalize(config.color.as_str());
        let and_rule = Rule::AboveAverage {
            avg: aa.avg,
            anneal: aa.anneal_rest,
        };
        let src = Source::Pair(last[Feature::Color.index()], last[Feature::Left.index()]);
        let and1 = push(
            &mut pools,
            format!("{color}&Left 1"),
            PoolRole::And(1),
            vec![(and_rule, src, aa.w0, aa.mu0_and1)],
        );
        let and2 = push(
            &mut pools,
            format!("{color}&Left 2"),
            PoolRole::And(2),
            vec![(and_rule, Source::Pool(and1), aa.w0, aa.mu0_and2)],
        );
        let (b1_rule, b1_mu) = sharpen(d.max(1), aa.mu0_layer123);
        let bal = Rule::Balanced {
            avg: config.bal.avg,
            anneal: config.bal.anneal,
        };
        let big3 = push(
            &mut pools,
            "Big 3".into(),
            PoolRole::Big3,
            vec![
                (b1_rule, Source::Pool(last[Feature::Big.index()]), aa.w0, b1_mu),
                (bal, Source::Pool(and2), config.bal.w0, config.bal.mu0),
            ],
        );
        let feedback = Feedback {
            weights: vec![0.0; n * dim],
            mu: config.hebb.mu0,
            dim,
        };
        Ok(Aan {
            config,
            pools,
            layer0,
            big3,
            feedback,
        })
    }

    pub fn config(&self) -> &AanConfig {
        &self.config
    }

    pub fn pools(&self) -> &[Pool] {
        &self.pools
    }

    pub(crate) fn pools_mut(&mut self) -> &mut [Pool] {
        &mut self.pools
    }

    pub fn feedback(&self) -> &Feedback {
        &self.feedback
    }

    pub(crate) fn feedback_mut(&mut self) -> &mut Feedback {
        &mut self.feedback
    }

    pub fn feature_dim(&self) -> usize {
        self.feedback.dim
    }

    /// Index of the reflex pool for `f`.
    pub fn layer0(&self, f: Feature) -> usize {
        self.layer0[f.index()]
    }

    pub fn big3(&self) -> usize {
        self.big3
    }

    pub fn find(&self, role: PoolRole) -> Option<usize> {
        self.pools.iter().position(|p| p.role == role)
    }

    /// Pool index of sharpening layer `layer` for `f`, counting Big 3 as the
    /// top of the Big chain.
    pub fn chain(&self, f: Feature, layer: usize) -> Option<usize> {
        if f == Feature::Big && layer == self.config.depth.max(1) && layer > 0 {
            return Some(self.big3);
        }
        self.find(PoolRole::Chain(f, layer))
    }

    /// Ground-truth value of a reflex feature for this architecture.
    pub fn target(&self, f: Feature, label: &ImageLabel) -> bool {
        match f {
            Feature::Big => label.is_big(),
            Feature::Color => label.has_color(self.config.color),
            Feature::Left => label.is_left,
        }
    }

    fn input<'a>(&self, source: Source, features: &'a [f32], out: &'a [Vec<f32>]) -> Cow<'a, [f32]> {
        match source {
            Source::Features => Cow::Borrowed(features),
            Source::Pool(p) => Cow::Borrowed(&out[p]),
            Source::Pair(a, b) => {
                let mut v = Vec::with_capacity(out[a].len() + out[b].len());
                v.extend_from_slice(&out[a]);
                v.extend_from_slice(&out[b]);
                Cow::Owned(v)
            }
        }
    }

    fn check_features(&self, features: &[f32]) {
        assert_eq!(features.len(), self.feature_dim(), "feature vector length");
    }

    /// Feed-forward pass through every pool in topological order.
    pub fn forward_feedforward(&self, features: &[f32]) -> NetworkState {
        let mut state = NetworkState::default();
        self.forward_into(features, &mut state, false);
        state
    }

    fn forward_into(&self, features: &[f32], state: &mut NetworkState, layer0_only: bool) {
        self.check_features(features);
        let n = self.config.pool_size;
        state.out.resize(self.pools.len(), Vec::new());
        state.branch_out.resize(self.pools.len(), Vec::new());
        for (p, pool) in self.pools.iter().enumerate() {
            if layer0_only && !self.layer0.contains(&p) {
                continue;
            }
            let mut outs = std::mem::take(&mut state.branch_out[p]);
            outs.resize(pool.branches.len(), Vec::new());
            for (b, branch) in pool.branches.iter().enumerate() {
                outs[b].resize(n, 0.0);
                let input = self.input(branch.source, features, &state.out);
                branch.forward(&input, &self.config.sigmoid, &mut outs[b]);
            }
            let mut v = std::mem::take(&mut state.out[p]);
            v.clear();
            v.extend_from_slice(&outs[0]);
            for other in &outs[1..] {
                for (a, &b) in v.iter_mut().zip(other) {
                    *a = a.max(b);
                }
            }
            state.out[p] = v;
            state.branch_out[p] = outs;
        }
        for f in Feature::ALL {
            state.triggers[f.index()] = motor_trigger(&state.out[self.layer0(f)], self.config.motor_threshold);
        }
    }

    /// Second-dendrite activation of every reservoir neuron, `f(ω_iᵀ·big3)`.
    pub fn feedback_branch(&self, big3: &[f32]) -> Vec<f32> {
        let dim = self.feedback.dim;
        let mut y = vec![0.0f32; dim];
        for (j, &b) in big3.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let row = &self.feedback.weights[j * dim..(j + 1) * dim];
            for (yi, &w) in y.iter_mut().zip(row) {
                *yi += w * b;
            }
        }
        let f = self.config.sigmoid;
        y.iter_mut().for_each(|v| *v = f.eval(*v));
        y
    }

    /// Reservoir neuron outputs with feedback: `max(x^c_i, f(ω_iᵀ·big3))`.
    pub fn apply_feedback(&self, features: &[f32], big3: &[f32]) -> Vec<f32> {
        self.check_features(features);
        let mut fb = self.feedback_branch(big3);
        for (v, &x) in fb.iter_mut().zip(features) {
            *v = v.max(x);
        }
        fb
    }

    /// Reflex pools recomputed from a (possibly modified) reservoir vector.
    pub fn layer0_forward(&self, features: &[f32]) -> Layer0 {
        self.check_features(features);
        let n = self.config.pool_size;
        let out = Feature::ALL.map(|f| {
            let mut v = vec![0.0; n];
            self.pools[self.layer0(f)].branches[0].forward(features, &self.config.sigmoid, &mut v);
            v
        });
        let triggers = [0, 1, 2].map(|i| motor_trigger(&out[i], self.config.motor_threshold));
        Layer0 { out, triggers }
    }

    /// Feed-forward decision; if Big 0 stays silent, one feedback pass from
    /// Big 3 modifies the reservoir and all reflex pools are re-evaluated.
    pub fn evaluate_with_feedback(&self, features: &[f32]) -> Decision {
        let state = self.forward_feedforward(features);
        let big = Feature::Big.index();
        if state.triggers[big] {
            return Decision {
                run: true,
                pathway: Some(Pathway::FeedForward),
                triggers: state.triggers,
                state,
            };
        }
        let modified = self.apply_feedback(features, &state.out[self.big3]);
        let l0 = self.layer0_forward(&modified);
        let run = l0.triggers[big];
        Decision {
            run,
            pathway: run.then_some(Pathway::Feedback),
            triggers: l0.triggers,
            state,
        }
    }

    /// One online presentation: forward pass, sliding averages, weight
    /// updates, then annealing. Returns whether any reflex weight moved.
    pub fn present(&mut self, features: &[f32], label: &ImageLabel, learning: Learning, state: &mut NetworkState) -> bool {
        self.forward_into(features, state, !learning.associative);
        let mut reflex_changed = false;

        let reservoir = if learning.associative {
            let fb = self.feedback_branch(&state.out[self.big3]);
            let fb_max = fb.iter().copied().fold(0.0f32, f32::max);
            let v: Vec<f32> = fb.iter().zip(features).map(|(&a, &x)| a.max(x)).collect();
            Some((v, fb_max))
        } else {
            None
        };

        for p in 0..self.pools.len() {
            let is_reflex = self.layer0.contains(&p);
            if (is_reflex && !learning.reflex) || (!is_reflex && !learning.associative) {
                continue;
            }
            let role = self.pools[p].role;
            for b in 0..self.pools[p].branches.len() {
                let source = self.pools[p].branches[b].source;
                let input = self.input(source, features, &state.out).into_owned();
                let branch = &mut self.pools[p].branches[b];
                if is_reflex {
                    let PoolRole::Chain(f, _) = role else { unreachable!() };
                    let required = match f {
                        Feature::Big => label.is_big(),
                        Feature::Color => label.has_color(self.config.color),
                        Feature::Left => label.is_left,
                    };
                    reflex_changed |= branch.ico_update(&input, required, state.triggers[f.index()]);
                } else {
                    branch.update_averages(&input, &state.out[p]);
                    branch.hebbian_update(&input, &state.out[p]);
                    branch.anneal(&state.branch_out[p][b]);
                }
            }
        }

        if let Some((v, fb_max)) = reservoir {
            let dim = self.feedback.dim;
            let mu = self.feedback.mu;
            for (j, &b) in state.out[self.big3].iter().enumerate() {
                hebb_update(&mut self.feedback.weights[j * dim..(j + 1) * dim], &v, b, mu);
            }
            self.feedback.mu = crate::plasticity::anneal(mu, fb_max, self.config.hebb.anneal);
        }
        reflex_changed
    }
}
