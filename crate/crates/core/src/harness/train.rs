use rand::seq::SliceRandom;

use super::data::LabeledSet;
use super::HarnessError;
use crate::net::{Aan, Learning, NetworkState};
use crate::seed;

const STREAM_ORDER: u64 = 31;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Only the reflex pools learn, from the environment's reflex signal.
    Reflex,
    /// Everything learns; the reflex pools keep their error-driven rule.
    Associative,
}

impl Phase {
    fn learning(self) -> Learning {
        Learning {
            reflex: true,
            associative: self == Phase::Associative,
        }
    }
}

/// Presentation order for one pass: a fresh seeded permutation per pass.
pub fn pass_order(seed: u64, phase: Phase, pass: usize, len: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut seed::rng(seed, &[STREAM_ORDER, phase as u64, pass as u64]));
    order
}

/// Trains with the network's own schedule and seed.
pub fn train(aan: &mut Aan, data: &LabeledSet) -> Result<(), HarnessError> {
    train_observed(aan, data, |_, _, _| {})
}

/// Like [`train`], calling `observe(phase, presented, net)` before the
/// first presentation of each phase and after every presentation.
pub fn train_observed(
    aan: &mut Aan,
    data: &LabeledSet,
    mut observe: impl FnMut(Phase, usize, &Aan),
) -> Result<(), HarnessError> {
    let schedule = aan.config().schedule;
    if data.is_empty() {
        return Err(HarnessError::Data("empty training set".into()));
    }
    if schedule.ico_passes == 0 && schedule.unsupervised_presentations == 0 {
        return Err(HarnessError::Data("training schedule has zero length".into()));
    }
    if data.features.dim() != aan.feature_dim() {
        return Err(HarnessError::Data("feature dimension does not match the network".into()));
    }
    let seed = aan.config().seed;
    let n = data.len();
    let mut state = NetworkState::default();
    let phases = [
        (Phase::Reflex, schedule.ico_passes * n),
        (Phase::Associative, schedule.unsupervised_presentations),
    ];
    for (phase, total) in phases {
        observe(phase, 0, aan);
        let mut order = Vec::new();
        for t in 0..total {
            if t % n == 0 {
                order = pass_order(seed, phase, t / n, n);
            }
            let i = order[t % n];
            aan.present(data.row(i), &data.labels[i], phase.learning(), &mut state);
            observe(phase, t + 1, aan);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_are_permutations_and_differ() {
        let a = pass_order(1, Phase::Associative, 0, 50);
        let b = pass_order(1, Phase::Associative, 1, 50);
        let mut s = a.clone();
        s.sort();
        assert_eq!(s, (0..50).collect::<Vec<_>>());
        assert_ne!(a, b);
        assert_eq!(a, pass_order(1, Phase::Associative, 0, 50));
    }
}
