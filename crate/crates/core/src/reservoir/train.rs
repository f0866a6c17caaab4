use rand::seq::SliceRandom;

use super::model::{image_to_input, ReservoirModel};
use super::network::{head_loss, Architecture, Grads, Network};
use super::ReservoirError;
use crate::seed;
use crate::world::{Image, ImageLabel, ShapeSpec};

/// One supervised example. The image is rendered from its spec when
/// needed, so large training sets stay small in memory.
#[derive(Clone, Copy, Debug)]
pub struct TrainSample {
    pub spec: ShapeSpec,
    pub class: usize,
    pub left: bool,
}

impl TrainSample {
    pub fn from_label(label: &ImageLabel) -> Self {
        TrainSample {
            spec: label.spec,
            class: label.class_index,
            left: label.is_left,
        }
    }

    pub fn image(&self) -> Image {
        self.spec.render().expect("dataset specs lie on the canvas")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f32,
    pub seed: u64,
    /// Stop early once both held-out accuracies reach this value.
    pub stop_accuracy: Option<f64>,
    /// Fail with [`ReservoirError::NotConverged`] if the final held-out
    /// accuracies fall below this value.
    pub required_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 12,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            lr_decay: 0.85,
            seed: 0,
            stop_accuracy: Some(0.99),
            required_accuracy: Some(0.95),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accuracy {
    /// Fraction of correct 27-way combination predictions.
    pub class: f64,
    /// Fraction of correct left/non-left predictions.
    pub left: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Held-out accuracy after each epoch, when a held-out set was given.
    pub holdout: Vec<Accuracy>,
}

pub fn evaluate(model: &ReservoirModel, samples: &[TrainSample]) -> Result<Accuracy, ReservoirError> {
    let (mut class_ok, mut left_ok) = (0usize, 0usize);
    for s in samples {
        let out = model.forward(&s.image())?;
        class_ok += (out.predicted_class() == s.class) as usize;
        left_ok += (out.predicted_left() == s.left) as usize;
    }
    let n = samples.len().max(1) as f64;
    Ok(Accuracy {
        class: class_ok as f64 / n,
        left: left_ok as f64 / n,
    })
}

/// Mini-batch SGD with momentum on the combined softmax + logistic loss.
/// Deterministic for a given `cfg.seed`. The returned model is not yet
/// normalized; call [`ReservoirModel::fit_normalization`] on it.
pub fn train_reservoir(
    arch: &Architecture,
    samples: &[TrainSample],
    holdout: Option<&[TrainSample]>,
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64, Option<Accuracy>),
) -> Result<(ReservoirModel, TrainReport), ReservoirError> {
    if samples.is_empty() || cfg.batch_size == 0 {
        return Err(ReservoirError::Shape("empty training set or batch".into()));
    }
    let mut net: Network<f32> = Network::init(arch, &mut seed::rng(cfg.seed, &[0]))?;
    let mut grads = Grads::zero_like(&net);
    let mut velocity = Grads::zero_like(&net);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut report = TrainReport::default();
    let mut lr = cfg.learning_rate;
    let n_out = arch.num_classes + 1;
    let mut dlogits = vec![0.0f32; n_out];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seed::rng(cfg.seed, &[1, epoch as u64]));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            for &i in batch {
                let s = &samples[i];
                let input = image_to_input(&s.image());
                let pass = net.forward(&input);
                total += head_loss(pass.logits(), s.class, s.left, &mut dlogits);
                net.backward(&input, &pass, &dlogits, &mut grads);
            }
            let scale = lr / batch.len() as f32;
            for (buf, (gv, vv)) in net
                .param_buffers_mut()
                .into_iter()
                .zip(
                    grads
                        .layers
                        .iter()
                        .zip(velocity.layers.iter_mut())
                        .filter(|((gw, _), _)| !gw.is_empty())
                        .flat_map(|((gw, gb), (vw, vb))| [(gw, vw), (gb, vb)]),
                )
            {
                for ((p, &g), v) in buf.iter_mut().zip(gv.iter()).zip(vv.iter_mut()) {
                    *v = cfg.momentum * *v - scale * g;
                    *p += *v;
                }
            }
        }
        let mean = total / samples.len() as f64;
        report.epoch_losses.push(mean);
        lr *= cfg.lr_decay;

        let acc = match holdout {
            Some(h) => Some(evaluate(&ReservoirModel::new(net.clone()), h)?),
            None => None,
        };
        progress(epoch, mean, acc);
        if let Some(a) = acc {
            report.holdout.push(a);
            if cfg.stop_accuracy.is_some_and(|t| a.class >= t && a.left >= t) {
                break;
            }
        }
    }

    if let (Some(required), Some(last)) = (cfg.required_accuracy, report.holdout.last()) {
        if last.class < required || last.left < required {
            return Err(ReservoirError::NotConverged {
                epochs: report.epoch_losses.len(),
                class_accuracy: last.class,
                left_accuracy: last.left,
                required,
            });
        }
    }
    Ok((ReservoirModel::new(net), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::network::{Dims, LayerSpec};
    use crate::world::DatasetManifest;

    /// A 3-class toy problem on a shrunken input so the test runs quickly.
    fn toy() -> (Architecture, Vec<TrainSample>) {
        let arch = Architecture {
            input: Dims::new(3, 100, 100),
            layers: vec![
                LayerSpec::Conv {
                    out_channels: 2,
                    kernel: 5,
                    feature: false,
                },
                LayerSpec::MaxPool2,
                LayerSpec::MaxPool2,
                LayerSpec::MaxPool2,
                LayerSpec::Conv {
                    out_channels: 4,
                    kernel: 3,
                    feature: true,
                },
                LayerSpec::Dense { out: 28 },
            ],
            num_classes: 27,
        };
        let m = DatasetManifest::generate_pretrain(5, 2).unwrap();
        let samples = m.entries.iter().map(|e| TrainSample::from_label(&e.label)).collect();
        (arch, samples)
    }

    #[test]
    fn training_is_deterministic_and_loss_drops() {
        let (arch, samples) = toy();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            seed: 7,
            required_accuracy: None,
            stop_accuracy: None,
            ..TrainConfig::default()
        };
        let (m1, r1) = train_reservoir(&arch, &samples, None, &cfg, |_, _, _| {}).unwrap();
        let (m2, r2) = train_reservoir(&arch, &samples, None, &cfg, |_, _, _| {}).unwrap();
        assert_eq!(r1.epoch_losses, r2.epoch_losses);
        assert_eq!(m1.checksum(), m2.checksum());
        assert!(r1.epoch_losses.iter().all(|l| l.is_finite()));
        assert!(r1.epoch_losses.last().unwrap() < &r1.epoch_losses[0]);
    }

    #[test]
    fn non_convergence_is_reported() {
        let (arch, samples) = toy();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 8,
            required_accuracy: Some(1.01),
            stop_accuracy: None,
            ..TrainConfig::default()
        };
        let err = train_reservoir(&arch, &samples, Some(&samples[..10]), &cfg, |_, _, _| {}).unwrap_err();
        assert!(matches!(err, ReservoirError::NotConverged { epochs: 1, .. }));
    }

    #[test]
    fn empty_set_rejected() {
        let (arch, _) = toy();
        let err = train_reservoir(&arch, &[], None, &TrainConfig::default(), |_, _, _| {});
        assert!(err.is_err());
    }
}
