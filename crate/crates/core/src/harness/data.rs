use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::reservoir::{
    train_reservoir, Architecture, FeatureCache, ReservoirModel, TrainConfig, TrainReport, TrainSample,
};
use crate::seed;
use crate::world::{
    DatasetKind, DatasetManifest, ImageLabel, NUM_CLASSES, OUTLIER_COUNTS, OUTLIER_KINDS, PRETRAIN_PER_CLASS,
    REDUCED_PRETRAIN_PER_CLASS, TRAIN_PER_CLASS,
};

/// Reservoir features aligned row by row with their ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub features: FeatureCache,
    pub labels: Vec<ImageLabel>,
}

impl LabeledSet {
    pub fn new(features: FeatureCache, labels: Vec<ImageLabel>) -> Result<Self, HarnessError> {
        if features.len() != labels.len() {
            return Err(HarnessError::Data(format!(
                "{} feature rows for {} labels",
                features.len(),
                labels.len()
            )));
        }
        Ok(LabeledSet { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.features.row(i)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        LabeledSet {
            features: self.features.select(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Which rule the Big target follows when scoring a test set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestSet {
    /// Ground-truth labels for every reflex.
    Baseline,
    /// Non-big yellows on the left: the rule says run, so the Big target is true.
    Nbyl,
}

impl TestSet {
    pub fn name(self) -> &'static str {
        match self {
            TestSet::Baseline => "baseline",
            TestSet::Nbyl => "nbyl",
        }
    }
}

/// Everything the associative experiments consume: the training set with
/// the largest outlier count (every smaller count is a subset) and the two
/// test sets.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentData {
    pub train_all: LabeledSet,
    pub baseline: LabeledSet,
    pub nbyl: LabeledSet,
}

pub const MAX_OUTLIERS: u32 = 100;

/// Rows of the maximal outlier training set that make up the set with `k`
/// outliers per kind, in that set's own order.
pub fn outlier_subset(k: u32) -> Result<Vec<usize>, HarnessError> {
    if !OUTLIER_COUNTS.contains(&k) {
        return Err(HarnessError::Data(format!("outlier count {k} not in {OUTLIER_COUNTS:?}")));
    }
    let base = NUM_CLASSES * TRAIN_PER_CLASS;
    let mut idx: Vec<usize> = (0..base).collect();
    for kind in 0..OUTLIER_KINDS {
        idx.extend((0..k as usize).map(|i| base + kind * MAX_OUTLIERS as usize + i));
    }
    Ok(idx)
}

impl ExperimentData {
    pub fn train_set(&self, k: u32) -> Result<LabeledSet, HarnessError> {
        Ok(self.train_all.select(&outlier_subset(k)?))
    }

    pub fn test_set(&self, which: TestSet) -> &LabeledSet {
        match which {
            TestSet::Baseline => &self.baseline,
            TestSet::Nbyl => &self.nbyl,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Train the reservoir on the reduced pretraining set.
    pub reduced: bool,
    pub reservoir: ReservoirTraining,
}

/// Serializable subset of the reservoir training recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    pub lr_decay: f32,
}

impl Default for ReservoirTraining {
    fn default() -> Self {
        let t = TrainConfig::default();
        ReservoirTraining {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            lr_decay: t.lr_decay,
        }
    }
}

impl PipelineConfig {
    pub fn new(seed: u64, reduced: bool) -> Self {
        PipelineConfig {
            seed,
            reduced,
            reservoir: ReservoirTraining::default(),
        }
    }

    pub fn per_class(&self) -> usize {
        if self.reduced {
            REDUCED_PRETRAIN_PER_CLASS
        } else {
            PRETRAIN_PER_CLASS
        }
    }

    /// Held-out accuracy the reservoir must reach.
    pub fn required_accuracy(&self) -> f64 {
        if self.reduced {
            0.90
        } else {
            0.95
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let r = &self.reservoir;
        TrainConfig {
            epochs: r.epochs,
            batch_size: r.batch_size,
            learning_rate: r.learning_rate,
            momentum: r.momentum,
            lr_decay: r.lr_decay,
            seed: seed::derive(self.seed, &[STREAM_RESERVOIR]),
            stop_accuracy: Some(0.99),
            required_accuracy: Some(self.required_accuracy()),
        }
    }
}

const STREAM_RESERVOIR: u64 = 21;
const STREAM_HOLDOUT: u64 = 22;

/// Independently seeded baseline-type set used to score the reservoir.
pub fn reservoir_holdout(seed: u64) -> Result<DatasetManifest, HarnessError> {
    Ok(DatasetManifest::generate(
        DatasetKind::BaselineTest,
        seed::derive(seed, &[STREAM_HOLDOUT]),
    )?)
}

/// Trains the reservoir on the pretraining set and fits its normalization.
pub fn build_reservoir(
    pretrain: &DatasetManifest,
    holdout: &DatasetManifest,
    cfg: &TrainConfig,
    progress: impl FnMut(usize, f64, Option<crate::reservoir::Accuracy>),
) -> Result<(ReservoirModel, TrainReport), HarnessError> {
    let samples: Vec<TrainSample> = pretrain.entries.iter().map(|e| TrainSample::from_label(&e.label)).collect();
    let held: Vec<TrainSample> = holdout.entries.iter().map(|e| TrainSample::from_label(&e.label)).collect();
    let (mut model, report) = train_reservoir(&Architecture::standard(), &samples, Some(&held), cfg, progress)?;
    model.fit_normalization(samples.iter().map(|s| s.image()))?;
    Ok((model, report))
}

/// Features of every entry of a generated manifest, rendered in memory.
pub fn manifest_features(model: &ReservoirModel, m: &DatasetManifest) -> Result<LabeledSet, HarnessError> {
    let features = FeatureCache::build(model, m.entries.iter().map(|e| e.label.spec.render().expect("on canvas")))?;
    LabeledSet::new(features, m.labels())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Stamp {
    config: PipelineConfig,
    model_checksum: u64,
}

/// Files kept in a pipeline work directory.
pub struct Workdir {
    pub root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workdir { root: root.into() }
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("reservoir.bin")
    }

    pub fn features(&self, kind: DatasetKind) -> PathBuf {
        self.root.join(format!("features_{}.bin", kind.name()))
    }

    fn stamp(&self) -> PathBuf {
        self.root.join("pipeline.json")
    }
}

/// Reservoir plus cached features for the associative experiments. Reuses
/// whatever the work directory already holds for the same configuration,
/// otherwise trains and extracts from scratch.
pub fn prepare(
    dir: &Path,
    cfg: &PipelineConfig,
    mut log: impl FnMut(&str),
) -> Result<(ReservoirModel, ExperimentData), HarnessError> {
    let wd = Workdir::new(dir);
    fs::create_dir_all(dir)?;
    let stamp: Option<Stamp> = fs::read_to_string(wd.stamp())
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok());
    let kinds = [
        DatasetKind::AanTrainOutliers(MAX_OUTLIERS),
        DatasetKind::BaselineTest,
        DatasetKind::NbylTest,
    ];

    let cached = match (&stamp, ReservoirModel::load(&wd.model())) {
        (Some(s), Ok(m)) if s.config == *cfg && s.model_checksum == m.checksum() => Some(m),
        _ => None,
    };
    let model = match cached {
        Some(m) => {
            log("reusing cached reservoir");
            m
        }
        None => {
            log(&format!("training reservoir on {} images per class", cfg.per_class()));
            let pretrain = DatasetManifest::generate_pretrain(cfg.seed, cfg.per_class())?;
            let holdout = reservoir_holdout(cfg.seed)?;
            let (m, _) = build_reservoir(&pretrain, &holdout, &cfg.train_config(), |e, loss, acc| {
                let acc = acc.map(|a| format!(" held-out class {:.4} left {:.4}", a.class, a.left));
                log(&format!("epoch {e} loss {loss:.4}{}", acc.unwrap_or_default()));
            })?;
            m.save(&wd.model())?;
            for k in kinds {
                let _ = fs::remove_file(wd.features(k));
            }
            let s = Stamp {
                config: cfg.clone(),
                model_checksum: m.checksum(),
            };
            fs::write(wd.stamp(), serde_json::to_string_pretty(&s)?)?;
            m
        }
    };

    let mut sets = Vec::new();
    for kind in kinds {
        let m = DatasetManifest::generate(kind, cfg.seed)?;
        let path = wd.features(kind);
        let features = match FeatureCache::read(&path) {
            Ok(c) if c.len() == m.len() => c,
            _ => {
                log(&format!("extracting features for {}", kind.name()));
                let s = manifest_features(&model, &m)?;
                s.features.write(&path)?;
                s.features
            }
        };
        sets.push(LabeledSet::new(features, m.labels())?);
    }
    let nbyl = sets.pop().unwrap();
    let baseline = sets.pop().unwrap();
    let train_all = sets.pop().unwrap();
    Ok((
        model,
        ExperimentData {
            train_all,
            baseline,
            nbyl,
        },
    ))
}
