use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use super::data::{ExperimentData, LabeledSet, TestSet};
use super::metrics::{analyze, evaluate_errors, feature_name, summarize, ErrorRates, Histogram, Mode, RateRow, SetAnalysis};
use super::stats::{welch_t_test, MeanStd, TTest};
use super::train::{train, train_observed, Phase};
use super::HarnessError;
use crate::net::{Aan, AanConfig, Feature, TrainingSchedule};
use crate::plasticity::AnnealParams;
use crate::seed;
use crate::world::{outlier_fraction, ColorClass, SizeClass, DEFAULT_OUTLIERS};

const STREAM_TRIAL: u64 = 41;

/// Rule-abiding big yellow-left shapes the outlier fraction is quoted against.
pub const BIG_YELLOW_LEFT: usize = 246;

pub const DEFAULT_TRIALS: usize = 10;
pub const SUPPLEMENT_TRIALS: usize = 20;

/// Seed of trial `t` under a base seed.
pub fn trial_seed(base: u64, t: usize) -> u64 {
    seed::derive(base, &[STREAM_TRIAL, t as u64])
}

/// Everything measured on one trained network.
#[derive(Clone, Debug)]
pub struct TrialReport {
    pub seed: u64,
    pub outliers: u32,
    /// Baseline feed-forward errors right after the reflex phase.
    pub post_reflex: ErrorRates,
    pub baseline: SetAnalysis,
    pub nbyl: SetAnalysis,
}

impl TrialReport {
    pub fn analysis(&self, which: TestSet) -> &SetAnalysis {
        match which {
            TestSet::Baseline => &self.baseline,
            TestSet::Nbyl => &self.nbyl,
        }
    }

    pub fn errors(&self, which: TestSet, mode: Mode) -> ErrorRates {
        self.analysis(which).errors(mode)
    }
}

/// The numbers every experiment draws from one trial, small enough to keep
/// for hundreds of trials.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub seed: u64,
    pub outliers: u32,
    pub color: ColorClass,
    pub post_reflex: ErrorRates,
    /// Indexed by test set (baseline, nBYL) then mode (ff, fb).
    pub errors: [[ErrorRates; 2]; 2],
    /// Percentage of nBYL images that run.
    pub run: f64,
    /// Baseline layer-0 recognition per reflex.
    pub recognition: [f64; 3],
    pub sharpening: Vec<RateRow>,
    pub relational: Vec<RateRow>,
    /// Defined image-by-image feedback correlations per size class.
    pub image_r: [Vec<f64>; 3],
    pub undefined_r: [usize; 3],
    pub category_r: [Option<f64>; 3],
    pub histograms: [Vec<Histogram>; 2],
}

fn set_index(which: TestSet) -> usize {
    match which {
        TestSet::Baseline => 0,
        TestSet::Nbyl => 1,
    }
}

fn mode_index(mode: Mode) -> usize {
    match mode {
        Mode::FeedForward => 0,
        Mode::Feedback => 1,
    }
}

impl TrialSummary {
    pub fn of(r: &TrialReport) -> Self {
        let errs = |a: &SetAnalysis| [a.errors(Mode::FeedForward), a.errors(Mode::Feedback)];
        let mut image_r: [Vec<f64>; 3] = Default::default();
        let mut undefined_r = [0usize; 3];
        for (rec, label) in r.baseline.records.iter().zip(&r.baseline.labels) {
            let s = label.spec.size.index();
            match rec.feedback_r {
                Some(v) => image_r[s].push(v),
                None => undefined_r[s] += 1,
            }
        }
        let corr = r.baseline.correlations();
        let mut sharpening = r.baseline.discretization();
        sharpening.extend(r.nbyl.discretization());
        let mut relational = r.baseline.relational();
        relational.extend(r.nbyl.relational());
        TrialSummary {
            seed: r.seed,
            outliers: r.outliers,
            color: r.baseline.color,
            post_reflex: r.post_reflex,
            errors: [errs(&r.baseline), errs(&r.nbyl)],
            run: r.nbyl.run_percentage(),
            recognition: r.baseline.recognition(),
            sharpening,
            relational,
            image_r,
            undefined_r,
            category_r: [0, 1, 2].map(|s| corr[s].category),
            histograms: [r.baseline.histograms(), r.nbyl.histograms()],
        }
    }

    pub fn error(&self, which: TestSet, mode: Mode) -> ErrorRates {
        self.errors[set_index(which)][mode_index(mode)]
    }

    pub fn big(&self, which: TestSet, mode: Mode) -> f64 {
        self.error(which, mode).get(Feature::Big)
    }
}

/// Trains one network on `train_set` and analyses it on both test sets.
pub fn train_and_analyze(
    config: &AanConfig,
    outliers: u32,
    train_set: &LabeledSet,
    data: &ExperimentData,
) -> Result<(Aan, TrialReport), HarnessError> {
    let mut aan = Aan::with_feature_dim(config.clone(), train_set.features.dim())?;
    let mut post_reflex = None;
    let mut failure = None;
    train_observed(&mut aan, train_set, |phase, presented, net| {
        if phase == Phase::Associative && presented == 0 {
            match evaluate_errors(net, &data.baseline, TestSet::Baseline, Mode::FeedForward) {
                Ok(e) => post_reflex = Some(e),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let report = TrialReport {
        seed: config.seed,
        outliers,
        post_reflex: post_reflex.expect("associative phase always observed"),
        baseline: analyze(&aan, &data.baseline, TestSet::Baseline)?,
        nbyl: analyze(&aan, &data.nbyl, TestSet::Nbyl)?,
    };
    Ok((aan, report))
}

pub fn run_trial(config: &AanConfig, outliers: u32, data: &ExperimentData) -> Result<TrialReport, HarnessError> {
    let train_set = data.train_set(outliers)?;
    Ok(train_and_analyze(config, outliers, &train_set, data)?.1)
}

type Key = (String, u32);

/// Runs independent trials, trial `t` of a configuration seeded with
/// [`trial_seed`] of the configuration's seed, and remembers every trial so
/// experiments sharing a configuration train it once.
pub struct Runner<'a> {
    data: &'a ExperimentData,
    cache: Mutex<HashMap<Key, Arc<TrialSummary>>>,
    log: Box<dyn Fn(&str) + Sync + 'a>,
}

impl<'a> Runner<'a> {
    pub fn new(data: &'a ExperimentData) -> Self {
        Self::with_log(data, |_| {})
    }

    pub fn with_log(data: &'a ExperimentData, log: impl Fn(&str) + Sync + 'a) -> Self {
        Runner {
            data,
            cache: Mutex::new(HashMap::new()),
            log: Box::new(log),
        }
    }

    pub fn data(&self) -> &ExperimentData {
        self.data
    }

    /// Configuration of trial `t`.
    pub fn trial_config(base: &AanConfig, t: usize) -> AanConfig {
        AanConfig {
            seed: trial_seed(base.seed, t),
            ..base.clone()
        }
    }

    pub fn trials(&self, base: &AanConfig, outliers: u32, n: usize) -> Result<Vec<Arc<TrialSummary>>, HarnessError> {
        let train_set = self.data.train_set(outliers)?;
        (0..n)
            .into_par_iter()
            .map(|t| {
                let cfg = Self::trial_config(base, t);
                let key = (serde_json::to_string(&cfg)?, outliers);
                if let Some(s) = self.cache.lock().unwrap().get(&key) {
                    return Ok(s.clone());
                }
                let (_, report) = train_and_analyze(&cfg, outliers, &train_set, self.data)?;
                let s = Arc::new(TrialSummary::of(&report));
                (self.log)(&format!(
                    "trial {t} (k={outliers}, depth {}, {}): nBYL fb Big error {:.2}%, baseline fb {:.2}%",
                    cfg.depth,
                    cfg.color,
                    s.big(TestSet::Nbyl, Mode::Feedback),
                    s.big(TestSet::Baseline, Mode::Feedback)
                ));
                self.cache.lock().unwrap().insert(key, s.clone());
                Ok(s)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub pool: String,
    pub testset: &'static str,
    /// `ff`, `fb`, or `reflex` for feed-forward errors right after the reflex phase.
    pub mode: &'static str,
    pub mean: f64,
    pub std: f64,
}

/// Error table over trials: every reflex on both test sets in both modes,
/// plus the baseline feed-forward error after the reflex phase.
pub fn error_table(trials: &[Arc<TrialSummary>]) -> Vec<ErrorRow> {
    let color = trials.first().map_or(ColorClass::Yellow, |r| r.color);
    let mut rows = Vec::new();
    let mut push = |testset: &'static str, mode: &'static str, get: &dyn Fn(&TrialSummary) -> ErrorRates| {
        for f in Feature::ALL {
            let xs: Vec<f64> = trials.iter().map(|r| get(r).get(f)).collect();
            let s = summarize(&xs);
            rows.push(ErrorRow {
                pool: feature_name(f, color),
                testset,
                mode,
                mean: s.mean,
                std: s.std,
            });
        }
    };
    push("baseline", "reflex", &|r| r.post_reflex);
    for which in [TestSet::Baseline, TestSet::Nbyl] {
        for mode in [Mode::FeedForward, Mode::Feedback] {
            push(which.name(), mode.name(), &|r| r.error(which, mode));
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationSummary {
    pub size: &'static str,
    /// Image-by-image correlation pooled over images and trials.
    pub image: MeanStd,
    /// Category-mean correlation over trials.
    pub category: MeanStd,
    /// Images (summed over trials) whose correlation was undefined.
    pub undefined_images: usize,
}

pub fn correlation_table(trials: &[Arc<TrialSummary>]) -> Vec<CorrelationSummary> {
    SizeClass::ALL
        .iter()
        .map(|&size| {
            let s = size.index();
            let image: Vec<f64> = trials.iter().flat_map(|r| r.image_r[s].iter().copied()).collect();
            let category: Vec<f64> = trials.iter().filter_map(|r| r.category_r[s]).collect();
            CorrelationSummary {
                size: size.as_str(),
                image: summarize_or_nan(&image),
                category: summarize_or_nan(&category),
                undefined_images: trials.iter().map(|r| r.undefined_r[s]).sum(),
            }
        })
        .collect()
}

fn summarize_or_nan(xs: &[f64]) -> MeanStd {
    if xs.is_empty() {
        MeanStd {
            mean: f64::NAN,
            std: f64::NAN,
        }
    } else {
        summarize(xs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateSummary {
    /// Architecture colour.
    pub architecture: &'static str,
    pub group: String,
    pub testset: &'static str,
    pub condition: &'static str,
    pub stage: String,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

/// Averages rate rows with the same key over trials, keeping first-seen order.
pub fn summarize_rates<'r>(
    architecture: &'static str,
    per_trial: impl IntoIterator<Item = &'r [RateRow]> + Clone,
) -> Vec<RateSummary> {
    let mut keys: Vec<(String, &'static str, &'static str, String)> = Vec::new();
    for rows in per_trial.clone() {
        for r in rows {
            let k = (r.group.clone(), r.testset, r.condition, r.stage.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    keys.into_iter()
        .map(|(group, testset, condition, stage)| {
            let xs: Vec<f64> = per_trial
                .clone()
                .into_iter()
                .flat_map(|rows| rows.iter())
                .filter(|r| r.group == group && r.testset == testset && r.condition == condition && r.stage == stage)
                .map(|r| r.rate)
                .collect();
            let s = summarize(&xs);
            RateSummary {
                architecture,
                group,
                testset,
                condition,
                stage,
                mean: s.mean,
                std: s.std,
                trials: xs.len(),
            }
        })
        .collect()
}

/// Sharpening statistics of the trials' own architecture.
pub fn sharpening_table(trials: &[Arc<TrialSummary>]) -> Vec<RateSummary> {
    let color = trials.first().map_or(ColorClass::Yellow, |r| r.color);
    summarize_rates(color.as_str(), trials.iter().map(|r| r.sharpening.as_slice()))
}

/// Relational selectivity of the yellow architecture and the magenta control.
pub fn relational_table(yellow: &[Arc<TrialSummary>], magenta: &[Arc<TrialSummary>]) -> Vec<RateSummary> {
    let mut out = summarize_rates("yellow", yellow.iter().map(|r| r.relational.as_slice()));
    out.extend(summarize_rates("magenta", magenta.iter().map(|r| r.relational.as_slice())));
    out
}

/// The same configuration with the conjecture stream on `color`.
pub fn with_color(base: &AanConfig, color: ColorClass) -> AanConfig {
    AanConfig {
        color,
        ..base.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub outliers: u32,
    /// Outlier share of the yellow-left training images, in percent.
    pub fraction: f64,
    pub run: MeanStd,
    /// nBYL feed-forward Big error.
    pub nbyl_ff: MeanStd,
    /// Layer-0 feed-forward recognition on the baseline set per reflex.
    pub recognition: [MeanStd; 3],
    pub trials: usize,
}

/// Run percentage and reflex recognition per outlier count.
pub fn outlier_sweep(
    runner: &Runner,
    base: &AanConfig,
    counts: &[u32],
    trials: usize,
) -> Result<Vec<SweepPoint>, HarnessError> {
    counts
        .iter()
        .map(|&k| {
            let per = runner.trials(base, k, trials)?;
            let col = |f: &dyn Fn(&TrialSummary) -> f64| summarize(&per.iter().map(|r| f(r)).collect::<Vec<_>>());
            Ok(SweepPoint {
                outliers: k,
                fraction: 100.0 * outlier_fraction(k, BIG_YELLOW_LEFT),
                run: col(&|r| r.run),
                nbyl_ff: col(&|r| r.big(TestSet::Nbyl, Mode::FeedForward)),
                recognition: [0, 1, 2].map(|f| col(&|r| r.recognition[f])),
                trials,
            })
        })
        .collect()
}

/// A named configuration for the parameter analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub name: String,
    pub config: AanConfig,
}

fn set_all_annealing(c: &mut AanConfig, f: impl Fn(&mut AnnealParams)) {
    f(&mut c.hebb.anneal);
    f(&mut c.aa.anneal_layer1);
    f(&mut c.aa.anneal_rest);
    f(&mut c.bal.anneal);
}

/// Default parameters plus learning-rate and annealing perturbations.
pub fn parameter_variants(base: &AanConfig) -> Vec<Variant> {
    let mut v = vec![Variant {
        name: "default".into(),
        config: base.clone(),
    }];
    let mut add = |name: String, edit: &dyn Fn(&mut AanConfig)| {
        let mut c = base.clone();
        edit(&mut c);
        v.push(Variant { name, config: c });
    };
    for (tag, k) in [("x2", 2.0f32), ("/2", 0.5)] {
        add(format!("sharpening mu {tag}"), &|c| c.aa.mu0_layer123 *= k);
        add(format!("and mu {tag}"), &|c| {
            c.aa.mu0_and1 *= k;
            c.aa.mu0_and2 *= k;
        });
        add(format!("feedback mu {tag}"), &|c| c.hebb.mu0 *= k);
    }
    for theta in [0.99f32, 0.995, 0.999] {
        add(format!("all theta {theta}"), &|c| set_all_annealing(c, |a| a.theta = theta));
    }
    for cc in [0.1f32, 0.9, 0.95] {
        add(format!("all c {cc}"), &|c| set_all_annealing(c, |a| a.c = cc));
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamPoint {
    pub variant: String,
    pub baseline: MeanStd,
    pub nbyl: MeanStd,
    pub trials: usize,
}

/// Baseline and nBYL feedback Big errors per variant.
pub fn param_sweep(runner: &Runner, variants: &[Variant], trials: usize) -> Result<Vec<ParamPoint>, HarnessError> {
    variants
        .iter()
        .map(|v| {
            let per = runner.trials(&v.config, DEFAULT_OUTLIERS, trials)?;
            let col = |w: TestSet| summarize(&per.iter().map(|r| r.big(w, Mode::Feedback)).collect::<Vec<_>>());
            Ok(ParamPoint {
                variant: v.name.clone(),
                baseline: col(TestSet::Baseline),
                nbyl: col(TestSet::Nbyl),
                trials,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub depth: usize,
    pub baseline: MeanStd,
    pub nbyl: MeanStd,
    /// nBYL errors of every trial.
    pub nbyl_trials: Vec<f64>,
    /// Test of this depth's nBYL errors against the previous depth's.
    pub vs_previous: Option<TTest>,
}

/// Feedback Big errors per number of sharpening layers.
pub fn ablation(runner: &Runner, base: &AanConfig, depths: &[usize], trials: usize) -> Result<Vec<AblationRow>, HarnessError> {
    let mut rows: Vec<AblationRow> = Vec::new();
    for &depth in depths {
        let cfg = AanConfig {
            depth,
            ..base.clone()
        };
        let per = runner.trials(&cfg, DEFAULT_OUTLIERS, trials)?;
        let nbyl: Vec<f64> = per.iter().map(|r| r.big(TestSet::Nbyl, Mode::Feedback)).collect();
        let vs_previous = match rows.last() {
            Some(prev) => Some(welch_t_test(&prev.nbyl_trials, &nbyl)?),
            None => None,
        };
        rows.push(AblationRow {
            depth,
            baseline: summarize(&per.iter().map(|r| r.big(TestSet::Baseline, Mode::Feedback)).collect::<Vec<_>>()),
            nbyl: summarize(&nbyl),
            nbyl_trials: nbyl,
            vs_previous,
        });
    }
    Ok(rows)
}

/// Checkpoints as percentages of one pass over the training set.
pub const CHECKPOINTS: [usize; 10] = [0, 20, 40, 60, 80, 100, 200, 300, 400, 500];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub percent: usize,
    pub presentations: usize,
    /// Big, colour and Left errors on the baseline set.
    pub baseline: ErrorRates,
    /// Big, colour and Left errors on the nBYL set.
    pub nbyl: ErrorRates,
}

fn checkpoint_presentations(n: usize) -> Vec<usize> {
    CHECKPOINTS.iter().map(|p| p * n / 100).collect()
}

fn curve(
    config: AanConfig,
    train_set: &LabeledSet,
    data: &ExperimentData,
    phase: Phase,
    mode: Mode,
) -> Result<Vec<CurvePoint>, HarnessError> {
    let stops = checkpoint_presentations(train_set.len());
    let mut aan = Aan::with_feature_dim(config, train_set.features.dim())?;
    let mut points = Vec::new();
    let mut failure = None;
    train_observed(&mut aan, train_set, |p, presented, net| {
        if p != phase || failure.is_some() {
            return;
        }
        if let Some(i) = stops.iter().position(|&s| s == presented) {
            let eval = || -> Result<CurvePoint, HarnessError> {
                Ok(CurvePoint {
                    percent: CHECKPOINTS[i],
                    presentations: presented,
                    baseline: evaluate_errors(net, &data.baseline, TestSet::Baseline, mode)?,
                    nbyl: evaluate_errors(net, &data.nbyl, TestSet::Nbyl, mode)?,
                })
            };
            match eval() {
                Ok(pt) => points.push(pt),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(points),
    }
}

/// Reflex-phase curve: feed-forward errors during five passes of reflex
/// learning alone.
pub fn reflex_curve(config: &AanConfig, data: &ExperimentData) -> Result<Vec<CurvePoint>, HarnessError> {
    let train_set = data.train_set(DEFAULT_OUTLIERS)?;
    let cfg = AanConfig {
        schedule: TrainingSchedule {
            ico_passes: CHECKPOINTS[CHECKPOINTS.len() - 1] / 100,
            unsupervised_presentations: 0,
        },
        ..config.clone()
    };
    curve(cfg, &train_set, data, Phase::Reflex, Mode::FeedForward)
}

/// Associative-phase curve: feedback errors during the associative phase
/// after the configured reflex phase; checkpoint 0 is the state it starts from.
pub fn associative_curve(config: &AanConfig, data: &ExperimentData) -> Result<Vec<CurvePoint>, HarnessError> {
    let train_set = data.train_set(DEFAULT_OUTLIERS)?;
    let last = *checkpoint_presentations(train_set.len()).last().unwrap();
    let cfg = AanConfig {
        schedule: TrainingSchedule {
            unsupervised_presentations: last,
            ..config.schedule
        },
        ..config.clone()
    };
    curve(cfg, &train_set, data, Phase::Associative, Mode::Feedback)
}

/// Trains a single network on the default training set with the
/// configuration's own seed.
pub fn train_single(config: &AanConfig, data: &ExperimentData) -> Result<Aan, HarnessError> {
    let train_set = data.train_set(DEFAULT_OUTLIERS)?;
    let mut aan = Aan::with_feature_dim(config.clone(), train_set.features.dim())?;
    train(&mut aan, &train_set)?;
    Ok(aan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let s: Vec<u64> = (0..10).map(|t| trial_seed(3, t)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 10);
        assert_eq!(s[4], trial_seed(3, 4));
    }

    #[test]
    fn outlier_fraction_at_default_count() {
        assert!((outlier_fraction(DEFAULT_OUTLIERS, BIG_YELLOW_LEFT) - 0.1458).abs() < 1e-3);
    }

    #[test]
    fn variants_perturb_only_their_parameters() {
        let base = AanConfig::default();
        let v = parameter_variants(&base);
        assert_eq!(v[0].config, base);
        let half = v.iter().find(|x| x.name == "feedback mu /2").unwrap();
        assert_eq!(half.config.hebb.mu0, 0.5);
        assert_eq!(half.config.aa, base.aa);
        let abrupt = v.iter().find(|x| x.name == "all c 0.1").unwrap();
        assert_eq!(abrupt.config.hebb.anneal.c, 0.1);
        assert_eq!(abrupt.config.aa.anneal_layer1.c, 0.1);
        assert_eq!(abrupt.config.bal.anneal.theta, base.bal.anneal.theta);
    }

    #[test]
    fn checkpoints_scale_with_set_size() {
        assert_eq!(checkpoint_presentations(2742), vec![0, 548, 1096, 1645, 2193, 2742, 5484, 8226, 10968, 13710]);
    }

    #[test]
    fn rate_summaries_average_matching_rows() {
        let row = |rate| RateRow {
            group: "Big".into(),
            testset: "baseline",
            condition: "true>0.9",
            stage: "layer 1".into(),
            rate,
        };
        let a = [row(90.0)];
        let b = [row(100.0)];
        let s = summarize_rates("yellow", [&a[..], &b[..]]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean, 95.0);
        assert_eq!(s[0].trials, 2);
    }
}
