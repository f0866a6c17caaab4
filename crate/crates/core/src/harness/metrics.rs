use serde::Serialize;

use super::data::{LabeledSet, TestSet};
use super::stats::{mean, pearson, std_dev, MeanStd};
use super::HarnessError;
use crate::net::{Aan, Feature, Pathway, PoolRole};
use crate::world::{ColorClass, ImageLabel, SizeClass};

pub const HIST_BINS: usize = 50;
/// Activation above which a pool counts as "on".
pub const HIGH: f32 = 0.9;
/// Activation below which a pool counts as "off".
pub const LOW: f32 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    FeedForward,
    Feedback,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::FeedForward => "ff",
            Mode::Feedback => "fb",
        }
    }
}

/// Reflex decisions of a network, abstracted so the error metric can be
/// checked against a stub.
pub trait Reflexes {
    fn color(&self) -> ColorClass;
    fn triggers(&self, features: &[f32], mode: Mode) -> [bool; 3];
}

impl Reflexes for Aan {
    fn color(&self) -> ColorClass {
        self.config().color
    }

    fn triggers(&self, features: &[f32], mode: Mode) -> [bool; 3] {
        match mode {
            Mode::FeedForward => self.forward_feedforward(features).triggers,
            Mode::Feedback => self.evaluate_with_feedback(features).triggers,
        }
    }
}

/// Desired trigger of each reflex on a test set.
pub fn target(f: Feature, label: &ImageLabel, which: TestSet, color: ColorClass) -> bool {
    match f {
        Feature::Big => which == TestSet::Nbyl || label.is_big(),
        Feature::Color => label.has_color(color),
        Feature::Left => label.is_left,
    }
}

/// Error percentages of the Big, colour and Left reflexes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorRates(pub [f64; 3]);

impl ErrorRates {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.index()]
    }

    fn from_counts(wrong: [usize; 3], n: usize) -> Self {
        ErrorRates(wrong.map(|w| 100.0 * w as f64 / n as f64))
    }
}

pub fn evaluate_errors(net: &impl Reflexes, set: &LabeledSet, which: TestSet, mode: Mode) -> Result<ErrorRates, HarnessError> {
    if set.is_empty() {
        return Err(HarnessError::Data("empty test set".into()));
    }
    let mut wrong = [0usize; 3];
    for (i, label) in set.labels.iter().enumerate() {
        let t = net.triggers(set.row(i), mode);
        for f in Feature::ALL {
            wrong[f.index()] += (t[f.index()] != target(f, label, which, net.color())) as usize;
        }
    }
    Ok(ErrorRates::from_counts(wrong, set.len()))
}

/// What one test image did to the network.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRecord {
    /// Mean feed-forward activation of every pool.
    pub pool_means: Vec<f32>,
    /// Mean activation of the two Big 3 branches.
    pub big3_branches: [f32; 2],
    /// Mean activation of the reflex pools recomputed after feedback.
    pub layer0_after: [f32; 3],
    pub ff: [bool; 3],
    /// Triggers under the feedback decision procedure.
    pub fb: [bool; 3],
    pub pathway: Option<Pathway>,
    /// Correlation of the image's reservoir activation with its feedback.
    pub feedback_r: Option<f64>,
}

/// One evaluation pass over a test set.
#[derive(Clone, Debug, PartialEq)]
pub struct SetAnalysis {
    pub which: TestSet,
    pub color: ColorClass,
    pub depth: usize,
    pub pool_names: Vec<String>,
    pub pool_roles: Vec<PoolRole>,
    pub labels: Vec<ImageLabel>,
    pub records: Vec<ImageRecord>,
    /// Per size class: summed reservoir activations, summed feedback and count.
    pub size_sums: Vec<(Vec<f64>, Vec<f64>, usize)>,
}

fn mean_f32(v: &[f32]) -> f32 {
    (v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64) as f32
}

pub fn analyze(aan: &Aan, set: &LabeledSet, which: TestSet) -> Result<SetAnalysis, HarnessError> {
    if set.is_empty() {
        return Err(HarnessError::Data("empty test set".into()));
    }
    let dim = aan.feature_dim();
    let big = Feature::Big.index();
    let mut size_sums = vec![(vec![0.0f64; dim], vec![0.0f64; dim], 0usize); 3];
    let mut records = Vec::with_capacity(set.len());
    for (i, label) in set.labels.iter().enumerate() {
        let x = set.row(i);
        let state = aan.forward_feedforward(x);
        let fbb = aan.feedback_branch(&state.out[aan.big3()]);
        let modified: Vec<f32> = fbb.iter().zip(x).map(|(&a, &b)| a.max(b)).collect();
        let l0 = aan.layer0_forward(&modified);
        let (fb, pathway) = if state.triggers[big] {
            (state.triggers, Some(Pathway::FeedForward))
        } else {
            (l0.triggers, l0.triggers[big].then_some(Pathway::Feedback))
        };
        let b3 = &state.branch_out[aan.big3()];
        let s = &mut size_sums[label.spec.size.index()];
        s.0.iter_mut().zip(x).for_each(|(a, &b)| *a += b as f64);
        s.1.iter_mut().zip(&fbb).for_each(|(a, &b)| *a += b as f64);
        s.2 += 1;
        records.push(ImageRecord {
            pool_means: state.out.iter().map(|v| mean_f32(v)).collect(),
            big3_branches: [mean_f32(&b3[0]), mean_f32(&b3[1])],
            layer0_after: [0, 1, 2].map(|k| mean_f32(&l0.out[k])),
            ff: state.triggers,
            fb,
            pathway,
            feedback_r: pearson(x, &fbb).ok(),
        });
    }
    Ok(SetAnalysis {
        which,
        color: aan.config().color,
        depth: aan.config().depth,
        pool_names: aan.pools().iter().map(|p| p.name.clone()).collect(),
        pool_roles: aan.pools().iter().map(|p| p.role).collect(),
        labels: set.labels.clone(),
        records,
        size_sums,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub pool: String,
    pub category: String,
    pub counts: Vec<u32>,
}

/// Bin of a value in [0, 1] among [`HIST_BINS`] equal bins; 1.0 lands in the last.
pub fn bin(v: f32) -> usize {
    ((v.clamp(0.0, 1.0) * HIST_BINS as f32) as usize).min(HIST_BINS - 1)
}

/// Which activation of an image a statistic looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Probe {
    Pool(usize),
    Big3Branch(usize),
    Layer0After(Feature),
}

impl SetAnalysis {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn pool(&self, role: PoolRole) -> Option<usize> {
        self.pool_roles.iter().position(|&r| r == role)
    }

    pub fn value(&self, i: usize, probe: Probe) -> f32 {
        let r = &self.records[i];
        match probe {
            Probe::Pool(p) => r.pool_means[p],
            Probe::Big3Branch(b) => r.big3_branches[b],
            Probe::Layer0After(f) => r.layer0_after[f.index()],
        }
    }

    /// Ground-truth membership used for histograms and discretization.
    pub fn member(&self, f: Feature, label: &ImageLabel) -> bool {
        match f {
            Feature::Big => label.is_big(),
            Feature::Color => label.has_color(self.color),
            Feature::Left => label.is_left,
        }
    }

    fn conjunction(&self, label: &ImageLabel) -> bool {
        label.has_color(self.color) && label.is_left
    }

    pub fn errors(&self, mode: Mode) -> ErrorRates {
        let mut wrong = [0usize; 3];
        for (r, label) in self.records.iter().zip(&self.labels) {
            let t = match mode {
                Mode::FeedForward => r.ff,
                Mode::Feedback => r.fb,
            };
            for f in Feature::ALL {
                wrong[f.index()] += (t[f.index()] != target(f, label, self.which, self.color)) as usize;
            }
        }
        ErrorRates::from_counts(wrong, self.len())
    }

    /// Percentage of images that ran.
    pub fn run_percentage(&self) -> f64 {
        100.0 * self.records.iter().filter(|r| r.fb[0]).count() as f64 / self.len() as f64
    }

    /// Percentage of images where each reflex's feed-forward trigger matches
    /// the image's ground truth.
    pub fn recognition(&self) -> [f64; 3] {
        let mut ok = [0usize; 3];
        for (r, label) in self.records.iter().zip(&self.labels) {
            for f in Feature::ALL {
                ok[f.index()] += (r.ff[f.index()] == self.member(f, label)) as usize;
            }
        }
        ok.map(|c| 100.0 * c as f64 / self.len() as f64)
    }

    fn split(&self, name: String, probe: Probe, member: impl Fn(&ImageLabel) -> bool) -> [Histogram; 2] {
        let mut c = [vec![0u32; HIST_BINS], vec![0u32; HIST_BINS]];
        for (i, label) in self.labels.iter().enumerate() {
            c[!member(label) as usize][bin(self.value(i, probe))] += 1;
        }
        let [inside, outside] = c;
        [
            Histogram {
                pool: name.clone(),
                category: "in".into(),
                counts: inside,
            },
            Histogram {
                pool: name,
                category: "out".into(),
                counts: outside,
            },
        ]
    }

    /// Histograms of per-image mean activation for every pool, split by
    /// category membership, plus both Big 3 branches and the reflex pools
    /// after feedback.
    pub fn histograms(&self) -> Vec<Histogram> {
        let mut out = Vec::new();
        for (p, role) in self.pool_roles.iter().enumerate() {
            let name = self.pool_names[p].clone();
            let h = match *role {
                PoolRole::Chain(f, _) => self.split(name, Probe::Pool(p), |l| self.member(f, l)),
                PoolRole::And(_) => self.split(name, Probe::Pool(p), |l| self.conjunction(l)),
                PoolRole::Big3 => self.split(name, Probe::Pool(p), |l| l.is_big() || self.conjunction(l)),
            };
            out.extend(h);
        }
        out.extend(self.split("Big 3 branch 1".into(), Probe::Big3Branch(0), |l| l.is_big()));
        out.extend(self.split("Big 3 branch 2".into(), Probe::Big3Branch(1), |l| self.conjunction(l)));
        for f in Feature::ALL {
            let name = format!("{} after feedback", self.pool_names[self.pool(PoolRole::Chain(f, 0)).unwrap()]);
            out.extend(self.split(name, Probe::Layer0After(f), |l| self.member(f, l)));
        }
        out
    }

    /// Percentage of images in (or out of) a category whose activation is
    /// above [`HIGH`] (or below [`LOW`]); `None` if the category is empty.
    pub fn rate(&self, probe: Probe, member: impl Fn(&ImageLabel) -> bool, inside: bool) -> Option<f64> {
        let mut n = 0usize;
        let mut hit = 0usize;
        for (i, label) in self.labels.iter().enumerate() {
            if member(label) != inside {
                continue;
            }
            n += 1;
            let v = self.value(i, probe);
            hit += if inside { v > HIGH } else { v < LOW } as usize;
        }
        (n > 0).then(|| 100.0 * hit as f64 / n as f64)
    }

    /// Sharpening statistics for layers 1 to the network depth. The top of
    /// the Big chain is the feed-forward branch of Big 3.
    pub fn discretization(&self) -> Vec<RateRow> {
        let mut rows = Vec::new();
        for f in Feature::ALL {
            for layer in 1..=self.depth.max(1) {
                let probe = if f == Feature::Big && layer == self.depth.max(1) {
                    Probe::Big3Branch(0)
                } else {
                    match self.pool(PoolRole::Chain(f, layer)) {
                        Some(p) => Probe::Pool(p),
                        None => continue,
                    }
                };
                for inside in [false, true] {
                    if let Some(rate) = self.rate(probe, |l| self.member(f, l), inside) {
                        rows.push(RateRow {
                            group: feature_name(f, self.color),
                            testset: self.which.name(),
                            condition: condition(inside),
                            stage: format!("layer {layer}"),
                            rate,
                        });
                    }
                }
            }
        }
        rows
    }

    /// Selectivity of the conjunction pools and the relational Big 3 branch.
    pub fn relational(&self) -> Vec<RateRow> {
        let mut rows = Vec::new();
        let stages = [
            ("AND 1", Probe::Pool(self.pool(PoolRole::And(1)).unwrap())),
            ("AND 2", Probe::Pool(self.pool(PoolRole::And(2)).unwrap())),
            ("Big 3 branch 2", Probe::Big3Branch(1)),
        ];
        for (stage, probe) in stages {
            for inside in [false, true] {
                if let Some(rate) = self.rate(probe, |l| self.conjunction(l), inside) {
                    rows.push(RateRow {
                        group: format!("{}&Left", feature_name(Feature::Color, self.color)),
                        testset: self.which.name(),
                        condition: condition(inside),
                        stage: stage.into(),
                        rate,
                    });
                }
            }
        }
        rows
    }

    /// Feedback-to-reservoir correlations per size class.
    pub fn correlations(&self) -> Vec<CorrelationRow> {
        SizeClass::ALL
            .iter()
            .map(|&size| {
                let rs: Vec<f64> = self
                    .records
                    .iter()
                    .zip(&self.labels)
                    .filter(|(_, l)| l.spec.size == size)
                    .filter_map(|(r, _)| r.feedback_r)
                    .collect();
                let (xc, xfb, n) = &self.size_sums[size.index()];
                let category = if *n > 0 {
                    let a: Vec<f64> = xc.iter().map(|v| v / *n as f64).collect();
                    let b: Vec<f64> = xfb.iter().map(|v| v / *n as f64).collect();
                    pearson(&a, &b).ok()
                } else {
                    None
                };
                CorrelationRow {
                    size: size.as_str(),
                    image: if rs.is_empty() { None } else { Some(MeanStd::of(&rs)) },
                    undefined_images: self.labels.iter().filter(|l| l.spec.size == size).count() - rs.len(),
                    category,
                }
            })
            .collect()
    }

    /// Mean activation of a probe over the images matching `member`.
    pub fn mean_activation(&self, probe: Probe, member: impl Fn(&ImageLabel) -> bool) -> Option<f64> {
        let v: Vec<f64> = (0..self.len())
            .filter(|&i| member(&self.labels[i]))
            .map(|i| self.value(i, probe) as f64)
            .collect();
        (!v.is_empty()).then(|| mean(&v))
    }
}

fn condition(inside: bool) -> &'static str {
    if inside {
        "true>0.9"
    } else {
        "false<0.1"
    }
}

pub fn feature_name(f: Feature, color: ColorClass) -> String {
    match f {
        Feature::Big => "Big".into(),
        Feature::Color => {
            let s = color.as_str();
            s[..1].to_uppercase() + &s[1..]
        }
        Feature::Left => "Left".into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub group: String,
    pub testset: &'static str,
    pub condition: &'static str,
    pub stage: String,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub size: &'static str,
    /// Image-by-image correlation over images with non-constant vectors.
    pub image: Option<MeanStd>,
    /// Images skipped because a vector had zero variance.
    pub undefined_images: usize,
    /// Correlation of the category-mean vectors.
    pub category: Option<f64>,
}

/// Mean and sample std of a series of per-trial values.
pub fn summarize(xs: &[f64]) -> MeanStd {
    MeanStd {
        mean: mean(xs),
        std: std_dev(xs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::FeatureCache;
    use crate::world::{Shape, ShapeSpec};

    struct Stub(Vec<[bool; 3]>);

    impl Reflexes for Stub {
        fn color(&self) -> ColorClass {
            ColorClass::Yellow
        }
        fn triggers(&self, features: &[f32], _: Mode) -> [bool; 3] {
            self.0[features[0] as usize]
        }
    }

    fn label(size: SizeClass, color: ColorClass, cx: i32) -> ImageLabel {
        let extent = size.extent_range().0;
        ImageLabel::new(ShapeSpec {
            shape: Shape::Square,
            color,
            size,
            center_x: cx,
            center_y: 50,
            extent,
            rgb: color.base_rgb(),
        })
    }

    fn micro() -> LabeledSet {
        let labels = vec![
            label(SizeClass::Big, ColorClass::Yellow, 40),
            label(SizeClass::Small, ColorClass::Cyan, 70),
            label(SizeClass::Small, ColorClass::Yellow, 20),
            label(SizeClass::Medium, ColorClass::Magenta, 20),
        ];
        let rows = (0..4).map(|i| vec![i as f32]).collect();
        LabeledSet::new(FeatureCache::from_rows(1, rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn micro_set_errors_match_hand_count() {
        let set = micro();
        assert!(set.labels[0].is_left && !set.labels[1].is_left && set.labels[2].is_left && set.labels[3].is_left);
        // Image 0: big yellow left, all correct.
        // Image 1: small cyan right, Big fires wrongly.
        // Image 2: small yellow left, nothing fires: colour and Left wrong.
        // Image 3: medium magenta left, all silent: Left wrong.
        let stub = Stub(vec![
            [true, true, true],
            [true, false, false],
            [false, false, false],
            [false, false, false],
        ]);
        let e = evaluate_errors(&stub, &set, TestSet::Baseline, Mode::FeedForward).unwrap();
        assert_eq!(e.0, [25.0, 25.0, 50.0]);
        // Under the rule, Big is required everywhere: images 2 and 3 now err too.
        let e = evaluate_errors(&stub, &set, TestSet::Nbyl, Mode::Feedback).unwrap();
        assert_eq!(e.0, [50.0, 25.0, 50.0]);
    }

    #[test]
    fn empty_set_is_an_error() {
        let set = LabeledSet::new(FeatureCache::new(1), vec![]).unwrap();
        assert!(evaluate_errors(&Stub(vec![]), &set, TestSet::Baseline, Mode::FeedForward).is_err());
    }

    #[test]
    fn bins_cover_unit_interval() {
        assert_eq!(bin(0.0), 0);
        assert_eq!(bin(0.0199), 0);
        assert_eq!(bin(0.02), 1);
        assert_eq!(bin(1.0), HIST_BINS - 1);
        assert_eq!(bin(0.9999), HIST_BINS - 1);
    }
}
