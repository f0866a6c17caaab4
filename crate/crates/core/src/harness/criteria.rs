//! Pass/fail thresholds for the reproduction targets.

use std::sync::Arc;

use serde::Serialize;

use super::data::TestSet;
use super::experiments::{AblationRow, CorrelationSummary, RateSummary, SweepPoint, TrialSummary};
use super::metrics::{summarize, Mode};
use crate::net::Feature;
use crate::world::DEFAULT_OUTLIERS;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "[{}] {}. {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

fn mean_of(reports: &[Arc<TrialSummary>], f: impl Fn(&TrialSummary) -> f64) -> f64 {
    summarize(&reports.iter().map(|r| f(r)).collect::<Vec<_>>()).mean
}

fn big(r: &TrialSummary, which: TestSet, mode: Mode) -> f64 {
    r.big(which, mode)
}

pub const REFLEX_MAX: f64 = 5.0;
pub const NBYL_FF_MIN: f64 = 70.0;
pub const NBYL_FB_MAX: f64 = 25.0;
pub const BASELINE_FB_MAX: f64 = 6.0;

/// Baseline feed-forward Big error right after reflex learning.
pub fn reflex(reports: &[Arc<TrialSummary>]) -> Check {
    let e = mean_of(reports, |r| r.post_reflex.get(Feature::Big));
    Check {
        id: 1,
        name: "reflex learning",
        pass: e <= REFLEX_MAX,
        detail: format!("post-reflex baseline ff Big error {e:.2}% (<= {REFLEX_MAX}%), {} trials", reports.len()),
    }
}

/// nBYL Big error without and with feedback.
pub fn rescue(reports: &[Arc<TrialSummary>]) -> Check {
    let ff = mean_of(reports, |r| big(r, TestSet::Nbyl, Mode::FeedForward));
    let fb = mean_of(reports, |r| big(r, TestSet::Nbyl, Mode::Feedback));
    Check {
        id: 2,
        name: "feedback rescue",
        pass: ff >= NBYL_FF_MIN && fb <= NBYL_FB_MAX,
        detail: format!(
            "nBYL Big error ff {ff:.2}% (>= {NBYL_FF_MIN}%), fb {fb:.2}% (<= {NBYL_FB_MAX}%), {} trials",
            reports.len()
        ),
    }
}

pub fn collateral(reports: &[Arc<TrialSummary>]) -> Check {
    let fb = mean_of(reports, |r| big(r, TestSet::Baseline, Mode::Feedback));
    Check {
        id: 3,
        name: "low collateral damage",
        pass: fb <= BASELINE_FB_MAX,
        detail: format!("baseline fb Big error {fb:.2}% (<= {BASELINE_FB_MAX}%), {} trials", reports.len()),
    }
}

pub fn correlation(rows: &[CorrelationSummary]) -> Check {
    let get = |s: &str| rows.iter().find(|r| r.size == s);
    let (b, m, s) = match (get("big"), get("medium"), get("small")) {
        (Some(b), Some(m), Some(s)) => (b, m, s),
        _ => {
            return Check {
                id: 4,
                name: "imagination correlation",
                pass: false,
                detail: "missing size classes".into(),
            }
        }
    };
    let (cb, cm, cs) = (b.category.mean, m.category.mean, s.category.mean);
    let ib = b.image.mean;
    Check {
        id: 4,
        name: "imagination correlation",
        pass: cb >= 0.85 && cb > cm && cm > cs && (0.2..=0.7).contains(&ib),
        detail: format!(
            "category r big {cb:.3} (>= 0.85) > medium {cm:.3} > small {cs:.3}; image r big {ib:.3} in [0.2, 0.7]"
        ),
    }
}

/// Sharpening non-decreasing over layers within one pooled SD, and layer-3
/// baseline true-positive rates of at least 95%.
pub fn sharpening(rows: &[RateSummary]) -> Check {
    let mut keys: Vec<(&str, &str, &str)> = Vec::new();
    for r in rows {
        let k = (r.group.as_str(), r.testset, r.condition);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut pass = true;
    let mut notes = Vec::new();
    for (group, testset, condition) in &keys {
        let mut layers: Vec<&RateSummary> = rows
            .iter()
            .filter(|r| r.group == *group && r.testset == *testset && r.condition == *condition)
            .collect();
        layers.sort_by(|a, b| a.stage.cmp(&b.stage));
        for w in layers.windows(2) {
            let pooled = ((w[0].std.powi(2) + w[1].std.powi(2)) / 2.0).sqrt();
            if w[1].mean < w[0].mean - pooled {
                pass = false;
                notes.push(format!(
                    "{group} {testset} {condition}: {} {:.2} -> {} {:.2} (pooled sd {pooled:.2})",
                    w[0].stage, w[0].mean, w[1].stage, w[1].mean
                ));
            }
        }
    }
    let mut tops = Vec::new();
    for group in keys.iter().map(|k| k.0).fold(Vec::new(), |mut a, g| {
        if !a.contains(&g) {
            a.push(g);
        }
        a
    }) {
        let top = rows
            .iter()
            .filter(|r| r.group == group && r.testset == "baseline" && r.condition == "true>0.9" && r.stage == "layer 3")
            .map(|r| r.mean)
            .next();
        match top {
            Some(t) => {
                pass &= t >= 95.0;
                tops.push(format!("{group} {t:.2}%"));
            }
            None => {
                pass = false;
                tops.push(format!("{group} missing"));
            }
        }
    }
    let mut detail = format!(
        "{} rows monotone within pooled sd; layer-3 baseline true>0.9: {} (>= 95%)",
        keys.len(),
        tops.join(", ")
    );
    if !notes.is_empty() {
        detail = format!("{detail}; violations: {}", notes.join("; "));
    }
    Check {
        id: 5,
        name: "sharpening",
        pass: pass && keys.len() == 9,
        detail,
    }
}

/// Relational branch true-positive rate: yellow architecture versus the magenta control.
pub fn relational(rows: &[RateSummary]) -> Check {
    let rate = |arch: &str| {
        rows.iter()
            .find(|r| {
                r.architecture == arch && r.stage == "Big 3 branch 2" && r.testset == "baseline" && r.condition == "true>0.9"
            })
            .map(|r| (r.mean, r.trials))
    };
    match (rate("yellow"), rate("magenta")) {
        (Some((y, n)), Some((m, _))) => Check {
            id: 6,
            name: "relational selectivity",
            pass: y >= 95.0 && m <= 40.0,
            detail: format!("branch-2 true>0.9 yellow {y:.2}% (>= 95%), magenta {m:.2}% (<= 40%), {n} trials"),
        },
        _ => Check {
            id: 6,
            name: "relational selectivity",
            pass: false,
            detail: "missing architecture rows".into(),
        },
    }
}

/// Run percentage peaks at intermediate outlier fractions, and the default
/// outlier count reproduces the feedback rescue.
pub fn sweep(points: &[SweepPoint]) -> Check {
    let mid = points
        .iter()
        .filter(|p| (20.0..=40.0).contains(&p.fraction))
        .map(|p| p.run.mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let zero = points.iter().find(|p| p.outliers == 0).map(|p| p.run.mean);
    let high = points
        .iter()
        .filter(|p| p.fraction >= 50.0)
        .map(|p| p.run.mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let k7 = points.iter().find(|p| p.outliers == DEFAULT_OUTLIERS);
    let (shape, k7_ok) = match (zero, k7) {
        (Some(z), Some(p)) => (
            mid.is_finite() && high.is_finite() && mid > z && mid > high,
            p.nbyl_ff.mean >= NBYL_FF_MIN && 100.0 - p.run.mean <= NBYL_FB_MAX,
        ),
        _ => (false, false),
    };
    let k7_text = k7.map_or("missing".to_string(), |p| {
        format!("ff error {:.2}%, fb error {:.2}%", p.nbyl_ff.mean, 100.0 - p.run.mean)
    });
    Check {
        id: 7,
        name: "rule-violation sweep",
        pass: shape && k7_ok,
        detail: format!(
            "run% 20-40% {mid:.2} vs 0% {} and >= 50% {high:.2}; k={DEFAULT_OUTLIERS}: {k7_text}",
            zero.map_or("missing".to_string(), |z| format!("{z:.2}"))
        ),
    }
}

pub fn ablation(rows: &[AblationRow]) -> Check {
    let d0 = rows.iter().find(|r| r.depth == 0);
    let d3 = rows.iter().find(|r| r.depth == 3);
    match (d0, d3) {
        (Some(a), Some(b)) => {
            let t = super::stats::welch_t_test(&a.nbyl_trials, &b.nbyl_trials);
            let p = t.as_ref().map_or(f64::NAN, |t| t.p);
            Check {
                id: 8,
                name: "ablation ordering",
                pass: a.nbyl.mean >= 45.0 && b.nbyl.mean <= 25.0 && a.nbyl.mean > b.nbyl.mean && p < 0.05,
                detail: format!(
                    "nBYL fb error d=0 {:.2}% (>= 45%), d=3 {:.2}% (<= 25%), Welch p {p:.2e} (< 0.05)",
                    a.nbyl.mean, b.nbyl.mean
                ),
            }
        }
        _ => Check {
            id: 8,
            name: "ablation ordering",
            pass: false,
            detail: "missing depths 0 and 3".into(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::stats::MeanStd;

    fn ms(mean: f64, std: f64) -> MeanStd {
        MeanStd { mean, std }
    }

    fn point(k: u32, fraction: f64, run: f64) -> SweepPoint {
        SweepPoint {
            outliers: k,
            fraction,
            run: ms(run, 1.0),
            nbyl_ff: ms(88.0, 1.0),
            recognition: [ms(99.0, 0.0); 3],
            trials: 10,
        }
    }

    #[test]
    fn sweep_shape() {
        let good = [point(0, 0.0, 40.0), point(7, 14.6, 85.0), point(20, 32.8, 90.0), point(50, 54.9, 60.0)];
        assert!(sweep(&good).pass);
        let flat = [point(0, 0.0, 95.0), point(7, 14.6, 85.0), point(20, 32.8, 90.0), point(50, 54.9, 60.0)];
        assert!(!sweep(&flat).pass);
        let weak = [point(0, 0.0, 40.0), point(7, 14.6, 70.0), point(20, 32.8, 90.0), point(50, 54.9, 60.0)];
        assert!(!sweep(&weak).pass);
    }

    fn rate(group: &str, testset: &'static str, condition: &'static str, layer: usize, mean: f64, std: f64) -> RateSummary {
        RateSummary {
            architecture: "yellow",
            group: group.into(),
            testset,
            condition,
            stage: format!("layer {layer}"),
            mean,
            std,
            trials: 20,
        }
    }

    fn table(dip: f64) -> Vec<RateSummary> {
        let mut rows = Vec::new();
        for (g, nbyl_cond) in [("Big", "false<0.1"), ("Yellow", "true>0.9"), ("Left", "true>0.9")] {
            for l in 1..=3 {
                rows.push(rate(g, "baseline", "false<0.1", l, 90.0 + l as f64, 2.0));
                rows.push(rate(g, "baseline", "true>0.9", l, 96.0 + l as f64, 1.0));
                let v = if l == 2 { 80.0 - dip } else { 80.0 };
                rows.push(rate(g, "nbyl", nbyl_cond, l, v, 3.0));
            }
        }
        rows
    }

    #[test]
    fn sharpening_tolerates_one_pooled_sd() {
        assert!(sharpening(&table(2.9)).pass);
        assert!(!sharpening(&table(3.1)).pass);
    }
}
