//! CSV tables and SVG charts for the experiment outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiments::{AblationRow, CorrelationSummary, CurvePoint, ErrorRow, ParamPoint, RateSummary, SweepPoint};
use super::metrics::{Histogram, HIST_BINS};
use super::HarnessError;

pub const FIG5: &str = "fig5_errors.csv";
pub const FIG4: &str = "fig4_histograms.csv";
pub const TABLE2: &str = "table2_correlation.csv";
pub const TABLE_S1: &str = "table_s1_sharpening.csv";
pub const TABLE_S2: &str = "table_s2_relational.csv";
pub const FIG6: &str = "fig6_sweep.csv";
pub const FIG7: &str = "fig7_params.csv";
pub const TABLE3: &str = "table3_ablation.csv";
pub const CURVES_ICO: &str = "curves_ico.csv";
pub const CURVES_UNSUP: &str = "curves_unsup.csv";

/// Writes tables into one output directory.
pub struct Reporter {
    dir: PathBuf,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct HistogramCsv<'a> {
    testset: &'a str,
    pool: &'a str,
    category: &'a str,
    bin: usize,
    lo: f64,
    hi: f64,
    count: u32,
}

#[derive(Serialize)]
struct CorrelationCsv {
    size: &'static str,
    image_mean: f64,
    image_std: f64,
    category_mean: f64,
    category_std: f64,
    undefined_images: usize,
}

#[derive(Serialize)]
struct SweepCsv {
    outliers: u32,
    fraction: f64,
    run_mean: f64,
    run_std: f64,
    nbyl_ff_error_mean: f64,
    nbyl_ff_error_std: f64,
    big_recognition_mean: f64,
    big_recognition_std: f64,
    color_recognition_mean: f64,
    color_recognition_std: f64,
    left_recognition_mean: f64,
    left_recognition_std: f64,
    trials: usize,
}

#[derive(Serialize)]
struct ParamCsv<'a> {
    variant: &'a str,
    baseline_mean: f64,
    baseline_std: f64,
    nbyl_mean: f64,
    nbyl_std: f64,
    trials: usize,
}

#[derive(Serialize)]
struct AblationCsv {
    depth: usize,
    baseline_mean: f64,
    baseline_std: f64,
    nbyl_mean: f64,
    nbyl_std: f64,
    t_vs_previous: Option<f64>,
    df_vs_previous: Option<f64>,
    p_vs_previous: Option<f64>,
}

#[derive(Serialize)]
struct CurveCsv<'a> {
    percent: usize,
    presentations: usize,
    testset: &'a str,
    pool: &'a str,
    error: f64,
}

const REFLEXES: [&str; 3] = ["Big", "Color", "Left"];

impl Reporter {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Reporter { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn svg(&self, csv_name: &str, svg: String) -> Result<(), HarnessError> {
        fs::write(self.path(&csv_name.replace(".csv", ".svg")), svg)?;
        Ok(())
    }

    pub fn errors(&self, rows: &[ErrorRow]) -> Result<(), HarnessError> {
        write_csv(&self.path(FIG5), rows)?;
        let groups: Vec<String> = rows.iter().map(|r| format!("{} {}", r.testset, r.mode)).fold(Vec::new(), dedup);
        let pools: Vec<String> = rows.iter().map(|r| r.pool.clone()).fold(Vec::new(), dedup);
        let series = pools
            .iter()
            .map(|p| {
                let vals = groups
                    .iter()
                    .map(|g| {
                        rows.iter()
                            .find(|r| &r.pool == p && &format!("{} {}", r.testset, r.mode) == g)
                            .map_or((0.0, 0.0), |r| (r.mean, r.std))
                    })
                    .collect();
                (p.clone(), vals)
            })
            .collect::<Vec<_>>();
        self.svg(FIG5, bar_chart("Error rates (%)", &groups, &series, 100.0))
    }

    pub fn histograms(&self, sets: &[(&str, Vec<Histogram>)]) -> Result<(), HarnessError> {
        let mut rows = Vec::new();
        for (testset, hs) in sets {
            for h in hs {
                for (bin, &count) in h.counts.iter().enumerate() {
                    rows.push(HistogramCsv {
                        testset,
                        pool: &h.pool,
                        category: &h.category,
                        bin,
                        lo: bin as f64 / HIST_BINS as f64,
                        hi: (bin + 1) as f64 / HIST_BINS as f64,
                        count,
                    });
                }
            }
        }
        write_csv(&self.path(FIG4), rows)?;
        self.svg(FIG4, histogram_grid(sets))
    }

    pub fn correlations(&self, rows: &[CorrelationSummary]) -> Result<(), HarnessError> {
        write_csv(
            &self.path(TABLE2),
            rows.iter().map(|r| CorrelationCsv {
                size: r.size,
                image_mean: r.image.mean,
                image_std: r.image.std,
                category_mean: r.category.mean,
                category_std: r.category.std,
                undefined_images: r.undefined_images,
            }),
        )
    }

    pub fn sharpening(&self, rows: &[RateSummary]) -> Result<(), HarnessError> {
        write_csv(&self.path(TABLE_S1), rows)
    }

    pub fn relational(&self, rows: &[RateSummary]) -> Result<(), HarnessError> {
        write_csv(&self.path(TABLE_S2), rows)
    }

    pub fn sweep(&self, points: &[SweepPoint]) -> Result<(), HarnessError> {
        write_csv(
            &self.path(FIG6),
            points.iter().map(|p| SweepCsv {
                outliers: p.outliers,
                fraction: p.fraction,
                run_mean: p.run.mean,
                run_std: p.run.std,
                nbyl_ff_error_mean: p.nbyl_ff.mean,
                nbyl_ff_error_std: p.nbyl_ff.std,
                big_recognition_mean: p.recognition[0].mean,
                big_recognition_std: p.recognition[0].std,
                color_recognition_mean: p.recognition[1].mean,
                color_recognition_std: p.recognition[1].std,
                left_recognition_mean: p.recognition[2].mean,
                left_recognition_std: p.recognition[2].std,
                trials: p.trials,
            }),
        )?;
        let x: Vec<f64> = points.iter().map(|p| p.fraction).collect();
        let mut series = vec![("run".to_string(), points.iter().map(|p| p.run.mean).collect())];
        for (i, name) in REFLEXES.iter().enumerate() {
            series.push((format!("{name} 0 recognition"), points.iter().map(|p| p.recognition[i].mean).collect()));
        }
        self.svg(FIG6, line_chart("Outlier fraction (%) vs. %", &x, &series))
    }

    pub fn params(&self, points: &[ParamPoint]) -> Result<(), HarnessError> {
        write_csv(
            &self.path(FIG7),
            points.iter().map(|p| ParamCsv {
                variant: &p.variant,
                baseline_mean: p.baseline.mean,
                baseline_std: p.baseline.std,
                nbyl_mean: p.nbyl.mean,
                nbyl_std: p.nbyl.std,
                trials: p.trials,
            }),
        )?;
        let groups: Vec<String> = points.iter().map(|p| p.variant.clone()).collect();
        let series = vec![
            ("baseline".to_string(), points.iter().map(|p| (p.baseline.mean, p.baseline.std)).collect()),
            ("nBYL".to_string(), points.iter().map(|p| (p.nbyl.mean, p.nbyl.std)).collect()),
        ];
        self.svg(FIG7, bar_chart("Big error with feedback (%)", &groups, &series, 100.0))
    }

    pub fn ablation(&self, rows: &[AblationRow]) -> Result<(), HarnessError> {
        write_csv(
            &self.path(TABLE3),
            rows.iter().map(|r| AblationCsv {
                depth: r.depth,
                baseline_mean: r.baseline.mean,
                baseline_std: r.baseline.std,
                nbyl_mean: r.nbyl.mean,
                nbyl_std: r.nbyl.std,
                t_vs_previous: r.vs_previous.map(|t| t.t),
                df_vs_previous: r.vs_previous.map(|t| t.df),
                p_vs_previous: r.vs_previous.map(|t| t.p),
            }),
        )
    }

    pub fn curves(&self, name: &str, points: &[CurvePoint]) -> Result<(), HarnessError> {
        let mut rows = Vec::new();
        for p in points {
            for (testset, e) in [("baseline", &p.baseline), ("nbyl", &p.nbyl)] {
                for (i, pool) in REFLEXES.iter().enumerate() {
                    rows.push(CurveCsv {
                        percent: p.percent,
                        presentations: p.presentations,
                        testset,
                        pool,
                        error: e.0[i],
                    });
                }
            }
        }
        write_csv(&self.path(name), rows)?;
        let x: Vec<f64> = points.iter().map(|p| p.percent as f64).collect();
        let mut series = Vec::new();
        for (testset, pick) in [("baseline", 0usize), ("nbyl", 1)] {
            for (i, pool) in REFLEXES.iter().enumerate() {
                let ys = points
                    .iter()
                    .map(|p| if pick == 0 { p.baseline.0[i] } else { p.nbyl.0[i] })
                    .collect();
                series.push((format!("{pool} {testset}"), ys));
            }
        }
        self.svg(name, line_chart("Training (% of set) vs. error (%)", &x, &series))
    }
}

fn dedup(mut acc: Vec<String>, s: String) -> Vec<String> {
    if !acc.contains(&s) {
        acc.push(s);
    }
    acc
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
const W: f64 = 720.0;
const H: f64 = 360.0;
const PAD: f64 = 50.0;

fn open(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, y_max: f64) {
    let (x0, y0, y1) = (PAD, H - PAD, PAD);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#, W - PAD);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = y0 - (y0 - y1) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.0}</text>"#, x0 - 4.0, y + 4.0);
    }
}

fn legend(out: &mut String, names: impl Iterator<Item = String>) {
    for (i, n) in names.enumerate() {
        let y = 36.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            W - 170.0,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            W - 155.0,
            y,
            escape(&n)
        );
    }
}

/// Grouped bars of `(mean, std)` with error whiskers.
pub fn bar_chart(title: &str, groups: &[String], series: &[(String, Vec<(f64, f64)>)], y_max: f64) -> String {
    let mut out = String::new();
    open(&mut out, W, H, title);
    axes(&mut out, y_max);
    let plot_w = W - 2.0 * PAD;
    let gw = plot_w / groups.len().max(1) as f64;
    let bw = gw * 0.8 / series.len().max(1) as f64;
    let scale = (H - 2.0 * PAD) / y_max;
    for (g, name) in groups.iter().enumerate() {
        let gx = PAD + gw * g as f64 + gw * 0.1;
        for (s, (_, vals)) in series.iter().enumerate() {
            let (m, sd) = vals[g];
            let x = gx + bw * s as f64;
            let h = (m.clamp(0.0, y_max)) * scale;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"/>"#,
                H - PAD - h,
                bw * 0.95,
                PALETTE[s % PALETTE.len()]
            );
            let cx = x + bw * 0.475;
            let top = H - PAD - ((m + sd).min(y_max)) * scale;
            let bot = H - PAD - ((m - sd).max(0.0)) * scale;
            let _ = writeln!(out, r#"<line x1="{cx:.1}" y1="{top:.1}" x2="{cx:.1}" y2="{bot:.1}" stroke="black"/>"#);
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="9">{}</text>"#,
            gx + gw * 0.4,
            H - PAD + 14.0,
            escape(name)
        );
    }
    legend(&mut out, series.iter().map(|s| s.0.clone()));
    out.push_str("</svg>\n");
    out
}

/// Polylines over a shared x axis; y is in percent.
pub fn line_chart(title: &str, x: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    open(&mut out, W, H, title);
    axes(&mut out, 100.0);
    let (xmin, xmax) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if xmax > xmin { xmax - xmin } else { 1.0 };
    let px = |v: f64| PAD + (W - 2.0 * PAD - 180.0) * (v - xmin) / span;
    let py = |v: f64| H - PAD - (H - 2.0 * PAD) * v.clamp(0.0, 100.0) / 100.0;
    for &v in x {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="9">{v:.0}</text>"#, px(v), H - PAD + 14.0);
    }
    for (s, (_, ys)) in series.iter().enumerate() {
        let pts: Vec<String> = x.iter().zip(ys).map(|(&a, &b)| format!("{:.1},{:.1}", px(a), py(b))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            PALETTE[s % PALETTE.len()]
        );
    }
    legend(&mut out, series.iter().map(|s| s.0.clone()));
    out.push_str("</svg>\n");
    out
}

/// One small panel per pool and test set with the in- and out-of-category
/// histograms overlaid.
pub fn histogram_grid(sets: &[(&str, Vec<Histogram>)]) -> String {
    let mut panels: Vec<(String, &Histogram, Option<&Histogram>)> = Vec::new();
    for (testset, hs) in sets {
        for pair in hs.chunks(2) {
            panels.push((format!("{} ({testset})", pair[0].pool), &pair[0], pair.get(1)));
        }
    }
    let cols = 4usize;
    let (pw, ph) = (180.0, 120.0);
    let rows = panels.len().div_ceil(cols).max(1);
    let (w, h) = (pw * cols as f64, ph * rows as f64 + 30.0);
    let mut out = String::new();
    open(&mut out, w, h, "Per-image mean pool activation");
    for (i, (title, a, b)) in panels.iter().enumerate() {
        let ox = pw * (i % cols) as f64;
        let oy = 30.0 + ph * (i / cols) as f64;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="9">{}</text>"#, ox + pw / 2.0, oy + 10.0, escape(title));
        let max = a.counts.iter().chain(b.iter().flat_map(|h| h.counts.iter())).copied().max().unwrap_or(0).max(1) as f64;
        let bw = (pw - 20.0) / HIST_BINS as f64;
        for (k, hist) in std::iter::once(*a).chain(*b).enumerate() {
            for (j, &c) in hist.counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let hh = (ph - 30.0) * c as f64 / max;
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.1}" y="{:.1}" width="{bw:.2}" height="{hh:.1}" fill="{}" fill-opacity="0.6"/>"#,
                    ox + 10.0 + bw * j as f64,
                    oy + ph - 10.0 - hh,
                    PALETTE[k]
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::stats::MeanStd;

    #[test]
    fn error_csv_has_contract_columns() {
        let dir = tempfile::tempdir().unwrap();
        let r = Reporter::new(dir.path()).unwrap();
        let rows = vec![ErrorRow {
            pool: "Big".into(),
            testset: "nbyl",
            mode: "fb",
            mean: 14.5,
            std: 2.0,
        }];
        r.errors(&rows).unwrap();
        let text = fs::read_to_string(dir.path().join(FIG5)).unwrap();
        assert_eq!(text, "pool,testset,mode,mean,std\nBig,nbyl,fb,14.5,2.0\n");
        let svg = fs::read_to_string(dir.path().join("fig5_errors.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn outputs_are_deterministic() {
        let point = SweepPoint {
            outliers: 7,
            fraction: 14.58,
            run: MeanStd { mean: 80.0, std: 5.0 },
            nbyl_ff: MeanStd { mean: 90.0, std: 1.0 },
            recognition: [MeanStd { mean: 99.0, std: 0.5 }; 3],
            trials: 2,
        };
        let write = || {
            let dir = tempfile::tempdir().unwrap();
            let r = Reporter::new(dir.path()).unwrap();
            r.sweep(std::slice::from_ref(&point)).unwrap();
            (
                fs::read(dir.path().join(FIG6)).unwrap(),
                fs::read(dir.path().join("fig6_sweep.svg")).unwrap(),
            )
        };
        assert_eq!(write(), write());
    }

    #[test]
    fn histogram_rows_cover_every_bin() {
        let dir = tempfile::tempdir().unwrap();
        let r = Reporter::new(dir.path()).unwrap();
        let mut counts = vec![0; HIST_BINS];
        counts[HIST_BINS - 1] = 3;
        let h = vec![
            Histogram {
                pool: "Big 0".into(),
                category: "in".into(),
                counts: counts.clone(),
            },
            Histogram {
                pool: "Big 0".into(),
                category: "out".into(),
                counts,
            },
        ];
        r.histograms(&[("baseline", h)]).unwrap();
        let text = fs::read_to_string(dir.path().join(FIG4)).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * HIST_BINS);
        assert!(text.contains("baseline,Big 0,in,49,0.98,1.0,3"));
    }
}
