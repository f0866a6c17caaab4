use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use aan_core::harness::criteria::{self, Check};
use aan_core::harness::data::{self, prepare};
use aan_core::harness::experiments::{
    self, ablation, correlation_table, error_table, outlier_sweep, param_sweep, parameter_variants, relational_table,
    sharpening_table, with_color, ErrorRow, TrialSummary,
};
use aan_core::harness::metrics::{analyze, feature_name, Mode};
use aan_core::harness::report::{self, Reporter};
use aan_core::world::OUTLIER_COUNTS;
use aan_core::{
    Aan, ColorClass, DatasetKind, DatasetManifest, ExperimentData, Feature, FeatureCache, Image, ReservoirModel, Runner,
    Settings, TestSet,
};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aan", version, about = "Shape-world concept bootstrapping experiments")]
struct Cli {
    /// Plain-text `key = value` settings applied over the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, or output file for `train-reservoir` and `extract-features`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cache directory for the reservoir and extracted features.
    #[arg(long, global = true, default_value = "aan-work")]
    work: PathBuf,
    /// Exit nonzero if an experiment misses its reproduction threshold.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a dataset to `<out>/images` plus a manifest.
    GenData {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        outliers: Option<u32>,
    },
    /// Train the feature reservoir on a generated pretraining set.
    TrainReservoir {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reduced: bool,
    },
    /// Extract normalized reservoir features for every image of a dataset.
    ExtractFeatures {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train one network and save its snapshot to `<out>/aan.bin`.
    TrainAan {
        /// Trial index whose seed to use.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Error rates with and without feedback.
    Eval {
        /// Evaluate a saved network instead of running the configured trials.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Histograms of per-image mean pool activations.
    Histograms {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Correlation between reservoir activations and their feedback.
    Correlate,
    /// Run percentage against the fraction of rule-violating training images.
    SweepOutliers,
    /// Errors under perturbed learning rates and annealing.
    SweepParams,
    /// Errors against the number of sharpening layers.
    Ablate,
    /// Sharpening and relational selectivity, yellow against the magenta control.
    RelationalStats,
    /// Errors over the course of reflex and associative learning.
    LearningCurves,
    /// Every experiment and report.
    RunAll,
}

struct Ctx {
    settings: Settings,
    out: PathBuf,
    work: PathBuf,
    start: Instant,
}

impl Ctx {
    fn log(&self, msg: &str) {
        eprintln!("[{:>7.1}s] {msg}", self.start.elapsed().as_secs_f64());
    }

    fn data(&self) -> Result<ExperimentData> {
        let (_, data) = prepare(&self.work, &self.settings.pipeline, |m| self.log(m))?;
        Ok(data)
    }

    fn reporter(&self) -> Result<Reporter> {
        Ok(Reporter::new(&self.out)?)
    }

    fn runner<'a>(&'a self, data: &'a ExperimentData) -> Runner<'a> {
        Runner::with_log(data, move |m| self.log(m))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Runs a command; `Ok(false)` when `--check` found a failed threshold.
fn run(cli: Cli) -> Result<bool> {
    let settings = match &cli.config {
        Some(p) => Settings::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => Settings::default(),
    };
    let ctx = Ctx {
        settings,
        out: cli.out.clone().unwrap_or_else(|| PathBuf::from("results")),
        work: cli.work.clone(),
        start: Instant::now(),
    };
    let checks = match cli.cmd {
        Cmd::GenData { kind, seed, outliers } => {
            let kind = DatasetKind::parse(&kind, outliers)?;
            let seed = seed.unwrap_or(ctx.settings.pipeline.seed);
            let m = DatasetManifest::generate(kind, seed)?;
            m.write_to_dir(&ctx.out)?;
            ctx.log(&format!("wrote {} images to {}", m.len(), ctx.out.display()));
            vec![]
        }
        Cmd::TrainReservoir { data, seed, reduced } => train_reservoir(&ctx, &data, seed, reduced)?,
        Cmd::ExtractFeatures { model, data } => {
            extract_features(&ctx, &model, &data)?;
            vec![]
        }
        Cmd::TrainAan { trial } => {
            let data = ctx.data()?;
            let cfg = Runner::trial_config(&ctx.settings.network(), trial);
            let aan = experiments::train_single(&cfg, &data)?;
            fs::create_dir_all(&ctx.out)?;
            let path = ctx.out.join("aan.bin");
            aan.save(&path)?;
            ctx.log(&format!("saved {}", path.display()));
            print_single(&aan, &data)?;
            vec![]
        }
        Cmd::Eval { model: Some(path) } => {
            let data = ctx.data()?;
            let aan = Aan::load(&path)?;
            let rows = print_single(&aan, &data)?;
            ctx.reporter()?.errors(&rows)?;
            vec![]
        }
        Cmd::Eval { model: None } => {
            let data = ctx.data()?;
            let runner = ctx.runner(&data);
            eval(&ctx, &runner)?
        }
        Cmd::Histograms { model } => {
            let data = ctx.data()?;
            match model {
                Some(path) => {
                    let aan = Aan::load(&path)?;
                    let b = analyze(&aan, &data.baseline, TestSet::Baseline)?;
                    let n = analyze(&aan, &data.nbyl, TestSet::Nbyl)?;
                    ctx.reporter()?.histograms(&[("baseline", b.histograms()), ("nbyl", n.histograms())])?;
                }
                None => {
                    let runner = ctx.runner(&data);
                    histograms(&ctx, &runner)?;
                }
            }
            vec![]
        }
        Cmd::Correlate => {
            with_runner(&ctx, correlate)?
        }
        Cmd::SweepOutliers => {
            with_runner(&ctx, sweep_outliers)?
        }
        Cmd::SweepParams => {
            with_runner(&ctx, sweep_params)?;
            vec![]
        }
        Cmd::Ablate => {
            with_runner(&ctx, ablate)?
        }
        Cmd::RelationalStats => {
            with_runner(&ctx, relational_stats)?
        }
        Cmd::LearningCurves => {
            let data = ctx.data()?;
            learning_curves(&ctx, &data)?;
            vec![]
        }
        Cmd::RunAll => run_all(&ctx)?,
    };
    for c in &checks {
        println!("{}", c.line());
    }
    Ok(!cli.check || checks.iter().all(|c| c.pass))
}

fn with_runner<T>(ctx: &Ctx, f: impl FnOnce(&Ctx, &Runner) -> Result<T>) -> Result<T> {
    let data = ctx.data()?;
    let runner = ctx.runner(&data);
    f(ctx, &runner)
}

fn train_reservoir(ctx: &Ctx, data: &Path, seed: Option<u64>, reduced: bool) -> Result<Vec<Check>> {
    let m = DatasetManifest::read_from_dir(data).with_context(|| format!("reading dataset {}", data.display()))?;
    if m.kind != DatasetKind::CnnPretrain {
        bail!("{} holds {}, not a pretraining set", data.display(), m.kind.name());
    }
    let mut pipeline = ctx.settings.pipeline.clone();
    pipeline.seed = seed.unwrap_or(pipeline.seed);
    pipeline.reduced = reduced || pipeline.reduced;
    let holdout = data::reservoir_holdout(pipeline.seed)?;
    let (model, report) = data::build_reservoir(&m, &holdout, &pipeline.train_config(), |e, loss, acc| {
        let acc = acc.map(|a| format!(" held-out class {:.4} left {:.4}", a.class, a.left));
        ctx.log(&format!("epoch {e} loss {loss:.4}{}", acc.unwrap_or_default()));
    })?;
    if let Some(parent) = ctx.out.parent() {
        fs::create_dir_all(parent)?;
    }
    model.save(&ctx.out)?;
    ctx.log(&format!("saved {}", ctx.out.display()));
    let acc = report.holdout.last().map_or(0.0, |a| a.class.min(a.left));
    Ok(vec![Check {
        id: 0,
        name: "reservoir accuracy",
        pass: acc >= pipeline.required_accuracy(),
        detail: format!("held-out accuracy {:.4} (>= {:.2})", acc, pipeline.required_accuracy()),
    }])
}

fn extract_features(ctx: &Ctx, model: &Path, data: &Path) -> Result<()> {
    let model = ReservoirModel::load(model)?;
    let m = DatasetManifest::read_from_dir(data)?;
    let images = m
        .entries
        .iter()
        .map(|e| Image::read_png(&data.join(&e.path)))
        .collect::<Result<Vec<_>, _>>()?;
    let cache = FeatureCache::build(&model, images)?;
    if let Some(parent) = ctx.out.parent() {
        fs::create_dir_all(parent)?;
    }
    cache.write(&ctx.out)?;
    ctx.log(&format!("wrote {} x {} features to {}", cache.len(), cache.dim(), ctx.out.display()));
    Ok(())
}

/// Error rows of one network, printed and returned.
fn print_single(aan: &Aan, data: &ExperimentData) -> Result<Vec<ErrorRow>> {
    let mut rows = Vec::new();
    for which in [TestSet::Baseline, TestSet::Nbyl] {
        let a = analyze(aan, data.test_set(which), which)?;
        for mode in [Mode::FeedForward, Mode::Feedback] {
            let e = a.errors(mode);
            for f in Feature::ALL {
                rows.push(ErrorRow {
                    pool: feature_name(f, aan.config().color),
                    testset: which.name(),
                    mode: mode.name(),
                    mean: e.get(f),
                    std: 0.0,
                });
            }
        }
    }
    for r in &rows {
        println!("{:<8} {:<9} {:<3} {:6.2}%", r.pool, r.testset, r.mode, r.mean);
    }
    Ok(rows)
}

fn default_trials(ctx: &Ctx, runner: &Runner) -> Result<Vec<Arc<TrialSummary>>> {
    Ok(runner.trials(&ctx.settings.network(), ctx.settings.outliers, ctx.settings.trials)?)
}

fn eval(ctx: &Ctx, runner: &Runner) -> Result<Vec<Check>> {
    let trials = default_trials(ctx, runner)?;
    ctx.reporter()?.errors(&error_table(&trials))?;
    Ok(vec![criteria::reflex(&trials), criteria::rescue(&trials), criteria::collateral(&trials)])
}

fn histograms(ctx: &Ctx, runner: &Runner) -> Result<()> {
    let first = runner.trials(&ctx.settings.network(), ctx.settings.outliers, 1)?;
    let [b, n] = first[0].histograms.clone();
    ctx.reporter()?.histograms(&[("baseline", b), ("nbyl", n)])?;
    Ok(())
}

fn correlate(ctx: &Ctx, runner: &Runner) -> Result<Vec<Check>> {
    let trials = default_trials(ctx, runner)?;
    let table = correlation_table(&trials);
    ctx.reporter()?.correlations(&table)?;
    Ok(vec![criteria::correlation(&table)])
}

fn sweep_outliers(ctx: &Ctx, runner: &Runner) -> Result<Vec<Check>> {
    let points = outlier_sweep(runner, &ctx.settings.network(), &OUTLIER_COUNTS, ctx.settings.trials)?;
    ctx.reporter()?.sweep(&points)?;
    Ok(vec![criteria::sweep(&points)])
}

fn sweep_params(ctx: &Ctx, runner: &Runner) -> Result<()> {
    let points = param_sweep(runner, &parameter_variants(&ctx.settings.network()), ctx.settings.trials)?;
    ctx.reporter()?.params(&points)?;
    Ok(())
}

fn ablate(ctx: &Ctx, runner: &Runner) -> Result<Vec<Check>> {
    let rows = ablation(runner, &ctx.settings.network(), &[0, 1, 2, 3], ctx.settings.trials)?;
    ctx.reporter()?.ablation(&rows)?;
    Ok(vec![criteria::ablation(&rows)])
}

fn relational_stats(ctx: &Ctx, runner: &Runner) -> Result<Vec<Check>> {
    let base = ctx.settings.network();
    let n = ctx.settings.supplement_trials;
    let yellow = runner.trials(&with_color(&base, ColorClass::Yellow), ctx.settings.outliers, n)?;
    let magenta = runner.trials(&with_color(&base, ColorClass::Magenta), ctx.settings.outliers, n)?;
    let s1 = sharpening_table(&yellow);
    let s2 = relational_table(&yellow, &magenta);
    let r = ctx.reporter()?;
    r.sharpening(&s1)?;
    r.relational(&s2)?;
    Ok(vec![criteria::sharpening(&s1), criteria::relational(&s2)])
}

fn learning_curves(ctx: &Ctx, data: &ExperimentData) -> Result<()> {
    let cfg = Runner::trial_config(&ctx.settings.network(), 0);
    let r = ctx.reporter()?;
    ctx.log("reflex learning curve");
    r.curves(report::CURVES_ICO, &experiments::reflex_curve(&cfg, data)?)?;
    ctx.log("associative learning curve");
    r.curves(report::CURVES_UNSUP, &experiments::associative_curve(&cfg, data)?)?;
    Ok(())
}

fn run_all(ctx: &Ctx) -> Result<Vec<Check>> {
    let data = ctx.data()?;
    let runner = ctx.runner(&data);
    fs::create_dir_all(&ctx.out)?;
    fs::write(ctx.out.join("settings.txt"), ctx.settings.render())?;
    let mut checks = Vec::new();
    // The supplement statistics include the default trials, so run them first.
    checks.extend(relational_stats(ctx, &runner)?);
    checks.extend(eval(ctx, &runner)?);
    histograms(ctx, &runner)?;
    checks.extend(correlate(ctx, &runner)?);
    checks.extend(sweep_outliers(ctx, &runner)?);
    checks.extend(ablate(ctx, &runner)?);
    sweep_params(ctx, &runner)?;
    learning_curves(ctx, &data)?;
    checks.sort_by_key(|c| c.id);
    let text: String = checks.iter().map(|c| c.line() + "\n").collect();
    fs::write(ctx.out.join("checks.txt"), text)?;
    Ok(checks)
}
