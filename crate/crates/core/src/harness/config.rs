//! Plain-text `key = value` settings for the experiments.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::data::PipelineConfig;
use super::experiments::{DEFAULT_TRIALS, SUPPLEMENT_TRIALS};
use super::HarnessError;
use crate::net::AanConfig;
use crate::world::{ColorClass, DEFAULT_OUTLIERS};

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    /// Network template; per-trial seeds derive from `seed`.
    pub aan: AanConfig,
    pub pipeline: PipelineConfig,
    pub trials: usize,
    pub supplement_trials: usize,
    pub outliers: u32,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            aan: AanConfig::default(),
            pipeline: PipelineConfig::new(1, true),
            trials: DEFAULT_TRIALS,
            supplement_trials: SUPPLEMENT_TRIALS,
            outliers: DEFAULT_OUTLIERS,
        }
    }
}

trait Field {
    fn parse_into(&mut self, s: &str) -> Result<(), String>;
    fn show(&self) -> String;
}

macro_rules! field {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn parse_into(&mut self, s: &str) -> Result<(), String> {
                *self = <$t>::from_str(s).map_err(|e| e.to_string())?;
                Ok(())
            }
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

field!(f32, u32, u64, usize, bool, ColorClass);

type Accessor = fn(&mut Settings) -> &mut dyn Field;

const KEYS: &[(&str, Accessor)] = &[
    ("seed", |s| &mut s.pipeline.seed),
    ("reduced", |s| &mut s.pipeline.reduced),
    ("trials", |s| &mut s.trials),
    ("supplement_trials", |s| &mut s.supplement_trials),
    ("outliers", |s| &mut s.outliers),
    ("reservoir.epochs", |s| &mut s.pipeline.reservoir.epochs),
    ("reservoir.batch_size", |s| &mut s.pipeline.reservoir.batch_size),
    ("reservoir.learning_rate", |s| &mut s.pipeline.reservoir.learning_rate),
    ("reservoir.momentum", |s| &mut s.pipeline.reservoir.momentum),
    ("reservoir.lr_decay", |s| &mut s.pipeline.reservoir.lr_decay),
    ("net.depth", |s| &mut s.aan.depth),
    ("net.color", |s| &mut s.aan.color),
    ("net.pool_size", |s| &mut s.aan.pool_size),
    ("net.fan_in", |s| &mut s.aan.fan_in),
    ("motor.F", |s| &mut s.aan.motor_threshold),
    ("sigmoid.a", |s| &mut s.aan.sigmoid.a),
    ("sigmoid.b", |s| &mut s.aan.sigmoid.b),
    ("schedule.ico_passes", |s| &mut s.aan.schedule.ico_passes),
    ("schedule.presentations", |s| &mut s.aan.schedule.unsupervised_presentations),
    ("ico.mu_pos", |s| &mut s.aan.ico.mu_pos),
    ("ico.mu_neg", |s| &mut s.aan.ico.mu_neg),
    ("ico.phi", |s| &mut s.aan.ico.phi),
    ("hebb.mu0", |s| &mut s.aan.hebb.mu0),
    ("hebb.theta", |s| &mut s.aan.hebb.anneal.theta),
    ("hebb.c", |s| &mut s.aan.hebb.anneal.c),
    ("aa.mu0.layer123", |s| &mut s.aan.aa.mu0_layer123),
    ("aa.mu0.and1", |s| &mut s.aan.aa.mu0_and1),
    ("aa.mu0.and2", |s| &mut s.aan.aa.mu0_and2),
    ("aa.gU", |s| &mut s.aan.aa.avg.g_u),
    ("aa.rU", |s| &mut s.aan.aa.avg.r_u),
    ("aa.gV", |s| &mut s.aan.aa.avg.g_v),
    ("aa.rV", |s| &mut s.aan.aa.avg.r_v),
    ("aa.w0", |s| &mut s.aan.aa.w0),
    ("anneal.layer1.theta", |s| &mut s.aan.aa.anneal_layer1.theta),
    ("anneal.layer1.c", |s| &mut s.aan.aa.anneal_layer1.c),
    ("anneal.rest.theta", |s| &mut s.aan.aa.anneal_rest.theta),
    ("anneal.rest.c", |s| &mut s.aan.aa.anneal_rest.c),
    ("bal.mu0", |s| &mut s.aan.bal.mu0),
    ("bal.gU", |s| &mut s.aan.bal.avg.g_u),
    ("bal.rU", |s| &mut s.aan.bal.avg.r_u),
    ("bal.gV", |s| &mut s.aan.bal.avg.g_v),
    ("bal.rV", |s| &mut s.aan.bal.avg.r_v),
    ("bal.theta", |s| &mut s.aan.bal.anneal.theta),
    ("bal.c", |s| &mut s.aan.bal.anneal.c),
    ("bal.w0", |s| &mut s.aan.bal.w0),
];

impl Settings {
    pub fn keys() -> impl Iterator<Item = &'static str> {
        KEYS.iter().map(|(k, _)| *k)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let (_, get) = KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| HarnessError::Config(format!("unknown key {key:?}")))?;
        get(self)
            .parse_into(value)
            .map_err(|e| HarnessError::Config(format!("{key} = {value:?}: {e}")))
    }

    /// Applies `key = value` lines on top of the defaults. `#` starts a
    /// comment; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut s = Settings::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", n + 1)))?;
            s.set(k.trim(), v.trim())?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.aan.validate()?;
        if self.trials == 0 || self.supplement_trials == 0 {
            return Err(HarnessError::Config("trial counts must be positive".into()));
        }
        if !crate::world::OUTLIER_COUNTS.contains(&self.outliers) {
            return Err(HarnessError::Config(format!("outliers must be one of {:?}", crate::world::OUTLIER_COUNTS)));
        }
        Ok(())
    }

    /// Every key with its current value, in a form [`Settings::parse`] reads back.
    pub fn render(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        for (k, get) in KEYS {
            let _ = writeln!(out, "{k} = {}", get(&mut copy).show());
        }
        out
    }

    /// The network template with the run's base seed.
    pub fn network(&self) -> AanConfig {
        AanConfig {
            seed: self.pipeline.seed,
            ..self.aan.clone()
        }
    }
}
