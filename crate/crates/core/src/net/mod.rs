//! The acting agent net: pools of sigmoidal neurons on top of the reservoir,
//! reflex triggers, sharpening chains, the conjecture stream, the dual-branch
//! Big 3 pool and the feedback onto the reservoir.

mod aan;
mod config;
mod pool;
mod snapshot;

pub use aan::{Aan, Decision, Feedback, Layer0, Learning, NetworkState, Pathway};
pub use config::{
    AanConfig, AboveAverageParams, BalancedParams, HebbParams, Sigmoid, TrainingSchedule, MAX_DEPTH,
};
pub use pool::{dendrite_forward, motor_trigger, Branch, Feature, Pool, PoolRole, Rule, Source};
pub use snapshot::{SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bad snapshot: {0}")]
    Format(String),
    #[error("snapshot truncated")]
    Truncated,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(std::io::Error),
}

impl From<std::io::Error> for NetError {
    fn from(e: std::io::Error) -> Self {
        match e.kind() {
            std::io::ErrorKind::UnexpectedEof => NetError::Truncated,
            std::io::ErrorKind::InvalidData => NetError::Format(e.to_string()),
            _ => NetError::Io(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_anchors() {
        let f = Sigmoid::default();
        assert!((f.eval(100.0) - 0.5).abs() < 1e-6);
        assert!((f.eval(0.0) - 1.0 / (1.0 + 10f32.exp())).abs() < 1e-6);
        assert!((f.eval(0.0) - 4.54e-5).abs() < 1e-7);
        assert!((f.eval(200.0) - 1.0 / (1.0 + (-10f32).exp())).abs() < 1e-6);
        assert!((f.eval(200.0) - 0.99995).abs() < 1e-5);
    }
}
