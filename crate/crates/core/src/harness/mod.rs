//! Experiment harness: data pipeline, training schedule, metrics, the
//! published experiments and their reports.

pub mod config;
pub mod criteria;
pub mod data;
pub mod experiments;
pub mod metrics;
pub mod report;
pub mod stats;
pub mod train;

use thiserror::Error;

use crate::net::NetError;
use crate::reservoir::ReservoirError;
use crate::world::WorldError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Data(String),
    #[error("statistics: {0}")]
    Statistics(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
