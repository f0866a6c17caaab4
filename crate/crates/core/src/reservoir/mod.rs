//! Convolutional feature reservoir.
//!
//! A small conv net is trained once on the 27-way shape/colour/size task plus
//! a left/non-left output, then frozen. The agent only ever sees the
//! normalized activations of its last three convolution layers.

mod cache;
mod model;
mod network;
mod real;
mod train;

pub use cache::{FeatureCache, CACHE_MAGIC, CACHE_VERSION};
pub use model::{image_to_input, ReservoirModel, ReservoirOutput, NORM_EPSILON};
pub use network::{head_loss, Architecture, Dims, Grads, LayerSpec, Network, Pass};
pub use real::Real;
pub use train::{evaluate, train_reservoir, Accuracy, TrainConfig, TrainReport, TrainSample};

use thiserror::Error;

/// Number of features exported to the agent (5·5·128 + 3·3·128 + 64).
pub const FEATURE_DIM: usize = 4416;

#[derive(Debug, Error)]
pub enum ReservoirError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error(
        "reservoir did not converge after {epochs} epochs: class accuracy {class_accuracy:.4}, \
         left accuracy {left_accuracy:.4}, required {required:.4}"
    )]
    NotConverged {
        epochs: usize,
        class_accuracy: f64,
        left_accuracy: f64,
        required: f64,
    },
    #[error("bad file format: {0}")]
    Format(String),
    #[error("file truncated")]
    Truncated,
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Io(std::io::Error),
}

impl From<std::io::Error> for ReservoirError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            ReservoirError::Truncated
        } else {
            ReservoirError::Io(e)
        }
    }
}
