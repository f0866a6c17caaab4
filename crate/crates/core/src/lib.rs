//! Concept bootstrapping in a small associatively trained network.

pub mod binio;
pub mod harness;
pub mod net;
pub mod plasticity;
pub mod reservoir;
pub mod seed;
pub mod world;

pub use harness::config::Settings;
pub use harness::data::{ExperimentData, LabeledSet, TestSet};
pub use harness::experiments::Runner;
pub use harness::HarnessError;
pub use net::{Aan, AanConfig, Decision, Feature, NetError};
pub use reservoir::{FeatureCache, ReservoirModel};
pub use world::{ColorClass, DatasetKind, DatasetManifest, Image, ImageLabel, ShapeSpec, WorldError};
