//! Vandalism detection for knowledge-base revisions.
//!
//! The pipeline parses merged revision lines, under-samples the majority
//! class, removes duplicate content, extracts comment and user-context
//! features, one-hot encodes them against a persisted vocabulary, selects
//! columns by tree importance, and trains a two-level stacked ensemble whose
//! second-level outputs are averaged. Evaluation (AUC-ROC, error analysis,
//! classical MDS) and a line-oriented streaming scoring protocol sit on top.

pub mod config;
pub mod corpus;
pub mod evaluation;
pub mod featurize;
pub mod learners;
pub mod rng;
pub mod sampling;
pub mod serve;
pub mod stacking;
pub mod synth;
pub mod workflow;

mod error;

pub use corpus::{LabeledExample, Revision};
pub use error::Error;
pub use featurize::{FeatureSchema, FeatureVector, RawFeatures};
pub use learners::{Family, ModelSpec, TrainedModel};
pub use sampling::SamplingConfig;
pub use stacking::{StackConfig, StackedPipeline};

/// Version of the artifact and of every persisted file format.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SCHEMA_FORMAT: &str = "vandalstack-schema v1";
pub const MODEL_FORMAT: &str = "vandalstack-model v1";
pub const PIPELINE_FORMAT: &str = "vandalstack-pipeline v1";
