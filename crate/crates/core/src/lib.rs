//! Kinematic-feature anomaly detection for tracked 2-D skeletons.
//!
//! The pipeline turns each tracked person into a small set of gait time series
//! (stride, feet displacement, neck displacement), cleans and windows them,
//! fits a masked autoregressive flow on normal data only, and scores test frames
//! by the lowest log-density of any window covering them. Frame-level micro-AUC
//! closes the loop, and [`synth`] produces labelled gait data for end-to-end runs.

pub mod config;
pub mod error;
pub mod flow;
pub mod kinematics;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod scoring;
pub mod skeleton;
pub mod svg;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use flow::{Maf, MadeBlock};
pub use kinematics::{FeatureKind, FeatureMatrix, FeatureSeries, Variant};
pub use metrics::{micro_auc, EvalReport};
pub use model::FlowModel;
pub use preprocess::{PreprocessConfig, Segment, Standardizer};
pub use scoring::{ScoredSegment, ScoredVideo};
pub use skeleton::{Joint, PersonTrack, VideoLabels};
pub use training::{TrainConfig, TrainOutcome};

/// Version string recorded in model files and effective configs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
