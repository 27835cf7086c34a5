pub mod channel;
pub mod combining;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod optimizer;
pub mod statistics;

pub use channel::{ChannelRealization, ChannelSampler, Purpose, TrialRandomness};
pub use combining::{CombinerResult, SeEstimate};
pub use error::{Error, Result};
pub use estimation::{EstimatorKind, LinearEstimator};
pub use geometry::{AngleCoordinate, ArrayGeometry};
pub use optimizer::{AoTrace, OptimizerConfig};
pub use statistics::{
    CorrelationMatrix, PhaseConfiguration, Powers, ScatteringKind, ScatteringSpec,
    ScenarioStatistics,
};
