//! Configuration, Monte-Carlo sweeps, gradient checks and CSV reports.

pub mod config;
pub mod gradcheck;
pub mod report;
pub mod sweep;

pub use config::{ExperimentConfig, Method, Preset, SweepVariable};
pub use gradcheck::{run_gradcheck, GradcheckOptions, GradcheckReport};
pub use report::{SweepResult, SweepRow, CSV_HEADER};
pub use sweep::{run_rmse_sweep, run_rmse_sweep_traced, run_se_sweep, run_se_sweep_traced};
