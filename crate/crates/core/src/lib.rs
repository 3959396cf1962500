//! Gradient-based taxis over simulated wireless signal-strength fields.
//!
//! A robot climbs a received-signal-strength field using finite difference
//! stochastic approximation (FDSA). The crate provides the field model
//! (path loss, wall shadowing, small-scale fading), noisy sensing and motion,
//! gradient estimators, the optimizer with its gain schedule checks, the
//! objectives, and an experiment harness.

pub mod error;
pub mod field;
pub mod gradest;
pub mod harness;
pub mod objectives;
pub mod position;
pub mod record;
pub mod sa;
pub mod sensing;
pub mod stats;

pub use error::{Error, Result};
pub use field::{FieldModel, PathLossParams};
pub use harness::{run_ensemble, run_single, Ensemble, EnsembleSummary, Scenario};
pub use gradest::{EstimatorConfig, EstimatorKind, GradientEstimate, GradientEstimator};
pub use objectives::{Objective, ObjectiveKind};
pub use position::Position;
pub use record::{IterationRow, RecordDetail, RunRecord, Termination};
pub use sa::{check_schedule, GainSchedule, ScheduleVerdict};
pub use sensing::{MotorMode, NoiseSpec, Robot, Sensor};
