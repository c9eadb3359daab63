//! Optimization: Adam with projection, the deterministic training loop with
//! early stopping, and the finite-difference gradient checker.

mod adam;
mod gradcheck;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{gradient_check, GradientCheckConfig, GradientReport, GroupError};
pub use trainer::{train, EpochRecord, Objective, RunRecord, TrainConfig, TrainOutcome};
