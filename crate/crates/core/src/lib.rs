//! Adaptive group-testing estimators for the number of defective items.
//!
//! The crate simulates a group-testing oracle over a hidden defective set,
//! implements deterministic, expected-query and Monte Carlo estimators of the
//! defective count, evaluates the matching closed-form query bounds, and runs
//! reproducible parallel experiments against them.

pub mod bounds;
pub mod calibration;
pub mod doubling;
pub mod estimators;
pub mod fixtures;
pub mod harness;
pub mod oracle;
pub mod scale;
pub mod stats;
pub mod streams;

pub use doubling::{BuiltinSchedule, DeltaSchedule, DoublingResult};
pub use estimators::{EstimateOutcome, EstimatorConfig, EstimatorKind};
pub use oracle::{Instance, Oracle, Transcript};
pub use scale::ExtendedScale;
