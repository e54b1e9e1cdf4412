//! Estimators of the defective count `d`.
//!
//! Three estimators share one outcome type:
//! - [`estimate_deterministic`] partitions the items into small groups and
//!   finds the defective groups exactly, so `(1−ε)d ≤ D ≤ d` always holds.
//! - [`estimate_expected`] bounds the expected number of queries.
//! - [`estimate_monte_carlo`] bounds the worst-case number of queries.

mod deterministic;
mod find;
mod randomized;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doubling::DoublingError;
use crate::oracle::{Oracle, OracleError};

pub use deterministic::{estimate_deterministic, group_size_cap};
pub use find::find_defectives;
pub use randomized::{estimate_expected, estimate_monte_carlo, sample_count, stage_confidence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error("(1 − ε)·n = {0} is below 1, no partition exists")]
    EmptyPartition(f64),
    #[error("unknown estimator {0:?}")]
    UnknownEstimator(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Doubling(#[from] DoublingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Deterministic,
    Expected,
    MonteCarlo,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [
        EstimatorKind::Deterministic,
        EstimatorKind::Expected,
        EstimatorKind::MonteCarlo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Deterministic => "deterministic",
            EstimatorKind::Expected => "expected",
            EstimatorKind::MonteCarlo => "monte-carlo",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| EstimatorError::UnknownEstimator(s.to_string()))
    }
}

/// Accuracy, confidence, and tuning knobs for the randomized stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Relative accuracy ε.
    pub epsilon: f64,
    /// Failure probability δ.
    pub delta: f64,
    /// The expected-query estimator outputs 0 outright with probability
    /// `δ − δ^c` and otherwise runs at confidence `δ^c`.
    pub wrapper_exponent: f64,
    /// Votes per comparison in the exponent search (odd).
    pub stage2_votes: u32,
    /// The grid search spans `±(factor·log2(1/δ') + 1)` exponents.
    pub stage3_grid_factor: f64,
    /// Votes per comparison in the grid search (odd).
    pub stage3_votes: u32,
    /// The sampling stage asks `⌈K·ε⁻²·ln(1/δ')⌉` queries.
    pub stage4_sample_multiplier: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            delta: 0.1,
            wrapper_exponent: 2.0,
            stage2_votes: 1,
            stage3_grid_factor: 2.0,
            stage3_votes: 5,
            stage4_sample_multiplier: 3.0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        let bad = |msg: String| Err(EstimatorError::InvalidConfig(msg));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} outside (0, 1)", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} outside (0, 1)", self.delta));
        }
        if !(self.wrapper_exponent > 1.0 && self.wrapper_exponent.is_finite()) {
            return bad(format!(
                "wrapper exponent {} must exceed 1",
                self.wrapper_exponent
            ));
        }
        for (name, votes) in [
            ("stage2_votes", self.stage2_votes),
            ("stage3_votes", self.stage3_votes),
        ] {
            if votes % 2 == 0 {
                return bad(format!("{name} must be odd, got {votes}"));
            }
        }
        for (name, v) in [
            ("stage3_grid_factor", self.stage3_grid_factor),
            ("stage4_sample_multiplier", self.stage4_sample_multiplier),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Queries spent in one named stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageCount {
    pub name: &'static str,
    pub queries: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EstimateOutcome {
    pub estimate: u64,
    /// Sum of the stage counts, tallied by the estimator itself.
    pub queries_asked: u64,
    pub stages: Vec<StageCount>,
    /// The expected-query estimator returned 0 without querying.
    pub wrapper_fired: bool,
}

impl EstimateOutcome {
    fn new(estimate: u64, stages: Vec<StageCount>) -> Self {
        Self {
            estimate,
            queries_asked: stages.iter().map(|s| s.queries).sum(),
            stages,
            wrapper_fired: false,
        }
    }
}

/// The integers in `[(1−ε)d, (1+ε)d]`, as an inclusive range.
pub fn success_interval(d: u64, epsilon: f64) -> (u64, u64) {
    // a little slack so that e.g. 0.7·10 = 7.000000000000001 still admits 7
    const SLACK: f64 = 1e-9;
    let d = d as f64;
    let lo = ((1.0 - epsilon) * d - SLACK).ceil().max(0.0);
    let hi = ((1.0 + epsilon) * d + SLACK).floor();
    (lo as u64, hi as u64)
}

pub fn is_success(estimate: u64, d: u64, epsilon: f64) -> bool {
    let (lo, hi) = success_interval(d, epsilon);
    (lo..=hi).contains(&estimate)
}

/// Runs the chosen estimator. The deterministic estimator ignores `rng` and
/// every field of `config` except `epsilon`.
pub fn estimate<R: RngCore + ?Sized>(
    kind: EstimatorKind,
    config: &EstimatorConfig,
    oracle: &mut Oracle<'_>,
    rng: &mut R,
) -> Result<EstimateOutcome, EstimatorError> {
    match kind {
        EstimatorKind::Deterministic => estimate_deterministic(config.epsilon, oracle),
        EstimatorKind::Expected => estimate_expected(config, oracle, rng),
        EstimatorKind::MonteCarlo => estimate_monte_carlo(config, oracle, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_interval() {
        assert_eq!(success_interval(10, 0.3), (7, 13));
        assert_eq!(success_interval(2, 0.5), (1, 3));
        assert_eq!(success_interval(3, 0.5), (2, 4));
        assert_eq!(success_interval(0, 0.5), (0, 0));
        assert!(is_success(0, 0, 0.9));
        assert!(!is_success(1, 0, 0.9));
        assert!(!is_success(6, 10, 0.3));
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in EstimatorKind::ALL {
            assert_eq!(kind.name().parse::<EstimatorKind>().unwrap(), kind);
        }
        assert!("bogus".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::default().validate().is_ok());
        let with = |f: fn(&mut EstimatorConfig)| {
            let mut c = EstimatorConfig::default();
            f(&mut c);
            c.validate()
        };
        assert!(with(|c| c.epsilon = 0.0).is_err());
        assert!(with(|c| c.delta = 1.0).is_err());
        assert!(with(|c| c.wrapper_exponent = 1.0).is_err());
        assert!(with(|c| c.stage3_votes = 4).is_err());
        assert!(with(|c| c.stage4_sample_multiplier = 0.0).is_err());
    }

    #[test]
    fn config_from_partial_json() {
        let c: EstimatorConfig = serde_json::from_str(r#"{"epsilon":0.25}"#).unwrap();
        assert_eq!(c.epsilon, 0.25);
        assert_eq!(c.delta, 0.1);
        assert!(serde_json::from_str::<EstimatorConfig>(r#"{"eps":0.25}"#).is_err());
    }
}
