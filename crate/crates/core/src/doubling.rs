//! Doubling search over a growing threshold schedule.
//!
//! Ask the pooled queries `Q_{Δ_1}, Q_{Δ_2}, …` in order and stop at the first
//! negative answer, at index `i0`. The returned bound is
//! `D = 2·Δ_{i0}·log2(2/δ)`: with probability at least `1 − δ` it satisfies
//! `d ≤ D ≤ 2·Δ_{i1}·log2(2/δ)`, where `i1` is the first index with
//! `Δ_{i1} > 2d/δ`, and the expected number of queries is at most `i1 + 2`.
//! With an upper bound `D* ≥ d` known in advance, capping the walk at the
//! first index whose threshold exceeds `D*` bounds the worst case.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;
use thiserror::Error;

use crate::oracle::{Oracle, OracleError};
use crate::scale::ExtendedScale;

/// Number of leading steps whose ratio condition is checked at construction.
pub const VALIDATED_PREFIX: u32 = 64;

/// Walks beyond this many steps are treated as divergent.
const MAX_STEPS: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DoublingError {
    #[error("schedule {name}: Δ_1 = {first} is below 1")]
    FirstBelowOne { name: String, first: String },
    #[error("schedule {name}: Δ_{next}/Δ_{step} < 2", next = step + 1)]
    RatioTooSmall { name: String, step: u32 },
    #[error("confidence parameter must lie in (0, 1), got {0}")]
    BadConfidence(f64),
    #[error("cap must allow at least one query")]
    ZeroCap,
    #[error("unknown schedule {0:?}")]
    UnknownSchedule(String),
    #[error("doubling search did not stop within {0} steps")]
    Diverged(u32),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// The built-in threshold sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinSchedule {
    /// `Δ_i = 2^(2^i)`
    DoubleExp,
    /// `Δ_i = 2^(2^(i²))`
    Improved,
    /// `Δ_1 = 1`, `Δ_i = 2^(Δ_{i−1})`
    Tower,
    /// `Δ_i = 2^(2^(2^(2^i)))`
    QuadExp,
    /// `Δ_i = 2^(2^(2^i))`
    TripleExp,
    /// `Δ_i = 2^(2^(i²/2))`
    HalfSquare,
}

impl BuiltinSchedule {
    pub const ALL: [BuiltinSchedule; 6] = [
        BuiltinSchedule::DoubleExp,
        BuiltinSchedule::Improved,
        BuiltinSchedule::Tower,
        BuiltinSchedule::QuadExp,
        BuiltinSchedule::TripleExp,
        BuiltinSchedule::HalfSquare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinSchedule::DoubleExp => "double-exp",
            BuiltinSchedule::Improved => "improved",
            BuiltinSchedule::Tower => "tower",
            BuiltinSchedule::QuadExp => "quad-exp",
            BuiltinSchedule::TripleExp => "triple-exp",
            BuiltinSchedule::HalfSquare => "half-square",
        }
    }

    /// `Δ_i` for `i ≥ 1`.
    pub fn threshold(self, i: u32) -> ExtendedScale {
        let x = f64::from(i);
        match self {
            BuiltinSchedule::DoubleExp => log2_scale(x.exp2()),
            BuiltinSchedule::Improved => log2_scale((x * x).exp2()),
            BuiltinSchedule::HalfSquare => log2_scale((x * x / 2.0).exp2()),
            BuiltinSchedule::TripleExp => log2_scale(x.exp2().exp2()),
            BuiltinSchedule::QuadExp => log2_scale(x.exp2().exp2().exp2()),
            BuiltinSchedule::Tower => {
                let mut delta = ExtendedScale::ONE;
                for _ in 1..i {
                    if delta.is_saturated() {
                        break;
                    }
                    delta = ExtendedScale::power_of_two_of(delta);
                }
                delta
            }
        }
    }
}

fn log2_scale(log2: f64) -> ExtendedScale {
    ExtendedScale::from_log2(log2).expect("schedule exponents are non-negative")
}

impl fmt::Display for BuiltinSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinSchedule {
    type Err = DoublingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            // the schedule of the original estimator this work builds on
            "falahatgar" => Ok(BuiltinSchedule::DoubleExp),
            _ => BuiltinSchedule::ALL
                .into_iter()
                .find(|b| b.name() == s)
                .ok_or_else(|| DoublingError::UnknownSchedule(s.to_string())),
        }
    }
}

type Generator = Arc<dyn Fn(u32) -> ExtendedScale + Send + Sync>;

/// A named threshold sequence `Δ_1, Δ_2, …` with `Δ_1 ≥ 1` and
/// `Δ_{i+1}/Δ_i ≥ 2`.
#[derive(Clone)]
pub struct DeltaSchedule {
    name: String,
    generator: Generator,
}

impl fmt::Debug for DeltaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeltaSchedule")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl DeltaSchedule {
    /// A custom schedule. The ratio condition is verified over the first
    /// [`VALIDATED_PREFIX`] steps only; `Δ_1 ≥ 1` holds by construction of
    /// [`ExtendedScale`].
    pub fn new(
        name: impl Into<String>,
        generator: impl Fn(u32) -> ExtendedScale + Send + Sync + 'static,
    ) -> Result<Self, DoublingError> {
        let schedule = Self {
            name: name.into(),
            generator: Arc::new(generator),
        };
        let mut prev = schedule.threshold(1);
        if prev < ExtendedScale::ONE {
            return Err(DoublingError::FirstBelowOne {
                name: schedule.name,
                first: prev.to_string(),
            });
        }
        for step in 1..VALIDATED_PREFIX {
            let next = schedule.threshold(step + 1);
            if !ExtendedScale::ratio_at_least_two(prev, next) {
                return Err(DoublingError::RatioTooSmall {
                    name: schedule.name,
                    step,
                });
            }
            prev = next;
        }
        Ok(schedule)
    }

    pub fn builtin(kind: BuiltinSchedule) -> Self {
        Self::new(kind.name(), move |i| kind.threshold(i)).expect("built-in schedules are valid")
    }

    pub fn by_name(name: &str) -> Result<Self, DoublingError> {
        name.parse().map(Self::builtin)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn threshold(&self, i: u32) -> ExtendedScale {
        (self.generator)(i)
    }

    /// Smallest `i` with `Δ_i > bound`, or `None` if the schedule never
    /// passes it (a saturated bound).
    pub fn first_index_exceeding(&self, bound: ExtendedScale) -> Option<u32> {
        if bound.is_saturated() {
            return None;
        }
        (1..MAX_STEPS).find(|&i| self.threshold(i) > bound)
    }

    /// The index `i1` with `Δ_{i1−1} ≤ 2d/δ < Δ_{i1}`.
    pub fn i1(&self, d: u64, confidence: f64) -> u32 {
        let target = 2.0 * d as f64 / confidence;
        if target < 1.0 {
            return 1;
        }
        let bound = ExtendedScale::from_log2(target.log2()).expect("target >= 1");
        self.first_index_exceeding(bound)
            .expect("finite bound is eventually exceeded")
    }
}

/// All built-in schedules, in declaration order.
pub fn builtin_schedules() -> Vec<DeltaSchedule> {
    BuiltinSchedule::ALL
        .into_iter()
        .map(DeltaSchedule::builtin)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingResult {
    /// Index of the last query asked.
    pub stop_index: u32,
    pub delta_at_stop: ExtendedScale,
    /// `2·Δ_{stop}·log2(2/δ)`.
    pub estimate: ExtendedScale,
    pub queries_asked: u64,
    /// The cap was reached without a negative answer.
    pub capped: bool,
}

/// `log2(2/δ)`.
pub fn confidence_factor(confidence: f64) -> f64 {
    (2.0 / confidence).log2()
}

/// Runs the doubling search at confidence `δ`, optionally asking at most
/// `cap` queries.
pub fn run<R: RngCore + ?Sized>(
    schedule: &DeltaSchedule,
    confidence: f64,
    oracle: &mut Oracle<'_>,
    rng: &mut R,
    cap: Option<u32>,
) -> Result<DoublingResult, DoublingError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(DoublingError::BadConfidence(confidence));
    }
    if cap == Some(0) {
        return Err(DoublingError::ZeroCap);
    }
    let limit = cap.unwrap_or(MAX_STEPS);
    for i in 1..=limit {
        let delta = schedule.threshold(i);
        let positive = oracle.answer_pooled(delta, rng)?;
        if !positive || i == limit {
            let capped = positive && cap.is_some();
            if positive && cap.is_none() {
                return Err(DoublingError::Diverged(limit));
            }
            return Ok(DoublingResult {
                stop_index: i,
                delta_at_stop: delta,
                estimate: delta.scaled_by(2.0 * confidence_factor(confidence)),
                queries_asked: u64::from(i),
                capped,
            });
        }
    }
    unreachable!("loop returns at i == limit")
}
