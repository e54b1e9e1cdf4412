//! Reproducible Monte Carlo experiments over a grid of defective counts.
//!
//! Every trial draws its instance and its queries from
//! [`trial_stream`]`(master_seed, point, trial)`, trials of a point run in
//! parallel, and results are reduced in trial order, so output does not depend
//! on the number of workers.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundName, BoundQuery};
use crate::calibration;
use crate::estimators::{
    self, is_success, sample_count, stage_confidence, EstimateOutcome, EstimatorConfig, EstimatorError,
    EstimatorKind,
};
use crate::oracle::{Instance, Oracle, OracleError, Transcript};
use crate::stats::{percentile, wilson_interval, Z_95};
use crate::streams::trial_stream;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("unknown sampler {0:?}")]
    UnknownSampler(String),
    #[error("statistics and bound overlays cover different grids")]
    GridMismatch,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Bounds(#[from] bounds::BoundsError),
}

/// How each trial's defective set is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// A uniformly random `d`-subset, drawn afresh per trial.
    #[default]
    UniformRandom,
    /// The prefix `{1, …, d}`.
    AdversarialPrefix,
    /// `d` evenly spaced items `1 + ⌊i·n/d⌋`.
    SingletonSpread,
}

impl Sampler {
    pub const ALL: [Sampler; 3] = [
        Sampler::UniformRandom,
        Sampler::AdversarialPrefix,
        Sampler::SingletonSpread,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sampler::UniformRandom => "uniform-random",
            Sampler::AdversarialPrefix => "adversarial-prefix",
            Sampler::SingletonSpread => "singleton-spread",
        }
    }

    pub fn instance<R: rand::Rng + ?Sized>(
        self,
        n: u64,
        d: u64,
        rng: &mut R,
    ) -> Result<Instance, OracleError> {
        match self {
            Sampler::UniformRandom => {
                let picks = index::sample(rng, n as usize, d as usize);
                Instance::new(n, picks.into_iter().map(|i| i as u64 + 1))
            }
            Sampler::AdversarialPrefix => Instance::new(n, 1..=d),
            Sampler::SingletonSpread => Instance::new(n, (0..d).map(|i| 1 + spread_offset(i, n, d))),
        }
    }
}

fn spread_offset(i: u64, n: u64, d: u64) -> u64 {
    (u128::from(i) * u128::from(n) / u128::from(d)) as u64
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sampler {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Sampler::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::UnknownSampler(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub estimator: EstimatorKind,
    pub config: EstimatorConfig,
    pub n: u64,
    pub d_values: Vec<u64>,
    pub sampler: Sampler,
    pub trials: u64,
    pub master_seed: u64,
    pub record_transcripts: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidSpec(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.d_values.is_empty() {
            return bad("no d values given".into());
        }
        if let Some(&d) = self.d_values.iter().find(|&&d| d > self.n) {
            return bad(format!("d = {d} exceeds n = {}", self.n));
        }
        match self.estimator {
            EstimatorKind::Deterministic => {
                let eps = self.config.epsilon;
                if !(0.0..1.0).contains(&eps) || (1.0 - eps) * (self.n as f64) < 1.0 {
                    return bad(format!("epsilon {eps} leaves no partition of n = {}", self.n));
                }
            }
            _ => self.config.validate()?,
        }
        Ok(())
    }

    /// Per-trial query budget. Exceeding it marks the trial as an anomaly.
    ///
    /// `64·(d+1)·log2(n+2)`, plus the fixed size of the sampling stage for the
    /// randomized estimators, which does not scale with `d` or `n`.
    pub fn query_budget(&self, d: u64) -> u64 {
        let base = (64.0 * (d + 1) as f64 * ((self.n + 2) as f64).log2()).ceil() as u64;
        let sampling = match self.estimator {
            EstimatorKind::Deterministic => 0,
            EstimatorKind::Expected => sample_count(
                &self.config,
                stage_confidence(self.config.delta.powf(self.config.wrapper_exponent)),
            ),
            EstimatorKind::MonteCarlo => {
                sample_count(&self.config, stage_confidence(self.config.delta))
            }
        };
        base + sampling
    }
}

/// One estimator invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub outcome: Option<EstimateOutcome>,
    pub oracle_queries: u64,
    pub success: bool,
    /// The trial ran out of query budget.
    pub anomaly: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Transcript>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageMean {
    pub name: String,
    pub mean_queries: f64,
}

/// Aggregates for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStatistics {
    pub estimator: EstimatorKind,
    pub n: u64,
    pub d: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: u64,
    pub success_count: u64,
    pub success_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub mean_queries: f64,
    pub min_queries: u64,
    pub max_queries: u64,
    pub p50_queries: u64,
    pub p90_queries: u64,
    pub p99_queries: u64,
    pub stage_means: Vec<StageMean>,
    pub wrapper_fires: u64,
    /// Trials that exhausted the query budget.
    pub anomalies: u64,
    /// Trials whose self-reported count disagreed with the oracle's.
    pub count_mismatches: u64,
    /// Deterministic estimator only: trials whose output exceeded `d`.
    pub above_d: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub statistics: Vec<TrialStatistics>,
    /// Per point, per trial; empty unless transcripts were requested.
    pub transcripts: Vec<Vec<Transcript>>,
}

/// Runs one trial of grid point `point` (with defective count `d`).
pub fn run_trial(
    spec: &ExperimentSpec,
    point: u64,
    d: u64,
    trial: u64,
) -> Result<TrialRecord, HarnessError> {
    let mut rng = trial_stream(spec.master_seed, point, trial);
    let instance = spec.sampler.instance(spec.n, d, &mut rng)?;
    let mut oracle = Oracle::new(&instance).with_budget(spec.query_budget(d));
    if spec.record_transcripts {
        oracle = oracle.recording();
    }
    let result = estimators::estimate(spec.estimator, &spec.config, &mut oracle, &mut rng);
    let oracle_queries = oracle.query_count();
    let transcript = oracle.take_transcript();
    match result {
        Ok(outcome) => Ok(TrialRecord {
            success: is_success(outcome.estimate, d, spec.config.epsilon),
            outcome: Some(outcome),
            oracle_queries,
            anomaly: false,
            transcript,
        }),
        Err(EstimatorError::Oracle(OracleError::BudgetExhausted(_))) => Ok(TrialRecord {
            outcome: None,
            oracle_queries,
            success: false,
            anomaly: true,
            transcript,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Runs every grid point of `spec` on a pool of `jobs` worker threads
/// (0 means one per core).
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentOutput, HarnessError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let mut statistics = Vec::with_capacity(spec.d_values.len());
    let mut transcripts = Vec::new();
    for (point, &d) in spec.d_values.iter().enumerate() {
        let records: Vec<TrialRecord> = pool.install(|| {
            (0..spec.trials)
                .into_par_iter()
                .map(|trial| run_trial(spec, point as u64, d, trial))
                .collect::<Result<_, _>>()
        })?;
        statistics.push(summarize(spec, d, &records));
        if spec.record_transcripts {
            transcripts.push(records.into_iter().filter_map(|r| r.transcript).collect());
        }
    }
    Ok(ExperimentOutput {
        statistics,
        transcripts,
    })
}

/// Ordered reduction of one point's trial records.
pub fn summarize(spec: &ExperimentSpec, d: u64, records: &[TrialRecord]) -> TrialStatistics {
    let trials = records.len() as u64;
    let success_count = records.iter().filter(|r| r.success).count() as u64;
    let (wilson_low, wilson_high) = wilson_interval(success_count, trials, Z_95);
    let mut queries: Vec<u64> = records.iter().map(|r| r.oracle_queries).collect();
    let total: u64 = queries.iter().sum();
    queries.sort_unstable();

    let mut stage_totals: Vec<(&'static str, u64)> = Vec::new();
    for stage in records.iter().filter_map(|r| r.outcome.as_ref()).flat_map(|o| &o.stages) {
        match stage_totals.iter_mut().find(|(name, _)| *name == stage.name) {
            Some((_, sum)) => *sum += stage.queries,
            None => stage_totals.push((stage.name, stage.queries)),
        }
    }
    let outcomes = || records.iter().filter_map(|r| r.outcome.as_ref());
    TrialStatistics {
        estimator: spec.estimator,
        n: spec.n,
        d,
        epsilon: spec.config.epsilon,
        delta: spec.config.delta,
        trials,
        success_count,
        success_rate: success_count as f64 / trials as f64,
        wilson_low,
        wilson_high,
        mean_queries: total as f64 / trials as f64,
        min_queries: queries.first().copied().unwrap_or(0),
        max_queries: queries.last().copied().unwrap_or(0),
        p50_queries: percentile(&queries, 0.5),
        p90_queries: percentile(&queries, 0.9),
        p99_queries: percentile(&queries, 0.99),
        stage_means: stage_totals
            .into_iter()
            .map(|(name, sum)| StageMean {
                name: name.to_string(),
                mean_queries: sum as f64 / trials as f64,
            })
            .collect(),
        wrapper_fires: outcomes().filter(|o| o.wrapper_fired).count() as u64,
        anomalies: records.iter().filter(|r| r.anomaly).count() as u64,
        count_mismatches: records
            .iter()
            .filter(|r| r.outcome.as_ref().is_some_and(|o| o.queries_asked != r.oracle_queries))
            .count() as u64,
        above_d: outcomes().filter(|o| o.estimate > d).count() as u64,
    }
}

pub const CSV_HEADER: &str = "estimator,n,d,eps,delta,trials,successes,success_rate,\
wilson_low,wilson_high,mean_queries,min_queries,max_queries,p50_queries,p90_queries,\
p99_queries,wrapper_fires,anomalies,count_mismatches,stage_means";

/// One CSV row per grid point, with fixed float formatting.
pub fn to_csv(statistics: &[TrialStatistics]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in statistics {
        let stages: Vec<String> = s
            .stage_means
            .iter()
            .map(|m| format!("{}={:.6}", m.name, m.mean_queries))
            .collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{},{},{},{}",
            s.estimator,
            s.n,
            s.d,
            s.epsilon,
            s.delta,
            s.trials,
            s.success_count,
            s.success_rate,
            s.wilson_low,
            s.wilson_high,
            s.mean_queries,
            s.min_queries,
            s.max_queries,
            s.p50_queries,
            s.p90_queries,
            s.p99_queries,
            s.wrapper_fires,
            s.anomalies,
            s.count_mismatches,
            stages.join(";"),
        )
        .expect("writing to a String");
    }
    out
}

/// Bound values to set against one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundOverlay {
    pub n: u64,
    pub d: u64,
    /// Upper bound on queries (worst case or mean, depending on estimator).
    pub upper: f64,
    /// Constant-free lower bound.
    pub lower: f64,
}

/// The frozen-constant overlays for every grid point of `spec`.
pub fn overlays_for(spec: &ExperimentSpec) -> Result<Vec<BoundOverlay>, HarnessError> {
    let cfg = &spec.config;
    spec.d_values
        .iter()
        .map(|&d| {
            let query = |name| {
                let mut q = BoundQuery::new(name, spec.n, d, cfg.epsilon, cfg.delta);
                q.wrapper_exponent = cfg.wrapper_exponent;
                q
            };
            let (upper, lower) = match spec.estimator {
                EstimatorKind::Deterministic => (
                    calibration::deterministic_query_bound(spec.n, d, cfg.epsilon),
                    bounds::evaluate(&query(BoundName::DetLower))?.value,
                ),
                EstimatorKind::Expected => (
                    bounds::evaluate(
                        &query(BoundName::ExpectedUpper).with_constants(calibration::EXPECTED),
                    )?
                    .value,
                    bounds::evaluate(&query(BoundName::ExpectedLower))?.value,
                ),
                EstimatorKind::MonteCarlo => (
                    bounds::evaluate(
                        &query(BoundName::McUpper).with_constants(calibration::MONTE_CARLO),
                    )?
                    .value,
                    bounds::evaluate(&query(BoundName::McLowerLoglog))?.value,
                ),
            };
            Ok(BoundOverlay {
                n: spec.n,
                d,
                upper,
                lower,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub rule: String,
    /// Hard checks decide the exit status; the others are reported only.
    pub hard: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub estimator: EstimatorKind,
    pub n: u64,
    pub d: u64,
    pub mean_queries: f64,
    pub max_queries: u64,
    pub upper: f64,
    pub lower: f64,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn hard_checks_pass(&self) -> bool {
        self.rows
            .iter()
            .flat_map(|r| &r.checks)
            .all(|c| c.passed || !c.hard)
    }
}

/// Sets measured counts against bounds and evaluates the acceptance rules.
///
/// Hard rules: no anomalies, no count mismatches; the deterministic estimator
/// always succeeds, never outputs more than `d`, and never exceeds its bound;
/// the Monte Carlo estimator's worst trial never exceeds its bound.
/// Statistical rules (success rate, expected-query mean, lower bounds) are
/// reported only.
pub fn compare_with_bounds(
    statistics: &[TrialStatistics],
    overlays: &[BoundOverlay],
) -> Result<ComparisonReport, HarnessError> {
    if statistics.len() != overlays.len()
        || statistics
            .iter()
            .zip(overlays)
            .any(|(s, o)| s.n != o.n || s.d != o.d)
    {
        return Err(HarnessError::GridMismatch);
    }
    let rows = statistics
        .iter()
        .zip(overlays)
        .map(|(s, o)| {
            let check = |rule: &str, hard, passed| Check {
                rule: rule.to_string(),
                hard,
                passed,
            };
            let mut checks = vec![
                check("no budget anomalies", true, s.anomalies == 0),
                check("query counts agree with oracle", true, s.count_mismatches == 0),
            ];
            match s.estimator {
                EstimatorKind::Deterministic => {
                    checks.push(check("always succeeds", true, s.success_count == s.trials));
                    checks.push(check("never exceeds d", true, s.above_d == 0));
                    checks.push(check("max queries within bound", true, s.max_queries as f64 <= o.upper));
                }
                EstimatorKind::Expected => {
                    let target = 1.0 - s.delta;
                    checks.push(check("success rate at least 1 - delta", false, s.wilson_high >= target));
                    checks.push(check("mean queries within bound", false, s.mean_queries <= o.upper));
                }
                EstimatorKind::MonteCarlo => {
                    let target = 1.0 - s.delta;
                    checks.push(check("success rate at least 1 - delta", false, s.wilson_high >= target));
                    checks.push(check("max queries within bound", true, s.max_queries as f64 <= o.upper));
                }
            }
            checks.push(check("mean queries above lower bound", false, s.mean_queries >= o.lower));
            ComparisonRow {
                estimator: s.estimator,
                n: s.n,
                d: s.d,
                mean_queries: s.mean_queries,
                max_queries: s.max_queries,
                upper: o.upper,
                lower: o.lower,
                checks,
            }
        })
        .collect();
    Ok(ComparisonReport { rows })
}
