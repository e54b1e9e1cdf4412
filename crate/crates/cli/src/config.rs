//! Config-file overlay: flag > file > default.
//!
//! File keys are the flags' long names (`eps`, `stage3-votes`, ...). Keys that
//! take a list on the command line accept a single value or an array.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use defcount_core::estimators::{EstimatorConfig, EstimatorKind};
use defcount_core::harness::{ExperimentSpec, Sampler};

use crate::{BoundsArgs, RunArgs, SimulateArgs, SweepArgs, UsageError};

pub const DEFAULT_TRIALS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// File form of `simulate` and `sweep` options.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunFile {
    pub estimator: Option<OneOrMany<String>>,
    pub n: Option<OneOrMany<u64>>,
    pub eps: Option<OneOrMany<f64>>,
    pub delta: Option<OneOrMany<f64>>,
    pub d: Option<OneOrMany<u64>>,
    pub sampler: Option<String>,
    pub c: Option<f64>,
    pub stage2_votes: Option<u32>,
    pub stage3_grid_factor: Option<f64>,
    pub stage3_votes: Option<u32>,
    pub stage4_sample_multiplier: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub record_transcripts: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BoundsFile {
    pub name: Option<OneOrMany<String>>,
    pub n: Option<OneOrMany<u64>>,
    pub d: Option<OneOrMany<u64>>,
    pub eps: Option<OneOrMany<f64>>,
    pub delta: Option<OneOrMany<f64>>,
    pub c: Option<f64>,
    pub fitted: Option<bool>,
}

/// Reads a TOML (by `.toml` extension) or JSON config file; no path gives
/// the empty overlay.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
    };
    Ok(parsed)
}

/// Everything an invocation of `simulate` or `sweep` will run.
#[derive(Debug, Serialize)]
pub struct Resolved {
    pub specs: Vec<ExperimentSpec>,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub record_transcripts: bool,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("missing --{key} (flag or config file)")))
}

fn list<T: Clone>(flag: Option<Vec<T>>, file: &Option<OneOrMany<T>>) -> Option<Vec<T>> {
    flag.or_else(|| file.as_ref().map(OneOrMany::to_vec))
}

fn single<T: Clone>(flag: Option<T>, file: &Option<OneOrMany<T>>, key: &str) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file.as_ref().map(OneOrMany::to_vec) {
        None => Ok(None),
        Some(v) if v.len() == 1 => Ok(v.into_iter().next()),
        Some(_) => Err(usage(format!("`{key}` takes a single value for simulate; use sweep"))),
    }
}

/// Grid-independent parts of a run.
struct Common {
    d_values: Vec<u64>,
    sampler: Sampler,
    base: EstimatorConfig,
    trials: u64,
    seed: u64,
    jobs: usize,
    out: Option<PathBuf>,
    record_transcripts: bool,
}

fn resolve_common(run: &RunArgs, file: &RunFile) -> Result<Common> {
    let defaults = EstimatorConfig::default();
    let sampler = match run.sampler.clone().or_else(|| file.sampler.clone()) {
        Some(s) => s.parse().map_err(|e: defcount_core::harness::HarnessError| usage(e.to_string()))?,
        None => Sampler::default(),
    };
    Ok(Common {
        d_values: required(list(run.d.clone(), &file.d), "d")?,
        sampler,
        base: EstimatorConfig {
            wrapper_exponent: run.c.or(file.c).unwrap_or(defaults.wrapper_exponent),
            stage2_votes: run.stage2_votes.or(file.stage2_votes).unwrap_or(defaults.stage2_votes),
            stage3_grid_factor: run
                .stage3_grid_factor
                .or(file.stage3_grid_factor)
                .unwrap_or(defaults.stage3_grid_factor),
            stage3_votes: run.stage3_votes.or(file.stage3_votes).unwrap_or(defaults.stage3_votes),
            stage4_sample_multiplier: run
                .stage4_sample_multiplier
                .or(file.stage4_sample_multiplier)
                .unwrap_or(defaults.stage4_sample_multiplier),
            ..defaults
        },
        trials: run.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
        seed: run.seed.or(file.seed).unwrap_or(0),
        jobs: run.jobs.or(file.jobs).unwrap_or(0),
        out: run.out.clone().or_else(|| file.out.clone()),
        record_transcripts: run.record_transcripts || file.record_transcripts.unwrap_or(false),
    })
}

fn parse_estimator(name: &str) -> Result<EstimatorKind> {
    name.parse()
        .map_err(|e: defcount_core::estimators::EstimatorError| usage(e.to_string()))
}

fn build(common: &Common, estimator: EstimatorKind, n: u64, eps: f64, delta: f64) -> ExperimentSpec {
    ExperimentSpec {
        estimator,
        config: EstimatorConfig {
            epsilon: eps,
            delta,
            ..common.base
        },
        n,
        d_values: common.d_values.clone(),
        sampler: common.sampler,
        trials: common.trials,
        master_seed: common.seed,
        record_transcripts: common.record_transcripts,
    }
}

pub fn resolve_simulate(args: &SimulateArgs, file: &RunFile) -> Result<Resolved> {
    let common = resolve_common(&args.run, file)?;
    let defaults = EstimatorConfig::default();
    let estimator = required(single(args.estimator.clone(), &file.estimator, "estimator")?, "estimator")?;
    let n = required(single(args.n, &file.n, "n")?, "n")?;
    let eps = single(args.eps, &file.eps, "eps")?.unwrap_or(defaults.epsilon);
    let delta = single(args.delta, &file.delta, "delta")?.unwrap_or(defaults.delta);
    let spec = build(&common, parse_estimator(&estimator)?, n, eps, delta);
    Ok(Resolved {
        specs: vec![spec],
        jobs: common.jobs,
        out: common.out,
        record_transcripts: common.record_transcripts,
    })
}

pub fn resolve_sweep(args: &SweepArgs, file: &RunFile) -> Result<Resolved> {
    let common = resolve_common(&args.run, file)?;
    let defaults = EstimatorConfig::default();
    let estimators = required(list(args.estimator.clone(), &file.estimator), "estimator")?;
    let ns = required(list(args.n.clone(), &file.n), "n")?;
    let eps = list(args.eps.clone(), &file.eps).unwrap_or_else(|| vec![defaults.epsilon]);
    let deltas = list(args.delta.clone(), &file.delta).unwrap_or_else(|| vec![defaults.delta]);
    let mut specs = Vec::new();
    for name in &estimators {
        let estimator = parse_estimator(name)?;
        for &n in &ns {
            for &e in &eps {
                for &delta in &deltas {
                    specs.push(build(&common, estimator, n, e, delta));
                }
            }
        }
    }
    Ok(Resolved {
        specs,
        jobs: common.jobs,
        out: common.out,
        record_transcripts: common.record_transcripts,
    })
}

pub struct BoundsGrid {
    pub names: Vec<String>,
    pub n: Vec<u64>,
    pub d: Vec<u64>,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    pub c: f64,
    pub fitted: bool,
}

pub fn resolve_bounds(args: &BoundsArgs, file: &BoundsFile) -> Result<BoundsGrid> {
    let defaults = EstimatorConfig::default();
    let all = || {
        defcount_core::bounds::BoundName::ALL
            .iter()
            .map(|b| b.as_str().to_string())
            .collect()
    };
    Ok(BoundsGrid {
        names: list(args.name.clone(), &file.name).unwrap_or_else(all),
        n: required(list(args.n.clone(), &file.n), "n")?,
        d: required(list(args.d.clone(), &file.d), "d")?,
        eps: list(args.eps.clone(), &file.eps).unwrap_or_else(|| vec![defaults.epsilon]),
        delta: list(args.delta.clone(), &file.delta).unwrap_or_else(|| vec![defaults.delta]),
        c: args.c.or(file.c).unwrap_or(defaults.wrapper_exponent),
        fitted: args.fitted || file.fitted.unwrap_or(false),
    })
}
