//! `defcount`: run estimator experiments, evaluate bounds, regenerate fixtures.
//!
//! Every flag of `simulate`, `sweep` and `bounds` may also be given in a JSON
//! or TOML file passed with `--config`, under the flag's long name. Flags win
//! over the file, and the file wins over built-in defaults.

mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use defcount_core::bounds::{self, BoundName, BoundQuery};
use defcount_core::calibration;
use defcount_core::fixtures;
use defcount_core::harness::{
    compare_with_bounds, overlays_for, run_experiment, to_csv, ComparisonReport, TrialStatistics,
};

use config::{BoundsFile, Resolved, RunFile};

#[derive(Debug, Parser)]
#[command(name = "defcount", version, about = "Estimate defective counts by adaptive group testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment over a list of defective counts.
    Simulate(SimulateArgs),
    /// Run the product of estimator, n, ε and δ lists.
    Sweep(SweepArgs),
    /// Evaluate closed-form query bounds as CSV.
    Bounds(BoundsArgs),
    /// Regenerate the regression fixture file.
    Fixtures(FixturesArgs),
}

/// Options shared by `simulate` and `sweep`.
#[derive(Debug, Args)]
struct RunArgs {
    /// JSON or TOML file with defaults for any of these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defective counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<u64>>,
    /// uniform-random | adversarial-prefix | singleton-spread
    #[arg(long)]
    sampler: Option<String>,
    /// Wrapper exponent c of the expected-query estimator.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    stage2_votes: Option<u32>,
    #[arg(long)]
    stage3_grid_factor: Option<f64>,
    #[arg(long)]
    stage3_votes: Option<u32>,
    #[arg(long)]
    stage4_sample_multiplier: Option<f64>,
    /// Trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed for all per-trial streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory for results.csv and summary.json; CSV goes to stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep every trial's query transcript (written to transcripts.json).
    #[arg(long)]
    record_transcripts: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// deterministic | expected | monte-carlo
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Estimators, comma separated.
    #[arg(long, value_delimiter = ',')]
    estimator: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// JSON or TOML file with defaults for any of these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bound names, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    name: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long)]
    c: Option<f64>,
    /// Use the frozen fitted constants instead of bare formulas.
    #[arg(long)]
    fitted: bool,
}

#[derive(Debug, Args)]
struct FixturesArgs {
    /// Output file.
    #[arg(long, default_value = "crates/core/tests/fixtures/regression.json")]
    out: PathBuf,
}

/// Failures that mean the invocation itself was wrong, reported with the
/// usage exit code.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Bounds(args) => print_bounds(args).map(|()| true),
        Command::Fixtures(args) => write_fixtures(&args.out).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("hard acceptance checks failed");
            ExitCode::from(1)
        }
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn banner(resolved: &impl Serialize) -> Result<()> {
    eprintln!("defcount {}", env!("CARGO_PKG_VERSION"));
    eprintln!("resolved config: {}", serde_json::to_string(resolved)?);
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<bool> {
    let file: RunFile = config::load(args.run.config.as_deref())?;
    let resolved = config::resolve_simulate(&args, &file)?;
    banner(&resolved)?;
    execute(&resolved)
}

fn sweep(args: SweepArgs) -> Result<bool> {
    let file: RunFile = config::load(args.run.config.as_deref())?;
    let resolved = config::resolve_sweep(&args, &file)?;
    banner(&resolved)?;
    execute(&resolved)
}

#[derive(Serialize)]
struct Summary<'a> {
    version: &'static str,
    statistics: &'a [TrialStatistics],
    report: &'a [ComparisonReport],
    hard_checks_pass: bool,
}

fn execute(resolved: &Resolved) -> Result<bool> {
    let mut statistics = Vec::new();
    let mut reports = Vec::new();
    let mut transcripts = Vec::new();
    for spec in &resolved.specs {
        spec.validate().map_err(|e| UsageError(e.to_string()))?;
        let output = run_experiment(spec, resolved.jobs)?;
        let report = compare_with_bounds(&output.statistics, &overlays_for(spec)?)?;
        statistics.extend(output.statistics);
        reports.push(report);
        transcripts.extend(output.transcripts);
    }
    let csv = to_csv(&statistics);
    let pass = reports.iter().all(ComparisonReport::hard_checks_pass);
    for s in &statistics {
        eprintln!(
            "{} n={} d={}: success_rate {:.6} [{:.4}, {:.4}], mean queries {:.2}, max {}",
            s.estimator, s.n, s.d, s.success_rate, s.wilson_low, s.wilson_high, s.mean_queries, s.max_queries
        );
    }
    for row in reports.iter().flat_map(|r| &r.rows) {
        for check in row.checks.iter().filter(|c| !c.passed) {
            let kind = if check.hard { "FAIL" } else { "note" };
            eprintln!("{kind}: {} n={} d={}: {}", row.estimator, row.n, row.d, check.rule);
        }
    }
    match &resolved.out {
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
        }
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let csv_path = dir.join("results.csv");
            fs::write(&csv_path, &csv)?;
            let summary = Summary {
                version: env!("CARGO_PKG_VERSION"),
                statistics: &statistics,
                report: &reports,
                hard_checks_pass: pass,
            };
            let summary_path = dir.join("summary.json");
            fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
            println!("{}", csv_path.display());
            println!("{}", summary_path.display());
            if resolved.record_transcripts {
                let path = dir.join("transcripts.json");
                fs::write(&path, serde_json::to_string(&transcripts)?)?;
                println!("{}", path.display());
            }
        }
    }
    Ok(pass)
}

fn print_bounds(args: BoundsArgs) -> Result<()> {
    let file: BoundsFile = config::load(args.config.as_deref())?;
    let grid = config::resolve_bounds(&args, &file)?;
    let mut out = String::from(bounds::CSV_HEADER);
    out.push('\n');
    for name in &grid.names {
        let name: BoundName = name.parse().map_err(|e: bounds::BoundsError| UsageError(e.to_string()))?;
        for &n in &grid.n {
            for &d in &grid.d {
                for &eps in &grid.eps {
                    for &delta in &grid.delta {
                        let mut q = BoundQuery::new(name, n, d, eps, delta);
                        q.wrapper_exponent = grid.c;
                        if grid.fitted {
                            match name {
                                BoundName::ExpectedUpper => q = q.with_constants(calibration::EXPECTED),
                                BoundName::McUpper => q = q.with_constants(calibration::MONTE_CARLO),
                                _ => {}
                            }
                        }
                        let v = bounds::evaluate(&q).map_err(|e| UsageError(e.to_string()))?;
                        out.push_str(&bounds::csv_row(&q, &v));
                        out.push('\n');
                    }
                }
            }
        }
    }
    std::io::stdout().write_all(out.as_bytes())?;
    Ok(())
}

fn write_fixtures(path: &Path) -> Result<()> {
    let fixtures = fixtures::generate()?;
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut json = serde_json::to_string_pretty(&fixtures)?;
    json.push('\n');
    fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    Ok(())
}
