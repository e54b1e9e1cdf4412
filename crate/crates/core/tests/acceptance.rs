//! Acceptance suite: one PASS/FAIL line per criterion, all tolerances pinned
//! below. Every criterion is evaluated even when an earlier one fails; the
//! test fails at the end if any line is FAIL.
//!
//! Run with `cargo test -p defcount-core --test acceptance -- --nocapture`
//! to see the report when everything passes.

use rayon::prelude::*;

use defcount_core::bounds::{self, iterated_log2, log_star, BoundName, BoundQuery};
use defcount_core::calibration::{self, deterministic_query_bound, find_query_bound};
use defcount_core::doubling::{self, builtin_schedules};
use defcount_core::estimators::{find_defectives, EstimatorConfig, EstimatorKind};
use defcount_core::harness::{
    run_experiment, run_trial, summarize, to_csv, ExperimentSpec, Sampler, TrialRecord, TrialStatistics,
};
use defcount_core::oracle::{BernoulliMode, Instance, Oracle};
use defcount_core::streams::trial_stream;
use defcount_core::{estimators, ExtendedScale};

/// Width of every statistical margin, in standard deviations.
const SIGMAS: f64 = 3.0;
const ORACLE_TRIALS: u64 = 100_000;
const DOUBLING_TRIALS: u64 = 100_000;
const ESTIMATOR_TRIALS: u64 = 10_000;
/// Slack below `1 − δ` allowed for the Wilson lower bound.
const SUCCESS_SLACK: f64 = 0.02;
/// "Orders of magnitude": at least two, so a factor of 100.
const SEPARATION_FACTOR: f64 = 100.0;
/// Largest per-item constant the deterministic bound may use.
const DETERMINISTIC_TARGET: f64 = 4.0;

const BIG_N: u64 = 1 << 20;
const GRID_D: [u64; 3] = [10, 100, 1000];
const EPS: f64 = 0.5;
const DELTA: f64 = 0.1;
const WRAPPER_C: f64 = 2.0;

struct Verdict {
    pass: bool,
    details: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self {
            pass: true,
            details: Vec::new(),
        }
    }

    /// Records a sub-check; only failures are kept in full.
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.pass = false;
            self.details.push(what());
        }
    }

    fn note(&mut self, line: String) {
        self.details.push(line);
    }
}

fn sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

fn spread_instance(n: u64, d: u64) -> Instance {
    Instance::new(n, (0..d).map(|i| 1 + i * (n / d.max(1)))).unwrap()
}

/// Frequency of a negative answer to the pooled query with threshold `delta`.
fn zero_rate(instance: &Instance, threshold: u64, mode: BernoulliMode, seed: u64) -> f64 {
    let scale = ExtendedScale::from_integer(threshold).unwrap();
    let zeros: u64 = (0..ORACLE_TRIALS)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_stream(seed, threshold, t);
            let mut oracle = Oracle::new(instance).with_mode(mode);
            u64::from(!oracle.answer_pooled(scale, &mut rng).unwrap())
        })
        .sum();
    zeros as f64 / ORACLE_TRIALS as f64
}

fn oracle_exactness() -> Verdict {
    let mut v = Verdict::new();
    let n = 1 << 12;
    for d in [1u64, 2, 5, 16, 100] {
        let instance = spread_instance(n, d);
        for threshold in [1, d, 4 * d, 64 * d] {
            let exact = (-(d as f64) / threshold as f64).exp2();
            let margin = SIGMAS * sigma(exact, ORACLE_TRIALS);
            let shortcut = zero_rate(&instance, threshold, BernoulliMode::Shortcut, 1);
            v.check((shortcut - exact).abs() <= margin, || {
                format!("d={d} Δ={threshold}: shortcut {shortcut} vs exact {exact} (±{margin:.2e})")
            });
            let materialized = zero_rate(&instance, threshold, BernoulliMode::Materialize, 2);
            let pooled = (shortcut + materialized) / 2.0;
            let two_sample = SIGMAS * (2.0 * pooled * (1.0 - pooled) / ORACLE_TRIALS as f64).sqrt();
            v.check((shortcut - materialized).abs() <= two_sample, || {
                format!("d={d} Δ={threshold}: shortcut {shortcut} vs materialized {materialized} (±{two_sample:.2e})")
            });
        }
    }
    v
}

fn doubling_search() -> Verdict {
    let mut v = Verdict::new();
    for (s, schedule) in builtin_schedules().iter().enumerate() {
        for (k, d) in [1u64, 4, 16, 256, 4096].into_iter().enumerate() {
            let instance = spread_instance(d, d);
            let target = ExtendedScale::from_integer(d).unwrap();
            for (j, confidence) in [0.25, 0.1].into_iter().enumerate() {
                let i1 = schedule.i1(d, confidence);
                let point = (s * 100 + k * 10 + j) as u64;
                let runs: Vec<(bool, bool, u64)> = (0..DOUBLING_TRIALS)
                    .into_par_iter()
                    .map(|t| {
                        let mut rng = trial_stream(3, point, t);
                        let mut oracle = Oracle::new(&instance);
                        let r = doubling::run(schedule, confidence, &mut oracle, &mut rng, None).unwrap();
                        (r.estimate < target, r.stop_index > i1, r.queries_asked)
                    })
                    .collect();
                let trials = DOUBLING_TRIALS as f64;
                let under = runs.iter().filter(|r| r.0).count() as f64 / trials;
                let overshoot = runs.iter().filter(|r| r.1).count() as f64 / trials;
                let mean = runs.iter().map(|r| r.2 as f64).sum::<f64>() / trials;
                let var = runs.iter().map(|r| (r.2 as f64 - mean).powi(2)).sum::<f64>() / (trials - 1.0);
                let limit = confidence / 2.0 + SIGMAS * sigma(confidence / 2.0, DOUBLING_TRIALS);
                let query_limit = f64::from(i1) + 2.0 + SIGMAS * (var / trials).sqrt();
                let tag = format!("{} d={d} δ={confidence}", schedule.name());
                v.check(under <= limit, || format!("{tag}: Pr[D < d] = {under} > {limit:.4}"));
                v.check(overshoot <= limit, || format!("{tag}: Pr[stop > i1] = {overshoot} > {limit:.4}"));
                v.check(mean <= query_limit, || format!("{tag}: mean queries {mean} > {query_limit:.3}"));
            }
        }
    }
    v
}

fn all_subsets(n: u64, max: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max {
        let mut next = Vec::new();
        for set in &frontier {
            let start = set.last().map_or(1, |&l: &u64| l + 1);
            for item in start..=n {
                let mut grown = set.clone();
                grown.push(item);
                next.push(grown);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn check_deterministic(v: &mut Verdict, n: u64, set: &[u64], eps: f64) {
    let instance = Instance::new(n, set.iter().copied()).unwrap();
    let mut oracle = Oracle::new(&instance);
    let outcome = estimators::estimate_deterministic(eps, &mut oracle).unwrap();
    let d = set.len() as u64;
    let queries = oracle.query_count();
    let bound = deterministic_query_bound(n, d, eps);
    v.check((1.0 - eps) * d as f64 <= outcome.estimate as f64 + 1e-9 && outcome.estimate <= d, || {
        format!("n={n} ε={eps} I={set:?}: estimate {}", outcome.estimate)
    });
    v.check(queries as f64 <= bound, || {
        format!("n={n} ε={eps} d={d}: {queries} queries > bound {bound:.2}")
    });
}

fn deterministic_estimator() -> Verdict {
    let mut v = Verdict::new();
    v.check(calibration::DETERMINISTIC_PER_ITEM <= DETERMINISTIC_TARGET, || {
        format!("per-item constant {} above target", calibration::DETERMINISTIC_PER_ITEM)
    });
    let epsilons = [0.0, 0.25, 0.5, 0.75];
    for n in [8u64, 16, 32] {
        for set in all_subsets(n, 3) {
            for eps in epsilons {
                check_deterministic(&mut v, n, &set, eps);
            }
        }
    }
    let n = 1024;
    for d in [1u64, 10, 50] {
        for t in 0..500 {
            let mut rng = trial_stream(4, d, t);
            let instance = Sampler::UniformRandom.instance(n, d, &mut rng).unwrap();
            for eps in epsilons {
                check_deterministic(&mut v, n, instance.defectives(), eps);
            }
        }
    }
    v
}

fn find_defectives_exhaustive() -> Verdict {
    let mut v = Verdict::new();
    let n = 256;
    for set in all_subsets(n, 2) {
        let instance = Instance::new(n, set.iter().copied()).unwrap();
        let mut queries = 0u64;
        let found = find_defectives(n, |a, b| {
            queries += 1;
            Ok::<_, ()>(instance.any_in(a, b))
        })
        .unwrap();
        let d = set.len() as u64;
        let bound = find_query_bound(n, d);
        v.check(found == set, || format!("I={set:?}: found {found:?}"));
        v.check(queries as f64 <= bound, || format!("I={set:?}: {queries} queries > {bound}"));
        if d == 0 {
            v.check(queries == 1, || format!("empty set took {queries} queries"));
        }
    }
    v
}

/// Trial records and their summary for one grid point of the randomized
/// criteria.
fn estimator_point(kind: EstimatorKind, d: u64, trials: u64) -> (Vec<TrialRecord>, TrialStatistics) {
    let spec = ExperimentSpec {
        estimator: kind,
        config: EstimatorConfig {
            epsilon: EPS,
            delta: DELTA,
            wrapper_exponent: WRAPPER_C,
            ..EstimatorConfig::default()
        },
        n: BIG_N,
        d_values: vec![d],
        sampler: Sampler::UniformRandom,
        trials,
        master_seed: 5,
        record_transcripts: false,
    };
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(&spec, 0, d, t).unwrap())
        .collect();
    let stats = summarize(&spec, d, &records);
    (records, stats)
}

/// `log2 log2 d + C1·√(log2 log2 d) + C2·ε⁻²·log2(1/δ)`.
fn query_formula(d: u64, c1: f64, c2: f64) -> f64 {
    let (loglog, _) = iterated_log2(d as f64, 2);
    loglog + c1 * loglog.sqrt() + c2 / (EPS * EPS) * (1.0 / DELTA).log2()
}

fn success_check(v: &mut Verdict, stats: &TrialStatistics) {
    let floor = 1.0 - DELTA - SUCCESS_SLACK;
    v.check(stats.wilson_low >= floor, || {
        format!("d={}: Wilson lower {:.4} < {floor}", stats.d, stats.wilson_low)
    });
    v.check(stats.anomalies == 0 && stats.count_mismatches == 0, || {
        format!("d={}: {} anomalies, {} count mismatches", stats.d, stats.anomalies, stats.count_mismatches)
    });
}

struct RandomizedRuns {
    expected: Vec<TrialStatistics>,
    monte_carlo: Vec<TrialStatistics>,
    tower_max: Vec<u64>,
}

fn randomized_runs() -> RandomizedRuns {
    let mut runs = RandomizedRuns {
        expected: Vec::new(),
        monte_carlo: Vec::new(),
        tower_max: Vec::new(),
    };
    for d in GRID_D {
        runs.expected.push(estimator_point(EstimatorKind::Expected, d, ESTIMATOR_TRIALS).1);
        let (records, stats) = estimator_point(EstimatorKind::MonteCarlo, d, ESTIMATOR_TRIALS);
        let tower = records
            .iter()
            .filter_map(|r| r.outcome.as_ref())
            .flat_map(|o| o.stages.iter().filter(|s| s.name == "tower").map(|s| s.queries))
            .max()
            .unwrap_or(0);
        runs.tower_max.push(tower);
        runs.monte_carlo.push(stats);
    }
    runs
}

fn expected_estimator(runs: &RandomizedRuns) -> Verdict {
    let mut v = Verdict::new();
    let c = calibration::EXPECTED;
    let fire = DELTA - DELTA.powf(WRAPPER_C);
    for stats in &runs.expected {
        success_check(&mut v, stats);
        let limit = query_formula(stats.d, c.c1, c.c2);
        v.check(stats.mean_queries <= limit, || {
            format!("d={}: mean queries {:.2} > {limit:.2}", stats.d, stats.mean_queries)
        });
        let rate = stats.wrapper_fires as f64 / stats.trials as f64;
        let margin = SIGMAS * sigma(fire, stats.trials);
        v.check((rate - fire).abs() <= margin, || {
            format!("d={}: wrapper rate {rate} vs {fire} (±{margin:.4})", stats.d)
        });
        v.note(format!(
            "d={}: success {:.4} (Wilson lower {:.4}), mean {:.2} ≤ {limit:.2}, wrapper rate {rate:.4}",
            stats.d, stats.success_rate, stats.wilson_low, stats.mean_queries
        ));
    }
    v
}

fn monte_carlo_estimator(runs: &RandomizedRuns) -> Verdict {
    let mut v = Verdict::new();
    let c = calibration::MONTE_CARLO;
    let star = log_star(BIG_N as f64);
    for (stats, &tower) in runs.monte_carlo.iter().zip(&runs.tower_max) {
        success_check(&mut v, stats);
        let limit = f64::from(star) + query_formula(stats.d, c.c1, c.c2);
        v.check(stats.max_queries as f64 <= limit, || {
            format!("d={}: worst case {} > {limit:.2}", stats.d, stats.max_queries)
        });
        v.check(tower <= u64::from(star) && star == 5, || {
            format!("d={}: tower stage used {tower} queries, log* n = {star}", stats.d)
        });
        v.note(format!(
            "d={}: success {:.4} (Wilson lower {:.4}), max {} ≤ {limit:.2}, tower max {tower}",
            stats.d, stats.success_rate, stats.wilson_low, stats.max_queries
        ));
    }
    v
}

fn bounds_module() -> Verdict {
    let mut v = Verdict::new();
    let eval = |name, n, d, eps| bounds::evaluate(&BoundQuery::new(name, n, d, eps, DELTA)).unwrap();
    let det = eval(BoundName::DetLower, 1024, 1, 0.0).value;
    v.check(det == 10.0, || format!("det_lower(1024, 1, 0) = {det}"));
    v.check(log_star(65536.0) == 4, || format!("log*(65536) = {}", log_star(65536.0)));
    let mc = eval(BoundName::McLowerLoglog, 1 << 20, 65536, EPS).value;
    v.check(mc == 3.0, || format!("mc_lower_loglog(65536) = {mc}"));
    let uses_loglog = |name| {
        matches!(
            name,
            BoundName::McLowerLoglog
                | BoundName::ExpectedLower
                | BoundName::ExpectedLowerRefined
                | BoundName::ExpectedUpper
                | BoundName::McUpper
        )
    };
    for name in BoundName::ALL {
        for n in [1u64, 2, 8, 1024, 1 << 20, 1 << 40, u64::MAX] {
            for d in [0u64, 1, 2, 3, 10, 1000, n] {
                if d > n {
                    continue;
                }
                for eps in [0.1, 0.5, 0.9] {
                    let value = eval(name, n, d, eps);
                    v.check(value.value.is_finite(), || format!("{name}({n}, {d}, {eps}) = {}", value.value));
                    if d <= 2 && uses_loglog(name) {
                        v.check(value.clamped, || format!("{name}({n}, {d}, {eps}) not flagged as clamped"));
                    }
                }
            }
        }
    }
    v
}

fn reproducibility() -> Verdict {
    let mut v = Verdict::new();
    for kind in EstimatorKind::ALL {
        let spec = ExperimentSpec {
            estimator: kind,
            config: EstimatorConfig::default(),
            n: 1 << 16,
            d_values: vec![0, 1, 7, 300],
            sampler: Sampler::UniformRandom,
            trials: 500,
            master_seed: 6,
            record_transcripts: false,
        };
        let serial = to_csv(&run_experiment(&spec, 1).unwrap().statistics);
        // 0 is one worker per core; 8 forces real interleaving on small machines
        for jobs in [0, 8] {
            let parallel = to_csv(&run_experiment(&spec, jobs).unwrap().statistics);
            v.check(serial == parallel, || {
                format!("{}: CSV differs between 1 and {jobs} workers", kind.name())
            });
        }
    }
    v.note(format!(
        "compared 1, 8 and {} (all cores) workers; the binary-level check lives in the CLI tests",
        std::thread::available_parallelism().map_or(1, |n| n.get())
    ));
    v
}

fn ordering(runs: &RandomizedRuns) -> Verdict {
    let mut v = Verdict::new();
    for ((expected, mc), d) in runs.expected.iter().zip(&runs.monte_carlo).zip(GRID_D) {
        let det = estimator_point(EstimatorKind::Deterministic, d, 200).1;
        v.check(expected.mean_queries <= mc.max_queries as f64, || {
            format!(
                "d={d}: expected-query mean {:.2} > Monte Carlo worst case {}",
                expected.mean_queries, mc.max_queries
            )
        });
        let expected_ratio = det.mean_queries / expected.mean_queries;
        let mc_ratio = det.mean_queries / mc.max_queries as f64;
        v.check(expected_ratio >= SEPARATION_FACTOR && mc_ratio >= SEPARATION_FACTOR, || {
            format!(
                "d={d}: deterministic mean {:.1} is only {expected_ratio:.1}x the expected-query mean \
                 and {mc_ratio:.1}x the Monte Carlo worst case (need {SEPARATION_FACTOR}x)",
                det.mean_queries
            )
        });
    }
    v
}

#[test]
fn acceptance() {
    let runs = randomized_runs();
    let criteria: Vec<(&str, Verdict)> = vec![
        ("oracle exactness", oracle_exactness()),
        ("doubling search", doubling_search()),
        ("deterministic estimator", deterministic_estimator()),
        ("find_defectives", find_defectives_exhaustive()),
        ("expected-query estimator", expected_estimator(&runs)),
        ("Monte Carlo cascade", monte_carlo_estimator(&runs)),
        ("bounds module", bounds_module()),
        ("reproducibility", reproducibility()),
        ("ordering across estimators", ordering(&runs)),
    ];
    let mut failed = Vec::new();
    for (i, (title, verdict)) in criteria.iter().enumerate() {
        let status = if verdict.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {status}: {title}", i + 1);
        for line in verdict.details.iter().take(12) {
            println!("    {line}");
        }
        if !verdict.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}
