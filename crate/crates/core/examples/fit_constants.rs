//! Reruns the sweeps behind the frozen constants in `calibration` and prints
//! the raw fits. Run with `cargo run --release --example fit_constants`.

use defcount_core::estimators::{find_defectives, EstimatorConfig, EstimatorKind};
use defcount_core::harness::{run_experiment, ExperimentSpec, Sampler};
use defcount_core::oracle::{Instance, Oracle};

fn spec(estimator: EstimatorKind, epsilon: f64, n: u64, d_values: Vec<u64>, trials: u64) -> ExperimentSpec {
    ExperimentSpec {
        estimator,
        config: EstimatorConfig {
            epsilon,
            ..Default::default()
        },
        n,
        d_values,
        sampler: Sampler::UniformRandom,
        trials,
        master_seed: 1,
        record_transcripts: false,
    }
}

fn main() {
    for eps in [0.25, 0.5] {
        let out = run_experiment(&spec(EstimatorKind::Deterministic, eps, 1024, vec![1, 10, 50], 500), 0)
            .expect("valid sweep");
        let fit = out
            .statistics
            .iter()
            .map(|s| {
                let d = s.d as f64;
                let log_term = d * ((1.0 - eps) * 1024.0 / d).log2().max(0.0);
                (s.max_queries as f64 - 1.0 - log_term) / d
            })
            .fold(0.0, f64::max);
        println!("deterministic eps={eps}: per-item constant {fit:.3}");
    }

    let mut fit: f64 = 0.0;
    for a in 1..=256u64 {
        for b in a..=256 {
            let set = if a == b { vec![a] } else { vec![a, b] };
            let instance = Instance::new(256, set.iter().copied()).expect("valid set");
            let mut oracle = Oracle::new(&instance);
            find_defectives(256, |x, y| oracle.answer_interval(x, y)).expect("no budget");
            let d = set.len() as f64;
            fit = fit.max((oracle.query_count() as f64 - d * (256.0 / d).log2()) / d);
        }
    }
    println!("find_defectives: per-item constant {fit:.3}");

    let eps_term = 4.0 * 10f64.log2();
    for kind in [EstimatorKind::Expected, EstimatorKind::MonteCarlo] {
        let out = run_experiment(&spec(kind, 0.5, 1 << 20, vec![10, 100, 1000], 10_000), 0)
            .expect("valid sweep");
        for s in &out.statistics {
            let loglog = (s.d as f64).log2().log2();
            let stage = |names: &[&str]| -> f64 {
                s.stage_means
                    .iter()
                    .filter(|m| names.contains(&m.name.as_str()))
                    .map(|m| m.mean_queries)
                    .sum()
            };
            let coarse = stage(&["coarse-doubling", "exponent-search"]);
            let fine = stage(&["grid-search", "sampling"]);
            println!(
                "{kind} d={}: mean {:.2}, max {}, c1 {:.3}, c2 {:.3}",
                s.d,
                s.mean_queries,
                s.max_queries,
                (coarse - loglog) / loglog.sqrt(),
                fine / eps_term,
            );
        }
    }
}
