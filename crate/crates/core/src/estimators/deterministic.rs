//! The deterministic estimator: find the defective groups of a fine partition.

use super::{find_defectives, EstimateOutcome, EstimatorError, StageCount};
use crate::oracle::{Oracle, Partition};

/// Largest group size `s` with `s ≤ 1/(1−ε)`. Any defective set of size `d`
/// then meets at least `d/s ≥ (1−ε)d` groups.
pub fn group_size_cap(epsilon: f64) -> u64 {
    // the slack keeps 1/(1−0.75) = 3.9999999999999996 at 4
    (1.0 / (1.0 - epsilon) + 1e-9).floor() as u64
}

/// Splits `[n]` into `⌈n/s⌉` balanced groups of at most `s` items and counts
/// the groups that hold a defective. The result always satisfies
/// `(1−ε)d ≤ D ≤ d`; no randomness is involved.
pub fn estimate_deterministic(
    epsilon: f64,
    oracle: &mut Oracle<'_>,
) -> Result<EstimateOutcome, EstimatorError> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(EstimatorError::InvalidConfig(format!(
            "epsilon {epsilon} outside [0, 1)"
        )));
    }
    let n = oracle.n();
    let scaled = (1.0 - epsilon) * n as f64;
    if scaled < 1.0 {
        return Err(EstimatorError::EmptyPartition(scaled));
    }
    let cap = group_size_cap(epsilon);
    let partition = Partition::balanced(n, n.div_ceil(cap));
    let mut queries = 0;
    let groups = find_defectives(partition.groups(), |first, last| {
        queries += 1;
        oracle.answer_groups(&partition, first, last)
    })?;
    Ok(EstimateOutcome::new(
        groups.len() as u64,
        vec![StageCount {
            name: "group-search",
            queries,
        }],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Instance;

    fn run(n: u64, defectives: &[u64], epsilon: f64) -> (EstimateOutcome, u64) {
        let instance = Instance::new(n, defectives.iter().copied()).unwrap();
        let mut oracle = Oracle::new(&instance);
        let outcome = estimate_deterministic(epsilon, &mut oracle).unwrap();
        (outcome, oracle.query_count())
    }

    #[test]
    fn pair_in_one_group() {
        assert_eq!(run(8, &[1, 2], 0.5).0.estimate, 1);
    }

    #[test]
    fn pair_in_two_groups() {
        assert_eq!(run(8, &[1, 3], 0.5).0.estimate, 2);
    }

    #[test]
    fn non_integral_group_size_keeps_guarantee() {
        // s = 1 at ε = 0.3, so every item is its own group
        let (outcome, _) = run(10, &[1, 2], 0.3);
        assert_eq!(outcome.estimate, 2);
        assert_eq!(group_size_cap(0.3), 1);
        assert_eq!(group_size_cap(0.75), 4);
        assert_eq!(group_size_cap(0.0), 1);
    }

    #[test]
    fn exhaustive_small_universes() {
        for n in [8u64, 16] {
            for eps in [0.0, 0.25, 0.5, 0.75] {
                for mask in 0u32..(1 << n) {
                    let set: Vec<u64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
                    if set.len() > 4 {
                        continue;
                    }
                    let d = set.len() as f64;
                    let (outcome, oracle_count) = run(n, &set, eps);
                    let est = outcome.estimate as f64;
                    assert!((1.0 - eps) * d <= est + 1e-9 && est <= d, "n={n} eps={eps} I={set:?}");
                    assert_eq!(outcome.queries_asked, oracle_count);
                }
            }
        }
    }

    #[test]
    fn transcript_is_deterministic() {
        let instance = Instance::new(64, [5, 17, 40]).unwrap();
        let transcript = || {
            let mut oracle = Oracle::new(&instance).recording();
            estimate_deterministic(0.5, &mut oracle).unwrap();
            oracle.take_transcript().unwrap()
        };
        assert_eq!(transcript(), transcript());
    }

    mod props {
        use super::*;
        use crate::calibration::deterministic_query_bound;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn guarantee_and_query_bound(
                n in 1u64..3000,
                eps in 0.0f64..0.95,
                picks in proptest::collection::vec(any::<u64>(), 0..60),
            ) {
                prop_assume!((1.0 - eps) * n as f64 >= 1.0);
                let mut set: Vec<u64> = picks.iter().map(|p| p % n + 1).collect();
                set.sort_unstable();
                set.dedup();
                let d = set.len() as u64;
                let (outcome, queries) = run(n, &set, eps);
                let est = outcome.estimate as f64;
                prop_assert!((1.0 - eps) * d as f64 <= est + 1e-9 && outcome.estimate <= d);
                prop_assert!(queries as f64 <= deterministic_query_bound(n, d, eps));
            }
        }
    }

    #[test]
    fn rejects_empty_partition() {
        let instance = Instance::new(3, [1]).unwrap();
        let mut oracle = Oracle::new(&instance);
        assert!(matches!(
            estimate_deterministic(0.8, &mut oracle),
            Err(EstimatorError::EmptyPartition(_))
        ));
        assert!(estimate_deterministic(1.0, &mut oracle).is_err());
    }
}
