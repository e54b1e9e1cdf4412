//! Adaptive identification of every defective position.

/// Finds all defective positions in `1..=n`, given a test that reports
/// whether the contiguous range `first..=last` contains a defective.
///
/// Scans left to right with a block of `2^k` untested items. A negative block
/// is discarded and the next block is twice as large; a positive block is
/// binary searched for its leftmost defective (`k` tests, since the right half
/// is implied positive whenever the left one is not), after which the scan
/// resumes just past it with a block half as large. The first block covers
/// everything, so `d = 0` costs one test, and the block size settles near
/// `n/d` without `d` being known, for `d·log2(n/d) + O(d)` tests in total.
pub fn find_defectives<E>(
    n: u64,
    mut test: impl FnMut(u64, u64) -> Result<bool, E>,
) -> Result<Vec<u64>, E> {
    let mut found = Vec::new();
    let mut next = 1;
    let mut exponent = 64 - n.saturating_sub(1).leading_zeros();
    while next <= n {
        let remaining = n - next + 1;
        let last = next - 1 + block_len(exponent).min(remaining);
        if !test(next, last)? {
            next = last + 1;
            exponent = (exponent + 1).min(63);
            continue;
        }
        let (mut lo, mut hi) = (next, last);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if test(lo, mid)? {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        found.push(lo);
        next = lo + 1;
        exponent = exponent.saturating_sub(1);
    }
    Ok(found)
}

fn block_len(exponent: u32) -> u64 {
    1u64 << exponent.min(63)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Instance, Oracle, OracleError};

    fn run(n: u64, defectives: &[u64]) -> (Vec<u64>, u64) {
        let instance = Instance::new(n, defectives.iter().copied()).unwrap();
        let mut oracle = Oracle::new(&instance);
        let found =
            find_defectives(n, |a, b| oracle.answer_interval(a, b)).unwrap();
        (found, oracle.query_count())
    }

    fn shape_bound(n: u64, d: u64) -> f64 {
        crate::calibration::find_query_bound(n, d)
    }

    #[test]
    fn empty_set_costs_one_query() {
        assert_eq!(run(16, &[]), (vec![], 1));
    }

    #[test]
    fn every_singleton_of_eight() {
        for i in 1..=8 {
            let (found, queries) = run(8, &[i]);
            assert_eq!(found, vec![i]);
            assert!(queries <= 3 + 4, "I={{{i}}} took {queries}");
        }
    }

    #[test]
    fn all_pairs_of_256() {
        for a in 1..=256u64 {
            for b in a + 1..=256 {
                let (found, queries) = run(256, &[a, b]);
                assert_eq!(found, vec![a, b]);
                assert!(queries as f64 <= shape_bound(256, 2));
            }
        }
    }

    #[test]
    fn full_set_and_single_item() {
        let all: Vec<u64> = (1..=13).collect();
        assert_eq!(run(13, &all).0, all);
        assert_eq!(run(1, &[1]), (vec![1], 1));
        assert_eq!(run(1, &[]), (vec![], 1));
    }

    #[test]
    fn test_errors_propagate() {
        let result = find_defectives(4, |_, _| Err::<bool, _>(OracleError::EmptyUniverse));
        assert_eq!(result, Err(OracleError::EmptyUniverse));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn finds_exactly_within_bound(
                n in 1u64..2000,
                picks in proptest::collection::vec(any::<u64>(), 0..40),
            ) {
                let mut set: Vec<u64> = picks.iter().map(|p| p % n + 1).collect();
                set.sort_unstable();
                set.dedup();
                let (found, queries) = run(n, &set);
                prop_assert_eq!(&found, &set);
                prop_assert!(queries as f64 <= shape_bound(n, set.len() as u64) + 1e-9);
            }
        }
    }
}
