//! The stored fixture file must match a fresh run bit for bit.
//!
//! Regenerate with `cargo run -p defcount-cli -- fixtures` after an
//! intentional behavior change, and review the diff.

use defcount_core::fixtures::{self, Fixtures};

const STORED: &str = include_str!("fixtures/regression.json");

#[test]
fn fixtures_match_fresh_run() {
    let stored: Fixtures = serde_json::from_str(STORED).expect("fixture file parses");
    let fresh = fixtures::generate().expect("fixtures generate");
    assert_eq!(stored.bounds, fresh.bounds);
    assert_eq!(stored.estimators.len(), fresh.estimators.len());
    for (s, f) in stored.estimators.iter().zip(&fresh.estimators) {
        assert_eq!(s, f, "{} seed {} n={}", s.estimator.name(), s.seed, s.instance.n());
    }
}

#[test]
fn stored_deterministic_cases_are_within_tolerance() {
    let stored: Fixtures = serde_json::from_str(STORED).unwrap();
    for case in stored.estimators.iter().filter(|c| c.estimator.name() == "deterministic") {
        let d = case.instance.d();
        assert!(case.estimate <= d);
        assert!((1.0 - case.epsilon) * d as f64 <= case.estimate as f64 + 1e-9);
    }
}
