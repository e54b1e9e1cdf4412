//! The randomized estimators.
//!
//! Both run a coarse upper bound search followed by three refinement stages:
//! - exponent search: a binary search for `log2 d` over `[0, log2 D₁]`,
//!   landing within a factor `1/δ'²` of `d`;
//! - grid search: a majority-vote binary search over exponents near that,
//!   landing within a factor 2;
//! - sampling: repeated pooled queries at a fixed threshold, whose negative
//!   fraction `2^(−d/Δ)` is inverted to give `d` within `1 ± ε`.
//!
//! They differ in how the coarse bound is obtained. The expected-query
//! estimator runs one uncapped doubling search; the Monte Carlo estimator runs
//! a cascade of capped searches, each narrowing the bound for the next.

use rand::RngCore;

use super::{EstimateOutcome, EstimatorConfig, EstimatorError, StageCount};
use crate::bounds::log_star;
use crate::doubling::{self, BuiltinSchedule, DeltaSchedule};
use crate::oracle::Oracle;
use crate::scale::{ExtendedScale, EMPTY_QUERY_LOG2};
use crate::streams::unit_f64;

/// Number of stages sharing the failure budget.
const STAGES: f64 = 5.0;

/// Per-stage failure probability for an overall budget `δ`.
pub fn stage_confidence(delta: f64) -> f64 {
    delta / STAGES
}

/// Asks pooled queries and keeps a per-stage tally.
struct Asker<'o, 'a, R: ?Sized> {
    oracle: &'o mut Oracle<'a>,
    rng: &'o mut R,
    stages: Vec<StageCount>,
}

impl<'o, 'a, R: RngCore + ?Sized> Asker<'o, 'a, R> {
    fn new(oracle: &'o mut Oracle<'a>, rng: &'o mut R) -> Self {
        Self {
            oracle,
            rng,
            stages: Vec::new(),
        }
    }

    fn begin(&mut self, name: &'static str) {
        self.stages.push(StageCount { name, queries: 0 });
    }

    fn charge(&mut self, queries: u64) {
        self.stages.last_mut().expect("stage begun").queries += queries;
    }

    fn ask(&mut self, threshold: ExtendedScale) -> Result<bool, EstimatorError> {
        self.charge(1);
        Ok(self.oracle.answer_pooled(threshold, self.rng)?)
    }

    /// Majority of `votes` queries at threshold `2^exponent` on whether
    /// `d ≥ 2^exponent` (a positive answer has probability ≥ 1/2 exactly then).
    fn at_least(&mut self, exponent: f64, votes: u32) -> Result<bool, EstimatorError> {
        let threshold = ExtendedScale::power_of_two(exponent.max(0.0));
        let mut positives = 0;
        for _ in 0..votes {
            positives += u32::from(self.ask(threshold)?);
        }
        Ok(2 * positives > votes)
    }

    fn doubling(
        &mut self,
        name: &'static str,
        schedule: &DeltaSchedule,
        confidence: f64,
        cap: Option<u32>,
    ) -> Result<doubling::DoublingResult, EstimatorError> {
        self.begin(name);
        let result = doubling::run(schedule, confidence, self.oracle, self.rng, cap)?;
        self.charge(result.queries_asked);
        Ok(result)
    }
}

/// Exponent search, grid search and sampling, starting from an upper bound
/// `coarse ≥ d` that holds with probability `1 − δ'`.
fn refine<R: RngCore + ?Sized>(
    asker: &mut Asker<'_, '_, R>,
    coarse: ExtendedScale,
    config: &EstimatorConfig,
    confidence: f64,
) -> Result<u64, EstimatorError> {
    // thresholds beyond 2^128 answer 0 for sure, so larger bounds add nothing
    let top = coarse.log2().min(EMPTY_QUERY_LOG2);

    asker.begin("exponent-search");
    let (mut lo, mut hi) = (0i64, top.ceil() as i64 + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if asker.at_least(mid as f64, config.stage2_votes)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    asker.begin("grid-search");
    let reach = (config.stage3_grid_factor * (1.0 / confidence).log2()).ceil() as i64 + 1;
    // sentinels one past each end: "below the grid" and "above the grid"
    let (mut lo3, mut hi3) = ((lo - reach).max(0) - 1, lo + reach + 1);
    while hi3 - lo3 > 1 {
        let mid = lo3 + (hi3 - lo3) / 2;
        if asker.at_least(mid as f64, config.stage3_votes)? {
            lo3 = mid;
        } else {
            hi3 = mid;
        }
    }

    asker.begin("sampling");
    // d ∈ [2^lo3, 2^(lo3+1)) w.h.p.; sample at half the geometric midpoint
    let threshold_log2 = (lo3 as f64 - 0.5).max(0.0);
    let threshold = ExtendedScale::power_of_two(threshold_log2);
    let samples = sample_count(config, confidence);
    let mut negatives = 0u64;
    for _ in 0..samples {
        negatives += u64::from(!asker.ask(threshold)?);
    }
    let fraction = (negatives as f64 / samples as f64).max(0.5 / samples as f64);
    let estimate = -threshold.to_f64() * fraction.log2();
    Ok(estimate.round() as u64)
}

/// `⌈K·ε⁻²·ln(1/δ')⌉`, the size of the sampling stage.
pub fn sample_count(config: &EstimatorConfig, confidence: f64) -> u64 {
    let eps = config.epsilon;
    (config.stage4_sample_multiplier / (eps * eps) * (1.0 / confidence).ln()).ceil() as u64
}

/// The expected-query estimator.
///
/// With probability `δ − δ^c` it outputs 0 without asking anything; otherwise
/// it runs at overall confidence `δ^c`: a doubling search on the
/// `2^(2^(i²))` schedule for the coarse bound, then the refinement stages.
pub fn estimate_expected<R: RngCore + ?Sized>(
    config: &EstimatorConfig,
    oracle: &mut Oracle<'_>,
    rng: &mut R,
) -> Result<EstimateOutcome, EstimatorError> {
    config.validate()?;
    let inner = config.delta.powf(config.wrapper_exponent);
    if unit_f64(rng.next_u64()) < config.delta - inner {
        let mut outcome = EstimateOutcome::new(0, Vec::new());
        outcome.wrapper_fired = true;
        return Ok(outcome);
    }
    let confidence = stage_confidence(inner);
    let mut asker = Asker::new(oracle, rng);
    let schedule = DeltaSchedule::builtin(BuiltinSchedule::Improved);
    let coarse = asker.doubling("coarse-doubling", &schedule, confidence, None)?;
    let estimate = refine(&mut asker, coarse.estimate, config, confidence)?;
    Ok(EstimateOutcome::new(estimate, asker.stages))
}

/// The worst-case-bounded estimator.
///
/// Four capped doubling searches on ever slower schedules (tower, quad-exp,
/// triple-exp, `2^(2^(i²))`) shrink an upper bound that starts at `n`. Each
/// is capped at the first index whose threshold exceeds the current bound,
/// except the tower, which is capped at `log*(n)`. A search that hits its cap
/// learned nothing and leaves the bound unchanged. The refinement stages then
/// run from the final bound.
pub fn estimate_monte_carlo<R: RngCore + ?Sized>(
    config: &EstimatorConfig,
    oracle: &mut Oracle<'_>,
    rng: &mut R,
) -> Result<EstimateOutcome, EstimatorError> {
    config.validate()?;
    let confidence = stage_confidence(config.delta);
    let n = oracle.n();
    let mut bound = ExtendedScale::from_integer(n.max(1)).expect("positive");
    let mut asker = Asker::new(oracle, rng);
    let cascade = [
        ("tower", BuiltinSchedule::Tower),
        ("quad-exp", BuiltinSchedule::QuadExp),
        ("triple-exp", BuiltinSchedule::TripleExp),
        ("improved", BuiltinSchedule::Improved),
    ];
    for (name, kind) in cascade {
        let schedule = DeltaSchedule::builtin(kind);
        let cap = match kind {
            BuiltinSchedule::Tower => log_star(n as f64),
            _ => schedule
                .first_index_exceeding(bound)
                .expect("the bound is finite"),
        };
        let result = asker.doubling(name, &schedule, confidence, Some(cap))?;
        if !result.capped {
            bound = bound.min(result.estimate);
        }
    }
    let estimate = refine(&mut asker, bound, config, confidence)?;
    Ok(EstimateOutcome::new(estimate, asker.stages))
}
