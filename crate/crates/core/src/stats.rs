//! Summary statistics for trial batches.

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Wilson score interval for `successes` out of `trials` at normal quantile
/// `z`. An empty batch gives `[0, 1]`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Nearest-rank percentile of an ascending slice: the smallest value with at
/// least `q` of the data at or below it.
///
/// # Panics
/// If `sorted` is empty or `q` is outside `[0, 1]`.
pub fn percentile(sorted: &[u64], q: f64) -> u64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile {q} outside [0, 1]");
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.saturating_sub(1)]
}

/// Standard deviation of the mean of `trials` Bernoulli(`p`) draws.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}
