//! Log-domain magnitudes for pooling thresholds.
//!
//! The doubling schedules grow as iterated exponentials (2^(2^(i²)), towers of
//! twos), so a threshold is stored as its base-2 logarithm. Once even the
//! logarithm leaves the `f64` range the value is flagged as saturated and
//! behaves as +∞.

use std::cmp::Ordering;
use std::f64::consts::LN_2;
use std::fmt;

use thiserror::Error;

/// Thresholds above 2^128 give pooled queries that, over any universe of at
/// most 2^64 items, include an item with probability below 2^-64. They are
/// answered as empty queries.
pub const EMPTY_QUERY_LOG2: f64 = 128.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("threshold must be at least 1, got {0}")]
    BelowOne(u64),
    #[error("log2 magnitude must be a non-negative number, got {0}")]
    InvalidLog2(f64),
}

/// A magnitude Δ ≥ 1 held as `log2(Δ)`, with a saturation flag for values
/// whose logarithm itself overflows.
#[derive(Clone, Copy)]
pub struct ExtendedScale {
    log2: f64,
    saturated: bool,
}

impl ExtendedScale {
    pub const ONE: ExtendedScale = ExtendedScale {
        log2: 0.0,
        saturated: false,
    };

    pub const SATURATED: ExtendedScale = ExtendedScale {
        log2: f64::INFINITY,
        saturated: true,
    };

    pub fn from_integer(v: u64) -> Result<Self, ScaleError> {
        if v == 0 {
            return Err(ScaleError::BelowOne(v));
        }
        Ok(Self {
            log2: (v as f64).log2(),
            saturated: false,
        })
    }

    /// Builds a magnitude from its base-2 logarithm. `+∞` saturates.
    pub fn from_log2(log2: f64) -> Result<Self, ScaleError> {
        if log2.is_nan() || log2 < 0.0 {
            return Err(ScaleError::InvalidLog2(log2));
        }
        if log2.is_infinite() {
            return Ok(Self::SATURATED);
        }
        Ok(Self {
            log2,
            saturated: false,
        })
    }

    /// `2^exponent` for a real exponent ≥ 0.
    ///
    /// # Panics
    /// If `exponent` is negative or NaN.
    pub fn power_of_two(exponent: f64) -> Self {
        assert!(
            exponent >= 0.0,
            "power_of_two needs a non-negative exponent, got {exponent}"
        );
        Self::from_log2(exponent).expect("checked non-negative")
    }

    /// `2^Δ` where Δ is itself an extended magnitude.
    pub fn power_of_two_of(exponent: ExtendedScale) -> Self {
        if exponent.saturated {
            return Self::SATURATED;
        }
        // exp2 overflows to +inf once log2 >= 1024
        Self::power_of_two(exponent.log2.exp2())
    }

    pub fn log2(&self) -> f64 {
        self.log2
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    /// The represented value as a double; `+∞` when it does not fit.
    pub fn to_f64(&self) -> f64 {
        self.log2.exp2()
    }

    /// Multiplies by a positive real factor. Saturated values stay saturated,
    /// and the result never drops below 1.
    pub fn scaled_by(&self, factor: f64) -> Self {
        debug_assert!(factor > 0.0);
        if self.saturated {
            return *self;
        }
        Self::from_log2((self.log2 + factor.log2()).max(0.0)).expect("finite or +inf")
    }

    /// Probability `1 − 2^(−1/Δ)` that a single item joins the pooled query
    /// with threshold Δ.
    ///
    /// Evaluated as `−expm1(−ln2/Δ)` so that large Δ gives `≈ ln2/Δ` without
    /// cancellation. Exactly 0 for saturated values and for Δ beyond
    /// [`EMPTY_QUERY_LOG2`].
    pub fn inclusion_probability(&self) -> f64 {
        if self.saturated || self.log2 > EMPTY_QUERY_LOG2 {
            return 0.0;
        }
        let rate = LN_2 * (-self.log2).exp2();
        -(-rate).exp_m1()
    }

    /// True iff `b / a ≥ 2`. A saturated `b` counts as +∞ and always passes;
    /// a saturated `a` against a finite `b` never does.
    pub fn ratio_at_least_two(a: ExtendedScale, b: ExtendedScale) -> bool {
        match (a.saturated, b.saturated) {
            (_, true) => true,
            (true, false) => false,
            (false, false) => b.log2 - a.log2 >= 1.0,
        }
    }
}

impl PartialEq for ExtendedScale {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExtendedScale {}

impl PartialOrd for ExtendedScale {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedScale {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.saturated, other.saturated) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => self.log2.total_cmp(&other.log2),
        }
    }
}

impl fmt::Debug for ExtendedScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.saturated {
            write!(f, "ExtendedScale(saturated)")
        } else {
            write!(f, "ExtendedScale(2^{})", self.log2)
        }
    }
}

impl fmt::Display for ExtendedScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.saturated {
            f.write_str("inf")
        } else if self.log2 < 53.0 {
            write!(f, "{}", self.to_f64())
        } else {
            write!(f, "2^{}", self.log2)
        }
    }
}
