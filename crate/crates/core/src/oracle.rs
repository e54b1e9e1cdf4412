//! The group-testing oracle: a hidden defective set answering pooled queries.
//!
//! Items are numbered `1..=n`. A query answers `true` iff it contains at least
//! one defective item. The oracle counts every query it answers and can
//! optionally keep a transcript of `(query, answer)` pairs.

use std::ops::RangeInclusive;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scale::ExtendedScale;
use crate::streams::{splitmix64, unit_f64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("item {item} is outside the universe [1, {n}]")]
    OutOfRange { item: u64, n: u64 },
    #[error("item {0} listed twice")]
    Duplicate(u64),
    #[error("universe must contain at least one item")]
    EmptyUniverse,
    #[error("inclusion probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("group range {first}..={last} is outside [1, {groups}]")]
    BadGroupRange { first: u64, last: u64, groups: u64 },
    #[error("query budget of {0} exhausted")]
    BudgetExhausted(u64),
}

/// A universe `[1, n]` with its hidden defective set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    n: u64,
    defectives: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    n: u64,
    defectives: Vec<u64>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = OracleError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        Instance::new(raw.n, raw.defectives)
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance {
            n: inst.n,
            defectives: inst.defectives,
        }
    }
}

impl Instance {
    pub fn new(n: u64, defectives: impl IntoIterator<Item = u64>) -> Result<Self, OracleError> {
        if n == 0 {
            return Err(OracleError::EmptyUniverse);
        }
        let mut defectives: Vec<u64> = defectives.into_iter().collect();
        defectives.sort_unstable();
        for w in defectives.windows(2) {
            if w[0] == w[1] {
                return Err(OracleError::Duplicate(w[0]));
            }
        }
        if let Some(&bad) = defectives.iter().find(|&&i| i == 0 || i > n) {
            return Err(OracleError::OutOfRange { item: bad, n });
        }
        Ok(Self { n, defectives })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn d(&self) -> u64 {
        self.defectives.len() as u64
    }

    /// Defective items in increasing order.
    pub fn defectives(&self) -> &[u64] {
        &self.defectives
    }

    pub fn is_defective(&self, item: u64) -> bool {
        self.defectives.binary_search(&item).is_ok()
    }

    /// Whether any defective lies in `first..=last`.
    pub fn any_in(&self, first: u64, last: u64) -> bool {
        let start = self.defectives.partition_point(|&x| x < first);
        self.defectives.get(start).is_some_and(|&x| x <= last)
    }
}

/// Balanced partition of `[1, n]` into contiguous groups whose sizes differ by
/// at most one. Groups are numbered `1..=groups`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    n: u64,
    groups: u64,
}

impl Partition {
    pub fn balanced(n: u64, groups: u64) -> Self {
        assert!(groups >= 1 && groups <= n, "need 1 <= groups <= n");
        Self { n, groups }
    }

    pub fn groups(&self) -> u64 {
        self.groups
    }

    pub fn largest_group(&self) -> u64 {
        self.n.div_ceil(self.groups)
    }

    /// Items covered by group `g`; the first `n mod groups` groups hold one
    /// extra item.
    pub fn items_of(&self, g: u64) -> RangeInclusive<u64> {
        let base = self.n / self.groups;
        let extra = self.n % self.groups;
        let k = g - 1;
        let start = k * base + k.min(extra);
        let len = base + u64::from(k < extra);
        (start + 1)..=(start + len)
    }

    pub fn group_of(&self, item: u64) -> u64 {
        let base = self.n / self.groups;
        let extra = self.n % self.groups;
        let k = item - 1;
        let boundary = extra * (base + 1);
        if k < boundary {
            k / (base + 1) + 1
        } else {
            extra + (k - boundary) / base + 1
        }
    }
}

/// How a query is described in a transcript. Bernoulli queries are kept as
/// `(p, seed)` so that transcripts over large universes stay small; the seed
/// reproduces the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QueryDescriptor {
    Subset { items: Vec<u64> },
    /// The explicit subset `first..=last`.
    Interval { first: u64, last: u64 },
    Bernoulli { p: f64, seed: u64 },
    /// Union of the partition groups `first_group..=last_group`.
    GroupUnion { first_group: u64, last_group: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub query: QueryDescriptor,
    pub answer: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn query_count(&self) -> u64 {
        self.entries.len() as u64
    }
}

/// How Bernoulli queries are answered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BernoulliMode {
    /// One coin with success probability `1 − (1−p)^d`; non-defective items
    /// cannot change the answer, so they are never drawn.
    #[default]
    Shortcut,
    /// Draw membership of all `n` items (via geometric skips) and intersect.
    Materialize,
}

/// Probability that a Bernoulli(p) pool misses all `d` defectives, `(1−p)^d`,
/// evaluated as `exp(d·log1p(−p))`.
pub fn miss_probability(p: f64, d: u64) -> f64 {
    if d == 0 || p == 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    (d as f64 * (-p).ln_1p()).exp()
}

/// Answers queries against one instance and keeps count.
pub struct Oracle<'a> {
    instance: &'a Instance,
    mode: BernoulliMode,
    queries: u64,
    budget: Option<u64>,
    transcript: Option<Transcript>,
}

impl<'a> Oracle<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        Self {
            instance,
            mode: BernoulliMode::Shortcut,
            queries: 0,
            budget: None,
            transcript: None,
        }
    }

    pub fn with_mode(mut self, mode: BernoulliMode) -> Self {
        self.mode = mode;
        self
    }

    /// Refuse to answer more than `budget` queries.
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn recording(mut self) -> Self {
        self.transcript = Some(Transcript::default());
        self
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    pub fn n(&self) -> u64 {
        self.instance.n
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    pub fn take_transcript(&mut self) -> Option<Transcript> {
        self.transcript.take()
    }

    fn charge(&mut self) -> Result<(), OracleError> {
        if let Some(budget) = self.budget {
            if self.queries >= budget {
                return Err(OracleError::BudgetExhausted(budget));
            }
        }
        self.queries += 1;
        Ok(())
    }

    fn record(&mut self, query: impl FnOnce() -> QueryDescriptor, answer: bool) {
        if let Some(t) = self.transcript.as_mut() {
            t.entries.push(TranscriptEntry {
                query: query(),
                answer,
            });
        }
    }

    fn check_item(&self, item: u64) -> Result<(), OracleError> {
        if item == 0 || item > self.instance.n {
            return Err(OracleError::OutOfRange {
                item,
                n: self.instance.n,
            });
        }
        Ok(())
    }

    pub fn answer_subset(&mut self, items: &[u64]) -> Result<bool, OracleError> {
        for &item in items {
            self.check_item(item)?;
        }
        self.charge()?;
        let answer = items.iter().any(|&i| self.instance.is_defective(i));
        self.record(
            || QueryDescriptor::Subset {
                items: items.to_vec(),
            },
            answer,
        );
        Ok(answer)
    }

    /// The explicit subset `first..=last`, without listing it.
    pub fn answer_interval(&mut self, first: u64, last: u64) -> Result<bool, OracleError> {
        self.check_item(first)?;
        self.check_item(last)?;
        self.charge()?;
        let answer = first <= last && self.instance.any_in(first, last);
        self.record(|| QueryDescriptor::Interval { first, last }, answer);
        Ok(answer)
    }

    /// The union of groups `first_group..=last_group` of `partition`.
    pub fn answer_groups(
        &mut self,
        partition: &Partition,
        first_group: u64,
        last_group: u64,
    ) -> Result<bool, OracleError> {
        if first_group == 0 || first_group > last_group || last_group > partition.groups {
            return Err(OracleError::BadGroupRange {
                first: first_group,
                last: last_group,
                groups: partition.groups,
            });
        }
        self.charge()?;
        let first = *partition.items_of(first_group).start();
        let last = *partition.items_of(last_group).end();
        let answer = self.instance.any_in(first, last);
        self.record(
            || QueryDescriptor::GroupUnion {
                first_group,
                last_group,
            },
            answer,
        );
        Ok(answer)
    }

    /// A random pool holding each item independently with probability `p`.
    pub fn answer_bernoulli<R: RngCore + ?Sized>(
        &mut self,
        p: f64,
        rng: &mut R,
    ) -> Result<bool, OracleError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(OracleError::BadProbability(p));
        }
        self.charge()?;
        let seed = rng.next_u64();
        let answer = match self.mode {
            BernoulliMode::Shortcut => {
                let hit = 1.0 - miss_probability(p, self.instance.d());
                unit_f64(splitmix64(seed)) < hit
            }
            BernoulliMode::Materialize => self.materialized_answer(p, seed),
        };
        self.record(|| QueryDescriptor::Bernoulli { p, seed }, answer);
        Ok(answer)
    }

    /// The pooled query with threshold Δ, i.e. inclusion probability
    /// `1 − 2^(−1/Δ)`.
    pub fn answer_pooled<R: RngCore + ?Sized>(
        &mut self,
        threshold: ExtendedScale,
        rng: &mut R,
    ) -> Result<bool, OracleError> {
        self.answer_bernoulli(threshold.inclusion_probability(), rng)
    }

    fn materialized_answer(&self, p: f64, seed: u64) -> bool {
        materialize_bernoulli(self.instance.n, p, seed)
            .any(|item| self.instance.is_defective(item))
    }
}

/// The members of the Bernoulli(p) pool over `[1, n]` determined by `seed`,
/// in increasing order.
pub fn materialize_bernoulli(n: u64, p: f64, seed: u64) -> impl Iterator<Item = u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_miss = (-p).ln_1p();
    let mut next = 0u64;
    std::iter::from_fn(move || {
        if p <= 0.0 {
            return None;
        }
        let step = if p >= 1.0 {
            1
        } else {
            // number of excluded items before the next included one is
            // geometric: floor(ln U / ln(1-p))
            let u = 1.0 - unit_f64(rng.next_u64());
            let skip = (u.ln() / log_miss).floor();
            if skip >= (n - next) as f64 {
                next = n;
                return None;
            }
            skip as u64 + 1
        };
        next += step;
        (next <= n).then_some(next)
    })
}
