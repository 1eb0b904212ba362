//! Under-sampling of the negative class and duplicate-content removal.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use rand::seq::index;

use crate::corpus::LabeledExample;
use crate::rng::rng_from_seed;

/// A labeled record that can be sampled and deduplicated.
pub trait Record {
    type Key: Hash + Eq;

    /// Recency proxy; higher is later.
    fn rev_id(&self) -> u64;
    fn label(&self) -> bool;
    /// Everything that makes two records "the same content".
    fn content_key(&self) -> Self::Key;
}

impl Record for LabeledExample {
    type Key = (String, bool, [Option<String>; 7]);

    fn rev_id(&self) -> u64 {
        self.revision.rev_id
    }

    fn label(&self) -> bool {
        self.label
    }

    fn content_key(&self) -> Self::Key {
        let r = &self.revision;
        (
            r.comment.clone(),
            r.registered,
            [
                r.country.clone(),
                r.continent.clone(),
                r.timezone.clone(),
                r.region.clone(),
                r.city.clone(),
                r.county.clone(),
                r.user_tag.clone(),
            ],
        )
    }
}

/// Sampling fraction as an exact ratio in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    numer: u64,
    denom: u64,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid sampling fraction {0:?}: expected a ratio in (0, 1] such as `1/50` or `0.02`")]
pub struct FractionError(String);

impl Fraction {
    pub fn new(numer: u64, denom: u64) -> Result<Self, FractionError> {
        if numer == 0 || denom == 0 || numer > denom {
            return Err(FractionError(format!("{numer}/{denom}")));
        }
        Ok(Self { numer, denom })
    }

    /// `round(self * count)`, halves rounded up, in exact integer arithmetic.
    pub fn scale(&self, count: usize) -> usize {
        let n = count as u128 * self.numer as u128;
        let d = self.denom as u128;
        ((2 * n + d) / (2 * d)) as usize
    }

    pub fn as_f64(&self) -> f64 {
        self.numer as f64 / self.denom as f64
    }
}

impl FromStr for Fraction {
    type Err = FractionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || FractionError(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Fraction::new(n, d).map_err(|_| bad());
        }
        // Decimal literal: numerator over a power of ten.
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || s.is_empty() {
            return Err(bad());
        }
        let denom = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let numer = int.checked_mul(denom).and_then(|v| v.checked_add(frac_v)).ok_or_else(bad)?;
        let g = gcd(numer, denom);
        Fraction::new(numer / g.max(1), denom / g.max(1)).map_err(|_| bad())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer, self.denom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupOrder {
    #[default]
    After,
    Before,
}

impl FromStr for DedupOrder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "after" => Ok(Self::After),
            "before" => Ok(Self::Before),
            other => Err(format!("dedup order must be `after` or `before`, got {other:?}")),
        }
    }
}

impl fmt::Display for DedupOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::After => "after",
            Self::Before => "before",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub fraction: Fraction,
    /// Number of most recent negatives eligible for sampling; `None` = all.
    pub window: Option<usize>,
    pub seed: u64,
    pub dedup: bool,
    pub dedup_order: DedupOrder,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            fraction: Fraction { numer: 1, denom: 50 },
            window: None,
            seed: 0,
            dedup: true,
            dedup_order: DedupOrder::After,
        }
    }
}

/// Keep every positive and a uniform sample of the most recent negatives.
///
/// Negatives are restricted to the `window` highest rev_ids, then exactly
/// `round(fraction * eligible)` of them are drawn without replacement. The
/// result is sorted by rev_id.
pub fn undersample<T: Record>(examples: Vec<T>, cfg: &SamplingConfig) -> Vec<T> {
    let (mut out, mut negatives): (Vec<T>, Vec<T>) = examples.into_iter().partition(|e| e.label());
    negatives.sort_by_key(|e| e.rev_id());
    let eligible_from = cfg.window.map_or(0, |w| negatives.len().saturating_sub(w));
    let eligible: Vec<T> = negatives.drain(eligible_from..).collect();
    let amount = cfg.fraction.scale(eligible.len());

    let mut rng = rng_from_seed(cfg.seed);
    let mut chosen = index::sample(&mut rng, eligible.len(), amount).into_vec();
    chosen.sort_unstable();
    let mut chosen = chosen.into_iter().peekable();
    for (i, e) in eligible.into_iter().enumerate() {
        if chosen.peek() == Some(&i) {
            chosen.next();
            out.push(e);
        }
    }
    out.sort_by_key(|e| e.rev_id());
    out
}

/// Drop records whose content key repeats, keeping the one with the
/// smallest rev_id at its original position.
pub fn dedup<T: Record>(examples: Vec<T>) -> Vec<T> {
    let mut earliest: HashMap<T::Key, u64> = HashMap::with_capacity(examples.len());
    for e in &examples {
        earliest
            .entry(e.content_key())
            .and_modify(|id| *id = (*id).min(e.rev_id()))
            .or_insert(e.rev_id());
    }
    examples
        .into_iter()
        .filter(|e| {
            let key = e.content_key();
            // Removing the entry also drops any later record sharing the id.
            if earliest.get(&key) == Some(&e.rev_id()) {
                earliest.remove(&key);
                true
            } else {
                false
            }
        })
        .collect()
}

/// Under-sample and deduplicate in the configured order.
pub fn sample_and_dedup<T: Record>(examples: Vec<T>, cfg: &SamplingConfig) -> Vec<T> {
    match (cfg.dedup, cfg.dedup_order) {
        (false, _) => undersample(examples, cfg),
        (true, DedupOrder::After) => dedup(undersample(examples, cfg)),
        (true, DedupOrder::Before) => undersample(dedup(examples), cfg),
    }
}
