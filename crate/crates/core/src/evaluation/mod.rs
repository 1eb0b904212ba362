//! AUC-ROC, score-difference histograms, false positive / false negative
//! counting and classical multidimensional scaling.

mod mds;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::hash::Hash;

pub use mds::{classical_mds, classical_mds_from_distances, mds_subsample, DEFAULT_MDS_CAP};

pub const HISTOGRAM_BINS: usize = 20;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("AUC needs at least one positive and one negative, got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
    #[error("score for rev_id {rev_id} is not a finite value in [0, 1]: {score}")]
    InvalidScore { rev_id: u64, score: f64 },
    #[error("{0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredExample {
    pub rev_id: u64,
    pub score: f64,
    pub label: bool,
}

impl ScoredExample {
    pub fn new(rev_id: u64, score: f64, label: bool) -> Self {
        Self { rev_id, score, label }
    }

    /// `|label − score|`
    pub fn difference(&self) -> f64 {
        (f64::from(u8::from(self.label)) - self.score).abs()
    }
}

pub fn validate_scores(scored: &[ScoredExample]) -> Result<(), EvalError> {
    match scored.iter().find(|s| !(s.score.is_finite() && (0.0..=1.0).contains(&s.score))) {
        Some(s) => Err(EvalError::InvalidScore {
            rev_id: s.rev_id,
            score: s.score,
        }),
        None => Ok(()),
    }
}

/// Area under the ROC curve via the Mann–Whitney rank sum, with average
/// ranks for tied scores.
pub fn auc_roc(scored: &[ScoredExample]) -> Result<f64, EvalError> {
    let positives = scored.iter().filter(|s| s.label).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].score.total_cmp(&scored[b].score));

    // Ranks are 1-based; a tie group spanning ranks lo..=hi gets (lo+hi)/2.
    // Summing doubled ranks keeps everything integral.
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scored[order[end]].score == scored[order[start]].score {
            end += 1;
        }
        let doubled = (start + 1 + end) as u128;
        let pos_in_group = order[start..end].iter().filter(|&&i| scored[i].label).count() as u128;
        doubled_rank_sum += doubled * pos_in_group;
        start = end;
    }
    let p = positives as u128;
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// Bin of a difference in [0, 1]; the last bin is closed on the right.
pub fn histogram_bin(difference: f64) -> usize {
    let raw = (difference * HISTOGRAM_BINS as f64 + 1e-9).floor();
    (raw.max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// Counts of `|label − score|` over 20 equal bins of [0, 1].
pub fn score_histogram(scored: &[ScoredExample]) -> [usize; HISTOGRAM_BINS] {
    let mut bins = [0; HISTOGRAM_BINS];
    for s in scored {
        bins[histogram_bin(s.difference())] += 1;
    }
    bins
}

/// Indices (into the scored slice) of the false positives and negatives,
/// plus the subsets that remain after dropping repeated keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorSets {
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
    pub distinct_false_positives: Vec<usize>,
    pub distinct_false_negatives: Vec<usize>,
}

/// Negatives scored at or above `threshold` and positives below it.
/// `keys[i]` identifies the content of example `i`; the distinct sets keep
/// the first example per key.
pub fn error_sets<K: Hash + Eq>(scored: &[ScoredExample], keys: &[K], threshold: f64) -> Result<ErrorSets, EvalError> {
    if keys.len() != scored.len() {
        return Err(EvalError::Mismatch(format!("{} keys for {} scores", keys.len(), scored.len())));
    }
    let mut sets = ErrorSets::default();
    let mut seen_fp = HashSet::new();
    let mut seen_fn = HashSet::new();
    for (i, s) in scored.iter().enumerate() {
        if !s.label && s.score >= threshold {
            sets.false_positives.push(i);
            if seen_fp.insert(&keys[i]) {
                sets.distinct_false_positives.push(i);
            }
        } else if s.label && s.score < threshold {
            sets.false_negatives.push(i);
            if seen_fn.insert(&keys[i]) {
                sets.distinct_false_negatives.push(i);
            }
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub positives: usize,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub histogram: [usize; HISTOGRAM_BINS],
    pub misclassified_count: usize,
    pub threshold: f64,
    pub fp_total: usize,
    pub fp_distinct: usize,
    pub fn_total: usize,
    pub fn_distinct: usize,
}

/// Full report; errors are deduplicated by `keys`.
pub fn evaluate<K: Hash + Eq>(scored: &[ScoredExample], keys: &[K], threshold: f64) -> Result<EvalReport, EvalError> {
    validate_scores(scored)?;
    let auc = match auc_roc(scored) {
        Ok(a) => Some(a),
        Err(EvalError::SingleClass { .. }) => None,
        Err(e) => return Err(e),
    };
    let sets = error_sets(scored, keys, threshold)?;
    Ok(EvalReport {
        n: scored.len(),
        positives: scored.iter().filter(|s| s.label).count(),
        auc,
        histogram: score_histogram(scored),
        misclassified_count: scored.iter().filter(|s| s.difference() > 0.5).count(),
        threshold,
        fp_total: sets.false_positives.len(),
        fp_distinct: sets.distinct_false_positives.len(),
        fn_total: sets.false_negatives.len(),
        fn_distinct: sets.distinct_false_negatives.len(),
    })
}

/// [`evaluate`] with every example treated as distinct content.
pub fn evaluate_scores(scored: &[ScoredExample]) -> Result<EvalReport, EvalError> {
    let keys: Vec<usize> = (0..scored.len()).collect();
    evaluate(scored, &keys, DEFAULT_THRESHOLD)
}

impl EvalReport {
    /// `key=value` lines followed by `bin_lo \t bin_hi \t count` rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "n={}", self.n).unwrap();
        writeln!(out, "positives={}", self.positives).unwrap();
        writeln!(out, "negatives={}", self.n - self.positives).unwrap();
        match self.auc {
            Some(a) => writeln!(out, "auc={a:?}").unwrap(),
            None => writeln!(out, "auc=undefined").unwrap(),
        }
        writeln!(out, "threshold={:?}", self.threshold).unwrap();
        writeln!(out, "misclassified={}", self.misclassified_count).unwrap();
        writeln!(out, "fp_total={}", self.fp_total).unwrap();
        writeln!(out, "fp_distinct={}", self.fp_distinct).unwrap();
        writeln!(out, "fn_total={}", self.fn_total).unwrap();
        writeln!(out, "fn_distinct={}", self.fn_distinct).unwrap();
        writeln!(out, "histogram_bins={HISTOGRAM_BINS}").unwrap();
        for (b, count) in self.histogram.iter().enumerate() {
            let lo = b as f64 / HISTOGRAM_BINS as f64;
            let hi = (b + 1) as f64 / HISTOGRAM_BINS as f64;
            writeln!(out, "{lo:.2}\t{hi:.2}\t{count}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scored(items: &[(f64, bool)]) -> Vec<ScoredExample> {
        items
            .iter()
            .enumerate()
            .map(|(i, &(s, l))| ScoredExample::new(i as u64, s, l))
            .collect()
    }

    fn brute(items: &[ScoredExample]) -> f64 {
        let (mut credit, mut pairs) = (0.0, 0.0);
        for p in items.iter().filter(|s| s.label) {
            for n in items.iter().filter(|s| !s.label) {
                pairs += 1.0;
                credit += if p.score > n.score {
                    1.0
                } else if p.score == n.score {
                    0.5
                } else {
                    0.0
                };
            }
        }
        credit / pairs
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_roc(&scored(&[(0.9, true), (0.1, false)])).unwrap(), 1.0);
        assert_eq!(
            auc_roc(&scored(&[(0.3, true), (0.3, false), (0.3, false), (0.3, true)])).unwrap(),
            0.5
        );
        assert_eq!(
            auc_roc(&scored(&[(0.8, true), (0.4, true), (0.6, false), (0.2, false)])).unwrap(),
            0.75
        );
        assert_eq!(
            auc_roc(&scored(&[(0.8, true)])),
            Err(EvalError::SingleClass {
                positives: 1,
                negatives: 0
            })
        );
    }

    #[test]
    fn histogram_examples() {
        let h = score_histogram(&scored(&[(0.9, true)]));
        assert_eq!(h[2], 1);
        let r = evaluate_scores(&scored(&[(0.2, true)])).unwrap();
        assert_eq!(r.misclassified_count, 1);
        assert_eq!(r.auc, None);
        assert_eq!(score_histogram(&[]), [0; HISTOGRAM_BINS]);
        assert_eq!(histogram_bin(1.0), HISTOGRAM_BINS - 1);
        assert_eq!(histogram_bin(0.0), 0);
    }

    #[test]
    fn error_set_examples() {
        let s = scored(&[(0.7, false), (0.7, true), (0.9, false), (0.1, true)]);
        let sets = error_sets(&s, &["a", "b", "a", "c"], 0.5).unwrap();
        assert_eq!(sets.false_positives, vec![0, 2]);
        assert_eq!(sets.distinct_false_positives, vec![0]);
        assert_eq!(sets.false_negatives, vec![3]);
    }

    #[test]
    fn perfect_report_text() {
        let r = evaluate_scores(&scored(&[(1.0, true), (0.0, false)])).unwrap();
        let text = r.to_text();
        assert!(text.contains("auc=1.0\n"));
        assert!(text.contains("0.00\t0.05\t2\n"));
    }

    fn dataset() -> impl Strategy<Value = Vec<ScoredExample>> {
        prop::collection::vec((0u8..12, any::<bool>()), 2..120).prop_filter_map("two classes", |v| {
            let s: Vec<_> = v
                .iter()
                .enumerate()
                .map(|(i, &(q, l))| ScoredExample::new(i as u64, f64::from(q) / 11.0, l))
                .collect();
            (s.iter().any(|e| e.label) && s.iter().any(|e| !e.label)).then_some(s)
        })
    }

    proptest! {
        #[test]
        fn auc_matches_pair_count(s in dataset()) {
            prop_assert!((auc_roc(&s).unwrap() - brute(&s)).abs() <= 1e-12);
        }

        #[test]
        fn auc_monotone_invariant(s in dataset()) {
            let t: Vec<_> = s.iter().map(|e| ScoredExample { score: e.score.powi(3) * 0.5 + 0.1, ..*e }).collect();
            prop_assert!((auc_roc(&s).unwrap() - auc_roc(&t).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn auc_label_flip(s in dataset()) {
            let t: Vec<_> = s.iter().map(|e| ScoredExample { label: !e.label, ..*e }).collect();
            prop_assert!((auc_roc(&s).unwrap() + auc_roc(&t).unwrap() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn report_invariants(s in dataset()) {
            let r = evaluate_scores(&s).unwrap();
            prop_assert_eq!(r.histogram.iter().sum::<usize>(), r.n);
            prop_assert!(r.fp_distinct <= r.fp_total && r.fn_distinct <= r.fn_total);
        }
    }
}
