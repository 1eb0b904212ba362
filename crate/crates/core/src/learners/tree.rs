//! Binary decision trees over sparse columns.
//!
//! Training works on a column store whose per-column non-zero entries are
//! sorted once up front. A node scans only the non-zeros of its own rows and
//! treats the remaining rows as one block at value 0, so wide one-hot
//! matrices are never densified.
//!
//! Both criteria reduce to the same split score for the targets used here:
//! with per-row weights `w` and targets `t`, the weighted impurity decrease
//! is `c * (sL²/wL + sR²/wR - s²/w)` where `s = Σ w·t`. `c = 1` for squared
//! error and `c = 2` for Gini on 0/1 targets.

use rand::Rng as _;

use super::LearnError;
use crate::featurize::FeatureVector;
use crate::rng::Rng;

const LEAF: u32 = u32::MAX;

/// Per-column sorted non-zero entries `(value, row)`.
pub(crate) struct ColumnStore {
    n_rows: usize,
    columns: Vec<Vec<(f64, u32)>>,
}

impl ColumnStore {
    pub(crate) fn new(rows: &[FeatureVector], dim: usize) -> Result<Self, LearnError> {
        let mut columns = vec![Vec::new(); dim];
        for (r, x) in rows.iter().enumerate() {
            if x.dim() != dim {
                return Err(LearnError::DimensionMismatch {
                    expected: dim,
                    found: x.dim(),
                });
            }
            for &(j, v) in x.entries() {
                columns[j as usize].push((v, r as u32));
            }
        }
        for col in &mut columns {
            col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Ok(Self {
            n_rows: rows.len(),
            columns,
        })
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub(crate) fn dim(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Splitter {
    /// Exhaustive search over midpoints between distinct values.
    Best,
    /// One uniform threshold per candidate feature.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Criterion {
    Gini,
    SquaredError,
}

#[derive(Debug, Clone)]
pub(crate) struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Number of non-constant features to examine per node; `None` = all.
    pub max_features: Option<usize>,
    pub splitter: Splitter,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Node {
    pub feature: u32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub value: f64,
    /// Weighted impurity decrease of this split (0 for leaves).
    pub gain: f64,
}

impl Node {
    pub(crate) fn leaf(value: f64) -> Self {
        Self {
            feature: LEAF,
            threshold: 0.0,
            left: LEAF,
            right: LEAF,
            value,
            gain: 0.0,
        }
    }

    pub(crate) fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    /// Value of the leaf reached by `x` (dense).
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let node = &self.nodes[i];
            if node.is_leaf() {
                return node.value;
            }
            i = if x[node.feature as usize] <= node.threshold {
                node.left
            } else {
                node.right
            } as usize;
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn add_importances(&self, acc: &mut [f64]) {
        for n in self.nodes.iter().filter(|n| !n.is_leaf()) {
            acc[n.feature as usize] += n.gain;
        }
    }

    /// Serialize nodes, one per line.
    pub(crate) fn write_text(&self, out: &mut String) {
        use std::fmt::Write as _;
        writeln!(out, "tree {}", self.nodes.len()).unwrap();
        for n in &self.nodes {
            if n.is_leaf() {
                writeln!(out, "leaf {:?}", n.value).unwrap();
            } else {
                writeln!(
                    out,
                    "split {} {:?} {} {} {:?} {:?}",
                    n.feature, n.threshold, n.left, n.right, n.value, n.gain
                )
                .unwrap();
            }
        }
    }

    pub(crate) fn read_text(lines: &mut super::persist::Lines<'_>, dim: usize) -> Result<Self, LearnError> {
        let count: usize = lines.keyword_value("tree")?;
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let (lineno, line) = lines.next_line()?;
            let mut parts = line.split(' ');
            let bad = || LearnError::Parse {
                line: lineno,
                reason: "bad tree node".into(),
            };
            let node = match parts.next() {
                Some("leaf") => Node::leaf(super::persist::num(parts.next(), lineno)?),
                Some("split") => {
                    let feature: u32 = super::persist::num(parts.next(), lineno)?;
                    let threshold = super::persist::num(parts.next(), lineno)?;
                    let left: u32 = super::persist::num(parts.next(), lineno)?;
                    let right: u32 = super::persist::num(parts.next(), lineno)?;
                    let value = super::persist::num(parts.next(), lineno)?;
                    let gain = super::persist::num(parts.next(), lineno)?;
                    if feature as usize >= dim || left as usize >= count || right as usize >= count {
                        return Err(bad());
                    }
                    Node {
                        feature,
                        threshold,
                        left,
                        right,
                        value,
                        gain,
                    }
                }
                _ => return Err(bad()),
            };
            nodes.push(node);
        }
        if nodes.is_empty() {
            return Err(LearnError::Parse {
                line: lines.position(),
                reason: "empty tree".into(),
            });
        }
        Ok(Self { nodes })
    }
}

#[derive(Clone, Copy, Default)]
struct Stats {
    /// Sum of weights.
    w: f64,
    /// Sum of weight * target.
    s: f64,
    /// Number of distinct rows.
    count: usize,
}

impl Stats {
    fn add(&mut self, o: &Stats) {
        self.w += o.w;
        self.s += o.s;
        self.count += o.count;
    }

    fn minus(&self, o: &Stats) -> Stats {
        Stats {
            w: self.w - o.w,
            s: self.s - o.s,
            count: self.count - o.count,
        }
    }

    fn score(&self) -> f64 {
        if self.w > 0.0 {
            self.s * self.s / self.w
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Split {
    fn beats(&self, other: &Option<Split>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.score > o.score
                    || (self.score == o.score && (self.feature < o.feature || (self.feature == o.feature && self.threshold < o.threshold)))
            }
        }
    }
}

/// One item of a node's sorted value sequence: a distinct non-zero row, or
/// the aggregated block of rows whose value is 0.
#[derive(Clone, Copy)]
struct Item {
    value: f64,
    stats: Stats,
}

pub(crate) struct TreeBuilder<'a> {
    cols: &'a ColumnStore,
    target: &'a [f64],
    weight: &'a [f64],
    cfg: &'a TreeConfig,
    in_node: Vec<bool>,
    scratch: Vec<f64>,
    items: Vec<Item>,
    features: Vec<usize>,
}

impl<'a> TreeBuilder<'a> {
    pub(crate) fn new(cols: &'a ColumnStore, target: &'a [f64], weight: &'a [f64], cfg: &'a TreeConfig) -> Self {
        Self {
            cols,
            target,
            weight,
            cfg,
            in_node: vec![false; cols.n_rows()],
            scratch: vec![0.0; cols.n_rows()],
            items: Vec::new(),
            features: (0..cols.dim()).collect(),
        }
    }

    /// Grow a tree on `rows` (rows with zero weight must be excluded).
    /// `leaf_value` maps the rows of a leaf to its output.
    pub(crate) fn grow(&mut self, mut rows: Vec<u32>, rng: &mut Rng, leaf_value: &mut dyn FnMut(&[u32]) -> f64) -> Tree {
        let mut nodes: Vec<Node> = Vec::new();
        // (node index, start, end, depth)
        let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
        nodes.push(Node::leaf(0.0));
        while let Some((id, start, end, depth)) = stack.pop() {
            let slice = &mut rows[start..end];
            let (total, impurity) = self.node_stats(slice);
            let mean = if total.w > 0.0 { total.s / total.w } else { 0.0 };
            let can_split = self.cfg.max_depth.is_none_or(|d| depth < d)
                && total.count >= self.cfg.min_samples_split
                && total.count >= 2 * self.cfg.min_samples_leaf
                && impurity > f64::EPSILON;
            let split = if can_split { self.best_split(slice, &total, rng) } else { None };
            let Some(split) = split else {
                nodes[id] = Node::leaf(leaf_value(slice));
                continue;
            };
            let mid = self.partition(slice, split.feature, split.threshold);
            let c = match self.cfg.criterion {
                Criterion::Gini => 2.0,
                Criterion::SquaredError => 1.0,
            };
            let left = nodes.len();
            nodes.push(Node::leaf(0.0));
            nodes.push(Node::leaf(0.0));
            nodes[id] = Node {
                feature: split.feature as u32,
                threshold: split.threshold,
                left: left as u32,
                right: left as u32 + 1,
                value: mean,
                gain: (c * (split.score - total.score())).max(0.0),
            };
            stack.push((left + 1, start + mid, end, depth + 1));
            stack.push((left, start, start + mid, depth + 1));
        }
        Tree { nodes }
    }

    fn node_stats(&self, rows: &[u32]) -> (Stats, f64) {
        let mut st = Stats::default();
        for &r in rows {
            let w = self.weight[r as usize];
            st.w += w;
            st.s += w * self.target[r as usize];
            st.count += 1;
        }
        if st.w <= 0.0 {
            return (st, 0.0);
        }
        let mean = st.s / st.w;
        let var = rows
            .iter()
            .map(|&r| {
                let d = self.target[r as usize] - mean;
                self.weight[r as usize] * d * d
            })
            .sum::<f64>()
            / st.w;
        (st, var)
    }

    fn mark(&mut self, rows: &[u32], on: bool) {
        for &r in rows {
            self.in_node[r as usize] = on;
        }
    }

    /// Build the sorted item sequence of `feature` for the marked rows.
    fn collect_items(&mut self, feature: usize, total: &Stats) {
        self.items.clear();
        let mut nonzero = Stats::default();
        let mut zero_placed = false;
        for &(v, r) in &self.cols.columns[feature] {
            let r = r as usize;
            if !self.in_node[r] {
                continue;
            }
            if v > 0.0 && !zero_placed {
                self.items.push(Item {
                    value: 0.0,
                    stats: Stats::default(),
                });
                zero_placed = true;
            }
            let w = self.weight[r];
            let st = Stats {
                w,
                s: w * self.target[r],
                count: 1,
            };
            nonzero.add(&st);
            self.items.push(Item { value: v, stats: st });
        }
        let zero = total.minus(&nonzero);
        if !zero_placed {
            self.items.push(Item {
                value: 0.0,
                stats: Stats::default(),
            });
        }
        // Fill (or drop) the zero block placeholder.
        if let Some(pos) = self.items.iter().position(|it| it.value == 0.0 && it.stats.count == 0) {
            if zero.count > 0 {
                self.items[pos].stats = Stats {
                    w: zero.w.max(0.0),
                    ..zero
                };
            } else {
                self.items.remove(pos);
            }
        }
    }

    fn is_constant(&self) -> bool {
        match (self.items.first(), self.items.last()) {
            (Some(a), Some(b)) => a.value == b.value,
            _ => true,
        }
    }

    fn best_split(&mut self, rows: &[u32], total: &Stats, rng: &mut Rng) -> Option<Split> {
        self.mark(rows, true);
        let n_features = self.features.len();
        let wanted = self.cfg.max_features.unwrap_or(n_features).min(n_features);
        let random_order = wanted < n_features;
        let mut visited_ok = 0;
        let mut best: Option<Split> = None;
        let mut k = 0;
        while k < n_features && visited_ok < wanted {
            if random_order {
                let pick = rng.random_range(k..n_features);
                self.features.swap(k, pick);
            }
            let feature = if random_order { self.features[k] } else { k };
            k += 1;
            self.collect_items(feature, total);
            if self.is_constant() {
                continue;
            }
            visited_ok += 1;
            let candidate = match self.cfg.splitter {
                Splitter::Best => self.scan_best(feature, total),
                Splitter::Random => self.scan_random(feature, total, rng),
            };
            if let Some(c) = candidate {
                if c.beats(&best) {
                    best = Some(c);
                }
            }
        }
        self.mark(rows, false);
        best
    }

    fn scan_best(&self, feature: usize, total: &Stats) -> Option<Split> {
        let min_leaf = self.cfg.min_samples_leaf;
        let mut left = Stats::default();
        let mut best: Option<Split> = None;
        for pair in self.items.windows(2) {
            left.add(&pair[0].stats);
            let (a, b) = (pair[0].value, pair[1].value);
            if a == b {
                continue;
            }
            let right = total.minus(&left);
            if left.count < min_leaf || right.count < min_leaf || left.w <= 0.0 || right.w <= 0.0 {
                continue;
            }
            let mut threshold = a / 2.0 + b / 2.0;
            if threshold >= b || threshold < a {
                threshold = a;
            }
            let c = Split {
                feature,
                threshold,
                score: left.score() + right.score(),
            };
            if best.as_ref().is_none_or(|bs| c.score > bs.score) {
                best = Some(c);
            }
        }
        best
    }

    fn scan_random(&self, feature: usize, total: &Stats, rng: &mut Rng) -> Option<Split> {
        let lo = self.items.first()?.value;
        let hi = self.items.last()?.value;
        let mut threshold = lo + (hi - lo) * rng.random::<f64>();
        if threshold >= hi {
            threshold = lo;
        }
        let mut left = Stats::default();
        for it in self.items.iter().take_while(|it| it.value <= threshold) {
            left.add(&it.stats);
        }
        let right = total.minus(&left);
        let min_leaf = self.cfg.min_samples_leaf;
        if left.count < min_leaf || right.count < min_leaf || left.w <= 0.0 || right.w <= 0.0 {
            return None;
        }
        Some(Split {
            feature,
            threshold,
            score: left.score() + right.score(),
        })
    }

    /// Reorder `rows` so rows going left come first; returns the left count.
    fn partition(&mut self, rows: &mut [u32], feature: usize, threshold: f64) -> usize {
        self.mark(rows, true);
        let mut touched = Vec::new();
        for &(v, r) in &self.cols.columns[feature] {
            if self.in_node[r as usize] {
                self.scratch[r as usize] = v;
                touched.push(r);
            }
        }
        let mut mid = 0;
        for i in 0..rows.len() {
            if self.scratch[rows[i] as usize] <= threshold {
                rows.swap(i, mid);
                mid += 1;
            }
        }
        for r in touched {
            self.scratch[r as usize] = 0.0;
        }
        self.mark(rows, false);
        mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn cfg(splitter: Splitter, max_depth: Option<usize>) -> TreeConfig {
        TreeConfig {
            max_depth,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            splitter,
            criterion: Criterion::Gini,
        }
    }

    fn grow(xs: &[Vec<f64>], ys: &[f64], c: &TreeConfig) -> Tree {
        let rows: Vec<FeatureVector> = xs.iter().map(|x| FeatureVector::from_dense(x)).collect();
        let cols = ColumnStore::new(&rows, xs[0].len()).unwrap();
        let w = vec![1.0; ys.len()];
        let mut b = TreeBuilder::new(&cols, ys, &w, c);
        let mut leaf = |r: &[u32]| r.iter().map(|&i| ys[i as usize]).sum::<f64>() / r.len() as f64;
        b.grow((0..ys.len() as u32).collect(), &mut rng_from_seed(1), &mut leaf)
    }

    #[test]
    fn separates_one_feature() {
        let xs = vec![vec![0.0, 5.0], vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let ys = [0.0, 0.0, 1.0, 1.0];
        let t = grow(&xs, &ys, &cfg(Splitter::Best, None));
        assert_eq!(t.node_count(), 3);
        assert_eq!(t.nodes[0].feature, 0);
        assert_eq!(t.nodes[0].threshold, 1.5);
        assert_eq!(t.predict(&[0.5, 0.0]), 0.0);
        assert_eq!(t.predict(&[2.5, 0.0]), 1.0);
        // Gini decrease: 4 * 0.5 - 0 = 2.
        assert!((t.nodes[0].gain - 2.0).abs() < 1e-12);
    }

    #[test]
    fn negative_zero_and_positive_values() {
        let xs = vec![vec![-2.0], vec![0.0], vec![0.0], vec![3.0]];
        let ys = [1.0, 0.0, 0.0, 1.0];
        let t = grow(&xs, &ys, &cfg(Splitter::Best, None));
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(t.predict(x), y);
        }
    }

    #[test]
    fn xor_is_shattered_at_depth_two() {
        let xs = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let ys = [0.0, 1.0, 1.0, 0.0];
        let t = grow(&xs, &ys, &cfg(Splitter::Best, Some(2)));
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(t.predict(x), y);
        }
        // Ties go to the lowest feature index.
        assert_eq!(t.nodes[0].feature, 0);
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn pure_and_constant_nodes_are_leaves() {
        let t = grow(&[vec![1.0], vec![2.0]], &[1.0, 1.0], &cfg(Splitter::Best, None));
        assert_eq!(t.node_count(), 1);
        let t = grow(&[vec![1.0], vec![1.0]], &[0.0, 1.0], &cfg(Splitter::Random, None));
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.predict(&[1.0]), 0.5);
    }

    #[test]
    fn random_splitter_fits_training_data() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let ys: Vec<f64> = (0..40).map(|i| f64::from(i >= 17)).collect();
        let t = grow(&xs, &ys, &cfg(Splitter::Random, None));
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(t.predict(x), *y);
        }
    }
}
