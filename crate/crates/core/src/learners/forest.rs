use rand::Rng as _;
use rayon::prelude::*;

use super::persist::Lines;
use super::tree::{ColumnStore, Criterion, Splitter, Tree, TreeBuilder, TreeConfig};
use super::{Family, LearnError, ModelSpec};
use crate::featurize::FeatureVector;
use crate::rng::{derive_seed, rng_from_seed};

/// Random forest or extra-trees ensemble of probability trees.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub(crate) fn train(spec: &ModelSpec, x: &[FeatureVector], y: &[bool], dim: usize) -> Result<Self, LearnError> {
        let cols = ColumnStore::new(x, dim)?;
        let target: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let bootstrap = spec.family == Family::RandomForest;
        let max_features = match spec.get_count("max_features") {
            0 => ((dim as f64).sqrt().floor() as usize).max(1),
            k => k.min(dim),
        };
        let cfg = TreeConfig {
            max_depth: spec.get_depth(),
            min_samples_split: spec.get_count("min_samples_split"),
            min_samples_leaf: spec.get_count("min_samples_leaf"),
            max_features: Some(max_features),
            splitter: if bootstrap { Splitter::Best } else { Splitter::Random },
            criterion: Criterion::Gini,
        };
        let n = x.len();
        let trees = (0..spec.get_count("n_estimators"))
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_from_seed(derive_seed(spec.seed, "tree", i as u64));
                let mut weight = vec![if bootstrap { 0.0 } else { 1.0 }; n];
                if bootstrap {
                    for _ in 0..n {
                        weight[rng.random_range(0..n)] += 1.0;
                    }
                }
                let rows: Vec<u32> = (0..n as u32).filter(|&r| weight[r as usize] > 0.0).collect();
                let mut leaf = |rows: &[u32]| {
                    let (w, s) = rows.iter().fold((0.0, 0.0), |(w, s), &r| {
                        let r = r as usize;
                        (w + weight[r], s + weight[r] * target[r])
                    });
                    if w > 0.0 {
                        s / w
                    } else {
                        0.0
                    }
                };
                TreeBuilder::new(&cols, &target, &weight, &cfg).grow(rows, &mut rng, &mut leaf)
            })
            .collect();
        Ok(Self { trees })
    }

    pub fn from_trees(trees: Vec<Tree>) -> Self {
        Self { trees }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Per-tree leaf probabilities for a dense input.
    pub fn tree_outputs(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    /// Mean of the per-tree leaf probabilities.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        out.push_str(&format!("trees {}\n", self.trees.len()));
        for t in &self.trees {
            t.write_text(out);
        }
    }

    pub(crate) fn read_text(lines: &mut Lines<'_>, dim: usize) -> Result<Self, LearnError> {
        let count: usize = lines.keyword_value("trees")?;
        let trees = (0..count).map(|_| Tree::read_text(lines, dim)).collect::<Result<Vec<_>, _>>()?;
        if trees.is_empty() {
            return Err(LearnError::Parse {
                line: lines.position(),
                reason: "forest without trees".into(),
            });
        }
        Ok(Self { trees })
    }
}
