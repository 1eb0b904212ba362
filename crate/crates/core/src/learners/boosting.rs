use super::persist::Lines;
use super::tree::{ColumnStore, Criterion, Splitter, Tree, TreeBuilder, TreeConfig};
use super::{LearnError, ModelSpec};
use crate::featurize::FeatureVector;
use crate::rng::rng_from_seed;

const PRIOR_CLAMP: f64 = 1e-15;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Binomial log-loss boosting: each round fits a squared-error tree to the
/// residuals `y - p` and sets every leaf to one Newton step
/// `Σ(y - p) / Σ p(1 - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoosting {
    init: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
}

impl GradientBoosting {
    pub(crate) fn train(spec: &ModelSpec, x: &[FeatureVector], y: &[bool], dim: usize) -> Result<Self, LearnError> {
        Ok(Self::train_traced(spec, x, y, dim)?.0)
    }

    /// Train and also return the mean training log-loss before the first
    /// round and after every round.
    pub fn train_traced(spec: &ModelSpec, x: &[FeatureVector], y: &[bool], dim: usize) -> Result<(Self, Vec<f64>), LearnError> {
        let cols = ColumnStore::new(x, dim)?;
        let n = x.len();
        let target: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let prior = (target.iter().sum::<f64>() / n as f64).clamp(PRIOR_CLAMP, 1.0 - PRIOR_CLAMP);
        let init = (prior / (1.0 - prior)).ln();
        let learning_rate = spec.get("learning_rate");
        let cfg = TreeConfig {
            max_depth: spec.get_depth(),
            min_samples_split: spec.get_count("min_samples_split"),
            min_samples_leaf: spec.get_count("min_samples_leaf"),
            max_features: None,
            splitter: Splitter::Best,
            criterion: Criterion::SquaredError,
        };
        let weight = vec![1.0; n];
        let mut raw = vec![init; n];
        let mut trace = vec![mean_log_loss(&raw, &target)];
        let mut trees = Vec::new();
        let mut rng = rng_from_seed(spec.seed);
        for _ in 0..spec.get_count("n_estimators") {
            let prob: Vec<f64> = raw.iter().map(|&f| sigmoid(f)).collect();
            let residual: Vec<f64> = target.iter().zip(&prob).map(|(t, p)| t - p).collect();
            let mut updates: Vec<(u32, f64)> = Vec::with_capacity(n);
            let mut leaf = |rows: &[u32]| {
                let (num, den) = rows.iter().fold((0.0, 0.0), |(num, den), &r| {
                    let p = prob[r as usize];
                    (num + residual[r as usize], den + p * (1.0 - p))
                });
                let v = if den.abs() < 1e-150 { 0.0 } else { num / den };
                updates.extend(rows.iter().map(|&r| (r, v)));
                v
            };
            let tree = TreeBuilder::new(&cols, &residual, &weight, &cfg).grow((0..n as u32).collect(), &mut rng, &mut leaf);
            for (r, v) in updates {
                raw[r as usize] += learning_rate * v;
            }
            trace.push(mean_log_loss(&raw, &target));
            trees.push(tree);
        }
        Ok((
            Self {
                init,
                learning_rate,
                trees,
            },
            trace,
        ))
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Prior log-odds the boosting starts from.
    pub fn init_score(&self) -> f64 {
        self.init
    }

    pub fn decision_function(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision_function(x))
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        out.push_str(&format!(
            "init {:?}\nlearning_rate {:?}\ntrees {}\n",
            self.init,
            self.learning_rate,
            self.trees.len()
        ));
        for t in &self.trees {
            t.write_text(out);
        }
    }

    pub(crate) fn read_text(lines: &mut Lines<'_>, dim: usize) -> Result<Self, LearnError> {
        let init = lines.keyword_value("init")?;
        let learning_rate = lines.keyword_value("learning_rate")?;
        let count: usize = lines.keyword_value("trees")?;
        let trees = (0..count).map(|_| Tree::read_text(lines, dim)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            init,
            learning_rate,
            trees,
        })
    }
}

/// Mean binomial log-loss of raw scores.
pub(crate) fn mean_log_loss(raw: &[f64], target: &[f64]) -> f64 {
    raw.iter().zip(target).map(|(&f, &t)| softplus(f) - t * f).sum::<f64>() / raw.len() as f64
}
