//! Base learners with a common train / predict-probability interface,
//! impurity-based importances and threshold feature selection.
//!
//! | family                | algorithm                                                        |
//! |-----------------------|------------------------------------------------------------------|
//! | `random_forest`       | bootstrap CART, Gini, `sqrt(d)` features per split               |
//! | `extra_trees`         | no bootstrap, one random threshold per candidate feature         |
//! | `gradient_boosting`   | log-loss, squared-error trees on residuals, Newton leaf values   |
//! | `logistic_regression` | L2-regularized, full-batch gradient descent with backtracking    |
//! | `mlp`                 | one ReLU hidden layer, logistic output, Adam on mini-batches     |
//!
//! Hyperparameters live in a name → value map; absent names take the family
//! default listed by [`ModelSpec::defaults`].

mod boosting;
mod forest;
mod logistic;
mod mlp;
pub(crate) mod persist;
mod scaling;
mod tree;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

pub use boosting::GradientBoosting;
pub use forest::Forest;
pub use logistic::LogisticRegression;
pub use mlp::Mlp;
pub use tree::Tree;

use crate::featurize::FeatureVector;
use crate::MODEL_FORMAT;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LearnError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("feature importances are not defined for {0}")]
    UnsupportedFamily(Family),
    #[error("column {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
    #[error("unknown model family {0:?}")]
    UnknownFamily(String),
    #[error("model line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    RandomForest,
    ExtraTrees,
    GradientBoosting,
    LogisticRegression,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::RandomForest,
        Family::ExtraTrees,
        Family::GradientBoosting,
        Family::LogisticRegression,
        Family::Mlp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::RandomForest => "random_forest",
            Family::ExtraTrees => "extra_trees",
            Family::GradientBoosting => "gradient_boosting",
            Family::LogisticRegression => "logistic_regression",
            Family::Mlp => "mlp",
        }
    }

    pub fn is_tree_based(&self) -> bool {
        matches!(self, Family::RandomForest | Family::ExtraTrees | Family::GradientBoosting)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = LearnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| LearnError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Default,
    Optimized,
}

impl FromStr for Preset {
    type Err = LearnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(Preset::Default),
            "optimized" => Ok(Preset::Optimized),
            other => Err(LearnError::InvalidParameter(format!("unknown preset {other:?}"))),
        }
    }
}

/// Which learner to train and how.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    /// Overrides of the family defaults.
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            params: BTreeMap::new(),
            seed: 0,
        }
    }

    /// The family defaults; "optimized" forest and boosting presets use 200
    /// estimators with depth 8 and 6 respectively.
    pub fn preset(family: Family, preset: Preset) -> Self {
        let spec = Self::new(family);
        match (preset, family) {
            (Preset::Optimized, Family::RandomForest) => spec.with("n_estimators", 200.0).with("max_depth", 8.0),
            (Preset::Optimized, Family::GradientBoosting) => spec.with("n_estimators", 200.0).with("max_depth", 6.0),
            (Preset::Optimized, Family::ExtraTrees) => spec.with("n_estimators", 200.0),
            _ => spec,
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn defaults(family: Family) -> &'static [(&'static str, f64)] {
        const FOREST: &[(&str, f64)] = &[
            ("n_estimators", 100.0),
            ("max_depth", f64::INFINITY),
            ("min_samples_split", 2.0),
            ("min_samples_leaf", 1.0),
            // 0 = floor(sqrt(d))
            ("max_features", 0.0),
        ];
        const BOOSTING: &[(&str, f64)] = &[
            ("n_estimators", 100.0),
            ("learning_rate", 0.1),
            ("max_depth", 3.0),
            ("min_samples_split", 2.0),
            ("min_samples_leaf", 1.0),
        ];
        const LOGISTIC: &[(&str, f64)] = &[("l2", 1.0), ("max_iter", 1000.0), ("tol", 1e-6)];
        const MLP: &[(&str, f64)] = &[
            ("hidden_units", 100.0),
            ("learning_rate", 1e-3),
            ("batch_size", 32.0),
            ("epochs", 200.0),
            ("l2", 1e-4),
            ("tol", 1e-4),
            ("n_iter_no_change", 10.0),
        ];
        match family {
            Family::RandomForest | Family::ExtraTrees => FOREST,
            Family::GradientBoosting => BOOSTING,
            Family::LogisticRegression => LOGISTIC,
            Family::Mlp => MLP,
        }
    }

    /// Resolved value of a hyperparameter.
    pub fn get(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or_else(|| {
            Self::defaults(self.family)
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("{name} is not a {} hyperparameter", self.family))
        })
    }

    fn get_count(&self, name: &str) -> usize {
        self.get(name) as usize
    }

    fn get_depth(&self) -> Option<usize> {
        let d = self.get("max_depth");
        d.is_finite().then_some(d as usize)
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let defaults = Self::defaults(self.family);
        for (name, &v) in &self.params {
            if !defaults.iter().any(|(n, _)| n == name) {
                return Err(LearnError::InvalidParameter(format!(
                    "{name} is not a {} hyperparameter",
                    self.family
                )));
            }
            if v.is_nan() || v < 0.0 {
                return Err(LearnError::InvalidParameter(format!("{name} = {v}")));
            }
        }
        let invalid = |what: &str| Err(LearnError::InvalidParameter(what.to_string()));
        let integral = [
            "n_estimators",
            "min_samples_split",
            "min_samples_leaf",
            "max_features",
            "hidden_units",
            "batch_size",
            "epochs",
            "max_iter",
            "n_iter_no_change",
        ];
        for name in integral {
            if let Some(v) = self.params.get(name) {
                if v.fract() != 0.0 || !v.is_finite() {
                    return invalid(&format!("{name} must be an integer"));
                }
            }
        }
        match self.family {
            Family::RandomForest | Family::ExtraTrees => {
                if self.get("n_estimators") < 1.0 {
                    return invalid("n_estimators must be >= 1");
                }
            }
            Family::GradientBoosting => {
                if self.get("learning_rate") <= 0.0 {
                    return invalid("learning_rate must be > 0");
                }
            }
            Family::Mlp => {
                if self.get("learning_rate") <= 0.0 || self.get("hidden_units") < 1.0 || self.get("batch_size") < 1.0 {
                    return invalid("mlp needs learning_rate > 0, hidden_units >= 1, batch_size >= 1");
                }
            }
            Family::LogisticRegression => {}
        }
        if self.family.is_tree_based() {
            if self.get("max_depth") < 1.0 {
                return invalid("max_depth must be >= 1");
            }
            if self.get("min_samples_leaf") < 1.0 || self.get("min_samples_split") < 2.0 {
                return invalid("min_samples_leaf must be >= 1 and min_samples_split >= 2");
            }
        }
        Ok(())
    }
}

fn fmt_param(v: f64) -> String {
    if v.is_infinite() {
        "none".into()
    } else {
        format!("{v:?}").trim_end_matches(".0").to_string()
    }
}

impl fmt::Display for ModelSpec {
    /// `family` or `family(name=value,...)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family.name())?;
        if !self.params.is_empty() {
            let inner: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={}", fmt_param(*v))).collect();
            write!(f, "({})", inner.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for ModelSpec {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (family, args) = match s.split_once('(') {
            Some((f, rest)) => {
                let args = rest
                    .strip_suffix(')')
                    .ok_or_else(|| LearnError::InvalidParameter(format!("unbalanced parentheses in {s:?}")))?;
                (f, Some(args))
            }
            None => (s, None),
        };
        let mut spec = ModelSpec::new(family.parse()?);
        for kv in args
            .into_iter()
            .flat_map(|a| a.split(','))
            .map(str::trim)
            .filter(|kv| !kv.is_empty())
        {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| LearnError::InvalidParameter(format!("expected name=value, got {kv:?}")))?;
            let v = v.trim();
            let value = if v == "none" {
                f64::INFINITY
            } else {
                v.parse().map_err(|_| LearnError::InvalidParameter(format!("{k} = {v:?}")))?
            };
            spec.params.insert(k.trim().to_string(), value);
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Anything that maps a feature vector to a probability.
pub trait Classifier: Send + Sync {
    fn trained_dim(&self) -> usize;
    fn predict_proba(&self, x: &FeatureVector) -> Result<f64, LearnError>;
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Params {
    Forest(Forest),
    Boosting(GradientBoosting),
    Logistic(LogisticRegression),
    Mlp(Mlp),
}

/// A fitted model; immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    spec: ModelSpec,
    dim: usize,
    params: Params,
}

fn check_data(x: &[FeatureVector], y: &[bool]) -> Result<usize, LearnError> {
    if x.len() != y.len() {
        return Err(LearnError::LengthMismatch {
            features: x.len(),
            labels: y.len(),
        });
    }
    let first = x.first().ok_or(LearnError::EmptyDataset)?;
    let dim = first.dim();
    if let Some(bad) = x.iter().find(|v| v.dim() != dim) {
        return Err(LearnError::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    Ok(dim)
}

/// Fit `spec` on `(x, y)`. Identical inputs give identical models.
pub fn train(spec: &ModelSpec, x: &[FeatureVector], y: &[bool]) -> Result<TrainedModel, LearnError> {
    spec.validate()?;
    let dim = check_data(x, y)?;
    let params = match spec.family {
        Family::RandomForest | Family::ExtraTrees => Params::Forest(Forest::train(spec, x, y, dim)?),
        Family::GradientBoosting => Params::Boosting(GradientBoosting::train(spec, x, y, dim)?),
        Family::LogisticRegression => Params::Logistic(LogisticRegression::train(spec, x, y, dim)),
        Family::Mlp => Params::Mlp(Mlp::train(spec, x, y, dim)),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        dim,
        params,
    })
}

impl TrainedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn as_forest(&self) -> Option<&Forest> {
        match &self.params {
            Params::Forest(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_boosting(&self) -> Option<&GradientBoosting> {
        match &self.params {
            Params::Boosting(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_mlp(&self) -> Option<&Mlp> {
        match &self.params {
            Params::Mlp(m) => Some(m),
            _ => None,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MODEL_FORMAT}").unwrap();
        writeln!(out, "family {}", self.spec.family).unwrap();
        writeln!(out, "seed {}", self.spec.seed).unwrap();
        writeln!(out, "params {}", self.spec.params.len()).unwrap();
        for (k, v) in &self.spec.params {
            writeln!(out, "param {k} {v:?}").unwrap();
        }
        writeln!(out, "dim {}", self.dim).unwrap();
        match &self.params {
            Params::Forest(f) => f.write_text(&mut out),
            Params::Boosting(b) => b.write_text(&mut out),
            Params::Logistic(l) => l.write_text(&mut out),
            Params::Mlp(m) => m.write_text(&mut out),
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LearnError> {
        Self::read_lines(&mut persist::Lines::new(text, 0))
    }

    pub(crate) fn read_lines(lines: &mut persist::Lines<'_>) -> Result<Self, LearnError> {
        let (n, header) = lines.next_line()?;
        if header != MODEL_FORMAT {
            return Err(LearnError::Parse {
                line: n,
                reason: format!("expected `{MODEL_FORMAT}`"),
            });
        }
        let family: Family = lines.keyword("family")?.parse()?;
        let seed: u64 = lines.keyword_value("seed")?;
        let count: usize = lines.keyword_value("params")?;
        let mut spec = ModelSpec::new(family).with_seed(seed);
        for _ in 0..count {
            let rest = lines.keyword("param")?;
            let (k, v) = rest.split_once(' ').ok_or_else(|| LearnError::Parse {
                line: lines.position(),
                reason: "expected `param name value`".into(),
            })?;
            spec.params.insert(k.to_string(), persist::num(Some(v), lines.position())?);
        }
        spec.validate()?;
        let dim: usize = lines.keyword_value("dim")?;
        let params = match family {
            Family::RandomForest | Family::ExtraTrees => Params::Forest(Forest::read_text(lines, dim)?),
            Family::GradientBoosting => Params::Boosting(GradientBoosting::read_text(lines, dim)?),
            Family::LogisticRegression => Params::Logistic(LogisticRegression::read_text(lines, dim)?),
            Family::Mlp => Params::Mlp(Mlp::read_text(lines, dim)?),
        };
        lines.keyword("end")?;
        Ok(Self { spec, dim, params })
    }
}

impl Classifier for TrainedModel {
    fn trained_dim(&self) -> usize {
        self.dim
    }

    fn predict_proba(&self, x: &FeatureVector) -> Result<f64, LearnError> {
        if x.dim() != self.dim {
            return Err(LearnError::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        Ok(match &self.params {
            Params::Forest(f) => f.predict(&x.to_dense()),
            Params::Boosting(b) => b.predict(&x.to_dense()),
            Params::Logistic(l) => l.predict(x),
            Params::Mlp(m) => m.predict(x),
        })
    }
}

/// Probability of the positive class for one vector.
pub fn predict_proba(model: &TrainedModel, x: &FeatureVector) -> Result<f64, LearnError> {
    model.predict_proba(x)
}

/// Normalized impurity-decrease importances, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub importances: Vec<f64>,
}

impl ImportanceReport {
    /// Normalize raw totals to sum 1 (all zeros stay zeros).
    pub fn from_totals(mut totals: Vec<f64>) -> Self {
        let sum: f64 = totals.iter().sum();
        if sum > 0.0 {
            for v in &mut totals {
                *v /= sum;
            }
        }
        Self { importances: totals }
    }
}

pub fn feature_importances(model: &TrainedModel) -> Result<ImportanceReport, LearnError> {
    let mut totals = vec![0.0; model.dim];
    let trees: &[Tree] = match &model.params {
        Params::Forest(f) => f.trees(),
        Params::Boosting(b) => b.trees(),
        _ => return Err(LearnError::UnsupportedFamily(model.spec.family)),
    };
    for t in trees {
        t.add_importances(&mut totals);
    }
    Ok(ImportanceReport::from_totals(totals))
}

/// Columns whose importance is at least `threshold`, ascending.
pub fn select_features(report: &ImportanceReport, threshold: f64) -> Vec<usize> {
    report
        .importances
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Maps full-width vectors onto a selected subset of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    selected: Vec<usize>,
    target: Vec<Option<u32>>,
}

impl Projection {
    /// `selected` must be strictly increasing and below `dim`.
    pub fn new(selected: &[usize], dim: usize) -> Result<Self, LearnError> {
        let mut target = vec![None; dim];
        for (k, &j) in selected.iter().enumerate() {
            if j >= dim {
                return Err(LearnError::IndexOutOfRange { index: j, dim });
            }
            if k > 0 && selected[k - 1] >= j {
                return Err(LearnError::InvalidParameter("selected columns must be strictly increasing".into()));
            }
            target[j] = Some(k as u32);
        }
        Ok(Self {
            selected: selected.to_vec(),
            target,
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn input_dim(&self) -> usize {
        self.target.len()
    }

    pub fn apply(&self, x: &FeatureVector) -> Result<FeatureVector, LearnError> {
        if x.dim() != self.target.len() {
            return Err(LearnError::DimensionMismatch {
                expected: self.target.len(),
                found: x.dim(),
            });
        }
        let entries = x
            .entries()
            .iter()
            .filter_map(|&(j, v)| self.target[j as usize].map(|k| (k, v)))
            .collect();
        Ok(FeatureVector::from_entries(self.selected.len(), entries))
    }
}

/// Keep only the `selected` columns of `x`, renumbered from 0.
pub fn project(x: &FeatureVector, selected: &[usize]) -> Result<FeatureVector, LearnError> {
    Projection::new(selected, x.dim())?.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_text_round_trip() {
        let spec = ModelSpec::preset(Family::RandomForest, Preset::Optimized);
        assert_eq!(spec.to_string(), "random_forest(max_depth=8,n_estimators=200)");
        assert_eq!(spec.to_string().parse::<ModelSpec>().unwrap(), spec);
        let unlimited: ModelSpec = "extra_trees(max_depth=none)".parse().unwrap();
        assert!(unlimited.get("max_depth").is_infinite());
        assert_eq!("mlp".parse::<ModelSpec>().unwrap().get("hidden_units"), 100.0);
        assert!("mlp(n_estimators=3)".parse::<ModelSpec>().is_err());
        assert!("svm".parse::<ModelSpec>().is_err());
        assert!("gradient_boosting(learning_rate=0)".parse::<ModelSpec>().is_err());
        assert!("random_forest(n_estimators=0)".parse::<ModelSpec>().is_err());
        assert!("random_forest(n_estimators=1.5)".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn selection_threshold_semantics() {
        let report = ImportanceReport {
            importances: vec![0.5, 0.0, 2e-5, 5e-6],
        };
        assert_eq!(select_features(&report, 1e-5), vec![0, 2]);
        assert_eq!(select_features(&report, 0.0), vec![0, 1, 2, 3]);
        let zero = ImportanceReport { importances: vec![0.0; 4] };
        assert!(select_features(&zero, 1e-5).is_empty());
    }

    #[test]
    fn projection() {
        let x = FeatureVector::from_entries(6, vec![(0, 1.0), (5, 0.3)]);
        let p = project(&x, &[0, 2, 5]).unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(p.entries(), &[(0, 1.0), (2, 0.3)]);
        assert_eq!(project(&x, &[0, 1, 2, 3, 4, 5]).unwrap(), x);
        let empty = project(&x, &[1, 3]).unwrap();
        assert!(empty.entries().is_empty());
        assert_eq!(empty.dim(), 2);
        assert!(matches!(
            project(&x, &[0, 6]),
            Err(LearnError::IndexOutOfRange { index: 6, dim: 6 })
        ));
    }

    #[test]
    fn train_validates_shapes() {
        let x = vec![FeatureVector::from_dense(&[1.0]), FeatureVector::from_dense(&[1.0, 2.0])];
        let spec = ModelSpec::new(Family::LogisticRegression);
        assert!(matches!(
            train(&spec, &x, &[true, false]),
            Err(LearnError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            train(&spec, &x[..1], &[true, false]),
            Err(LearnError::LengthMismatch { .. })
        ));
        assert_eq!(train(&spec, &[], &[]), Err(LearnError::EmptyDataset));
    }
}
