//! `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! seed = 7
//! paths.corpus = train.tsv
//! sampling.fraction = 1/50
//! stack.first_stage = mlp(); extra_trees(); gradient_boosting(n_estimators=200)
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::corpus::{LabelSpellings, MalformedPolicy};
use crate::learners::ModelSpec;
use crate::rng::derive_seed;
use crate::sampling::SamplingConfig;
use crate::stacking::StackConfig;
use crate::workflow::{Selection, TrainSettings};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub pipeline: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub paths: Paths,
    pub master_seed: u64,
    pub sampling: SamplingConfig,
    pub selection_enabled: bool,
    pub selection_threshold: f64,
    pub selection_model: ModelSpec,
    pub stack: StackConfig,
    pub labels: LabelSpellings,
    pub malformed: MalformedPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        let selection = Selection::default();
        Self {
            paths: Paths::default(),
            master_seed: 0,
            sampling: SamplingConfig::default(),
            selection_enabled: true,
            selection_threshold: selection.threshold,
            selection_model: selection.model,
            stack: StackConfig::default(),
            labels: LabelSpellings::default(),
            malformed: MalformedPolicy::Skip,
        }
    }
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn spec_list(raw: &str) -> Result<Vec<ModelSpec>, String> {
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<ModelSpec>().map_err(|e| e.to_string()))
        .collect()
}

fn word_list(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl RunConfig {
    /// Parse config text; relative paths are resolved against `base`.
    pub fn from_text(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                reason: "expected `key = value`".into(),
            })?;
            cfg.set(k.trim(), v.trim(), base)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::BadValue {
            key: key.to_string(),
            reason,
        };
        let path = || {
            let p = PathBuf::from(value);
            Some(match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            })
        };
        match key {
            "seed" => self.master_seed = value.parse().map_err(|_| bad("expected an unsigned integer".into()))?,
            "paths.corpus" => self.paths.corpus = path(),
            "paths.truth" => self.paths.truth = path(),
            "paths.schema" => self.paths.schema = path(),
            "paths.pipeline" => self.paths.pipeline = path(),
            "paths.output" => self.paths.output = path(),
            "sampling.fraction" => {
                self.sampling.fraction = value.parse().map_err(|e: crate::sampling::FractionError| bad(e.to_string()))?
            }
            "sampling.window" => {
                self.sampling.window = if value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("expected a count or `none`".into()))?)
                }
            }
            "sampling.dedup" => self.sampling.dedup = parse_bool(value).ok_or_else(|| bad("expected a boolean".into()))?,
            "sampling.dedup_order" => self.sampling.dedup_order = value.parse().map_err(|_| bad("expected `before` or `after`".into()))?,
            "selection.enabled" => self.selection_enabled = parse_bool(value).ok_or_else(|| bad("expected a boolean".into()))?,
            "selection.threshold" => {
                let t: f64 = value.parse().map_err(|_| bad("expected a number".into()))?;
                if t.is_nan() || t < 0.0 {
                    return Err(bad("threshold must be ≥ 0".into()));
                }
                self.selection_threshold = t;
            }
            "selection.model" => self.selection_model = value.parse().map_err(|e: crate::learners::LearnError| bad(e.to_string()))?,
            "stack.k" => {
                let k: usize = value.parse().map_err(|_| bad("expected an integer".into()))?;
                if k < 2 {
                    return Err(bad("k must be at least 2".into()));
                }
                self.stack.k = k;
            }
            "stack.refit_full" => self.stack.refit_full = parse_bool(value).ok_or_else(|| bad("expected a boolean".into()))?,
            "stack.first_stage" | "stack.second_stage" => {
                let specs = spec_list(value).map_err(bad)?;
                if specs.is_empty() {
                    return Err(bad("at least one model is required".into()));
                }
                if key == "stack.first_stage" {
                    self.stack.first_stage = specs;
                } else {
                    self.stack.second_stage = specs;
                }
            }
            "labels.positive" => self.labels.positive = word_list(value),
            "labels.negative" => self.labels.negative = word_list(value),
            "corpus.malformed" => {
                self.malformed = match value {
                    "skip" => MalformedPolicy::Skip,
                    "abort" => MalformedPolicy::Abort,
                    _ => return Err(bad("expected `skip` or `abort`".into())),
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            reason: format!("override {assignment:?} is not `key=value`"),
        })?;
        self.set(k.trim(), v.trim(), None)
    }

    /// Training settings with every seed derived from the master seed.
    /// The selection model keeps its own seed.
    pub fn train_settings(&self) -> TrainSettings {
        let mut sampling = self.sampling.clone();
        sampling.seed = derive_seed(self.master_seed, "sampling", 0);
        let mut stack = self.stack.clone();
        stack.seed = derive_seed(self.master_seed, "stack", 0);
        TrainSettings {
            sampling,
            selection: self.selection_enabled.then(|| Selection {
                model: self.selection_model.clone(),
                threshold: self.selection_threshold,
            }),
            stack,
        }
    }

    /// Canonical text form; paths are written as given.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "seed = {}", self.master_seed).unwrap();
        let p = &self.paths;
        for (k, v) in [
            ("corpus", &p.corpus),
            ("truth", &p.truth),
            ("schema", &p.schema),
            ("pipeline", &p.pipeline),
            ("output", &p.output),
        ] {
            if let Some(v) = v {
                writeln!(out, "paths.{k} = {}", v.display()).unwrap();
            }
        }
        writeln!(out, "sampling.fraction = {}", self.sampling.fraction).unwrap();
        match self.sampling.window {
            Some(w) => writeln!(out, "sampling.window = {w}").unwrap(),
            None => writeln!(out, "sampling.window = none").unwrap(),
        }
        writeln!(out, "sampling.dedup = {}", self.sampling.dedup).unwrap();
        writeln!(out, "sampling.dedup_order = {}", self.sampling.dedup_order).unwrap();
        writeln!(out, "selection.enabled = {}", self.selection_enabled).unwrap();
        writeln!(out, "selection.threshold = {:?}", self.selection_threshold).unwrap();
        writeln!(out, "selection.model = {}", self.selection_model).unwrap();
        writeln!(out, "stack.k = {}", self.stack.k).unwrap();
        writeln!(out, "stack.refit_full = {}", self.stack.refit_full).unwrap();
        let join = |v: &[ModelSpec]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        writeln!(out, "stack.first_stage = {}", join(&self.stack.first_stage)).unwrap();
        writeln!(out, "stack.second_stage = {}", join(&self.stack.second_stage)).unwrap();
        writeln!(out, "labels.positive = {}", self.labels.positive.join(",")).unwrap();
        writeln!(out, "labels.negative = {}", self.labels.negative.join(",")).unwrap();
        let policy = match self.malformed {
            MalformedPolicy::Skip => "skip",
            MalformedPolicy::Abort => "abort",
        };
        writeln!(out, "corpus.malformed = {policy}").unwrap();
        out
    }
}
