//! K-fold stacked generalization.
//!
//! Each first-stage spec is trained k times, once per fold on the other
//! k−1 folds, and scores the held-out fold. The resulting out-of-fold
//! matrix (one column per first-stage spec) is the only input of the
//! second-stage models, and the final score is the mean of the second-stage
//! probabilities. At prediction time a first-stage column is the mean of its
//! k fold models, or the single refit model when `refit_full` is set.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::featurize::{encode, FeatureSchema, FeatureVector, RawFeatures, SchemaError};
use crate::learners::persist::Lines;
use crate::learners::{self, Classifier, Family, LearnError, ModelSpec, Preset, Projection, TrainedModel};
use crate::rng::{derive_seed, rng_from_seed};
use crate::PIPELINE_FORMAT;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StackError {
    #[error("need at least k = {k} examples for k-fold stacking, got {n}")]
    TooFewExamples { n: usize, k: usize },
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("cannot average an empty list of scores")]
    EmptyList,
    #[error("the {0} stage has no models")]
    EmptyStage(&'static str),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("pipeline line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Fold index of every example.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }
}

/// Seeded shuffle, then round-robin: fold sizes differ by at most one.
pub fn kfold_assign(n: usize, k: usize, seed: u64) -> Result<FoldPlan, StackError> {
    if k < 2 {
        return Err(StackError::InvalidFoldCount(k));
    }
    if n < k {
        return Err(StackError::TooFewExamples { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan { k, assignment, seed })
}

pub fn mean_ensemble(scores: &[f64]) -> Result<f64, StackError> {
    if scores.is_empty() {
        return Err(StackError::EmptyList);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackConfig {
    pub first_stage: Vec<ModelSpec>,
    pub second_stage: Vec<ModelSpec>,
    pub k: usize,
    pub seed: u64,
    pub refit_full: bool,
}

impl Default for StackConfig {
    /// Six first-stage models, four second-stage models, three folds.
    fn default() -> Self {
        let gbt = || ModelSpec::new(Family::GradientBoosting);
        let et = || ModelSpec::new(Family::ExtraTrees);
        Self {
            first_stage: vec![
                ModelSpec::new(Family::Mlp),
                et(),
                et().with("n_estimators", 200.0),
                gbt(),
                gbt().with("n_estimators", 200.0),
                ModelSpec::new(Family::LogisticRegression),
            ],
            second_stage: vec![
                ModelSpec::preset(Family::RandomForest, Preset::Optimized),
                ModelSpec::new(Family::Mlp),
                ModelSpec::preset(Family::GradientBoosting, Preset::Optimized),
                gbt(),
            ],
            k: 3,
            seed: 0,
            refit_full: false,
        }
    }
}

impl StackConfig {
    fn validate(&self) -> Result<(), StackError> {
        if self.first_stage.is_empty() {
            return Err(StackError::EmptyStage("first"));
        }
        if self.second_stage.is_empty() {
            return Err(StackError::EmptyStage("second"));
        }
        if self.k < 2 {
            return Err(StackError::InvalidFoldCount(self.k));
        }
        Ok(())
    }

    fn first_seed(&self, spec: usize, fold: usize) -> u64 {
        derive_seed(derive_seed(self.seed, "first-stage", spec as u64), "fold", fold as u64)
    }
}

/// First-stage models per fold and the out-of-fold score matrix.
#[derive(Debug, Clone)]
pub struct OutOfFold<M> {
    /// `fold_models[spec][fold]`
    pub fold_models: Vec<Vec<M>>,
    /// `meta[row][spec]`
    pub meta: Vec<Vec<f64>>,
}

fn subset<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Train every `(spec, fold)` model on the complement of its fold and
/// score the fold. `train` receives the spec with its derived seed.
pub fn out_of_fold<M, F>(x: &[FeatureVector], y: &[bool], cfg: &StackConfig, plan: &FoldPlan, train: F) -> Result<OutOfFold<M>, StackError>
where
    M: Classifier,
    F: Fn(&ModelSpec, &[FeatureVector], &[bool]) -> Result<M, LearnError> + Sync,
{
    let k = plan.k;
    let jobs: Vec<(usize, usize)> = (0..cfg.first_stage.len()).flat_map(|j| (0..k).map(move |f| (j, f))).collect();
    type FoldResult<M> = Result<(M, Vec<(usize, f64)>), StackError>;
    let trained: Vec<FoldResult<M>> = jobs
        .par_iter()
        .map(|&(j, f)| {
            let train_idx = plan.complement(f);
            let spec = cfg.first_stage[j].clone().with_seed(cfg.first_seed(j, f));
            let model = train(&spec, &subset(x, &train_idx), &subset(y, &train_idx))?;
            let scores = plan
                .members(f)
                .into_iter()
                .map(|i| Ok((i, model.predict_proba(&x[i])?)))
                .collect::<Result<Vec<_>, LearnError>>()?;
            Ok((model, scores))
        })
        .collect();

    let mut meta = vec![vec![0.0; cfg.first_stage.len()]; x.len()];
    let mut fold_models: Vec<Vec<M>> = (0..cfg.first_stage.len()).map(|_| Vec::with_capacity(k)).collect();
    for ((j, _), result) in jobs.into_iter().zip(trained) {
        let (model, scores) = result?;
        for (i, s) in scores {
            meta[i][j] = s;
        }
        fold_models[j].push(model);
    }
    Ok(OutOfFold { fold_models, meta })
}

/// The learned part of a stacked ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedModel {
    pub config: StackConfig,
    pub fold_models: Vec<Vec<TrainedModel>>,
    pub full_models: Option<Vec<TrainedModel>>,
    pub second_models: Vec<TrainedModel>,
    input_dim: usize,
}

/// Fit the full two-level ensemble on already encoded and projected rows.
pub fn fit_stack(x: &[FeatureVector], y: &[bool], cfg: &StackConfig) -> Result<StackedModel, StackError> {
    Ok(fit_stack_traced(x, y, cfg)?.0)
}

/// [`fit_stack`], also returning the out-of-fold meta-feature matrix.
pub fn fit_stack_traced(x: &[FeatureVector], y: &[bool], cfg: &StackConfig) -> Result<(StackedModel, Vec<Vec<f64>>), StackError> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(LearnError::LengthMismatch {
            features: x.len(),
            labels: y.len(),
        }
        .into());
    }
    let input_dim = x.first().map(FeatureVector::dim).ok_or(LearnError::EmptyDataset)?;
    let plan = kfold_assign(x.len(), cfg.k, derive_seed(cfg.seed, "folds", 0))?;
    let oof = out_of_fold(x, y, cfg, &plan, learners::train)?;

    let full_models = if cfg.refit_full {
        let models = cfg
            .first_stage
            .par_iter()
            .enumerate()
            .map(|(j, spec)| learners::train(&spec.clone().with_seed(derive_seed(cfg.seed, "first-stage-full", j as u64)), x, y))
            .collect::<Result<Vec<_>, _>>()?;
        Some(models)
    } else {
        None
    };

    let meta_rows: Vec<FeatureVector> = oof.meta.iter().map(|r| FeatureVector::from_dense(r)).collect();
    let second_models = cfg
        .second_stage
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            learners::train(
                &spec.clone().with_seed(derive_seed(cfg.seed, "second-stage", i as u64)),
                &meta_rows,
                y,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let model = StackedModel {
        config: cfg.clone(),
        fold_models: oof.fold_models,
        full_models,
        second_models,
        input_dim,
    };
    Ok((model, oof.meta))
}

impl StackedModel {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// First-stage scores of one projected row.
    pub fn meta_features(&self, x: &FeatureVector) -> Result<Vec<f64>, StackError> {
        if x.dim() != self.input_dim {
            return Err(LearnError::DimensionMismatch {
                expected: self.input_dim,
                found: x.dim(),
            }
            .into());
        }
        let mut meta = Vec::with_capacity(self.fold_models.len());
        for (j, folds) in self.fold_models.iter().enumerate() {
            let score = match &self.full_models {
                Some(full) => full[j].predict_proba(x)?,
                None => {
                    let scores = folds.iter().map(|m| m.predict_proba(x)).collect::<Result<Vec<_>, _>>()?;
                    mean_ensemble(&scores)?
                }
            };
            meta.push(score);
        }
        Ok(meta)
    }

    /// Second-stage probabilities of one projected row.
    pub fn second_stage_scores(&self, x: &FeatureVector) -> Result<Vec<f64>, StackError> {
        let meta = FeatureVector::from_dense(&self.meta_features(x)?);
        Ok(self
            .second_models
            .iter()
            .map(|m| m.predict_proba(&meta))
            .collect::<Result<Vec<_>, _>>()?)
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<f64, StackError> {
        mean_ensemble(&self.second_stage_scores(x)?)
    }
}

/// Schema, column selection and stacked ensemble: everything needed to
/// score a raw example.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedPipeline {
    pub schema: FeatureSchema,
    pub projection: Projection,
    pub model: StackedModel,
}

impl StackedPipeline {
    pub fn selected(&self) -> &[usize] {
        self.projection.selected()
    }

    /// Encode and project raw features to the model's input space.
    pub fn prepare(&self, raw: &RawFeatures) -> Result<FeatureVector, StackError> {
        Ok(self.projection.apply(&encode(raw, &self.schema))?)
    }

    pub fn predict_raw(&self, raw: &RawFeatures) -> Result<f64, StackError> {
        self.model.predict(&self.prepare(raw)?)
    }

    pub fn predict_revision(&self, rev: &crate::corpus::Revision) -> Result<f64, StackError> {
        self.predict_raw(&crate::featurize::extract(rev))
    }

    pub fn to_text(&self) -> String {
        let cfg = &self.model.config;
        let mut out = String::new();
        writeln!(out, "{PIPELINE_FORMAT}").unwrap();
        writeln!(out, "k {}", cfg.k).unwrap();
        writeln!(out, "seed {}", cfg.seed).unwrap();
        writeln!(out, "refit_full {}", u8::from(cfg.refit_full)).unwrap();
        writeln!(out, "input_dim {}", self.model.input_dim).unwrap();
        writeln!(out, "first_stage {}", cfg.first_stage.len()).unwrap();
        for s in &cfg.first_stage {
            writeln!(out, "spec {s}").unwrap();
        }
        writeln!(out, "second_stage {}", cfg.second_stage.len()).unwrap();
        for s in &cfg.second_stage {
            writeln!(out, "spec {s}").unwrap();
        }
        let sel: Vec<String> = self.selected().iter().map(|i| i.to_string()).collect();
        writeln!(out, "selected {} {}", self.projection.input_dim(), sel.join(" ")).unwrap();
        let block = |out: &mut String, name: String, text: &str| {
            writeln!(out, "begin {name} {}", text.lines().count()).unwrap();
            out.push_str(text);
        };
        block(&mut out, "schema".into(), &self.schema.to_text());
        for (j, folds) in self.model.fold_models.iter().enumerate() {
            for (f, m) in folds.iter().enumerate() {
                block(&mut out, format!("first.{j}.fold.{f}"), &m.to_text());
            }
        }
        if let Some(full) = &self.model.full_models {
            for (j, m) in full.iter().enumerate() {
                block(&mut out, format!("first.{j}.full"), &m.to_text());
            }
        }
        for (i, m) in self.model.second_models.iter().enumerate() {
            block(&mut out, format!("second.{i}"), &m.to_text());
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, StackError> {
        let mut lines = Lines::new(text, 0);
        let (n, header) = lines.next_line()?;
        if header != PIPELINE_FORMAT {
            return Err(StackError::Parse {
                line: n,
                reason: format!("expected `{PIPELINE_FORMAT}`"),
            });
        }
        let k: usize = lines.keyword_value("k")?;
        let seed: u64 = lines.keyword_value("seed")?;
        let refit_full = lines.keyword_value::<u8>("refit_full")? == 1;
        let input_dim: usize = lines.keyword_value("input_dim")?;
        let read_specs = |lines: &mut Lines<'_>, kw: &str| -> Result<Vec<ModelSpec>, StackError> {
            let count: usize = lines.keyword_value(kw)?;
            (0..count).map(|_| Ok(lines.keyword("spec")?.parse()?)).collect()
        };
        let first_stage = read_specs(&mut lines, "first_stage")?;
        let second_stage = read_specs(&mut lines, "second_stage")?;
        let config = StackConfig {
            first_stage,
            second_stage,
            k,
            seed,
            refit_full,
        };
        config.validate()?;

        let sel_line = lines.keyword("selected")?;
        let mut parts = sel_line.split(' ').filter(|p| !p.is_empty());
        let full_dim: usize = learners::persist::num(parts.next(), lines.position())?;
        let selected = parts
            .map(|p| learners::persist::num(Some(p), lines.position()))
            .collect::<Result<Vec<usize>, _>>()?;
        let projection = Projection::new(&selected, full_dim)?;
        if selected.len() != input_dim {
            return Err(StackError::Parse {
                line: lines.position(),
                reason: "selection does not match input_dim".into(),
            });
        }

        fn block<'a>(lines: &mut Lines<'a>, name: &str) -> Result<(usize, String), StackError> {
            let rest = lines.keyword("begin")?;
            let (found, count) = rest.rsplit_once(' ').ok_or_else(|| StackError::Parse {
                line: lines.position(),
                reason: "expected `begin name count`".into(),
            })?;
            if found != name {
                return Err(StackError::Parse {
                    line: lines.position(),
                    reason: format!("expected block {name}, found {found}"),
                });
            }
            let count: usize = learners::persist::num(Some(count), lines.position())?;
            let start = lines.position();
            let mut body = String::new();
            for _ in 0..count {
                body.push_str(lines.next_line()?.1);
                body.push('\n');
            }
            Ok((start, body))
        }
        let with_offset = |start: usize, e: LearnError| match e {
            LearnError::Parse { line, reason } => StackError::Parse {
                line: start + line,
                reason,
            },
            other => other.into(),
        };

        let (_, schema_text) = block(&mut lines, "schema")?;
        let schema = FeatureSchema::from_text(&schema_text)?;
        if schema.total_dim() != full_dim {
            return Err(StackError::Parse {
                line: lines.position(),
                reason: "schema width does not match selection".into(),
            });
        }
        let read_model = |lines: &mut Lines<'_>, name: String, dim: usize| -> Result<TrainedModel, StackError> {
            let (start, body) = block(lines, &name)?;
            let m = TrainedModel::from_text(&body).map_err(|e| with_offset(start, e))?;
            if m.trained_dim() != dim {
                return Err(StackError::Parse {
                    line: start,
                    reason: format!("{name} has the wrong input dimension"),
                });
            }
            Ok(m)
        };
        let n_first = config.first_stage.len();
        let mut fold_models = Vec::with_capacity(n_first);
        for j in 0..n_first {
            fold_models.push(
                (0..k)
                    .map(|f| read_model(&mut lines, format!("first.{j}.fold.{f}"), input_dim))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        let full_models = if refit_full {
            Some(
                (0..n_first)
                    .map(|j| read_model(&mut lines, format!("first.{j}.full"), input_dim))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        let second_models = (0..config.second_stage.len())
            .map(|i| read_model(&mut lines, format!("second.{i}"), n_first))
            .collect::<Result<Vec<_>, _>>()?;
        lines.keyword("end")?;
        Ok(Self {
            schema,
            projection,
            model: StackedModel {
                config,
                fold_models,
                full_models,
                second_models,
                input_dim,
            },
        })
    }
}
