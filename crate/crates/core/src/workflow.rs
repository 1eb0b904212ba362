//! End-to-end training and scoring.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::corpus::{LabeledExample, Revision};
use crate::featurize::{build_schema, encode, extract, FeatureVector, RawFeatures};
use crate::learners::{feature_importances, select_features, train, ImportanceReport, ModelSpec, Projection};
use crate::sampling::{sample_and_dedup, Record, SamplingConfig};
use crate::stacking::{fit_stack, StackConfig, StackError, StackedPipeline};
use crate::Error;

pub const DEFAULT_SELECTION_THRESHOLD: f64 = 1e-5;

/// A record with raw features.
pub trait Example: Record + Send + Sync {
    fn raw_features(&self) -> RawFeatures;
}

impl Example for LabeledExample {
    fn raw_features(&self) -> RawFeatures {
        extract(&self.revision)
    }
}

/// Importance-threshold column selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub model: ModelSpec,
    pub threshold: f64,
}

impl Default for Selection {
    fn default() -> Self {
        Self {
            model: ModelSpec::new(crate::Family::GradientBoosting),
            threshold: DEFAULT_SELECTION_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainSettings {
    pub sampling: SamplingConfig,
    /// `None` keeps every column.
    pub selection: Option<Selection>,
    pub stack: StackConfig,
}

impl TrainSettings {
    pub fn standard() -> Self {
        Self {
            selection: Some(Selection::default()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub pipeline: StackedPipeline,
    pub importances: Option<ImportanceReport>,
    /// Examples left after sampling and deduplication.
    pub training_size: usize,
    pub training_positives: usize,
}

/// Encoded, labeled rows and the schema they were encoded with.
pub struct Encoded {
    pub schema: crate::FeatureSchema,
    pub rows: Vec<FeatureVector>,
    pub labels: Vec<bool>,
}

pub fn encode_examples<T: Example>(examples: &[T]) -> Result<Encoded, Error> {
    let raws: Vec<RawFeatures> = examples.par_iter().map(Example::raw_features).collect();
    let schema = build_schema(&raws)?;
    let rows = raws.par_iter().map(|r| encode(r, &schema)).collect();
    let labels = examples.iter().map(Record::label).collect();
    Ok(Encoded { schema, rows, labels })
}

/// Columns kept by the selection model, with its importances.
pub fn select_columns(rows: &[FeatureVector], labels: &[bool], selection: &Selection) -> Result<(Vec<usize>, ImportanceReport), Error> {
    let model = train(&selection.model, rows, labels)?;
    let report = feature_importances(&model)?;
    Ok((select_features(&report, selection.threshold), report))
}

/// Sample, deduplicate, extract, encode, select and fit the stack.
pub fn train_pipeline<T: Example>(examples: Vec<T>, settings: &TrainSettings) -> Result<TrainOutput, Error> {
    let sampled = sample_and_dedup(examples, &settings.sampling);
    let training_positives = sampled.iter().filter(|e| e.label()).count();
    let Encoded { schema, rows, labels } = encode_examples(&sampled)?;

    let (selected, importances) = match &settings.selection {
        Some(sel) => {
            let (cols, report) = select_columns(&rows, &labels, sel)?;
            (cols, Some(report))
        }
        None => ((0..schema.total_dim()).collect(), None),
    };
    if selected.is_empty() {
        return Err(Error::Invalid("feature selection kept no columns".into()));
    }
    let projection = Projection::new(&selected, schema.total_dim())?;
    let projected = rows.iter().map(|r| projection.apply(r)).collect::<Result<Vec<_>, _>>()?;
    let model = fit_stack(&projected, &labels, &settings.stack)?;
    Ok(TrainOutput {
        pipeline: StackedPipeline { schema, projection, model },
        importances,
        training_size: sampled.len(),
        training_positives,
    })
}

/// Scores of many revisions, in input order.
pub fn score_revisions(pipeline: &StackedPipeline, revisions: &[Revision]) -> Result<Vec<f64>, StackError> {
    revisions.par_iter().map(|r| pipeline.predict_revision(r)).collect()
}

/// `rev_id \t score` lines.
pub fn prediction_lines(pipeline: &StackedPipeline, revisions: &[Revision]) -> Result<String, StackError> {
    let scores = score_revisions(pipeline, revisions)?;
    let mut out = String::with_capacity(revisions.len() * 24);
    for (r, s) in revisions.iter().zip(scores) {
        writeln!(out, "{}\t{}", r.rev_id, format_score(s)).unwrap();
    }
    Ok(out)
}

/// A probability with 9 significant digits in positional notation.
pub fn format_score(p: f64) -> String {
    if !(0.0..=1.0).contains(&p) {
        return format!("{p:?}");
    }
    if p == 0.0 {
        return "0.00000000".into();
    }
    let sci = format!("{p:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    if exp >= 0 {
        format!("{}.{}", &digits[..1], &digits[1..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    }
}

/// Parse a `rev_id \t score` file.
pub fn parse_scores(text: &str) -> Result<Vec<(u64, f64)>, Error> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = || Error::Invalid(format!("scores line {}: expected `rev_id<TAB>score`", i + 1));
            let (id, s) = l.split_once('\t').ok_or_else(bad)?;
            Ok((id.trim().parse().map_err(|_| bad())?, s.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}
