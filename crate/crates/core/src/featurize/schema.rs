use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use super::RawFeatures;
use crate::SCHEMA_FORMAT;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SchemaError {
    #[error("cannot build a schema from an empty dataset")]
    EmptyDataset,
    #[error("schema line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Sparse feature vector: `(column, value)` pairs with strictly increasing
/// columns and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Build from `(column, value)` pairs in any order; zeros are dropped.
    ///
    /// # Panics
    /// On a column `>= dim` or a repeated column.
    pub fn from_entries(dim: usize, mut entries: Vec<(u32, f64)>) -> Self {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        assert!(entries.windows(2).all(|w| w[0].0 < w[1].0), "repeated column");
        assert!(entries.last().is_none_or(|&(i, _)| (i as usize) < dim), "column out of range");
        Self { dim, entries }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .collect();
        Self {
            dim: values.len(),
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn get(&self, column: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(column as u32), |&(i, _)| i)
            .map_or(0.0, |k| self.entries[k].1)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    /// Hashable identity of the vector (values compared bitwise).
    pub fn key(&self) -> (usize, Vec<(u32, u64)>) {
        (self.dim, self.entries.iter().map(|&(i, v)| (i, v.to_bits())).collect())
    }
}

/// Numeric columns followed by one column per observed categorical
/// `(feature, value)` pair, both in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    numeric_names: Vec<String>,
    categorical_vocab: Vec<(String, String)>,
    numeric_index: HashMap<String, usize>,
    vocab_index: HashMap<String, HashMap<String, usize>>,
}

impl FeatureSchema {
    fn from_parts(numeric_names: Vec<String>, categorical_vocab: Vec<(String, String)>) -> Self {
        let numeric_index = numeric_names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut vocab_index: HashMap<String, HashMap<String, usize>> = HashMap::new();
        for (k, (feature, value)) in categorical_vocab.iter().enumerate() {
            vocab_index
                .entry(feature.clone())
                .or_default()
                .insert(value.clone(), numeric_names.len() + k);
        }
        Self {
            numeric_names,
            categorical_vocab,
            numeric_index,
            vocab_index,
        }
    }

    pub fn numeric_names(&self) -> &[String] {
        &self.numeric_names
    }

    pub fn categorical_vocab(&self) -> &[(String, String)] {
        &self.categorical_vocab
    }

    pub fn total_dim(&self) -> usize {
        self.numeric_names.len() + self.categorical_vocab.len()
    }

    /// Human-readable name of a column: the numeric feature name, or
    /// `feature=value` for a one-hot column.
    pub fn column_name(&self, column: usize) -> String {
        match self.numeric_names.get(column) {
            Some(n) => n.clone(),
            None => {
                let (f, v) = &self.categorical_vocab[column - self.numeric_names.len()];
                format!("{f}={v}")
            }
        }
    }

    /// Columns belonging to the one-hot block of `feature`.
    pub fn categorical_columns(&self, feature: &str) -> Vec<usize> {
        let mut cols: Vec<usize> = self
            .vocab_index
            .get(feature)
            .map(|m| m.values().copied().collect())
            .unwrap_or_default();
        cols.sort_unstable();
        cols
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{SCHEMA_FORMAT}").unwrap();
        for n in &self.numeric_names {
            writeln!(out, "N {n}").unwrap();
        }
        for (f, v) in &self.categorical_vocab {
            writeln!(out, "C {f}\t{v}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SchemaError> {
        let mut lines = text.split_terminator('\n').enumerate();
        let err = |line: usize, reason: &str| SchemaError::Parse {
            line: line + 1,
            reason: reason.to_string(),
        };
        match lines.next() {
            Some((_, h)) if h == SCHEMA_FORMAT => {}
            _ => return Err(err(0, "missing `vandalstack-schema v1` header")),
        }
        let mut numeric = Vec::new();
        let mut vocab: Vec<(String, String)> = Vec::new();
        for (i, line) in lines {
            if let Some(name) = line.strip_prefix("N ") {
                if !vocab.is_empty() {
                    return Err(err(i, "numeric column after categorical columns"));
                }
                numeric.push(name.to_string());
            } else if let Some(pair) = line.strip_prefix("C ") {
                let (f, v) = pair.split_once('\t').ok_or_else(|| err(i, "expected `C feature<TAB>value`"))?;
                let entry = (f.to_string(), v.to_string());
                if vocab.last().is_some_and(|last| *last >= entry) {
                    return Err(err(i, "vocabulary not strictly sorted"));
                }
                vocab.push(entry);
            } else {
                return Err(err(i, "unknown line kind"));
            }
        }
        if numeric.windows(2).any(|w| w[0] >= w[1]) {
            return Err(err(0, "numeric names not strictly sorted"));
        }
        Ok(Self::from_parts(numeric, vocab))
    }
}

/// Collect the numeric names and every observed categorical value.
pub fn build_schema<'a, I>(dataset: I) -> Result<FeatureSchema, SchemaError>
where
    I: IntoIterator<Item = &'a RawFeatures>,
{
    let mut numeric = BTreeSet::new();
    let mut vocab = BTreeSet::new();
    let mut rows = 0usize;
    for raw in dataset {
        rows += 1;
        for name in raw.numeric.keys() {
            if !numeric.contains(name) {
                numeric.insert(name.clone());
            }
        }
        for (feature, value) in &raw.categorical {
            if let Some(v) = value {
                if !vocab.contains(&(feature.clone(), v.clone())) {
                    vocab.insert((feature.clone(), v.clone()));
                }
            }
        }
    }
    if rows == 0 {
        return Err(SchemaError::EmptyDataset);
    }
    Ok(FeatureSchema::from_parts(
        numeric.into_iter().collect(),
        vocab.into_iter().collect(),
    ))
}

/// Encode raw features under a schema. Unknown, unseen and missing values
/// encode as zeros.
pub fn encode(raw: &RawFeatures, schema: &FeatureSchema) -> FeatureVector {
    let mut entries = Vec::with_capacity(raw.numeric.len() + raw.categorical.len());
    for (name, &value) in &raw.numeric {
        if let Some(&col) = schema.numeric_index.get(name) {
            if value != 0.0 {
                entries.push((col as u32, value));
            }
        }
    }
    for (feature, value) in &raw.categorical {
        if let Some(col) = value.as_ref().and_then(|v| schema.vocab_index.get(feature).and_then(|m| m.get(v))) {
            entries.push((*col as u32, 1.0));
        }
    }
    entries.sort_by_key(|&(i, _)| i);
    FeatureVector {
        dim: schema.total_dim(),
        entries,
    }
}
