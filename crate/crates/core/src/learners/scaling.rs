use super::persist::{floats_line, Lines};
use super::LearnError;
use crate::featurize::FeatureVector;

/// Per-column division by the largest absolute training value. Keeps zeros
/// at zero, so sparse vectors stay sparse.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MaxAbsScaler {
    factors: Vec<f64>,
}

impl MaxAbsScaler {
    pub(crate) fn fit(x: &[FeatureVector], dim: usize) -> Self {
        let mut max = vec![0.0f64; dim];
        for row in x {
            for &(j, v) in row.entries() {
                max[j as usize] = max[j as usize].max(v.abs());
            }
        }
        let factors = max.into_iter().map(|m| if m > 0.0 { 1.0 / m } else { 1.0 }).collect();
        Self { factors }
    }

    /// Scaled non-zero entries of `x`.
    pub(crate) fn apply(&self, x: &FeatureVector) -> Vec<(u32, f64)> {
        x.entries().iter().map(|&(j, v)| (j, v * self.factors[j as usize])).collect()
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        out.push_str(&floats_line("scale", &self.factors));
    }

    pub(crate) fn read_text(lines: &mut Lines<'_>, dim: usize) -> Result<Self, LearnError> {
        Ok(Self {
            factors: lines.keyword_floats("scale", dim)?,
        })
    }
}
