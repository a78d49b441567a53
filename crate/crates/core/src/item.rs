use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One preference comparison. The two feature vectors stand in for the
/// embeddings of (prompt, response 1) and (prompt, response 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceItem {
    pub id: String,
    pub features1: Vec<f64>,
    pub features2: Vec<f64>,
    pub oracle: Option<f64>,
    pub label: Option<f64>,
}

impl PreferenceItem {
    pub fn new(
        id: impl Into<String>,
        features1: Vec<f64>,
        features2: Vec<f64>,
        oracle: Option<f64>,
        label: Option<f64>,
    ) -> Result<Self> {
        if features1.len() != features2.len() {
            return Err(Error::DimensionMismatch {
                expected: features1.len(),
                got: features2.len(),
            });
        }
        for v in [oracle, label].into_iter().flatten() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::LabelOutOfRange(v));
            }
        }
        Ok(Self {
            id: id.into(),
            features1,
            features2,
            oracle,
            label,
        })
    }

    pub fn dimension(&self) -> usize {
        self.features1.len()
    }

    /// `features1 - features2`; a linear reward model scores the pair by
    /// its inner product with this difference.
    pub fn feature_diff(&self) -> Vec<f64> {
        self.features1
            .iter()
            .zip(&self.features2)
            .map(|(a, b)| a - b)
            .collect()
    }

    pub fn label_or_err(&self) -> Result<f64> {
        self.label.ok_or_else(|| Error::MissingLabel(self.id.clone()))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
