//! Columnar dataset containers shared by the estimators, the constraint
//! builders and the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("column `{0}` has {1} rows, expected {2}")]
    LengthMismatch(&'static str, usize, usize),
    #[error("group id {id} at row {row} is outside the declared alphabet of size {alphabet}")]
    GroupOutOfRange { id: usize, row: usize, alphabet: usize },
    #[error("label at row {0} is not 0 or 1")]
    BadLabel(usize),
    #[error("score {value} at row {row} is outside [0, 1]")]
    BadScore { value: f64, row: usize },
    #[error("weight {value} at row {row} is negative or not finite")]
    BadWeight { value: f64, row: usize },
    #[error("feature at row {row}, column {col} is not finite")]
    BadFeature { row: usize, col: usize },
}

/// A table of n samples: feature rows, an optional protected-group column
/// drawn from a declared alphabet `0..group_count`, optional binary labels,
/// optional base scores in `[0, 1]` and optional non-negative sample weights.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    protected: Option<Vec<usize>>,
    group_count: usize,
    labels: Option<Vec<u8>>,
    base_scores: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        protected: Option<Vec<usize>>,
        group_count: usize,
        labels: Option<Vec<u8>>,
        base_scores: Option<Vec<f64>>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self, DataError> {
        let n = features.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        let width = features[0].len();
        for (row, f) in features.iter().enumerate() {
            if f.len() != width {
                return Err(DataError::LengthMismatch("features", f.len(), width));
            }
            for (col, v) in f.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::BadFeature { row, col });
                }
            }
        }
        if let Some(p) = &protected {
            if p.len() != n {
                return Err(DataError::LengthMismatch("protected", p.len(), n));
            }
            for (row, &id) in p.iter().enumerate() {
                if id >= group_count {
                    return Err(DataError::GroupOutOfRange { id, row, alphabet: group_count });
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(DataError::LengthMismatch("labels", l.len(), n));
            }
            if let Some(row) = l.iter().position(|&y| y > 1) {
                return Err(DataError::BadLabel(row));
            }
        }
        if let Some(s) = &base_scores {
            if s.len() != n {
                return Err(DataError::LengthMismatch("base_scores", s.len(), n));
            }
            for (row, &v) in s.iter().enumerate() {
                if v.is_nan() || !(0.0..=1.0).contains(&v) {
                    return Err(DataError::BadScore { value: v, row });
                }
            }
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(DataError::LengthMismatch("weights", w.len(), n));
            }
            for (row, &v) in w.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(DataError::BadWeight { value: v, row });
                }
            }
        }
        Ok(Self { features, protected, group_count, labels, base_scores, weights })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn protected(&self) -> Option<&[usize]> {
        self.protected.as_deref()
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn base_scores(&self) -> Option<&[f64]> {
        self.base_scores.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }
}

/// Output of the pre-processing step: for every source row `i` two rows
/// `(x_i, 0, 1 - r'_i)` and `(x_i, 1, r'_i)`, interleaved, so `2n` in total.
/// The weight pair of a source row sums to exactly 1.
#[derive(Debug, Clone)]
pub struct WeightedDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub weights: Vec<f64>,
}

impl WeightedDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}
