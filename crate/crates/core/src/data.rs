//! Row-major feature matrices and labelled datasets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of explanatory vectors, one unit per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self {
            data,
            n_rows,
            n_cols,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, rows.len(), n_cols)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            n_rows: indices.len(),
            n_cols: self.n_cols,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: other.n_cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            data,
            n_rows: self.n_rows + other.n_rows,
            n_cols: self.n_cols,
        })
    }
}

/// Observed tuples `(x_k, y_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub responses: Vec<f64>,
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, responses: Vec<f64>) -> Result<Self> {
        if features.nrows() != responses.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: responses.len(),
            });
        }
        if responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        Ok(Self {
            features,
            responses,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.features.ncols(),
                found: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            responses: indices.iter().map(|&i| self.responses[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}
