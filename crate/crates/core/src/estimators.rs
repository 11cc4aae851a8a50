//! Design-based estimators of a population total.
//!
//! All variance formulas are the double sum
//! `Σ_k Σ_j (π_kj - π_k π_j) (v_k / π_k) (v_j / π_j)` with `π_kk = π_k`,
//! evaluated in closed form for the schemes where it collapses.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix};
use crate::design::{SampleDraw, SamplingDesign, SamplingScheme};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    HorvitzThompson,
    Difference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalEstimate {
    pub estimator: EstimatorKind,
    pub value: f64,
    pub variance: Option<f64>,
    pub variance_estimate: Option<f64>,
    pub pi_normalized: bool,
}

/// Design variance of an estimator. `approximate` is set when joint inclusion
/// probabilities were replaced by `π_k π_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignVariance {
    pub value: f64,
    pub approximate: bool,
}

/// Sample-based variance estimate. Can come out negative for some designs;
/// the raw value is kept and `negative` flags it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub value: f64,
    pub approximate: bool,
    pub negative: bool,
}

/// Units of the population with ground-truth responses and, once a
/// surrogate has been fitted, model predictions `ŷ_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationFrame {
    pub features: FeatureMatrix,
    pub responses: Vec<f64>,
    pub predictions: Option<Vec<f64>>,
    pub feature_names: Vec<String>,
}

impl PopulationFrame {
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
        let feature_names = (1..=features.ncols()).map(|i| format!("x{i}")).collect();
        Ok(Self {
            features,
            responses,
            predictions: None,
            feature_names,
        })
    }

    /// A frame without features, for estimator-only use.
    pub fn from_values(responses: Vec<f64>, predictions: Vec<f64>) -> Result<Self> {
        let features = FeatureMatrix::new(Vec::new(), responses.len(), 0)?;
        Self::new(features, responses)?.with_predictions(predictions)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.features.ncols(),
                found: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn with_predictions(mut self, predictions: Vec<f64>) -> Result<Self> {
        if predictions.len() != self.responses.len() {
            return Err(Error::DimensionMismatch {
                expected: self.responses.len(),
                found: predictions.len(),
            });
        }
        if predictions.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("predictions"));
        }
        self.predictions = Some(predictions);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.responses.iter().sum()
    }

    /// Residuals `D_k = y_k - ŷ_k`.
    pub fn residuals(&self) -> Result<Vec<f64>> {
        let pred = self.predictions.as_ref().ok_or(Error::MissingPredictions)?;
        Ok(self.responses.iter().zip(pred).map(|(y, p)| y - p).collect())
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            responses: indices.iter().map(|&i| self.responses[i]).collect(),
            predictions: self
                .predictions
                .as_ref()
                .map(|p| indices.iter().map(|&i| p[i]).collect()),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn dataset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            responses: indices.iter().map(|&i| self.responses[i]).collect(),
            feature_names: Some(self.feature_names.clone()),
        }
    }
}

fn sample_pi(sample: &SampleDraw, k: usize) -> Result<f64> {
    let p = sample.pi_used[k];
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::ZeroInclusion(k))
    }
}

/// Horvitz–Thompson total `Σ_s y_k / π_k`; `responses_on_sample` follows
/// `sample.indices` order.
pub fn ht_total(sample: &SampleDraw, responses_on_sample: &[f64]) -> Result<TotalEstimate> {
    if responses_on_sample.len() != sample.indices.len() {
        return Err(Error::DimensionMismatch {
            expected: sample.indices.len(),
            found: responses_on_sample.len(),
        });
    }
    let mut value = 0.0;
    for (&k, y) in sample.indices.iter().zip(responses_on_sample) {
        value += y / sample_pi(sample, k)?;
    }
    Ok(TotalEstimate {
        estimator: EstimatorKind::HorvitzThompson,
        value,
        variance: None,
        variance_estimate: None,
        pi_normalized: false,
    })
}

/// Difference estimator `Σ_U ŷ_k + Σ_s D_k / π_k`. With `normalize_pi` every
/// `π_k` is divided by `Σ_U π_k` first.
pub fn difference_total(
    sample: &SampleDraw,
    frame: &PopulationFrame,
    normalize_pi: bool,
) -> Result<TotalEstimate> {
    let pred = frame.predictions.as_ref().ok_or(Error::MissingPredictions)?;
    if sample.pi_used.len() != frame.len() {
        return Err(Error::DimensionMismatch {
            expected: frame.len(),
            found: sample.pi_used.len(),
        });
    }
    let scale = if normalize_pi {
        sample.pi_used.iter().sum::<f64>()
    } else {
        1.0
    };
    let mut value: f64 = pred.iter().sum();
    for &k in &sample.indices {
        let p = sample_pi(sample, k)? / scale;
        value += (frame.responses[k] - pred[k]) / p;
    }
    Ok(TotalEstimate {
        estimator: EstimatorKind::Difference,
        value,
        variance: None,
        variance_estimate: None,
        pi_normalized: normalize_pi,
    })
}

/// `Σ_U Σ_U Δ_kj (v_k/π_k)(v_j/π_j)`.
fn design_quadratic_form(design: &SamplingDesign, values: &[f64]) -> Result<DesignVariance> {
    if values.len() != design.population_size() {
        return Err(Error::DimensionMismatch {
            expected: design.population_size(),
            found: values.len(),
        });
    }
    let pi = design.pi();
    if let Some(k) = pi.iter().position(|p| *p <= 0.0) {
        return Err(Error::ZeroInclusion(k));
    }
    let expanded: Vec<f64> = values.iter().zip(pi).map(|(v, p)| v / p).collect();
    match design.scheme() {
        SamplingScheme::Poisson | SamplingScheme::FixedSizeWeighted => {
            let value = expanded
                .iter()
                .zip(pi)
                .map(|(a, p)| p * (1.0 - p) * a * a)
                .sum();
            Ok(DesignVariance {
                value,
                approximate: design.scheme() == SamplingScheme::FixedSizeWeighted,
            })
        }
        SamplingScheme::Srs => {
            // Constant diagonal and off-diagonal covariances.
            let p = pi[0];
            let joint = design.srs_joint();
            let sum: f64 = expanded.iter().sum();
            let sum_sq: f64 = expanded.iter().map(|a| a * a).sum();
            Ok(DesignVariance {
                value: (p - joint) * sum_sq + (joint - p * p) * sum * sum,
                approximate: false,
            })
        }
    }
}

/// Design variance of the difference estimator.
pub fn de_variance(frame: &PopulationFrame, design: &SamplingDesign) -> Result<DesignVariance> {
    design_quadratic_form(design, &frame.residuals()?)
}

/// Design variance of the Horvitz–Thompson estimator.
pub fn ht_variance(frame: &PopulationFrame, design: &SamplingDesign) -> Result<DesignVariance> {
    design_quadratic_form(design, &frame.responses)
}

/// Unbiased sample estimate of the difference-estimator variance,
/// `Σ_s Σ_s (Δ_kj / π_kj) (D_k/π_k)(D_j/π_j)`.
pub fn de_variance_estimate(
    sample: &SampleDraw,
    frame: &PopulationFrame,
    design: &SamplingDesign,
) -> Result<VarianceEstimate> {
    let residuals = frame.residuals()?;
    if design.population_size() != frame.len() {
        return Err(Error::DimensionMismatch {
            expected: frame.len(),
            found: design.population_size(),
        });
    }
    let pi = design.pi();
    let mut expanded = Vec::with_capacity(sample.indices.len());
    for &k in &sample.indices {
        if pi[k] <= 0.0 {
            return Err(Error::ZeroInclusion(k));
        }
        expanded.push(residuals[k] / pi[k]);
    }
    let mut value = 0.0;
    let mut approximate = false;
    for (a, &k) in sample.indices.iter().enumerate() {
        for (b, &j) in sample.indices.iter().enumerate() {
            let (joint, approx) = design.pair_inclusion_approx(k, j);
            approximate |= approx;
            if joint <= 0.0 {
                return Err(Error::ZeroJointInclusion(k, j));
            }
            let delta = joint - pi[k] * pi[j];
            value += delta / joint * expanded[a] * expanded[b];
        }
    }
    Ok(VarianceEstimate {
        value,
        approximate,
        negative: value < 0.0,
    })
}
