//! Acquisition functions used to score population units.
//!
//! `PU` reads the response surrogate directly. `ILCB`, `EI` and `SEI` read a
//! second surrogate fitted to observed changes in out-of-sample mean absolute
//! error (ΔMAE) when a point joins the training data; that objective is
//! minimized, so larger scores mark units expected to help the response model
//! most.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::gp::{GpPosterior, KernelConfig, Prediction, Standardizer};
use crate::seed;

pub const DEFAULT_ILCB_LAMBDA: f64 = 0.2;
pub const DEFAULT_OBJECTIVE_ROUNDS: usize = 10;
/// Fraction of the prior held out in each ΔMAE round.
pub const HOLDOUT_FRACTION: f64 = 0.2;
pub const MIN_OBJECTIVE_PRIOR: usize = 10;
/// Improvement variances at or below this map to an SEI score of 0.
pub const SEI_VARIANCE_FLOOR: f64 = 1e-12;
/// Added on top of `|min|` when shifting a score vector to be positive.
pub const POSITIVITY_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AcquisitionKind {
    Pu,
    Ilcb { lambda: f64 },
    Ei,
    Sei,
}

impl AcquisitionKind {
    pub fn ilcb() -> Self {
        Self::Ilcb {
            lambda: DEFAULT_ILCB_LAMBDA,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Pu => "PU",
            Self::Ilcb { .. } => "ILCB",
            Self::Ei => "EI",
            Self::Sei => "SEI",
        }
    }

    pub fn needs_objective(&self) -> bool {
        !matches!(self, Self::Pu)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Ilcb { lambda } if !(lambda.is_finite() && *lambda >= 0.0) => Err(
                Error::InvalidArgument(format!("ILCB lambda must be non-negative, got {lambda}")),
            ),
            _ => Ok(()),
        }
    }

    /// Parses `pu`, `ilcb`, `ei`, `sei` (case-insensitive, optional `bo-` prefix).
    pub fn parse(s: &str, lambda: f64) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let tag = lower.strip_prefix("bo-").unwrap_or(&lower);
        let kind = match tag {
            "pu" => Self::Pu,
            "ilcb" => Self::Ilcb { lambda },
            "ei" => Self::Ei,
            "sei" => Self::Sei,
            _ => return Err(Error::InvalidArgument(format!("unknown acquisition `{s}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// One observed `(x, ΔMAE)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveRecord {
    pub features: Vec<f64>,
    pub delta_mae: f64,
}

/// GP fitted on ΔMAE observations plus the smallest value seen.
#[derive(Clone, Debug)]
pub struct ObjectiveSurrogate {
    pub gp: GpPosterior,
    pub g_min: f64,
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn mean_abs_error(post: &GpPosterior, data: &Dataset, skip: Option<usize>) -> Result<f64> {
    let preds = post.predict_means(&data.features)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (p, y)) in preds.iter().zip(&data.responses).enumerate() {
        if Some(i) == skip {
            continue;
        }
        sum += (y - p).abs();
        count += 1;
    }
    Ok(sum / count as f64)
}

/// Monte Carlo estimate of the ΔMAE objective on prior data.
///
/// Each round splits the prior into an 80% base set and a 20% holdout, fits
/// on the base, then refits once per holdout point `d` with `d` added. The
/// record for `d` is the MAE over the holdout without `d` minus the base
/// model's MAE over the whole holdout. Round `r` shuffles with its own
/// substream of `seed`, so more rounds only append records.
pub fn estimate_objective_records(
    prior: &Dataset,
    cfg: &KernelConfig,
    rounds: usize,
    seed: u64,
) -> Result<Vec<ObjectiveRecord>> {
    if prior.len() < MIN_OBJECTIVE_PRIOR {
        return Err(Error::TooFewPoints {
            needed: MIN_OBJECTIVE_PRIOR,
            found: prior.len(),
        });
    }
    if rounds == 0 {
        return Err(Error::InvalidArgument("objective rounds must be >= 1".into()));
    }
    let n = prior.len();
    let holdout_len = ((HOLDOUT_FRACTION * n as f64).round() as usize).clamp(2, n - 1);
    let standardizer = Standardizer::fit(&prior.features);

    let mut records = Vec::with_capacity(rounds * holdout_len);
    for round in 0..rounds {
        let mut rng = seed::substream(seed, &[round as u64]);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (holdout_idx, base_idx) = order.split_at(holdout_len);
        let base = prior.subset(base_idx);
        let holdout = prior.subset(holdout_idx);

        let base_post = GpPosterior::fit_with_standardizer(&base, cfg, standardizer.clone())?;
        let base_mae = mean_abs_error(&base_post, &holdout, None)?;

        let mut augmented_idx = base_idx.to_vec();
        augmented_idx.push(0);
        for (h, &unit) in holdout_idx.iter().enumerate() {
            *augmented_idx.last_mut().unwrap() = unit;
            let augmented = prior.subset(&augmented_idx);
            let post = GpPosterior::fit_with_standardizer(&augmented, cfg, standardizer.clone())?;
            let mae = mean_abs_error(&post, &holdout, Some(h))?;
            records.push(ObjectiveRecord {
                features: prior.features.row(unit).to_vec(),
                delta_mae: mae - base_mae,
            });
        }
    }
    Ok(records)
}

pub fn records_dataset(records: &[ObjectiveRecord]) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::Empty("objective records"));
    }
    let rows: Vec<&[f64]> = records.iter().map(|r| r.features.as_slice()).collect();
    let features = FeatureMatrix::from_rows(&rows)?;
    Dataset::new(features, records.iter().map(|r| r.delta_mae).collect())
}

pub fn fit_objective_surrogate(
    records: &[ObjectiveRecord],
    cfg: &KernelConfig,
) -> Result<ObjectiveSurrogate> {
    let data = records_dataset(records)?;
    let gp = GpPosterior::fit(&data, cfg)?;
    let g_min = data.responses.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ObjectiveSurrogate { gp, g_min })
}

/// Predictive uncertainty: the posterior standard deviation.
pub fn acq_pu(pred: &Prediction) -> f64 {
    pred.std_dev
}

/// Inverted lower confidence bound `lambda * sigma - mu`.
pub fn acq_ilcb(pred: &Prediction, lambda: f64) -> f64 {
    lambda * pred.std_dev - pred.mean
}

/// Expected improvement over `g_min` for a minimization objective.
pub fn acq_ei(pred: &Prediction, g_min: f64) -> f64 {
    let sigma = pred.std_dev;
    if sigma <= 0.0 {
        return (g_min - pred.mean).max(0.0);
    }
    let z = (g_min - pred.mean) / sigma;
    (sigma * (z * normal_cdf(z) + normal_pdf(z))).max(0.0)
}

/// Variance of the improvement `max(g_min - g, 0)`.
pub fn improvement_variance(pred: &Prediction, g_min: f64) -> Result<f64> {
    let sigma = pred.std_dev;
    if sigma <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let z = (g_min - pred.mean) / sigma;
    let (cdf, pdf) = (normal_cdf(z), normal_pdf(z));
    let ei = sigma * (z * cdf + pdf);
    let second = sigma * sigma * ((z * z + 1.0) * cdf + z * pdf);
    Ok((second - ei * ei).max(0.0))
}

/// Scaled expected improvement; 0 where the improvement is (nearly)
/// deterministic.
pub fn acq_sei(pred: &Prediction, g_min: f64) -> f64 {
    match improvement_variance(pred, g_min) {
        Ok(var) if var > SEI_VARIANCE_FLOOR => acq_ei(pred, g_min) / var.sqrt(),
        _ => 0.0,
    }
}

/// Shifts `scores` by `|min| + POSITIVITY_MARGIN` when any entry is `<= 0`.
pub fn enforce_positive(scores: &mut [f64]) {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        let shift = min.abs() + POSITIVITY_MARGIN;
        scores.iter_mut().for_each(|s| *s += shift);
    }
}

/// Acquisition value for every row of `population`, strictly positive.
pub fn score_population(
    kind: AcquisitionKind,
    population: &FeatureMatrix,
    response: Option<&GpPosterior>,
    objective: Option<&ObjectiveSurrogate>,
) -> Result<Vec<f64>> {
    kind.validate()?;
    let mut scores: Vec<f64> = match kind {
        AcquisitionKind::Pu => {
            let gp = response.ok_or(Error::MissingResponseSurrogate)?;
            gp.predict_many(population)?.iter().map(acq_pu).collect()
        }
        _ => {
            let h = objective.ok_or(Error::MissingObjectiveSurrogate(kind.tag()))?;
            let preds = h.gp.predict_many(population)?;
            match kind {
                AcquisitionKind::Ilcb { lambda } => {
                    preds.iter().map(|p| acq_ilcb(p, lambda)).collect()
                }
                AcquisitionKind::Ei => preds.iter().map(|p| acq_ei(p, h.g_min)).collect(),
                AcquisitionKind::Sei => preds.iter().map(|p| acq_sei(p, h.g_min)).collect(),
                AcquisitionKind::Pu => unreachable!(),
            }
        }
    };
    enforce_positive(&mut scores);
    Ok(scores)
}
