//! Evaluation metrics comparing an estimated population against the truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HISTOGRAM_BINS: usize = 20;
/// Pseudo-count added to every bin of the estimated histogram.
pub const DEFAULT_KL_SMOOTHING: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MeanAbsDiff,
    KlDivergence,
    TotalAbsDiff,
    TotalAbsDiffNormalizedPi,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::MeanAbsDiff,
        Metric::KlDivergence,
        Metric::TotalAbsDiff,
        Metric::TotalAbsDiffNormalizedPi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::MeanAbsDiff => "mean_abs_diff",
            Self::KlDivergence => "kl_divergence",
            Self::TotalAbsDiff => "total_abs_diff",
            Self::TotalAbsDiffNormalizedPi => "total_abs_diff_normalized_pi",
        }
    }
}

/// The four metric values for one design in one repeat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub design_name: String,
    pub repeat_index: usize,
    pub mean_abs_diff: f64,
    pub kl_divergence: f64,
    pub total_abs_diff: f64,
    pub total_abs_diff_normalized_pi: f64,
}

impl MetricRecord {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::MeanAbsDiff => self.mean_abs_diff,
            Metric::KlDivergence => self.kl_divergence,
            Metric::TotalAbsDiff => self.total_abs_diff,
            Metric::TotalAbsDiffNormalizedPi => self.total_abs_diff_normalized_pi,
        }
    }
}

/// `|mean(true_y) - mean(est_y)|`.
pub fn mean_abs_diff(true_y: &[f64], est_y: &[f64]) -> Result<f64> {
    if true_y.is_empty() || est_y.is_empty() {
        return Err(Error::Empty("mean_abs_diff input"));
    }
    if true_y.len() != est_y.len() {
        return Err(Error::DimensionMismatch {
            expected: true_y.len(),
            found: est_y.len(),
        });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok((mean(true_y) - mean(est_y)).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// `bins + 1` equally spaced edges over `[min, max]`; a zero-width range is
/// widened to one unit around the value.
pub fn equal_width_edges(min: f64, max: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    if !(min.is_finite() && max.is_finite() && min <= max) {
        return Err(Error::InvalidArgument(format!("invalid histogram range [{min}, {max}]")));
    }
    let (lo, hi) = if min == max { (min - 0.5, max + 0.5) } else { (min, max) };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    Ok(edges)
}

/// Normalized bin frequencies. Values outside the edges land in the end
/// bins; the last bin is closed on the right.
pub fn build_histogram(values: &[f64], edges: &[f64], smoothing: f64) -> Result<Histogram> {
    if edges.len() < 2 {
        return Err(Error::InvalidArgument("histogram needs at least 2 edges".into()));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("histogram edges must be strictly ascending".into()));
    }
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(Error::InvalidArgument(format!("smoothing must be non-negative, got {smoothing}")));
    }
    let bins = edges.len() - 1;
    let mut counts = vec![smoothing; bins];
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite("histogram values"));
        }
        // Number of interior edges <= v.
        let b = edges[1..bins].partition_point(|e| *e <= v);
        counts[b] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::Empty("histogram has no mass"));
    }
    Ok(Histogram {
        bin_edges: edges.to_vec(),
        probabilities: counts.into_iter().map(|c| c / total).collect(),
    })
}

/// `Σ_b P(b) ln(P(b) / Q(b))` over bins where `P(b) > 0`.
pub fn kl_divergence(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.bin_edges != q.bin_edges || p.probabilities.len() != q.probabilities.len() {
        return Err(Error::MismatchedEdges);
    }
    let mut sum = 0.0;
    for (b, (&pb, &qb)) in p.probabilities.iter().zip(&q.probabilities).enumerate() {
        if pb <= 0.0 {
            continue;
        }
        if qb <= 0.0 {
            return Err(Error::InfiniteDivergence(b));
        }
        sum += pb * (pb / qb).ln();
    }
    Ok(sum.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn mean_abs_diff_examples() {
        let y = [1.0, 4.0, 2.5];
        assert_eq!(mean_abs_diff(&y, &y).unwrap(), 0.0);
        assert_relative_eq!(mean_abs_diff(&[10.0, 10.0], &[9.0, 10.0]).unwrap(), 0.5);
        assert_eq!(
            mean_abs_diff(&y, &[3.0, 1.0, 2.0]).unwrap(),
            mean_abs_diff(&y, &[1.0, 2.0, 3.0]).unwrap()
        );
        assert!(mean_abs_diff(&[], &[]).is_err());
        assert!(mean_abs_diff(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn histogram_examples() {
        let h = build_histogram(&[1.0, 1.0, 3.0], &[0.0, 2.0, 4.0], 0.0).unwrap();
        assert_relative_eq!(h.probabilities[0], 2.0 / 3.0);
        assert_relative_eq!(h.probabilities[1], 1.0 / 3.0);
        let u = build_histogram(&[], &[0.0, 1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        assert_eq!(u.probabilities, vec![0.25; 4]);
    }

    #[test]
    fn histogram_clips_and_closes_last_bin() {
        let h = build_histogram(&[-5.0, 0.0, 2.0, 4.0, 9.0], &[0.0, 2.0, 4.0], 0.0).unwrap();
        assert_relative_eq!(h.probabilities[0], 2.0 / 5.0);
        assert_relative_eq!(h.probabilities[1], 3.0 / 5.0);
    }

    #[test]
    fn histogram_errors() {
        assert!(build_histogram(&[1.0], &[0.0], 0.0).is_err());
        assert!(build_histogram(&[1.0], &[1.0, 0.0], 0.0).is_err());
        assert!(build_histogram(&[], &[0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn kl_examples() {
        let edges = vec![0.0, 1.0, 2.0];
        let p = Histogram {
            bin_edges: edges.clone(),
            probabilities: vec![1.0, 0.0],
        };
        let q = Histogram {
            bin_edges: edges.clone(),
            probabilities: vec![0.5, 0.5],
        };
        assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
        assert_relative_eq!(kl_divergence(&p, &q).unwrap(), std::f64::consts::LN_2, max_relative = 1e-15);
        let other = Histogram {
            bin_edges: vec![0.0, 1.0, 3.0],
            probabilities: vec![0.5, 0.5],
        };
        assert!(matches!(kl_divergence(&q, &other), Err(Error::MismatchedEdges)));
    }

    #[test]
    fn unsmoothed_empty_bin_triggers_guard() {
        let edges = [0.0, 1.0, 2.0];
        let truth = [0.5, 1.5];
        let estimate = [0.2, 0.4];
        let p = build_histogram(&truth, &edges, 0.0).unwrap();
        let raw = build_histogram(&estimate, &edges, 0.0).unwrap();
        assert!(matches!(kl_divergence(&p, &raw), Err(Error::InfiniteDivergence(1))));
        let smoothed = build_histogram(&estimate, &edges, DEFAULT_KL_SMOOTHING).unwrap();
        assert!(kl_divergence(&p, &smoothed).unwrap().is_finite());
    }

    #[test]
    fn edges_cover_range() {
        let e = equal_width_edges(1.0, 3.0, 4).unwrap();
        assert_eq!(e, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        let d = equal_width_edges(2.0, 2.0, 2).unwrap();
        assert_eq!(d, vec![1.5, 2.0, 2.5]);
    }

    proptest! {
        #[test]
        fn gibbs_inequality(
            a in proptest::collection::vec(0.0f64..10.0, 6),
            b in proptest::collection::vec(0.01f64..10.0, 6),
        ) {
            prop_assume!(a.iter().sum::<f64>() > 0.0);
            let edges: Vec<f64> = (0..7).map(|i| i as f64).collect();
            let norm = |v: &[f64]| {
                let s: f64 = v.iter().sum();
                v.iter().map(|x| x / s).collect::<Vec<_>>()
            };
            let p = Histogram { bin_edges: edges.clone(), probabilities: norm(&a) };
            let q = Histogram { bin_edges: edges, probabilities: norm(&b) };
            prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
            prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        }

        #[test]
        fn histogram_sums_to_one(
            values in proptest::collection::vec(-5.0f64..5.0, 0..50),
            smoothing in 0.0f64..2.0,
        ) {
            prop_assume!(!values.is_empty() || smoothing > 0.0);
            let edges = equal_width_edges(-3.0, 3.0, 7).unwrap();
            let h = build_histogram(&values, &edges, smoothing).unwrap();
            prop_assert!((h.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(h.probabilities.iter().all(|p| *p >= 0.0));
        }
    }
}
