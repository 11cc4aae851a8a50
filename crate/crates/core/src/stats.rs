//! Mann–Whitney U test and order statistics for summaries.

use serde::{Deserialize, Serialize};

use crate::acquisition::normal_cdf;
use crate::error::{Error, Result};

/// Smallest p-value ever reported; underflow never shows as zero.
pub const P_VALUE_FLOOR: f64 = 1e-300;
/// Combined sizes up to this use the exact null distribution under `Auto`.
pub const EXACT_MAX_TOTAL: usize = 12;
const EXACT_HARD_LIMIT: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// `a` is stochastically smaller than `b`.
    #[default]
    Less,
    /// `a` is stochastically greater than `b`.
    Greater,
}

impl Alternative {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "less" | "smaller" => Ok(Self::Less),
            "greater" | "larger" => Ok(Self::Greater),
            other => Err(Error::InvalidArgument(format!("unknown alternative `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MwuMethod {
    /// Exact when `|a| + |b| <= 12`, normal approximation otherwise.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    /// `U` of the first sample: pairs with `a_i > b_j`, ties counted 1/2.
    pub u_statistic: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`, with tie group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64], alternative: Alternative) -> Result<MwuResult> {
    mann_whitney_u_with(a, b, alternative, MwuMethod::Auto)
}

pub fn mann_whitney_u_with(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    method: MwuMethod,
) -> Result<MwuResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Mann-Whitney sample"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("Mann-Whitney sample"));
    }
    let (n1, n2) = (a.len(), b.len());
    let total = n1 + n2;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n1].iter().sum();
    let u = rank_sum_a - (n1 * (n1 + 1)) as f64 / 2.0;

    let exact = match method {
        MwuMethod::Auto => total <= EXACT_MAX_TOTAL,
        MwuMethod::Exact => true,
        MwuMethod::Normal => false,
    };
    let p = if exact {
        if total > EXACT_HARD_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "exact Mann-Whitney limited to {EXACT_HARD_LIMIT} observations"
            )));
        }
        exact_p(&ranks, n1, alternative)
    } else {
        normal_p(u, n1, n2, &ties, alternative)
    };
    Ok(MwuResult {
        u_statistic: u,
        p_value: p.clamp(P_VALUE_FLOOR, 1.0),
        exact,
    })
}

/// Permutation distribution of the first sample's rank sum, counting over all
/// `C(N, n1)` equally likely group assignments. Doubled midranks are integers.
fn exact_p(ranks: &[f64], n1: usize, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let observed: usize = doubled[..n1].iter().sum();
    let max_sum: usize = doubled.iter().sum();
    // ways[c][s]: subsets of size c among items seen so far with doubled rank sum s.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for c in (1..=n1).rev() {
            let (lower, upper) = ways.split_at_mut(c);
            let prev = &lower[c - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let dist = &ways[n1];
    let total: f64 = dist.iter().sum();
    let tail: f64 = match alternative {
        Alternative::Less => dist[..=observed].iter().sum(),
        Alternative::Greater => dist[observed..].iter().sum(),
    };
    tail / total
}

/// Normal approximation with tie and continuity corrections.
fn normal_p(u: f64, n1: usize, n2: usize, ties: &[usize], alternative: Alternative) -> f64 {
    let (f1, f2) = (n1 as f64, n2 as f64);
    let n = f1 + f2;
    let mean = f1 * f2 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(var > 0.0) {
        return 1.0;
    }
    let sd = var.sqrt();
    match alternative {
        Alternative::Less => normal_cdf((u - mean + 0.5) / sd),
        Alternative::Greater => normal_cdf(-(u - mean - 0.5) / sd),
    }
}

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Min, first quartile, median, third quartile, max.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Brute force over every split of the pooled data into groups of size n1.
    fn enumerate_p(a: &[f64], b: &[f64], alt: Alternative) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let n = pooled.len();
        let n1 = a.len();
        let u_of = |idx: &[usize]| {
            let mut u = 0.0;
            for &i in idx {
                for j in (0..n).filter(|j| !idx.contains(j)) {
                    if pooled[i] > pooled[j] {
                        u += 1.0;
                    } else if pooled[i] == pooled[j] {
                        u += 0.5;
                    }
                }
            }
            u
        };
        let observed = u_of(&(0..n1).collect::<Vec<_>>());
        let (mut hit, mut total) = (0usize, 0usize);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let u = u_of(&idx);
            total += 1;
            let inside = match alt {
                Alternative::Less => u <= observed + 1e-9,
                Alternative::Greater => u >= observed - 1e-9,
            };
            if inside {
                hit += 1;
            }
        }
        hit as f64 / total as f64
    }

    #[test]
    fn separated_samples_exact() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Less).unwrap();
        assert!(r.exact);
        assert_eq!(r.u_statistic, 0.0);
        assert_relative_eq!(r.p_value, 0.05, max_relative = 1e-14);
        let rev = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::Greater).unwrap();
        assert_relative_eq!(rev.p_value, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let cases: [(&[f64], &[f64]); 4] = [
            (&[1.0, 2.0, 2.0, 5.0], &[2.0, 3.0, 3.0, 7.0, 0.5]),
            (&[4.0, 4.0, 4.0], &[4.0, 1.0, 9.0]),
            (&[0.1, 0.7, 0.3], &[0.2, 0.9, 0.4, 0.8, 0.6]),
            (&[3.0], &[1.0, 2.0, 3.0, 4.0]),
        ];
        for (a, b) in cases {
            for alt in [Alternative::Less, Alternative::Greater] {
                let got = mann_whitney_u_with(a, b, alt, MwuMethod::Exact).unwrap();
                assert_relative_eq!(got.p_value, enumerate_p(a, b, alt), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn identical_samples_near_half() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = mann_whitney_u(&a, &a, Alternative::Less).unwrap();
        assert!(!r.exact);
        assert!((r.p_value - 0.5).abs() < 0.05, "p {}", r.p_value);
    }

    #[test]
    fn wrong_direction_gives_large_p() {
        let a: Vec<f64> = (0..40).map(|i| 1000.0 + i as f64).collect();
        let b: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert!(mann_whitney_u(&a, &b, Alternative::Less).unwrap().p_value > 0.999);
        let small = mann_whitney_u(&b, &a, Alternative::Less).unwrap().p_value;
        assert!(small > 0.0 && small < 1e-10);
    }

    #[test]
    fn p_value_never_zero() {
        let a: Vec<f64> = (0..3000).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..3000).map(|i| 1e6 + i as f64).collect();
        let r = mann_whitney_u(&a, &b, Alternative::Less).unwrap();
        assert!(r.p_value >= P_VALUE_FLOOR);
    }

    #[test]
    fn empty_rejected() {
        assert!(mann_whitney_u(&[], &[1.0], Alternative::Less).is_err());
    }

    #[test]
    fn all_tied_is_uninformative() {
        let r = mann_whitney_u_with(&[2.0; 20], &[2.0; 20], Alternative::Less, MwuMethod::Normal).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn five_number_summary() {
        let f = FiveNumber::of(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let g = FiveNumber::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.median, 2.5);
        assert_eq!(g.q1, 1.75);
        assert!(FiveNumber::of(&[]).is_none());
    }
}
