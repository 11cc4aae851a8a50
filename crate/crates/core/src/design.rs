//! Sampling designs: min-max inclusion probabilities from acquisition scores,
//! the SRS baseline, and realization of probability samples.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingScheme {
    /// Independent Bernoulli(π_k) per unit; random sample size.
    Poisson,
    /// Sequential draws without replacement, weights ∝ π_k, exactly n units.
    FixedSizeWeighted,
    /// Uniform simple random sampling without replacement.
    Srs,
}

impl SamplingScheme {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Poisson => "poisson",
            Self::FixedSizeWeighted => "fixed-size-weighted",
            Self::Srs => "srs",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "poisson" => Ok(Self::Poisson),
            "fixed-size-weighted" | "fixed" => Ok(Self::FixedSizeWeighted),
            "srs" => Ok(Self::Srs),
            other => Err(Error::InvalidArgument(format!("unknown sampling scheme `{other}`"))),
        }
    }
}

/// Which constant the SRS baseline reports as its inclusion probability.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SrsPiConvention {
    /// π_k = 1/N, the convention behind the unnormalized total metric.
    #[default]
    OneOverN,
    /// π_k = n/N, the actual SRS inclusion probability.
    NOverN,
}

impl SrsPiConvention {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "one-over-n" | "1/n" => Ok(Self::OneOverN),
            "n-over-n" | "n/n" | "classical" => Ok(Self::NOverN),
            other => Err(Error::InvalidArgument(format!("unknown SRS pi convention `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingDesign {
    pi: Vec<f64>,
    scheme: SamplingScheme,
    nominal_sample_size: Option<usize>,
    epsilon: Option<f64>,
}

impl SamplingDesign {
    /// Builds a design from explicit inclusion probabilities, each in (0, 1].
    pub fn from_pi(pi: Vec<f64>, scheme: SamplingScheme, n: Option<usize>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::Empty("inclusion probabilities"));
        }
        if let Some(k) = pi.iter().position(|p| !(p.is_finite() && *p > 0.0 && *p <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "inclusion probability of unit {k} outside (0, 1]: {}",
                pi[k]
            )));
        }
        check_sample_size(n, pi.len())?;
        if scheme == SamplingScheme::Srs {
            if n.is_none() {
                return Err(Error::MissingSampleSize);
            }
            if pi.iter().any(|p| *p != pi[0]) {
                return Err(Error::InvalidArgument("SRS requires a constant pi vector".into()));
            }
        }
        Ok(Self {
            pi,
            scheme,
            nominal_sample_size: n,
            epsilon: None,
        })
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    pub fn nominal_sample_size(&self) -> Option<usize> {
        self.nominal_sample_size
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn population_size(&self) -> usize {
        self.pi.len()
    }

    /// `π_kj` for `k != j`, `π_k` on the diagonal. Schemes without a closed
    /// form use the independence approximation; the flag reports when.
    pub(crate) fn pair_inclusion_approx(&self, k: usize, j: usize) -> (f64, bool) {
        if k == j {
            return (self.pi[k], false);
        }
        match self.scheme {
            SamplingScheme::Poisson => (self.pi[k] * self.pi[j], false),
            SamplingScheme::Srs => (self.srs_joint(), false),
            SamplingScheme::FixedSizeWeighted => (self.pi[k] * self.pi[j], true),
        }
    }

    pub(crate) fn srs_joint(&self) -> f64 {
        let n = self.nominal_sample_size.unwrap_or(0) as f64;
        let big_n = self.pi.len() as f64;
        n * (n - 1.0) / (big_n * (big_n - 1.0))
    }
}

fn check_sample_size(n: Option<usize>, population: usize) -> Result<()> {
    match n {
        Some(0) => Err(Error::InvalidArgument("sample size must be positive".into())),
        Some(n) if n > population => Err(Error::InvalidArgument(format!(
            "sample size {n} exceeds population size {population}"
        ))),
        _ => Ok(()),
    }
}

/// Min-max normalization of positive scores into inclusion probabilities.
///
/// The minimum maps to `epsilon`, the maximum to `1 - epsilon`, values in
/// between to `(a - a_min) / (a_max - a_min)` clamped to `[epsilon, 1 - epsilon]`.
/// Constant scores give 0.5 everywhere.
pub fn minmax_design(
    scores: &[f64],
    epsilon: f64,
    scheme: SamplingScheme,
    n: Option<usize>,
) -> Result<SamplingDesign> {
    if scores.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: scores.len(),
        });
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    if let Some(k) = scores.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "score of unit {k} must be finite and positive, got {}",
            scores[k]
        )));
    }
    if scheme == SamplingScheme::Srs {
        return Err(Error::InvalidArgument("min-max designs cannot use the SRS scheme".into()));
    }
    check_sample_size(n, scores.len())?;

    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pi = if max == min {
        vec![0.5; scores.len()]
    } else {
        let range = max - min;
        scores
            .iter()
            .map(|&a| {
                if a == max {
                    1.0 - epsilon
                } else if a == min {
                    epsilon
                } else {
                    ((a - min) / range).clamp(epsilon, 1.0 - epsilon)
                }
            })
            .collect()
    };
    Ok(SamplingDesign {
        pi,
        scheme,
        nominal_sample_size: n,
        epsilon: Some(epsilon),
    })
}

/// Constant-probability SRS design of size `n` from `population` units.
pub fn srs_design(population: usize, n: usize, convention: SrsPiConvention) -> Result<SamplingDesign> {
    if n == 0 || n >= population {
        return Err(Error::InvalidArgument(format!(
            "SRS needs 1 <= n < N, got n = {n}, N = {population}"
        )));
    }
    let p = match convention {
        SrsPiConvention::OneOverN => 1.0 / population as f64,
        SrsPiConvention::NOverN => n as f64 / population as f64,
    };
    Ok(SamplingDesign {
        pi: vec![p; population],
        scheme: SamplingScheme::Srs,
        nominal_sample_size: Some(n),
        epsilon: None,
    })
}

/// A realized sample `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleDraw {
    /// Selected unit indices, ascending and distinct.
    pub indices: Vec<usize>,
    /// First-order inclusion probabilities of the generating design.
    pub pi_used: Vec<f64>,
}

impl SampleDraw {
    pub fn new(mut indices: Vec<usize>, pi_used: Vec<f64>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("sample indices must be distinct".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= pi_used.len() {
                return Err(Error::InvalidArgument(format!(
                    "sample index {last} outside population of {}",
                    pi_used.len()
                )));
            }
        }
        Ok(Self { indices, pi_used })
    }

    pub fn realized_size(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }
}

/// Realizes a sample with a seeded ChaCha stream.
pub fn draw(design: &SamplingDesign, rng_seed: u64) -> Result<SampleDraw> {
    let mut rng = seed::rng(rng_seed);
    draw_with_rng(design, &mut rng)
}

pub fn draw_with_rng<R: Rng + ?Sized>(design: &SamplingDesign, rng: &mut R) -> Result<SampleDraw> {
    let indices = draw_indices(design, rng)?;
    Ok(SampleDraw {
        indices,
        pi_used: design.pi.clone(),
    })
}

fn draw_indices<R: Rng + ?Sized>(design: &SamplingDesign, rng: &mut R) -> Result<Vec<usize>> {
    let big_n = design.pi.len();
    match design.scheme {
        SamplingScheme::Poisson => Ok((0..big_n)
            .filter(|&k| rng.random::<f64>() < design.pi[k])
            .collect()),
        SamplingScheme::Srs => {
            let n = design.nominal_sample_size.ok_or(Error::MissingSampleSize)?;
            let mut idx = rand::seq::index::sample(rng, big_n, n).into_vec();
            idx.sort_unstable();
            Ok(idx)
        }
        SamplingScheme::FixedSizeWeighted => {
            let n = design.nominal_sample_size.ok_or(Error::MissingSampleSize)?;
            Ok(sequential_weighted(&design.pi, n, rng))
        }
    }
}

/// Draws `n` distinct units one at a time, each step picking among the
/// remaining units with probability proportional to its weight.
fn sequential_weighted<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut taken = vec![false; weights.len()];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let total: f64 = weights
            .iter()
            .zip(&taken)
            .filter(|(_, t)| !**t)
            .map(|(w, _)| w)
            .sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (k, w) in weights.iter().enumerate() {
            if taken[k] {
                continue;
            }
            acc += w;
            chosen = Some(k);
            if target < acc {
                break;
            }
        }
        let k = chosen.expect("n never exceeds the population size");
        taken[k] = true;
        out.push(k);
    }
    out.sort_unstable();
    out
}

/// Monte Carlo budget for joint inclusion probabilities without a closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonteCarloBudget {
    pub draws: usize,
    pub seed: u64,
}

/// Second-order inclusion probability `π_kj`, `k != j`.
pub fn joint_inclusion(
    design: &SamplingDesign,
    k: usize,
    j: usize,
    budget: Option<MonteCarloBudget>,
) -> Result<f64> {
    let big_n = design.population_size();
    if k >= big_n || j >= big_n {
        return Err(Error::InvalidArgument(format!(
            "unit index out of range for population of {big_n}"
        )));
    }
    if k == j {
        return Err(Error::InvalidArgument("joint inclusion needs k != j".into()));
    }
    match design.scheme {
        SamplingScheme::Poisson => Ok(design.pi[k] * design.pi[j]),
        SamplingScheme::Srs => Ok(design.srs_joint()),
        SamplingScheme::FixedSizeWeighted => {
            let budget = budget.ok_or(Error::UnsupportedJointInclusion("fixed-size-weighted"))?;
            if budget.draws == 0 {
                return Err(Error::InvalidArgument("Monte Carlo budget must be positive".into()));
            }
            let mut rng = seed::rng(budget.seed);
            let n = design.nominal_sample_size.ok_or(Error::MissingSampleSize)?;
            let mut hits = 0usize;
            for _ in 0..budget.draws {
                let s = sequential_weighted(&design.pi, n, &mut rng);
                if s.binary_search(&k).is_ok() && s.binary_search(&j).is_ok() {
                    hits += 1;
                }
            }
            Ok(hits as f64 / budget.draws as f64)
        }
    }
}

/// Writes `unit_id,score,pi` rows.
pub fn write_design_table<W: Write>(out: W, scores: &[f64], design: &SamplingDesign) -> Result<()> {
    if scores.len() != design.population_size() {
        return Err(Error::DimensionMismatch {
            expected: design.population_size(),
            found: scores.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["unit_id", "score", "pi"])?;
    for (k, (s, p)) in scores.iter().zip(design.pi()).enumerate() {
        w.write_record([k.to_string(), s.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
