//! Repeated Monte Carlo comparison of sampling designs.
//!
//! Each repeat draws one prior SRS from the population. Every design then
//! samples from the same remaining frame, refits the response surrogate on
//! prior plus sample, and is scored against the ground truth on four metrics.
//! Repeats run in parallel and merge in repeat order, so reports do not
//! depend on the thread count.

pub mod config;
pub mod population;
pub mod report;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::{self, ObjectiveSurrogate};
use crate::design::{self, SampleDraw};
use crate::error::{Error, Result};
use crate::estimators::{difference_total, PopulationFrame};
use crate::gp::{GpPosterior, KernelSettings};
use crate::metrics::{build_histogram, equal_width_edges, kl_divergence, mean_abs_diff, Metric, MetricRecord};
use crate::seed;
use crate::stats::{mann_whitney_u, Alternative, FiveNumber};

pub use config::{DesignKind, DesignSpec, PopulationSource, SimulationConfig};
pub use population::{
    generate_synthetic_population, load_population_csv, read_population_csv, GenerationMode, SyntheticSpec,
};

/// Fraction of failed repeats above which a run is degraded.
pub const DEGRADED_FAILURE_RATE: f64 = 0.01;

const PHASE_PRIOR: u64 = 0;
const PHASE_OBJECTIVE: u64 = 1;
const PHASE_SAMPLE: u64 = 2;

/// One design's pass through a repeat. Indices refer to the population.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignOutcome {
    pub prior: Vec<usize>,
    pub frame: Vec<usize>,
    pub sample: Vec<usize>,
    pub record: MetricRecord,
}

pub fn load_population(config: &SimulationConfig) -> Result<PopulationFrame> {
    match &config.population {
        PopulationSource::Csv { path, response_column } => load_population_csv(path, response_column),
        PopulationSource::Synthetic(spec) => generate_synthetic_population(spec),
    }
}

/// Metric records for every design in one repeat.
pub fn run_repeat(
    population: &PopulationFrame,
    config: &SimulationConfig,
    repeat_index: usize,
) -> Result<Vec<MetricRecord>> {
    Ok(run_repeat_detailed(population, config, repeat_index)?
        .into_iter()
        .map(|o| o.record)
        .collect())
}

pub fn run_repeat_detailed(
    population: &PopulationFrame,
    config: &SimulationConfig,
    repeat_index: usize,
) -> Result<Vec<DesignOutcome>> {
    let n_pop = population.len();
    config.validate_sizes(n_pop)?;
    let r = repeat_index as u64;

    let mut prior = index::sample(
        &mut seed::substream(config.master_seed, &[r, PHASE_PRIOR]),
        n_pop,
        config.prior_size,
    )
    .into_vec();
    prior.sort_unstable();
    let mut in_prior = vec![false; n_pop];
    prior.iter().for_each(|&k| in_prior[k] = true);
    let frame: Vec<usize> = (0..n_pop).filter(|&k| !in_prior[k]).collect();
    let frame_features = population.features.select_rows(&frame);
    let frame_y: Vec<f64> = frame.iter().map(|&k| population.responses[k]).collect();
    let frame_total: f64 = frame_y.iter().sum();

    let prior_data = population.dataset(&prior);
    let mut response_gp: Option<GpPosterior> = None;
    let mut objective: Option<ObjectiveSurrogate> = None;

    let edges = equal_width_edges(
        population.responses.iter().copied().fold(f64::INFINITY, f64::min),
        population.responses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        config.histogram_bins,
    )?;
    let truth_hist = build_histogram(&population.responses, &edges, 0.0)?;

    let mut outcomes = Vec::with_capacity(config.designs.len());
    for (d, spec) in config.designs.iter().enumerate() {
        let sampling = match spec.kind {
            DesignKind::Srs => design::srs_design(frame.len(), config.sample_size, config.srs_pi)?,
            DesignKind::Bo(kind) => {
                if response_gp.is_none() && !kind.needs_objective() {
                    let cfg = config.kernel.resolve(&prior_data)?;
                    response_gp = Some(GpPosterior::fit(&prior_data, &cfg)?);
                }
                if objective.is_none() && kind.needs_objective() {
                    objective = Some(objective_surrogate(&prior_data, config, r)?);
                }
                let scores = acquisition::score_population(
                    kind,
                    &frame_features,
                    response_gp.as_ref(),
                    objective.as_ref(),
                )?;
                design::minmax_design(&scores, config.epsilon, config.scheme, Some(config.sample_size))?
            }
        };
        let draw = design::draw(
            &sampling,
            seed::derive(config.master_seed, &[r, PHASE_SAMPLE, d as u64]),
        )?;
        let sample: Vec<usize> = draw.indices.iter().map(|&i| frame[i]).collect();

        let mut posterior = prior.clone();
        posterior.extend(&sample);
        posterior.sort_unstable();
        let posterior_data = population.dataset(&posterior);
        let cfg = config.kernel.resolve(&posterior_data)?;
        let gp = GpPosterior::fit(&posterior_data, &cfg)?;
        let y_hat = gp.predict_means(&population.features)?;

        let mut observed = in_prior.clone();
        sample.iter().for_each(|&k| observed[k] = true);
        let estimate: Vec<f64> = (0..n_pop)
            .map(|k| if observed[k] { population.responses[k] } else { y_hat[k] })
            .collect();
        let estimate_hist = build_histogram(&estimate, &edges, config.kl_smoothing)?;

        let frame_hat: Vec<f64> = frame.iter().map(|&k| y_hat[k]).collect();
        let scored = PopulationFrame::from_values(frame_y.clone(), frame_hat)?;
        let record = MetricRecord {
            design_name: spec.label.clone(),
            repeat_index,
            mean_abs_diff: mean_abs_diff(&population.responses, &estimate)?,
            kl_divergence: kl_divergence(&truth_hist, &estimate_hist)?,
            total_abs_diff: total_error(&draw, &scored, frame_total, false)?,
            total_abs_diff_normalized_pi: total_error(&draw, &scored, frame_total, true)?,
        };
        outcomes.push(DesignOutcome {
            prior: prior.clone(),
            frame: frame.clone(),
            sample,
            record,
        });
    }
    Ok(outcomes)
}

fn total_error(draw: &SampleDraw, frame: &PopulationFrame, truth: f64, normalize: bool) -> Result<f64> {
    let est = difference_total(draw, frame, normalize)?.value;
    let err = (truth - est).abs();
    if err.is_finite() {
        Ok(err)
    } else {
        Err(Error::NonFinite("difference estimate"))
    }
}

/// ΔMAE records use the response-surrogate hyperparameters; the objective
/// surrogate itself always takes data-driven defaults.
fn objective_surrogate(prior: &crate::data::Dataset, config: &SimulationConfig, r: u64) -> Result<ObjectiveSurrogate> {
    let response_cfg = config.kernel.resolve(prior)?;
    let records = acquisition::estimate_objective_records(
        prior,
        &response_cfg,
        config.objective_rounds,
        seed::derive(config.master_seed, &[r, PHASE_OBJECTIVE]),
    )?;
    let objective_cfg = KernelSettings::default().resolve(&acquisition::records_dataset(&records)?)?;
    acquisition::fit_objective_surrogate(&records, &objective_cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub stats: FiveNumber,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub design: String,
    pub repeats: usize,
    pub metrics: Vec<MetricSummary>,
}

/// One cell of the p-value matrix: `design` against the baseline on `metric`,
/// alternative "design is stochastically smaller".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwuEntry {
    pub design: String,
    pub baseline: String,
    pub metric: Metric,
    pub u_statistic: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub population_hash: String,
    pub master_seed: u64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub records: Vec<MetricRecord>,
    pub summaries: Vec<DesignSummary>,
    /// Empty when no SRS design is configured.
    pub mwu: Vec<MwuEntry>,
    pub repeats: usize,
    pub failed_repeats: usize,
    pub degraded: bool,
    pub provenance: Provenance,
}

impl SimulationReport {
    pub fn values(&self, design: &str, metric: Metric) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.design_name == design)
            .map(|r| r.get(metric))
            .collect()
    }

    pub fn p_value(&self, design: &str, metric: Metric) -> Option<f64> {
        self.mwu
            .iter()
            .find(|e| e.design == design && e.metric == metric)
            .map(|e| e.p_value)
    }
}

pub fn population_hash(population: &PopulationFrame) -> String {
    let mut h = Sha256::new();
    h.update((population.features.nrows() as u64).to_le_bytes());
    h.update((population.features.ncols() as u64).to_le_bytes());
    for v in population.features.as_slice().iter().chain(&population.responses) {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let population = load_population(config)?;
    run_simulation_on(&population, config)
}

pub fn run_simulation_on(population: &PopulationFrame, config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    config.validate_sizes(population.len())?;
    if population.features.ncols() == 0 {
        return Err(Error::Config("population has no feature columns".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outcomes: Vec<Result<Vec<MetricRecord>>> = pool.install(|| {
        (0..config.repeats)
            .into_par_iter()
            .map(|r| run_repeat(population, config, r))
            .collect()
    });

    let mut records = Vec::with_capacity(config.repeats * config.designs.len());
    let mut failed = 0;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(recs) => records.extend(recs),
            Err(e) => {
                log::warn!("repeat {r} failed and is excluded: {e}");
                failed += 1;
            }
        }
    }
    let degraded = failed as f64 > DEGRADED_FAILURE_RATE * config.repeats as f64;

    let by_design = |label: &str, metric: Metric| -> Vec<f64> {
        records
            .iter()
            .filter(|rec| rec.design_name == label)
            .map(|rec| rec.get(metric))
            .collect()
    };
    let summaries = config
        .designs
        .iter()
        .map(|d| DesignSummary {
            design: d.label.clone(),
            repeats: config.repeats - failed,
            metrics: Metric::ALL
                .iter()
                .filter_map(|&m| FiveNumber::of(&by_design(&d.label, m)).map(|stats| MetricSummary { metric: m, stats }))
                .collect(),
        })
        .collect();

    let mut mwu = Vec::new();
    if let Some(baseline) = config.designs.iter().find(|d| d.kind == DesignKind::Srs) {
        if failed < config.repeats {
            for d in config.designs.iter().filter(|d| d.label != baseline.label) {
                for m in Metric::ALL {
                    let res = mann_whitney_u(&by_design(&d.label, m), &by_design(&baseline.label, m), Alternative::Less)?;
                    mwu.push(MwuEntry {
                        design: d.label.clone(),
                        baseline: baseline.label.clone(),
                        metric: m,
                        u_statistic: res.u_statistic,
                        p_value: res.p_value,
                    });
                }
            }
        }
    }

    Ok(SimulationReport {
        records,
        summaries,
        mwu,
        repeats: config.repeats,
        failed_repeats: failed,
        degraded,
        provenance: Provenance {
            config_hash: config.hash(),
            population_hash: population_hash(population),
            master_seed: config.master_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}
