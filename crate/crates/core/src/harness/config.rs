//! Simulation configuration and its flat key-value file format.
//!
//! The file is TOML restricted to top-level keys:
//!
//! ```toml
//! population = "synthetic"        # or "csv"
//! csv_path = "plots.csv"          # csv only, relative to the config file
//! response_column = "y"           # csv only
//! synthetic_size = 1920
//! synthetic_dim = 16
//! synthetic_length_scale = 2.0
//! synthetic_signal_variance = 4.0
//! synthetic_noise_variance = 1.0
//! synthetic_seed = 0
//! synthetic_mode = "auto"         # auto | dense | chunked
//! prior_size = 100
//! sample_size = 50
//! repeats = 200
//! designs = ["srs", "bo-pu", "bo-ilcb", "bo-ei", "bo-sei"]
//! ilcb_lambda = 0.2
//! length_scale = 2.5              # optional response-surrogate override
//! noise_variance = 0.3            # optional response-surrogate override
//! jitter = 0.0
//! epsilon = 0.001
//! scheme = "fixed-size-weighted"  # or "poisson"
//! srs_pi = "one-over-n"           # or "n-over-n"
//! master_seed = 0
//! histogram_bins = 20
//! kl_smoothing = 0.5
//! objective_rounds = 10
//! threads = 4                     # optional
//! ```
//!
//! A design entry may carry a label, `"control:srs"`, so that two designs of
//! the same kind can be compared.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::population::{GenerationMode, SyntheticSpec};
use crate::acquisition::{AcquisitionKind, DEFAULT_ILCB_LAMBDA, DEFAULT_OBJECTIVE_ROUNDS};
use crate::design::{SamplingScheme, SrsPiConvention, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::gp::KernelSettings;
use crate::metrics::{DEFAULT_HISTOGRAM_BINS, DEFAULT_KL_SMOOTHING};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PopulationSource {
    Csv { path: PathBuf, response_column: String },
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Srs,
    Bo(AcquisitionKind),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub label: String,
    pub kind: DesignKind,
}

impl DesignSpec {
    /// `"srs"`, `"bo-pu"`, `"ilcb"`, or `"label:kind"`.
    pub fn parse(s: &str, ilcb_lambda: f64) -> Result<Self> {
        let (label, kind_str) = match s.split_once(':') {
            Some((l, k)) => (Some(l.trim()), k.trim()),
            None => (None, s.trim()),
        };
        let kind = if kind_str.eq_ignore_ascii_case("srs") {
            DesignKind::Srs
        } else {
            DesignKind::Bo(AcquisitionKind::parse(kind_str, ilcb_lambda)?)
        };
        let label = match (label, kind) {
            (Some(l), _) if !l.is_empty() => l.to_string(),
            (_, DesignKind::Srs) => "SRS".to_string(),
            (_, DesignKind::Bo(k)) => format!("BO-{}", k.tag()),
        };
        Ok(Self { label, kind })
    }

    pub fn parse_list(s: &str, ilcb_lambda: f64) -> Result<Vec<Self>> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| Self::parse(p, ilcb_lambda))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub population: PopulationSource,
    pub prior_size: usize,
    pub sample_size: usize,
    pub repeats: usize,
    pub designs: Vec<DesignSpec>,
    pub kernel: KernelSettings,
    pub epsilon: f64,
    pub scheme: SamplingScheme,
    pub srs_pi: SrsPiConvention,
    pub master_seed: u64,
    pub histogram_bins: usize,
    pub kl_smoothing: f64,
    pub objective_rounds: usize,
    /// Worker threads; `None` uses available parallelism. Never affects results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let lambda = DEFAULT_ILCB_LAMBDA;
        Self {
            population: PopulationSource::Synthetic(SyntheticSpec::default()),
            prior_size: 100,
            sample_size: 50,
            repeats: 200,
            designs: ["srs", "bo-pu", "bo-ilcb", "bo-ei", "bo-sei"]
                .iter()
                .map(|d| DesignSpec::parse(d, lambda).expect("built-in design names parse"))
                .collect(),
            kernel: KernelSettings::default(),
            epsilon: DEFAULT_EPSILON,
            scheme: SamplingScheme::FixedSizeWeighted,
            srs_pi: SrsPiConvention::OneOverN,
            master_seed: 0,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            kl_smoothing: DEFAULT_KL_SMOOTHING,
            objective_rounds: DEFAULT_OBJECTIVE_ROUNDS,
            threads: None,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "population",
    "csv_path",
    "response_column",
    "synthetic_size",
    "synthetic_dim",
    "synthetic_length_scale",
    "synthetic_signal_variance",
    "synthetic_noise_variance",
    "synthetic_seed",
    "synthetic_mode",
    "prior_size",
    "sample_size",
    "repeats",
    "designs",
    "ilcb_lambda",
    "length_scale",
    "noise_variance",
    "jitter",
    "epsilon",
    "scheme",
    "srs_pi",
    "master_seed",
    "histogram_bins",
    "kl_smoothing",
    "objective_rounds",
    "threads",
];

struct Table(toml::Table);

impl Table {
    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(*f)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(type_error(key, "a number", other)),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(other) => Err(type_error(key, "a non-negative integer", other)),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        Ok(self.uint(key)?.map(|v| v as usize))
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(type_error(key, "a string", other)),
        }
    }

    fn string_list(&self, key: &str) -> Result<Option<Vec<String>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.split(',').map(str::to_string).collect())),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    other => Err(type_error(key, "a list of strings", other)),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(other) => Err(type_error(key, "a list of strings", other)),
        }
    }
}

fn type_error(key: &str, expected: &str, found: &toml::Value) -> Error {
    Error::Config(format!("`{key}` must be {expected}, found {found}"))
}

impl SimulationConfig {
    /// Parses the flat format. Relative CSV paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(unknown) = table.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{unknown}`")));
        }
        let t = Table(table);
        let mut cfg = Self::default();

        let lambda = t.float("ilcb_lambda")?.unwrap_or(DEFAULT_ILCB_LAMBDA);
        let source = t.string("population")?.unwrap_or_else(|| "synthetic".into());
        cfg.population = match source.as_str() {
            "synthetic" => {
                let d = SyntheticSpec::default();
                PopulationSource::Synthetic(SyntheticSpec {
                    population_size: t.usize("synthetic_size")?.unwrap_or(d.population_size),
                    feature_dim: t.usize("synthetic_dim")?.unwrap_or(d.feature_dim),
                    length_scale: t.float("synthetic_length_scale")?.unwrap_or(d.length_scale),
                    signal_variance: t.float("synthetic_signal_variance")?.unwrap_or(d.signal_variance),
                    noise_variance: t.float("synthetic_noise_variance")?.unwrap_or(d.noise_variance),
                    seed: t.uint("synthetic_seed")?.unwrap_or(d.seed),
                    mode: match t.string("synthetic_mode")? {
                        Some(m) => GenerationMode::parse(&m)?,
                        None => d.mode,
                    },
                })
            }
            "csv" => {
                let path = t
                    .string("csv_path")?
                    .ok_or_else(|| Error::Config("`population = \"csv\"` requires `csv_path`".into()))?;
                let path = PathBuf::from(path);
                let path = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path,
                };
                PopulationSource::Csv {
                    path,
                    response_column: t.string("response_column")?.unwrap_or_else(|| "y".into()),
                }
            }
            other => return Err(Error::Config(format!("unknown population source `{other}`"))),
        };
        if matches!(cfg.population, PopulationSource::Csv { .. })
            && t.0.keys().any(|k| k.starts_with("synthetic_"))
        {
            return Err(Error::Config("synthetic_* keys conflict with `population = \"csv\"`".into()));
        }
        if matches!(cfg.population, PopulationSource::Synthetic(_))
            && (t.0.contains_key("csv_path") || t.0.contains_key("response_column"))
        {
            return Err(Error::Config("csv keys conflict with a synthetic population".into()));
        }

        if let Some(v) = t.usize("prior_size")? {
            cfg.prior_size = v;
        }
        if let Some(v) = t.usize("sample_size")? {
            cfg.sample_size = v;
        }
        if let Some(v) = t.usize("repeats")? {
            cfg.repeats = v;
        }
        if let Some(list) = t.string_list("designs")? {
            cfg.designs = list
                .iter()
                .filter(|s| !s.trim().is_empty())
                .map(|s| DesignSpec::parse(s, lambda))
                .collect::<Result<_>>()
                .map_err(|e| Error::Config(e.to_string()))?;
        } else {
            cfg.set_ilcb_lambda(lambda);
        }
        cfg.kernel = KernelSettings {
            length_scale: t.float("length_scale")?,
            noise_variance: t.float("noise_variance")?,
            jitter: t.float("jitter")?.unwrap_or(0.0),
        };
        if let Some(v) = t.float("epsilon")? {
            cfg.epsilon = v;
        }
        if let Some(s) = t.string("scheme")? {
            cfg.scheme = SamplingScheme::parse(&s)?;
        }
        if let Some(s) = t.string("srs_pi")? {
            cfg.srs_pi = SrsPiConvention::parse(&s)?;
        }
        if let Some(v) = t.uint("master_seed")? {
            cfg.master_seed = v;
        }
        if let Some(v) = t.usize("histogram_bins")? {
            cfg.histogram_bins = v;
        }
        if let Some(v) = t.float("kl_smoothing")? {
            cfg.kl_smoothing = v;
        }
        if let Some(v) = t.usize("objective_rounds")? {
            cfg.objective_rounds = v;
        }
        cfg.threads = t.usize("threads")?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, path.parent())
    }

    /// Rewrites the λ of every ILCB design.
    pub fn set_ilcb_lambda(&mut self, lambda: f64) {
        for d in &mut self.designs {
            if let DesignKind::Bo(AcquisitionKind::Ilcb { lambda: l }) = &mut d.kind {
                *l = lambda;
            }
        }
    }

    /// Checks everything that can be checked without the population.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.repeats == 0 {
            return bad("repeats must be >= 1".into());
        }
        if self.prior_size == 0 || self.sample_size == 0 {
            return bad("prior_size and sample_size must be >= 1".into());
        }
        if self.designs.is_empty() {
            return bad("at least one design is required".into());
        }
        for (i, d) in self.designs.iter().enumerate() {
            if self.designs[..i].iter().any(|o| o.label == d.label) {
                return bad(format!("duplicate design label `{}`", d.label));
            }
            if let DesignKind::Bo(k) = d.kind {
                k.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if self.needs_objective() && self.prior_size < crate::acquisition::MIN_OBJECTIVE_PRIOR {
            return bad(format!(
                "ILCB/EI/SEI designs need prior_size >= {}",
                crate::acquisition::MIN_OBJECTIVE_PRIOR
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad(format!("epsilon must lie in (0, 0.5), got {}", self.epsilon));
        }
        if self.scheme == SamplingScheme::Srs {
            return bad("scheme applies to BO designs and must be poisson or fixed-size-weighted".into());
        }
        if self.histogram_bins == 0 {
            return bad("histogram_bins must be >= 1".into());
        }
        if !(self.kl_smoothing.is_finite() && self.kl_smoothing > 0.0) {
            return bad("kl_smoothing must be positive".into());
        }
        if self.objective_rounds == 0 {
            return bad("objective_rounds must be >= 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        if let Some(l) = self.kernel.length_scale {
            if !(l.is_finite() && l > 0.0) {
                return bad(format!("length_scale must be positive, got {l}"));
            }
        }
        if let Some(v) = self.kernel.noise_variance {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("noise_variance must be positive, got {v}"));
            }
        }
        if !(self.kernel.jitter.is_finite() && self.kernel.jitter >= 0.0) {
            return bad("jitter must be non-negative".into());
        }
        if let PopulationSource::Synthetic(spec) = &self.population {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
            self.validate_sizes(spec.population_size)?;
        }
        Ok(())
    }

    /// `prior_size + sample_size < N`.
    pub fn validate_sizes(&self, population_size: usize) -> Result<()> {
        if self.prior_size + self.sample_size >= population_size {
            return Err(Error::Config(format!(
                "prior_size + sample_size must be < population size ({} + {} >= {population_size})",
                self.prior_size, self.sample_size
            )));
        }
        Ok(())
    }

    pub fn needs_objective(&self) -> bool {
        self.designs
            .iter()
            .any(|d| matches!(d.kind, DesignKind::Bo(k) if k.needs_objective()))
    }

    /// Canonical JSON of every result-affecting field.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
