//! Population ingestion from CSV and synthetic GP-drawn populations.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::estimators::PopulationFrame;
use crate::seed;

pub const MIN_POPULATION_ROWS: usize = 3;
/// Dense generation factorizes the full covariance; beyond this it is refused.
pub const DENSE_LIMIT: usize = 10_000;
/// `Auto` switches from dense to chunked generation above this size.
pub const AUTO_DENSE_MAX: usize = 2_000;
pub const CHUNK_SIZE: usize = 1_000;
/// Each chunk is conditioned on at most this many preceding units.
pub const CHUNK_CONTEXT: usize = 1_000;

/// Reads a population with a header row. Every column except
/// `response_column` becomes a feature, in header order.
pub fn load_population_csv(path: impl AsRef<Path>, response_column: &str) -> Result<PopulationFrame> {
    let file = std::fs::File::open(path.as_ref())?;
    read_population_csv(file, response_column)
}

pub fn read_population_csv<R: std::io::Read>(reader: R, response_column: &str) -> Result<PopulationFrame> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let response_pos = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| Error::MissingColumn(response_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != response_pos)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut features = Vec::new();
    let mut responses = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::NonNumericCell {
                    row: row + 1,
                    column: headers.get(col).unwrap_or("").to_string(),
                    value: cell.to_string(),
                }
            })?;
            if col == response_pos {
                responses.push(value);
            } else {
                features.push(value);
            }
        }
    }
    if responses.len() < MIN_POPULATION_ROWS {
        return Err(Error::TooFewPoints {
            needed: MIN_POPULATION_ROWS,
            found: responses.len(),
        });
    }
    let matrix = FeatureMatrix::new(features, responses.len(), feature_names.len())?;
    PopulationFrame::new(matrix, responses)?.with_feature_names(feature_names)
}

/// Writes `frame` as CSV with the response in the last column.
pub fn write_population_csv<W: std::io::Write>(out: W, frame: &PopulationFrame, response_column: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = frame.feature_names.iter().map(String::as_str).collect();
    header.push(response_column);
    wtr.write_record(&header)?;
    for (row, y) in frame.features.rows().zip(&frame.responses) {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        cells.push(y.to_string());
        wtr.write_record(&cells)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationMode {
    /// Dense up to 2000 units, chunked above.
    #[default]
    Auto,
    Dense,
    /// Sequential blocks, each drawn conditionally on a window of preceding
    /// units. Approximate: correlations beyond the window are dropped.
    Chunked,
}

impl GenerationMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "dense" => Ok(Self::Dense),
            "chunked" => Ok(Self::Chunked),
            other => Err(Error::InvalidArgument(format!("unknown generation mode `{other}`"))),
        }
    }
}

/// Features uniform on `[0, 1]^m`; responses `f(x) + e` with `f` a zero-mean
/// GP of covariance `signal_variance * k(x, x')` and `e ~ N(0, noise_variance)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub population_size: usize,
    pub feature_dim: usize,
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub seed: u64,
    pub mode: GenerationMode,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            population_size: 1920,
            feature_dim: 16,
            length_scale: 2.0,
            signal_variance: 4.0,
            noise_variance: 1.0,
            seed: 0,
            mode: GenerationMode::Auto,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < MIN_POPULATION_ROWS {
            return Err(Error::TooFewPoints {
                needed: MIN_POPULATION_ROWS,
                found: self.population_size,
            });
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidArgument("feature_dim must be >= 1".into()));
        }
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "synthetic length_scale must be positive, got {}",
                self.length_scale
            )));
        }
        for (name, v) in [("signal_variance", self.signal_variance), ("noise_variance", self.noise_variance)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("synthetic {name} must be >= 0, got {v}")));
            }
        }
        if self.mode == GenerationMode::Dense && self.population_size > DENSE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "dense generation is limited to {DENSE_LIMIT} units (got {}); use chunked mode",
                self.population_size
            )));
        }
        Ok(())
    }

    fn chunked(&self) -> bool {
        match self.mode {
            GenerationMode::Auto => self.population_size > AUTO_DENSE_MAX,
            GenerationMode::Dense => false,
            GenerationMode::Chunked => true,
        }
    }
}

pub fn generate_synthetic_population(spec: &SyntheticSpec) -> Result<PopulationFrame> {
    spec.validate()?;
    let (n, m) = (spec.population_size, spec.feature_dim);
    let mut rng = seed::rng(spec.seed);
    let data: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>()).collect();
    let features = FeatureMatrix::new(data, n, m)?;

    let mut responses = if spec.signal_variance == 0.0 {
        vec![0.0; n]
    } else if spec.chunked() {
        chunked_draw(&features, spec, &mut rng)?
    } else {
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let cov = covariance(&features, 0..n, 0..n, spec);
        let l = factor(cov, spec.signal_variance)?;
        (l * DVector::from_vec(z)).iter().copied().collect()
    };
    let noise_sd = spec.noise_variance.sqrt();
    for y in &mut responses {
        let e: f64 = rng.sample(StandardNormal);
        *y += noise_sd * e;
    }
    PopulationFrame::new(features, responses)
}

fn covariance(
    x: &FeatureMatrix,
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
    spec: &SyntheticSpec,
) -> DMatrix<f64> {
    let inv = 1.0 / (2.0 * spec.length_scale * spec.length_scale);
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let (a, b) = (x.row(rows.start + i), x.row(cols.start + j));
        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        spec.signal_variance * (-d2 * inv).exp()
    })
}

/// Lower Cholesky factor with diagonal jitter escalating from `1e-10 * scale`.
fn factor(cov: DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let mut attempted = Vec::new();
    let mut jitter = 1e-10 * scale;
    while jitter <= 1e-4 * scale {
        let mut c = cov.clone();
        for i in 0..c.nrows() {
            c[(i, i)] += jitter;
        }
        if let Some(ch) = c.cholesky() {
            return Ok(ch.unpack());
        }
        attempted.push(jitter);
        jitter *= 10.0;
    }
    Err(Error::SingularKernel { attempted })
}

fn chunked_draw<R: Rng>(x: &FeatureMatrix, spec: &SyntheticSpec, rng: &mut R) -> Result<Vec<f64>> {
    let n = x.nrows();
    let mut f = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK_SIZE).min(n);
        let ctx = start.saturating_sub(CHUNK_CONTEXT)..start;
        let z = DVector::from_iterator(end - start, (start..end).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let k_bb = covariance(x, start..end, start..end, spec);
        let block = if ctx.is_empty() {
            factor(k_bb, spec.signal_variance)? * z
        } else {
            let k_cc = covariance(x, ctx.clone(), ctx.clone(), spec);
            let k_cb = covariance(x, ctx.clone(), start..end, spec);
            let l_c = factor(k_cc, spec.signal_variance)?;
            let a = l_c
                .solve_lower_triangular(&k_cb)
                .expect("cholesky diagonal is positive");
            let f_c = DVector::from_column_slice(&f[ctx.clone()]);
            let w = l_c
                .solve_lower_triangular(&f_c)
                .expect("cholesky diagonal is positive");
            let mean = a.tr_mul(&w);
            let cond = &k_bb - a.tr_mul(&a);
            mean + factor(cond, spec.signal_variance)? * z
        };
        f.extend(block.iter());
        start = end;
    }
    Ok(f)
}
