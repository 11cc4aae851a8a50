//! Gaussian-process regression with a squared exponential kernel.
//!
//! The surrogate works in function-space form with a zero prior mean: the
//! training Gram matrix plus observation noise is factorized once with a
//! Cholesky decomposition, and every prediction is a dot product against the
//! stored solve vector plus one triangular solve for the variance.
//!
//! Inputs are z-scored per feature with statistics of the fitting data before
//! any kernel evaluation, so a single length scale is meaningful across
//! heterogeneous features. Queries go through the same stored transform.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};

/// Noise variance used when the responses carry no variance to scale from.
pub const NOISE_FLOOR: f64 = 1e-6;

/// Fraction of the response variance used as default noise variance.
pub const DEFAULT_NOISE_FRACTION: f64 = 0.1;

const JITTER_START: f64 = 1e-9;
const JITTER_STOP: f64 = 1e-3;

/// Concrete squared exponential kernel hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub length_scale: f64,
    pub noise_variance: f64,
    /// Added to the Gram diagonal on every fit.
    pub jitter: f64,
}

impl KernelConfig {
    pub fn new(length_scale: f64, noise_variance: f64, jitter: f64) -> Result<Self> {
        let cfg = Self {
            length_scale,
            noise_variance,
            jitter,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "length_scale must be positive, got {}",
                self.length_scale
            )));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise_variance must be positive, got {}",
                self.noise_variance
            )));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "jitter must be non-negative, got {}",
                self.jitter
            )));
        }
        Ok(())
    }
}

/// Optional hyperparameter overrides; unset fields fall back to data-driven
/// defaults when resolved against a training set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelSettings {
    pub length_scale: Option<f64>,
    pub noise_variance: Option<f64>,
    pub jitter: f64,
}

impl KernelSettings {
    /// Length scale defaults to the median pairwise distance between the
    /// standardized training inputs, noise variance to a tenth of the sample
    /// variance of the responses.
    pub fn resolve(&self, data: &Dataset) -> Result<KernelConfig> {
        let length_scale = match self.length_scale {
            Some(l) => l,
            None => {
                let standardizer = Standardizer::fit(&data.features);
                median_pairwise_distance(&standardizer.transform(&data.features))
            }
        };
        let noise_variance = match self.noise_variance {
            Some(v) => v,
            None => default_noise_variance(&data.responses),
        };
        KernelConfig::new(length_scale, noise_variance, self.jitter)
    }
}

/// Median Euclidean distance over all distinct row pairs; 1.0 when fewer than
/// two rows exist or every pair coincides.
pub fn median_pairwise_distance(x: &FeatureMatrix) -> f64 {
    let n = x.nrows();
    if n < 2 {
        return 1.0;
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(squared_distance(x.row(i), x.row(j)).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

fn default_noise_variance(y: &[f64]) -> f64 {
    if y.len() < 2 {
        return NOISE_FLOOR;
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let noise = DEFAULT_NOISE_FRACTION * var;
    if noise > NOISE_FLOOR {
        noise
    } else {
        NOISE_FLOOR
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn se_kernel(a: &[f64], b: &[f64], length_scale: f64) -> f64 {
    (-squared_distance(a, b) / (2.0 * length_scale * length_scale)).exp()
}

/// Squared exponential kernel `exp(-|a - b|^2 / 2l^2)`.
pub fn kernel_eval(a: &[f64], b: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    cfg.validate()?;
    Ok(se_kernel(a, b, cfg.length_scale))
}

/// Gram matrix `K_ij = k(x_i, x_j)` over the rows of `x`.
pub fn gram_matrix(x: &FeatureMatrix, cfg: &KernelConfig) -> Result<DMatrix<f64>> {
    if x.nrows() == 0 {
        return Err(Error::Empty("gram matrix input"));
    }
    cfg.validate()?;
    Ok(gram_unchecked(x, cfg.length_scale))
}

fn gram_unchecked(x: &FeatureMatrix, length_scale: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0;
        for j in 0..i {
            let v = se_kernel(x.row(i), x.row(j), length_scale);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Per-feature z-score transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column; constant columns
    /// get scale 1.
    pub fn fit(x: &FeatureMatrix) -> Self {
        let m = x.ncols();
        let n = x.nrows().max(1) as f64;
        let mut means = vec![0.0; m];
        for row in x.rows() {
            for (acc, v) in means.iter_mut().zip(row) {
                *acc += v;
            }
        }
        means.iter_mut().for_each(|v| *v /= n);
        let mut scales = vec![0.0; m];
        for row in x.rows() {
            for ((acc, v), mu) in scales.iter_mut().zip(row).zip(&means) {
                *acc += (v - mu).powi(2);
            }
        }
        for s in &mut scales {
            *s = (*s / n).sqrt();
            if !(*s > 0.0) {
                *s = 1.0;
            }
        }
        Self { means, scales }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            scales: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            row.iter()
                .zip(&self.means)
                .zip(&self.scales)
                .map(|((v, mu), s)| (v - mu) / s),
        );
    }

    pub fn transform(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let mut data = Vec::with_capacity(x.nrows() * x.ncols());
        let mut buf = Vec::with_capacity(x.ncols());
        for row in x.rows() {
            self.transform_row(row, &mut buf);
            data.extend_from_slice(&buf);
        }
        FeatureMatrix::new(data, x.nrows(), x.ncols()).expect("shape preserved")
    }
}

/// Posterior predictive `N(mean, std_dev^2)` at one query point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub std_dev: f64,
}

impl Prediction {
    pub fn variance(&self) -> f64 {
        self.std_dev * self.std_dev
    }
}

/// A fitted surrogate. Immutable once built.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    training_features: FeatureMatrix,
    alpha: DVector<f64>,
    cholesky: Cholesky<f64, Dyn>,
    kernel: KernelConfig,
    standardizer: Standardizer,
    applied_jitter: f64,
}

impl GpPosterior {
    /// Fits on `data`, standardizing with the data's own feature statistics.
    pub fn fit(data: &Dataset, cfg: &KernelConfig) -> Result<Self> {
        let standardizer = Standardizer::fit(&data.features);
        Self::fit_with_standardizer(data, cfg, standardizer)
    }

    /// Fits with an externally supplied input transform.
    pub fn fit_with_standardizer(
        data: &Dataset,
        cfg: &KernelConfig,
        standardizer: Standardizer,
    ) -> Result<Self> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::Empty("training dataset"));
        }
        if standardizer.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                found: standardizer.dim(),
            });
        }
        let x = standardizer.transform(&data.features);
        let mut k = gram_unchecked(&x, cfg.length_scale);
        let n = k.nrows();
        let base = cfg.noise_variance + cfg.jitter;
        for i in 0..n {
            k[(i, i)] += base;
        }
        let mean_diag = k.diagonal().mean();

        let mut attempted = vec![cfg.jitter];
        let mut extra = 0.0;
        let mut scale = JITTER_START;
        let cholesky = loop {
            let mut a = k.clone();
            for i in 0..n {
                a[(i, i)] += extra;
            }
            if let Some(c) = Cholesky::new(a) {
                if c.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                    break c;
                }
            }
            if scale > JITTER_STOP * (1.0 + 1e-12) {
                return Err(Error::SingularKernel { attempted });
            }
            extra = scale * mean_diag;
            attempted.push(cfg.jitter + extra);
            scale *= 10.0;
        };

        let y = DVector::from_column_slice(&data.responses);
        let alpha = cholesky.solve(&y);
        Ok(Self {
            training_features: x,
            alpha,
            cholesky,
            kernel: *cfg,
            standardizer,
            applied_jitter: cfg.jitter + extra,
        })
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    /// Standardized training inputs.
    pub fn training_features(&self) -> &FeatureMatrix {
        &self.training_features
    }

    /// `[K + sigma^2 I]^{-1} y`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Lower-triangular factor of the (jittered) training covariance.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.cholesky.l()
    }

    /// Total diagonal jitter the factorization needed on top of the noise.
    pub fn applied_jitter(&self) -> f64 {
        self.applied_jitter
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    fn cross_kernel(&self, z: &[f64]) -> DVector<f64> {
        let l = self.kernel.length_scale;
        DVector::from_iterator(
            self.training_features.nrows(),
            self.training_features.rows().map(|r| se_kernel(r, z, l)),
        )
    }

    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: query.len(),
            });
        }
        let mut z = Vec::with_capacity(query.len());
        self.standardizer.transform_row(query, &mut z);
        let ks = self.cross_kernel(&z);
        let mean = ks.dot(&self.alpha);
        let v = self
            .cholesky
            .l_dirty()
            .solve_lower_triangular(&ks)
            .expect("cholesky diagonal is positive");
        let reduction = (1.0 - v.norm_squared()).max(0.0);
        Ok(Prediction {
            mean,
            std_dev: (self.kernel.noise_variance + reduction).sqrt(),
        })
    }

    /// Predictions at every row of `queries`.
    pub fn predict_many(&self, queries: &FeatureMatrix) -> Result<Vec<Prediction>> {
        self.check_dim(queries)?;
        let l = self.cholesky.l();
        let mut out = Vec::with_capacity(queries.nrows());
        for chunk in chunk_ranges(queries.nrows(), 512) {
            let ks = self.cross_block(queries, chunk.clone());
            let means = ks.tr_mul(&self.alpha);
            let v = l
                .solve_lower_triangular(&ks)
                .expect("cholesky diagonal is positive");
            for (c, mean) in means.iter().enumerate() {
                let reduction = (1.0 - v.column(c).norm_squared()).max(0.0);
                out.push(Prediction {
                    mean: *mean,
                    std_dev: (self.kernel.noise_variance + reduction).sqrt(),
                });
            }
        }
        Ok(out)
    }

    /// Posterior means only; skips the triangular solves.
    pub fn predict_means(&self, queries: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_dim(queries)?;
        let mut out = Vec::with_capacity(queries.nrows());
        for chunk in chunk_ranges(queries.nrows(), 512) {
            let ks = self.cross_block(queries, chunk);
            out.extend(ks.tr_mul(&self.alpha).iter());
        }
        Ok(out)
    }

    fn check_dim(&self, queries: &FeatureMatrix) -> Result<()> {
        if queries.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: queries.ncols(),
            });
        }
        Ok(())
    }

    /// `n x q` block of kernel values between training rows and a query range.
    fn cross_block(&self, queries: &FeatureMatrix, range: std::ops::Range<usize>) -> DMatrix<f64> {
        let n = self.training_features.nrows();
        let l = self.kernel.length_scale;
        let mut ks = DMatrix::zeros(n, range.len());
        let mut z = Vec::with_capacity(queries.ncols());
        for (c, q) in range.enumerate() {
            self.standardizer.transform_row(queries.row(q), &mut z);
            for (r, t) in self.training_features.rows().enumerate() {
                ks[(r, c)] = se_kernel(t, &z, l);
            }
        }
        ks
    }
}

fn chunk_ranges(n: usize, size: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..n.div_ceil(size)).map(move |c| c * size..((c + 1) * size).min(n))
}

/// Convenience wrapper for [`GpPosterior::fit`].
pub fn fit(data: &Dataset, cfg: &KernelConfig) -> Result<GpPosterior> {
    GpPosterior::fit(data, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(l: f64, noise: f64) -> KernelConfig {
        KernelConfig::new(l, noise, 0.0).unwrap()
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        Dataset::new(FeatureMatrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    #[test]
    fn kernel_values() {
        let c1 = cfg(1.0, 1.0);
        assert_eq!(kernel_eval(&[0.3, -1.2], &[0.3, -1.2], &c1).unwrap(), 1.0);
        assert_relative_eq!(
            kernel_eval(&[0.0], &[2f64.sqrt()], &c1).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        let c2 = cfg(2.0, 1.0);
        // |(1,1) - (0,0)|^2 = 2, 2 l^2 = 8
        assert_relative_eq!(
            kernel_eval(&[1.0, 1.0], &[0.0, 0.0], &c2).unwrap(),
            0.778_800_783_071_404_9,
            max_relative = 1e-14
        );
    }

    #[test]
    fn kernel_dimension_mismatch() {
        let err = kernel_eval(&[0.0], &[0.0, 1.0], &cfg(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn invalid_configs() {
        assert!(KernelConfig::new(0.0, 1.0, 0.0).is_err());
        assert!(KernelConfig::new(1.0, 0.0, 0.0).is_err());
        assert!(KernelConfig::new(1.0, 1.0, -1e-3).is_err());
    }

    #[test]
    fn gram_examples() {
        let c = cfg(1.0, 1.0);
        let single = FeatureMatrix::from_rows(&[vec![5.0]]).unwrap();
        assert_eq!(gram_matrix(&single, &c).unwrap(), DMatrix::from_element(1, 1, 1.0));
        let dup = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(gram_matrix(&dup, &c).unwrap(), DMatrix::from_element(2, 2, 1.0));
        let pair = FeatureMatrix::from_rows(&[vec![0.0], vec![2f64.sqrt()]]).unwrap();
        let k = gram_matrix(&pair, &c).unwrap();
        assert_relative_eq!(k[(0, 1)], (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(k[(1, 0)], (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn scalar_fit_and_predict() {
        let data = Dataset::new(FeatureMatrix::from_rows(&[vec![0.0]]).unwrap(), vec![2.0]).unwrap();
        let post = fit(&data, &cfg(1.0, 1.0)).unwrap();
        assert_relative_eq!(post.alpha()[0], 1.0, max_relative = 1e-15);
        let p = post.predict(&[0.0]).unwrap();
        assert_relative_eq!(p.mean, 1.0, max_relative = 1e-15);
        assert_relative_eq!(p.variance(), 1.5, max_relative = 1e-14);
    }

    #[test]
    fn far_query_recovers_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_dataset(&mut rng, 8, 2);
        let c = cfg(0.5, 0.3);
        let post = fit(&data, &c).unwrap();
        let p = post.predict(&[1e4, -1e4]).unwrap();
        assert!(p.mean.abs() < 1e-12);
        assert_relative_eq!(p.variance(), 1.3, max_relative = 1e-12);
    }

    #[test]
    fn huge_noise_shrinks_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = random_dataset(&mut rng, 6, 1);
        let post = fit(&data, &cfg(1.0, 1e12)).unwrap();
        for row in data.features.rows() {
            assert!(post.predict(row).unwrap().mean.abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_points_fit() {
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![2.0]]).unwrap();
        let data = Dataset::new(x, vec![3.0, 3.0, 3.0, 1.0]).unwrap();
        // Tiny noise makes the three identical rows nearly singular.
        let post = fit(&data, &KernelConfig::new(1.0, 1e-300, 0.0).unwrap()).unwrap();
        assert!(post.applied_jitter() > 0.0);
        let p = post.predict(&[1.0]).unwrap();
        assert!((p.mean - 3.0).abs() < 1e-3, "mean {}", p.mean);
    }

    #[test]
    fn empty_dataset_rejected() {
        let x = FeatureMatrix::new(vec![], 0, 2).unwrap();
        let data = Dataset::new(x, vec![]).unwrap();
        assert!(matches!(fit(&data, &cfg(1.0, 1.0)), Err(Error::Empty(_))));
    }

    #[test]
    fn predict_dimension_mismatch() {
        let data = Dataset::new(FeatureMatrix::from_rows(&[vec![0.0, 1.0]]).unwrap(), vec![1.0]).unwrap();
        let post = fit(&data, &cfg(1.0, 1.0)).unwrap();
        assert!(post.predict(&[0.0]).is_err());
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = random_dataset(&mut rng, 10, 3);
        let post = fit(&data, &cfg(1.3, 0.2)).unwrap();
        let queries = random_dataset(&mut rng, 600, 3).features;
        let batch = post.predict_many(&queries).unwrap();
        let means = post.predict_means(&queries).unwrap();
        for (i, row) in queries.rows().enumerate() {
            let single = post.predict(row).unwrap();
            assert_relative_eq!(batch[i].mean, single.mean, max_relative = 1e-12, epsilon = 1e-14);
            assert_relative_eq!(batch[i].std_dev, single.std_dev, max_relative = 1e-12);
            assert_relative_eq!(means[i], single.mean, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn cholesky_factor_is_lower_triangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = random_dataset(&mut rng, 7, 2);
        let l = fit(&data, &cfg(1.0, 0.1)).unwrap().cholesky_factor();
        for i in 0..7 {
            assert!(l[(i, i)] > 0.0);
            for j in (i + 1)..7 {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn median_heuristic_defaults() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let data = Dataset::new(x, vec![1.0, 2.0, 3.0]).unwrap();
        let resolved = KernelSettings::default().resolve(&data).unwrap();
        // standardized: mean 4/3, population std sqrt(14/9)
        let s = (14.0f64 / 9.0).sqrt();
        let mut d = [1.0 / s, 3.0 / s, 2.0 / s];
        d.sort_by(f64::total_cmp);
        assert_relative_eq!(resolved.length_scale, d[1], max_relative = 1e-14);
        assert_relative_eq!(resolved.noise_variance, 0.1, max_relative = 1e-14);

        let constant = Dataset::new(
            FeatureMatrix::from_rows(&[vec![2.0], vec![2.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let resolved = KernelSettings::default().resolve(&constant).unwrap();
        assert_eq!(resolved.length_scale, 1.0);
        assert_eq!(resolved.noise_variance, NOISE_FLOOR);

        let overridden = KernelSettings {
            length_scale: Some(0.7),
            noise_variance: Some(0.01),
            jitter: 1e-8,
        }
        .resolve(&data)
        .unwrap();
        assert_eq!(overridden, KernelConfig::new(0.7, 0.01, 1e-8).unwrap());
    }

    #[test]
    fn deterministic_fit_and_predict() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = random_dataset(&mut rng, 9, 4);
        let a = fit(&data, &cfg(1.1, 0.3)).unwrap();
        let b = fit(&data, &cfg(1.1, 0.3)).unwrap();
        let q = [0.1, 0.2, -0.3, 0.4];
        let (pa, pb) = (a.predict(&q).unwrap(), b.predict(&q).unwrap());
        assert_eq!(pa.mean.to_bits(), pb.mean.to_bits());
        assert_eq!(pa.std_dev.to_bits(), pb.std_dev.to_bits());
    }
}
