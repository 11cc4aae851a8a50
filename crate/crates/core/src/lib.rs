//! Surrogate-guided probability sampling for population estimation.
//!
//! A Gaussian-process surrogate scores every unit of a finite population,
//! the scores become inclusion probabilities, and design-based estimators
//! turn the drawn sample into population totals with variance estimates.
//! The [`harness`] module runs repeated comparisons of sampling designs.

pub mod acquisition;
pub mod data;
pub mod design;
pub mod error;
pub mod estimators;
pub mod gp;
pub mod harness;
pub mod metrics;
pub mod seed;
pub mod stats;

pub use acquisition::{AcquisitionKind, ObjectiveRecord, ObjectiveSurrogate};
pub use data::{Dataset, FeatureMatrix};
pub use design::{SampleDraw, SamplingDesign, SamplingScheme, SrsPiConvention};
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, PopulationFrame, TotalEstimate};
pub use gp::{GpPosterior, KernelConfig, KernelSettings, Prediction, Standardizer};
pub use metrics::{Metric, MetricRecord};
pub use stats::{Alternative, MwuResult};
