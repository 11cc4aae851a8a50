use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("kernel matrix is not positive definite after jitter levels {attempted:?}")]
    SingularKernel { attempted: Vec<f64> },

    #[error("acquisition {0} requires an objective surrogate")]
    MissingObjectiveSurrogate(&'static str),

    #[error("acquisition PU requires a response surrogate")]
    MissingResponseSurrogate,

    #[error("joint inclusion probability unavailable for {0} without a Monte Carlo budget")]
    UnsupportedJointInclusion(&'static str),

    #[error("fixed-size weighted sampling requires a nominal sample size")]
    MissingSampleSize,

    #[error("zero inclusion probability for unit {0}")]
    ZeroInclusion(usize),

    #[error("zero joint inclusion probability for units ({0}, {1})")]
    ZeroJointInclusion(usize, usize),

    #[error("frame has no predictions")]
    MissingPredictions,

    #[error("improvement variance is degenerate (sigma = 0)")]
    DegenerateVariance,

    #[error("histogram bin edges differ")]
    MismatchedEdges,

    #[error("divergence is infinite: Q is zero in bin {0} where P is positive")]
    InfiniteDivergence(usize),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
