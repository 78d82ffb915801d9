use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: pivot {pivot:e} at index {index} is below tolerance {tolerance:e}")]
    NotPositiveDefinite {
        index: usize,
        pivot: f64,
        tolerance: f64,
    },

    #[error("covariance matrix is singular (determinant {det:e})")]
    SingularCovariance { det: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("transform has {outputs} outputs; a scalar field is required")]
    NotScalar { outputs: usize },

    #[error("transform is not differentiable at {point:?}")]
    NotDifferentiableHere { point: Vec<f64> },

    #[error("sample covariance is numerically singular")]
    DegenerateSample,

    #[error("regression design matrix is rank deficient")]
    DegenerateDesign,

    #[error("not enough samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("time {time} is not a grid point")]
    WindowNotOnGrid { time: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stencil point {point:?} lies outside the field's evaluation domain")]
    HaloOutsideEvaluationDomain { point: Vec<f64> },

    #[error("grid mask is not connected ({components} components)")]
    DisconnectedMask { components: usize },

    #[error("grid mask selects no points")]
    EmptyMask,

    #[error("invalid configuration field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("unsupported output format `{0}`")]
    UnsupportedFormat(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self.root(), Error::ConfigInvalid { .. })
    }
}
