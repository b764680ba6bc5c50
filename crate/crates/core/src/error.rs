use thiserror::Error;

/// Errors produced by the pose-density operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpgError {
    #[error("quaternion norm {norm:e} is too small to normalize")]
    DegenerateQuaternion { norm: f64 },
    #[error("rotation axis has norm {norm}, expected 1")]
    NonUnitAxis { norm: f64 },
    #[error("real part of dual quaternion has norm {norm}, expected 1")]
    NonUnitRotationPart { norm: f64 },
    #[error("tangent point has norm {norm}, expected 1")]
    NonUnitTangentPoint { norm: f64 },
    #[error("rotation is within 5 degrees of orthogonal to the tangent point (|<q, q0>| = {inner:e})")]
    NearOrthogonalRotation { inner: f64 },
    #[error("covariance is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("covariance is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },
    #[error("tangent charts are {angle_deg:.3} degrees apart, limit is {limit_deg:.3}")]
    ChartsTooFarApart { angle_deg: f64, limit_deg: f64 },
    #[error("no pair of components is compatible for fusion")]
    NoCompatiblePairs,
    #[error("every component falls below the weight floor {floor}")]
    AllComponentsDropped { floor: f64 },
    #[error("cannot reduce to {target} components: {remaining} remain and no compatible pair is left")]
    TargetUnreachable { target: usize, remaining: usize },
    #[error("{samples} samples are too few for {components} components (need {required})")]
    TooFewSamples {
        samples: usize,
        components: usize,
        required: usize,
    },
    #[error("sample {index} cannot be lifted into any component chart")]
    OrphanSample { index: usize },
    #[error("every mixture component received (near) zero responsibility")]
    EmptyComponent,
    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),
    #[error("invalid input in field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("scenario step {step} ({op}) failed: {source}")]
    Step {
        step: usize,
        op: String,
        #[source]
        source: Box<MpgError>,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl MpgError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        MpgError::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for MpgError {
    fn from(e: std::io::Error) -> Self {
        MpgError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MpgError>;
