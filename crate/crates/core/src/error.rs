use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("{what} is not Hermitian (max residual {residual:.3e})")]
    NotHermitian { what: String, residual: f64 },

    #[error("{what} is not symmetric (max residual {residual:.3e})")]
    NotSymmetric { what: String, residual: f64 },

    #[error("{what} is not positive semidefinite (min eigenvalue {min_eigenvalue:.6e})")]
    NotPositive { what: String, min_eigenvalue: f64 },

    #[error(
        "Araki-Woods factorisation residuals exceed tolerance: commutation {commutation:.3e}, \
         number {number:.3e}, pair {pair:.3e}"
    )]
    Factorization {
        commutation: f64,
        number: f64,
        pair: f64,
    },

    #[error("lifted measurement covariance is inconsistent with the field correlations (residual {residual:.3e})")]
    CovarianceConsistency { residual: f64 },

    #[error("measurement violates the self-commutation condition (residual {residual:.3e})")]
    MeasurementCommutation { residual: f64 },

    #[error("{what} is rank deficient: rank {rank}, expected {expected}")]
    RankDeficient {
        what: String,
        rank: usize,
        expected: usize,
    },

    #[error("too many measurements: m = {m} exceeds channel count {nch}")]
    TooManyMeasurements { m: usize, nch: usize },

    #[error("measurement completion failed after {rows} rows")]
    CompletionFailed { rows: usize },

    #[error("completed measurement W is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("measurement noise covariance is singular (G must have full row rank)")]
    SingularCovariance,

    #[error("conditioning gain has imaginary part {max_imag:.3e}")]
    ImaginaryGain { max_imag: f64 },

    #[error("scattering matrix must be the identity (max deviation {residual:.3e})")]
    ScatteringNotIdentity { residual: f64 },

    #[error("no steady state: smallest Liouvillian singular value {smallest:.3e}")]
    NoSteadyState { smallest: f64 },

    #[error("degenerate steady state: null space of dimension {nullity}")]
    DegenerateSteadyState { nullity: usize },

    #[error("integration failed at step {step}: {reason}")]
    Integration { step: usize, reason: String },

    #[error("unnormalised state lost positivity of its trace ({trace:.3e})")]
    NormalizationBreakdown { trace: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn mismatch(
        context: impl Into<String>,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Attach a pipeline stage name.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
