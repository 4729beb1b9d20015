use alloc::string::String;

/// Errors raised by the simulation, transport and verification routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid point")]
    InvalidPoint,
    #[error("envelope undefined without cut-off")]
    EnvelopeWithoutCutoff,
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("non-integrable velocity law")]
    NonIntegrableVelocityLaw,
    #[error("numerical blow-up at step {step}")]
    NumericalBlowUp { step: u64 },
    #[error("replica {replica}: numerical blow-up at step {step}")]
    ReplicaBlowUp { replica: u32, step: u64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("unbalanced not supported")]
    Unbalanced,
    #[error("assignment size {0} exceeds the exact-solver cap")]
    AssignmentTooLarge(usize),
    #[error("empty sample")]
    EmptySample,
    #[error("grid underflow")]
    GridUnderflow,
    #[error("degenerate bandwidth")]
    DegenerateBandwidth,
    #[error("time {0} outside grid")]
    OutsideGrid(f64),
    #[error("initial datum too large for log-Gronwall")]
    InitialDatumTooLarge,
    #[error("bound blown up")]
    BoundBlownUp,
    #[error("analytic sup-norm required")]
    AnalyticSupNormRequired,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
