use thiserror::Error;

/// Errors raised by the library surface.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("angle must be finite, got {0}")]
    NonFiniteAngle(f64),

    #[error("invalid outcome {0}: expected +1 or -1")]
    InvalidOutcome(i64),

    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),

    #[error("invalid lambda law: {0}")]
    InvalidLaw(String),

    #[error("model `{0}` has no hidden variable")]
    NoHiddenVariable(String),

    #[error("mixed lambda-law kinds in one ensemble: atomic and continuous mutual information are not comparable")]
    MixedLambdaKinds,

    #[error("invalid settings ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("trial count must be at least 1")]
    ZeroTrials,

    #[error("batch size must be at least 1")]
    ZeroBatch,

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
