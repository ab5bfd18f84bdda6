use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("non-finite loss component `{0}`")]
    NonFinite(String),
    #[error("critic is not twice differentiable; gradient penalty needs double backward")]
    NonDifferentiableCritic,
    #[error("wrong critic variant: expected {expected} input, got {got}")]
    WrongCriticVariant { expected: &'static str, got: String },
    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("split for lambda {lambda} left the {side} side empty")]
    EmptySplit { lambda: f64, side: &'static str },
    #[error("missing model: {0}")]
    MissingModel(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
