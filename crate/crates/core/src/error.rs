use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mode index {index} is invalid for a {n_modes}-mode circuit")]
    InvalidModeIndex { index: usize, n_modes: usize },

    #[error("circuit still contains loss elements; expand them into beam splitters first")]
    LossNotExpanded,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument {value} is outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    /// The post-selection event is too improbable for the weak value to be
    /// well defined (the dark-port singularity).
    #[error(
        "post-selection `{event}` is too rare: probability {probability:.3e} is below p_min = {p_min:.1e} (dark port)"
    )]
    PostSelectionTooRare { event: String, probability: f64, p_min: f64 },

    #[error("Fock basis of {n_modes} modes with cutoff {cutoff} has {size} states, above the limit {limit}")]
    SizeLimitExceeded { n_modes: usize, cutoff: usize, size: u128, limit: usize },

    #[error("discarded coherent-state tail {tail:.3e} exceeds tolerance {tolerance:.1e}; raise the cutoff")]
    TailTooLarge { tail: f64, tolerance: f64 },

    #[error("unitary decomposition failed: {0}")]
    DecompositionFailed(String),

    #[error("final state does not factorize across the detected mode and the rest (residual {residual:.3e})")]
    NotFactorizable { residual: f64 },

    #[error("no shots with outcome `{0}`; cannot form a conditional estimate")]
    EmptyPopulation(&'static str),
}
