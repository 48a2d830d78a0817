//! Brute-force ground truth on a truncated multimode Fock space.
//!
//! Passive elements act exactly inside each total-photon-number sector, so the
//! cutoff only truncates state preparation, never the evolution.

mod basis;
mod oracle;
mod state;

pub use basis::{FockBasis, DEFAULT_SIZE_LIMIT};
pub use oracle::{
    cutoff_for_input, cutoff_for_mean, generalized_weak_value, lemma_check, oracle_weak_value,
    prepare_input, LemmaCheck, Observable, OracleConfig, OracleRun, PostSelectionOperator,
};
pub use state::{lift_and_apply, prepare_coherent, FockStateVector, Transformation, DEFAULT_TAIL_TOLERANCE};
