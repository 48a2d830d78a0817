//! Weakly coupled pointer, exact posteriors and shot sampling.

mod posterior;
mod sectors;
mod shots;

pub use posterior::{PointerConfig, PointerPosterior, Variable};
pub use sectors::{click_sectors, sector_amplitudes, SectorAmplitudes};
pub use shots::{
    estimate_protocol, run_shots, ComponentEstimate, Estimate, Outcome, Protocol, ProtocolEstimate, ShotModel,
    ShotRecord,
};
