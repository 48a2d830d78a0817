//! Weak values of photon number in passive linear-optical circuits.
//!
//! * [`optics`]: circuits, mode matrices, loss as beam splitters.
//! * [`weak_value`]: closed forms for coherent and single-photon inputs and
//!   the subtract-and-scale reconstruction of the single-photon click weak
//!   value from coherent-state data.
//! * [`fock`]: truncated Fock-space oracle.
//! * [`measurement`]: Gaussian pointer model and Monte-Carlo shots.
//! * [`dsl`]: the `.wvc` circuit description format.

pub mod dsl;
pub mod error;
pub mod fock;
pub mod measurement;
pub mod optics;
pub mod weak_value;

pub use error::{Error, Result};
pub use optics::{Circuit, CircuitElement, CoherentVector, ModeMatrix};
pub use weak_value::{InputState, PostSelection, WeakValue};
