//! Cold-atom simulator of the quantum Rabi model.
//!
//! Three propagators describe the same physics at decreasing fidelity:
//!
//! * [`full`]: one atom in a lattice plus harmonic trap, on a position grid;
//! * [`periodic`]: the two lowest Bloch bands on a periodic quasi-momentum
//!   grid (the quantum Rabi model in a periodic phase space);
//! * [`fock`]: the ideal quantum Rabi model in a truncated Fock space.
//!
//! [`scenario`] wires them together with cross-model comparison, the builtin
//! figure scenarios and file output.

pub mod bands;
pub mod error;
pub mod fock;
pub mod full;
pub mod io;
pub mod periodic;
pub mod plot;
pub mod scenario;
pub mod series;
mod spectral;
pub mod units;

pub use error::{Error, Result};
pub use full::{fold_to_bz, GridSpec, GridWavefunction, QubitAmplitudes};
pub use series::{ObservableSeries, Observables, Sample};
pub use units::{RabiParams, SystemParams};
