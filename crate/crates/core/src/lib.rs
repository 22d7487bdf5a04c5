//! Normal modes, Mølmer–Sørensen pulse design and sympathetic-cooling
//! analysis for linear mixed-species ion chains.
//!
//! Frequencies are angular (rad/s) and lengths, masses and energies SI unless
//! a name says otherwise; species masses are in atomic mass units.

pub mod chain;
pub mod constants;
pub mod cooling;
pub mod error;
pub mod fock;
pub mod modes;
pub mod msgate;
pub mod optimize;
pub mod pulses;
mod quad;

pub use chain::{Direction, IonChain, Species, TransverseModel, TrapConfig};
pub use error::{Error, Result};
pub use modes::{NormalModeSet, SpectralStats};
pub use msgate::{FidelityModel, GateResult};
pub use pulses::{AmEnvelope, AmFmPulse, DualSegmentedAm, FmProfile, PulseProgram, SegmentedAm};
