//! Thermodynamics of a slowly driven qubit weakly coupled to bosonic baths.
//!
//! The crate computes frozen and adiabatic states from a weak-coupling master
//! equation, the thermal geometric tensor, pumped heat and power, Berry
//! curvature and Chern numbers, thermal-machine figures of merit and
//! steady-state heat transport. Units are ħ = k_B = 1.

pub mod error;
pub mod geometry;
pub mod machines;
pub mod meq;
pub mod model;
pub mod numeric;
pub mod protocol;
pub mod pumping;
pub mod table;
pub mod transport;

pub use error::{Error, Result};
pub use model::{BathSpec, BlochState, Coupling, FieldMap, MapKind, Spectrum};
pub use protocol::Protocol;
