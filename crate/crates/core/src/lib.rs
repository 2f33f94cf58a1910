//! Delay-margin analysis for PV-rich distribution feeders.
//!
//! The crate builds the linearized delayed state-space model of a feeder
//! whose PV inverters curtail active power from a remote voltage
//! controller, certifies delay-dependent stability with a linear matrix
//! inequality solved by an embedded semidefinite feasibility kernel, and
//! validates certified margins against an exact characteristic-root
//! oracle and a delay differential equation simulator.
//!
//! Module map:
//! - [`powernet`]: bus impedance matrix and voltage sensitivities
//! - [`pvplant`]: per-PV subsystem and grid-voltage controller realizations
//! - [`closedloop`]: the n-PV delayed closed-loop model
//! - [`lmicert`]: the delay-dependent LMI and certificate auditing
//! - [`sdpkernel`]: dense semidefinite feasibility solver
//! - [`margin`]: certified and exact delay margins, gain sweeps
//! - [`ddesim`]: fixed-step DDE integrator with history interpolation

pub mod closedloop;
pub mod ddesim;
mod error;
pub mod lmicert;
pub mod margin;
mod numerics;
pub mod powernet;
pub mod pvplant;
pub mod sdpkernel;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
