//! Cumulant mean-field simulation of a driven microwave resonator coupled to
//! a thermally excited, optically cooled ensemble of two-level spins, with an
//! exact small-N Lindblad reference, Dicke-coordinate analytics and scenario
//! runners.
//!
//! All frequencies and rates are angular (rad/s) internally.

pub mod constants;
pub mod cumulant;
pub mod error;
pub mod experiments;
pub mod hybrid;
pub mod integrator;
pub mod io;
pub mod model;
pub mod oracle;
pub mod state;

pub use error::{Error, IntegrationError, IntegrationFailure, Result};
pub use model::{DriveProtocol, DriveSegment, SystemParams, ThermalOccupancies};
pub use state::{CumulantState, DickeCoordinates, Slot};
