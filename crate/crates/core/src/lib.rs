//! Photon-number wave packets in a driven two-level-system/cavity system.
//!
//! The crate integrates the driven Jaynes-Cummings model exactly in a
//! truncated Fock basis, implements the adiabatic coherent-state reduced model
//! of individual packets, classifies the dynamical regime of a parameter set,
//! synthesizes piecewise-constant drive protocols that create a requested
//! number of packets, and reads packet structure back out of observables.

pub mod error;
pub mod model;
pub mod solver;
pub mod variational;
pub mod classifier;
pub mod analysis;
pub mod protocol;
pub mod io;

pub use error::{Error, Result};
