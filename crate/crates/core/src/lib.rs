//! Two quantum dots coupled to one cavity mode and driven by two collinear
//! lasers.
//!
//! * [`fockspace`]: truncated product basis, states and operators.
//! * [`model`]: parameters, envelopes and Hamiltonian builders.
//! * [`propagator`]: certified time integration.
//! * [`analytic`]: closed-form dispersive results and the six-state model.
//! * [`experiments`]: Rabi fits, leakage scans, gate tomography, calibration
//!   and pinned scenarios.
//! * [`cli`]: config parsing and subcommand dispatch for the binary.

pub mod analytic;
pub mod cli;
pub mod experiments;
pub mod error;
pub mod fockspace;
pub mod model;
pub mod propagator;

pub use error::{Error, Result};
