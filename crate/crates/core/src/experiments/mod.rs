//! Rabi-frequency extraction, population scans, gate tomography with
//! calibration, and the named scenario runners.

mod gate;
mod io;
mod rabi;
mod scenarios;

pub use gate::{
    calibrate_tau, fidelity_at, gate_fidelity, gate_tomography, phase_fix, pulse_grid, pulse_width, pulsed_config,
    with_pulse_width, Calibration, CalibrationOptions, GateMatrix, PhaseConvention, PULSE_CENTER, PULSE_WINDOW,
};
pub use io::{
    describe_config, describe_grid, gate_json, trajectory_csv, write_json, write_table_csv, write_trajectory_csv,
    TRAJECTORY_HEADER,
};
pub use rabi::{extract_rabi_frequency, RabiFit};
pub use scenarios::*;
