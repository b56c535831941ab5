//! Artifact writers. Floats are printed with Rust's shortest round-trip
//! formatting, so files carry full precision and identical runs produce
//! identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::gate::{gate_fidelity, GateMatrix};
use crate::error::Result;
use crate::fockspace::DotPair;
use crate::model::{ModelKind, SystemConfig};
use crate::propagator::{TimeGrid, Trajectory};

pub const TRAJECTORY_HEADER: &str = "t,P00,P01,P10,P11,norm,n_mean";

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (traj.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for i in 0..traj.len() {
        let p = traj.populations[i];
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            traj.times[i], p[0], p[1], p[2], p[3], traj.norm[i], traj.photon_mean[i]
        ));
    }
    out
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_text(path, &trajectory_csv(traj))
}

/// Writes rows of `header`-ordered columns.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Resolved parameters of a configuration, derived quantities included.
pub fn describe_config(cfg: &SystemConfig) -> Value {
    let detunings: Vec<Vec<f64>> = (0..2).map(|j| (0..2).map(|k| cfg.detuning_idx(j, k)).collect()).collect();
    json!({
        "omega_c": cfg.omega_c,
        "exciton_frequencies": [cfg.dots[0].omega_1, cfg.dots[1].omega_1],
        "dot_splitting": cfg.dot_splitting(),
        "alpha": cfg.alpha,
        "laser_frequencies": [cfg.laser_frequency(0), cfg.laser_frequency(1)],
        "detunings": detunings,
        "coupling": cfg.coupling,
        "lasers": cfg.lasers,
        "scheme": cfg.scheme,
        "model": cfg.model,
        "kept_couplings": (0..2).map(|j| (0..2).map(|k| cfg.keeps(j, k)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "n_max": cfg.n_max,
        "dimension": cfg.dim(),
        "initial": cfg.initial.to_string(),
        "max_phase_frequency": cfg.max_phase_frequency(),
        "frame": if cfg.model == ModelKind::Lab { "lab" } else { "rotating" },
    })
}

pub fn describe_grid(grid: &TimeGrid) -> Value {
    json!({
        "t_start": grid.t_start,
        "t_end": grid.t_end,
        "dt": grid.dt(),
        "steps": grid.steps(),
        "sample_stride": grid.stride(),
    })
}

/// Gate artifact: basis order, sector, `[re, im]` entries, defect,
/// fidelity against canonical `sqrt(SWAP)` and the conditional phase.
pub fn gate_json(u: &GateMatrix, parameters: Value) -> Value {
    let n = u.photon_sector;
    let basis: Vec<String> = DotPair::ALL
        .iter()
        .map(|p| {
            let (a, b) = p.levels();
            format!("|{a}{b},{n}>")
        })
        .collect();
    json!({
        "basis_order": basis,
        "photon_sector": n,
        "phase_convention": u.phase_convention,
        "entries": u.entries,
        "unitarity_defect": u.unitarity_defect,
        "fidelity_vs_sqrtswap": gate_fidelity(u, &GateMatrix::sqrt_swap()),
        "conditional_phase": u.conditional_phase(),
        "parameters": parameters,
    })
}
