//! Ramped-drive runs and the named standard scenarios.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::gate::{gate_tomography, pulse_grid, pulsed_config, GateMatrix};
use super::io::{describe_config, describe_grid, gate_json, write_json, write_table_csv, write_trajectory_csv};
use super::rabi::{extract_rabi_frequency, RabiFit};
use crate::analytic::{beta_ratio, omega_eff_collinear, p_max_00, p_max_11, DispersiveParams};
use crate::error::{Error, Result};
use crate::fockspace::{BasisIndex, DotPair, StateVector};
use crate::model::{Envelope, ModelKind, Scheme, SystemConfig, DEFAULT_RAMP_TIME};
use crate::propagator::{evolve, TimeGrid, Trajectory, DEFAULT_NORM_TOL, DEFAULT_STEP_FACTOR};

/// Splitting parameter used when a run does not depend on it.
pub const DEFAULT_ALPHA: f64 = 2.0;

/// Continuous drive switched on by a `sin^2` ramp so that the system
/// follows the dressed states, then held constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampedDrive {
    pub omega_c: f64,
    /// Common detuning `Delta`.
    pub delta: f64,
    pub alpha: f64,
    /// Peak amplitudes of lasers 1 and 2.
    pub omega1: f64,
    pub omega2: f64,
    pub scheme: Scheme,
    pub model: ModelKind,
    pub initial: BasisIndex,
    pub ramp_time: f64,
    /// Duration after the ramp, in periods of the estimated effective Rabi
    /// frequency.
    pub periods: f64,
    pub step_factor: f64,
    pub n_max: Option<usize>,
}

impl RampedDrive {
    /// Scheme 2 with each laser driving only its own dot, starting in
    /// `|01,n>`.
    pub fn per_dot(omega_c: f64, delta: f64, n: usize) -> Self {
        Self {
            omega_c,
            delta,
            alpha: DEFAULT_ALPHA,
            omega1: 1.0,
            omega2: 1.0,
            scheme: Scheme::Two,
            model: ModelKind::PerDot,
            initial: BasisIndex::new(0, 1, n),
            ramp_time: DEFAULT_RAMP_TIME,
            periods: 2.5,
            step_factor: DEFAULT_STEP_FACTOR,
            n_max: None,
        }
    }

    /// Scheme 2 with both lasers on both dots and `Omega_2 = beta Omega_1`.
    pub fn collinear(omega_c: f64, delta: f64, alpha: f64, beta: f64, n: usize) -> Self {
        Self {
            alpha,
            omega2: beta,
            model: ModelKind::Collinear,
            periods: 1.5,
            ..Self::per_dot(omega_c, delta, n)
        }
    }

    /// Scheme 1 (`Delta_22 = -Delta_11`), per-dot drive, starting in `|00,n>`.
    pub fn scheme_one(omega_c: f64, delta: f64, n: usize) -> Self {
        Self {
            scheme: Scheme::One,
            initial: BasisIndex::new(0, 0, n),
            periods: 1.5,
            ..Self::per_dot(omega_c, delta, n)
        }
    }

    pub fn config(&self) -> Result<SystemConfig> {
        let e1 = Envelope::ramp(self.omega1, self.ramp_time)?;
        let e2 = Envelope::ramp(self.omega2, self.ramp_time)?;
        let cfg = SystemConfig::dispersive(self.omega_c, self.delta, self.alpha, self.scheme, self.model, [e1, e2], self.initial)?;
        let cfg = match self.n_max {
            Some(m) => cfg.with_n_max(m),
            None => cfg,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Second-order estimate of the transfer frequency, used to size the
    /// window. Both schemes share the same closed form.
    pub fn expected_frequency(&self) -> Result<f64> {
        let p = DispersiveParams::single(1.0, self.omega_c, self.delta.abs()).with_amplitudes(self.omega1, self.omega2);
        Ok(omega_eff_collinear(&p)?.abs())
    }

    pub fn t_end(&self) -> Result<f64> {
        let w = self.expected_frequency()?;
        if !(w > 0.0) {
            return Err(Error::invalid("drive has zero effective coupling"));
        }
        Ok(self.ramp_time + self.periods * 2.0 * std::f64::consts::PI / w)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let cfg = self.config()?;
        TimeGrid::new(0.0, self.t_end()?, self.step_factor / cfg.max_phase_frequency())
    }

    pub fn run(&self) -> Result<Trajectory> {
        let cfg = self.config()?;
        let psi0 = StateVector::basis(cfg.n_max, cfg.initial)?;
        Ok(evolve(&cfg, &psi0, &self.grid()?, DEFAULT_NORM_TOL)?.0)
    }

    fn params(&self) -> DispersiveParams {
        DispersiveParams::single(self.omega1, self.omega_c, self.delta)
            .with_amplitudes(self.omega1, self.omega2)
            .with_alpha(self.alpha)
            .with_n(self.initial.n as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiPoint {
    pub omega_c: f64,
    pub delta: f64,
    pub n: usize,
    pub predicted: f64,
    pub fit: RabiFit,
    pub relative_error: f64,
    pub norm_drift: f64,
    /// Peak pair populations over the whole run, ramp included.
    pub step_peaks: [f64; 4],
}

/// Runs `drive` and fits the target population after the ramp.
pub fn rabi_point(drive: &RampedDrive, channel: DotPair) -> Result<RabiPoint> {
    let traj = drive.run()?;
    let fit = extract_rabi_frequency(&traj.window(drive.ramp_time), channel)?;
    let predicted = drive.expected_frequency()?;
    Ok(RabiPoint {
        omega_c: drive.omega_c,
        delta: drive.delta,
        n: drive.initial.n,
        predicted,
        relative_error: (fit.frequency - predicted).abs() / predicted,
        fit,
        norm_drift: traj.norm_drift(),
        step_peaks: traj.step_peaks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    /// `w_c - Delta`.
    pub gap: f64,
    pub delta: f64,
    pub max_p00: f64,
    pub max_p11: f64,
    pub predicted_p00: f64,
    pub predicted_p11: f64,
    pub max_p10: f64,
}

/// For each gap `w_c - Delta`, the largest `P00` and `P11` reached over
/// every integration step, next to their closed-form predictions.
pub fn max_population_scan(template: &RampedDrive, gaps: &[f64]) -> Result<Vec<ScanRow>> {
    if template.scheme != Scheme::Two || template.model != ModelKind::PerDot {
        return Err(Error::invalid("population scans use scheme 2 with the per-dot model"));
    }
    if template.initial.pair() != DotPair::P01 {
        return Err(Error::invalid("population scans start from |01,n>"));
    }
    gaps.par_iter()
        .enumerate()
        .map(|(index, &gap)| {
            let row = || -> Result<ScanRow> {
                let drive = RampedDrive {
                    delta: template.omega_c - gap,
                    ..template.clone()
                };
                let traj = drive.run()?;
                let p = drive.params();
                Ok(ScanRow {
                    gap,
                    delta: drive.delta,
                    max_p00: traj.step_peaks[0],
                    max_p11: traj.step_peaks[3],
                    predicted_p00: p_max_00(&p)?,
                    predicted_p11: p_max_11(&p)?,
                    max_p10: traj.step_peaks[2],
                })
            };
            row().map_err(|e| Error::Sweep {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Peak populations of a single run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub max_p00: f64,
    pub max_p01: f64,
    pub max_p10: f64,
    pub max_p11: f64,
    pub norm_drift: f64,
}

impl PeakSummary {
    pub fn of(traj: &Trajectory) -> Self {
        let [a, b, c, d] = traj.step_peaks;
        Self {
            max_p00: a,
            max_p01: b,
            max_p10: c,
            max_p11: d,
            norm_drift: traj.norm_drift(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Fig2,
    Fig3,
    Fig5,
    Fig6,
    Sqrtswap,
    Scheme1Demo,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Fig2,
        Scenario::Fig3,
        Scenario::Fig5,
        Scenario::Fig6,
        Scenario::Sqrtswap,
        Scenario::Scheme1Demo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
            Scenario::Fig5 => "fig5",
            Scenario::Fig6 => "fig6",
            Scenario::Sqrtswap => "sqrtswap",
            Scenario::Scheme1Demo => "scheme1-demo",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Pinned values.
pub const FIG2_CAVITY: [f64; 4] = [60.0, 80.0, 100.0, 140.0];
pub const FIG2_GAPS: [f64; 2] = [10.0, 15.0];
pub const FIG2_PHOTONS: usize = 0;
pub const FIG3_GAPS: [f64; 5] = [10.0, 15.0, 20.0, 25.0, 30.0];
pub const FIG3_PHOTONS: usize = 2;
pub const FIG56_CAVITY: f64 = 100.0;
pub const FIG56_GAP: f64 = 20.0;
pub const FIG56_ALPHA: f64 = 2.0;
pub const FIG56_PHOTONS: usize = 2;
pub const FIG6_BETA: f64 = 1.6837;
pub const SQRTSWAP_CAVITY: f64 = 1000.0;
pub const SQRTSWAP_DELTA: f64 = 990.0;
pub const SQRTSWAP_ALPHA: f64 = 10.0;
pub const SQRTSWAP_TAU: f64 = 16.8763;
pub const SCHEME1_CAVITY: f64 = 100.0;
pub const SCHEME1_DELTA: f64 = 80.0;
pub const SCHEME1_PHOTONS: usize = 2;

/// Optional replacements for pinned values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub n: Option<usize>,
    pub n_max: Option<usize>,
    pub step_factor: Option<f64>,
    pub tau: Option<f64>,
    pub beta: Option<f64>,
}

impl Overrides {
    fn apply(&self, mut drive: RampedDrive) -> RampedDrive {
        if let Some(n) = self.n {
            drive.initial.n = n;
        }
        drive.n_max = self.n_max.or(drive.n_max);
        drive.step_factor = self.step_factor.unwrap_or(drive.step_factor);
        drive
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutput {
    pub scenario: Scenario,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

fn fig2_drives(o: &Overrides) -> Vec<RampedDrive> {
    let mut out = Vec::new();
    for wc in FIG2_CAVITY {
        for gap in FIG2_GAPS {
            out.push(o.apply(RampedDrive::per_dot(wc, wc - gap, FIG2_PHOTONS)));
        }
    }
    out
}

fn fig56_drive(scenario: Scenario, o: &Overrides) -> RampedDrive {
    let beta = match scenario {
        Scenario::Fig6 => o.beta.unwrap_or(FIG6_BETA),
        _ => o.beta.unwrap_or(1.0),
    };
    o.apply(RampedDrive::collinear(FIG56_CAVITY, FIG56_CAVITY - FIG56_GAP, FIG56_ALPHA, beta, FIG56_PHOTONS))
}

fn sqrtswap_setup(o: &Overrides) -> Result<(SystemConfig, TimeGrid, usize)> {
    let n = o.n.unwrap_or(0);
    let tau = o.tau.unwrap_or(SQRTSWAP_TAU);
    let mut cfg = pulsed_config(SQRTSWAP_CAVITY, SQRTSWAP_DELTA, SQRTSWAP_ALPHA, tau, o.beta, n)?;
    if let Some(m) = o.n_max {
        cfg = cfg.with_n_max(m);
        cfg.validate()?;
    }
    let grid = pulse_grid(&cfg, o.step_factor.unwrap_or(DEFAULT_STEP_FACTOR))?;
    Ok((cfg, grid, n))
}

fn drive_description(d: &RampedDrive) -> Result<Value> {
    Ok(json!({
        "drive": d,
        "config": describe_config(&d.config()?),
        "grid": describe_grid(&d.grid()?),
        "expected_frequency": d.expected_frequency()?,
    }))
}

/// Resolved parameter set of a scenario, without running it.
pub fn describe_scenario(scenario: Scenario, o: &Overrides) -> Result<Value> {
    Ok(match scenario {
        Scenario::Fig2 => Value::Array(fig2_drives(o).iter().map(drive_description).collect::<Result<_>>()?),
        Scenario::Fig3 => {
            let template = o.apply(RampedDrive::per_dot(100.0, 100.0 - FIG3_GAPS[0], FIG3_PHOTONS));
            json!({ "gaps": FIG3_GAPS, "template": drive_description(&template)? })
        }
        Scenario::Fig5 | Scenario::Fig6 => {
            let d = fig56_drive(scenario, o);
            let beta_eq = beta_ratio(&d.params())?;
            json!({ "run": drive_description(&d)?, "beta_balanced": beta_eq })
        }
        Scenario::Sqrtswap => {
            let (cfg, grid, n) = sqrtswap_setup(o)?;
            json!({ "config": describe_config(&cfg), "grid": describe_grid(&grid), "photon_sector": n })
        }
        Scenario::Scheme1Demo => drive_description(&o.apply(RampedDrive::scheme_one(SCHEME1_CAVITY, SCHEME1_DELTA, SCHEME1_PHOTONS)))?,
    })
}

/// Runs a named scenario and writes its artifacts into `out_dir`.
pub fn run_scenario(scenario: Scenario, o: &Overrides, out_dir: &Path) -> Result<ScenarioOutput> {
    let name = scenario.name();
    let mut files = Vec::new();
    let parameters = describe_scenario(scenario, o)?;
    let summary = match scenario {
        Scenario::Fig2 => {
            let points: Vec<RabiPoint> = fig2_drives(o)
                .par_iter()
                .enumerate()
                .map(|(index, d)| {
                    rabi_point(d, DotPair::P10).map_err(|e| Error::Sweep {
                        index,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<_>>()?;
            let rows: Vec<Vec<f64>> = points
                .iter()
                .map(|p| {
                    vec![
                        p.omega_c,
                        p.delta,
                        p.n as f64,
                        p.predicted,
                        p.fit.frequency,
                        p.relative_error,
                        p.fit.amplitude,
                        p.fit.residual,
                    ]
                })
                .collect();
            let csv = out_dir.join("fig2.csv");
            write_table_csv(
                &csv,
                &["omega_c", "delta", "n", "omega_eff_predicted", "omega_eff_fit", "relative_error", "amplitude", "residual"],
                &rows,
            )?;
            files.push(csv);
            json!({ "points": points })
        }
        Scenario::Fig3 => {
            let template = o.apply(RampedDrive::per_dot(100.0, 100.0 - FIG3_GAPS[0], FIG3_PHOTONS));
            let rows = max_population_scan(&template, &FIG3_GAPS)?;
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r.gap, r.delta, r.max_p00, r.max_p11, r.predicted_p00, r.predicted_p11])
                .collect();
            let csv = out_dir.join("fig3.csv");
            write_table_csv(&csv, &["gap", "delta", "max_P00", "max_P11", "predicted_P00", "predicted_P11"], &table)?;
            files.push(csv);
            json!({ "rows": rows })
        }
        Scenario::Fig5 | Scenario::Fig6 | Scenario::Scheme1Demo => {
            let d = match scenario {
                Scenario::Scheme1Demo => o.apply(RampedDrive::scheme_one(SCHEME1_CAVITY, SCHEME1_DELTA, SCHEME1_PHOTONS)),
                _ => fig56_drive(scenario, o),
            };
            let traj = d.run()?;
            let csv = out_dir.join(format!("{name}_trajectory.csv"));
            write_trajectory_csv(&csv, &traj)?;
            files.push(csv);
            json!({ "peaks": PeakSummary::of(&traj) })
        }
        Scenario::Sqrtswap => {
            let (cfg, grid, n) = sqrtswap_setup(o)?;
            let u = gate_tomography(&cfg, &grid, n)?;
            let path = out_dir.join("sqrtswap_gate.json");
            write_json(&path, &gate_json(&u, parameters.clone()))?;
            files.push(path);
            json!({ "gate": u, "fidelity_vs_sqrtswap": super::gate::gate_fidelity(&u, &GateMatrix::sqrt_swap()) })
        }
    };
    let report = json!({ "scenario": scenario, "parameters": parameters, "summary": summary });
    let path = out_dir.join(format!("{name}.json"));
    write_json(&path, &report)?;
    files.push(path);
    Ok(ScenarioOutput { scenario, files, summary })
}
