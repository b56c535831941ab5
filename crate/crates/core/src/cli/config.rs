//! TOML run configuration with sections `[system]`, `[lasers]`, `[grid]`
//! and `[output]`.
//!
//! ```toml
//! [system]
//! omega_c = 100.0
//! delta = 80.0        # common detuning Delta
//! alpha = 2.0         # dot splitting delta = alpha (omega_c - Delta)
//! scheme = 2
//! model = "collinear" # collinear | per_dot | lab
//! initial = "01"
//! n = 2
//!
//! [lasers]
//! shape = "ramp"      # ramp | gaussian
//! omega1 = 1.0
//! beta = 1.6837       # or omega2 = ...
//! ramp_time = 50.0
//!
//! [grid]
//! t_end = 400.0
//! step_factor = 0.05
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytic::{beta_ratio, DispersiveParams};
use crate::error::{Error, Result};
use crate::experiments::{describe_config, describe_grid, RampedDrive, PULSE_CENTER, PULSE_WINDOW};
use crate::fockspace::{BasisIndex, DotPair};
use crate::model::{Envelope, ModelKind, Scheme, SystemConfig, DEFAULT_RAMP_TIME, POLE_GUARD};
use crate::propagator::{TimeGrid, DEFAULT_NORM_TOL, DEFAULT_STEP_FACTOR, MAX_STEP_FACTOR};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "DOTCAVITY_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "out";

const SECTIONS: [(&str, &[&str]); 4] = [
    ("system", &["omega_c", "delta", "alpha", "scheme", "model", "initial", "n", "n_max"]),
    ("lasers", &["shape", "omega1", "omega2", "beta", "phase2", "ramp_time", "tau"]),
    ("grid", &["t_start", "t_end", "step_factor", "samples", "norm_tol"]),
    ("output", &["dir", "prefix"]),
];

fn default_alpha() -> f64 {
    2.0
}
fn default_scheme() -> u8 {
    2
}
fn default_model() -> ModelKind {
    ModelKind::Collinear
}
fn default_initial() -> String {
    "01".into()
}
fn default_shape() -> String {
    "ramp".into()
}
fn default_omega() -> f64 {
    1.0
}
fn default_ramp() -> f64 {
    DEFAULT_RAMP_TIME
}
fn default_step() -> f64 {
    DEFAULT_STEP_FACTOR
}
fn default_norm_tol() -> f64 {
    DEFAULT_NORM_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub omega_c: f64,
    pub delta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_scheme")]
    pub scheme: u8,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default = "default_initial")]
    pub initial: String,
    #[serde(default)]
    pub n: usize,
    pub n_max: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSection {
    #[serde(default = "default_shape")]
    pub shape: String,
    #[serde(default = "default_omega")]
    pub omega1: f64,
    pub omega2: Option<f64>,
    pub beta: Option<f64>,
    /// Phase of laser 2 relative to laser 1, radians.
    #[serde(default)]
    pub phase2: f64,
    #[serde(default = "default_ramp")]
    pub ramp_time: f64,
    /// Gaussian width; the pulse is centred at `5 tau`.
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: Option<f64>,
    #[serde(default = "default_step")]
    pub step_factor: f64,
    pub samples: Option<usize>,
    #[serde(default = "default_norm_tol")]
    pub norm_tol: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            t_end: None,
            step_factor: DEFAULT_STEP_FACTOR,
            samples: None,
            norm_tol: DEFAULT_NORM_TOL,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub prefix: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub system: SystemSection,
    pub lasers: LaserSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Validated configuration ready to run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub file: FileConfig,
    pub system: SystemConfig,
    pub grid: TimeGrid,
    pub norm_tol: f64,
    pub output_dir: PathBuf,
    pub prefix: String,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{key}` {msg}"))
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, format!("must be finite, got {v}")))
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

/// Rejects keys and sections that the format does not define.
fn check_keys(table: &toml::Table) -> Result<()> {
    for (section, value) in table {
        let Some((_, keys)) = SECTIONS.iter().find(|(name, _)| name == section) else {
            return Err(Error::UnknownKey {
                section: "root".into(),
                key: section.clone(),
            });
        };
        let Some(inner) = value.as_table() else {
            return Err(Error::ConfigSyntax(format!("`{section}` must be a table")));
        };
        for key in inner.keys() {
            if !keys.contains(&key.as_str()) {
                return Err(Error::UnknownKey {
                    section: section.clone(),
                    key: key.clone(),
                });
            }
        }
    }
    Ok(())
}

pub fn parse_config_str(text: &str) -> Result<FileConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::ConfigSyntax(e.to_string()))?;
    check_keys(&table)?;
    table.try_into().map_err(|e: toml::de::Error| Error::ConfigSyntax(e.to_string()))
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_file(parse_config_str(&text)?)
}

impl RunConfig {
    pub fn from_file(file: FileConfig) -> Result<Self> {
        let s = &file.system;
        let l = &file.lasers;
        let g = &file.grid;
        let omega_c = positive("system.omega_c", s.omega_c)?;
        let delta = finite("system.delta", s.delta)?;
        if (delta.abs() - omega_c).abs() < POLE_GUARD {
            return Err(bad("system.delta", format!("= {delta} sits on the pole |delta| = omega_c = {omega_c}")));
        }
        let alpha = finite("system.alpha", s.alpha)?;
        let scheme = match s.scheme {
            1 => Scheme::One,
            2 => Scheme::Two,
            other => return Err(bad("system.scheme", format!("must be 1 or 2, got {other}"))),
        };
        let pair: DotPair = s.initial.parse().map_err(|_| bad("system.initial", format!("must be one of 00, 01, 10, 11, got `{}`", s.initial)))?;
        let (q1, q2) = pair.levels();
        let initial = BasisIndex::new(q1, q2, s.n);
        if let Some(m) = s.n_max {
            if m < s.n {
                return Err(bad("system.n_max", format!("= {m} is below the initial photon number {}", s.n)));
            }
        }

        let omega1 = finite("lasers.omega1", l.omega1)?;
        let omega2 = match (l.omega2, l.beta) {
            (Some(_), Some(_)) => return Err(bad("lasers.beta", "cannot be combined with `lasers.omega2`")),
            (Some(w), None) => finite("lasers.omega2", w)?,
            (None, Some(b)) => finite("lasers.beta", b)? * omega1,
            (None, None) => omega1,
        };
        let phase2 = finite("lasers.phase2", l.phase2)?;
        let (e1, e2, default_end) = match l.shape.as_str() {
            "ramp" => {
                let ramp = positive("lasers.ramp_time", l.ramp_time)?;
                let e1 = Envelope::ramp(omega1, ramp)?;
                let e2 = Envelope::ramp(omega2, ramp)?;
                (e1, e2, None)
            }
            "gaussian" => {
                let tau = positive("lasers.tau", l.tau.ok_or_else(|| bad("lasers.tau", "is required for gaussian pulses"))?)?;
                let e1 = Envelope::gaussian(omega1, PULSE_CENTER * tau, tau)?;
                let e2 = Envelope::gaussian(omega2, PULSE_CENTER * tau, tau)?;
                (e1, e2, Some(PULSE_WINDOW * tau))
            }
            other => return Err(bad("lasers.shape", format!("must be `ramp` or `gaussian`, got `{other}`"))),
        };
        let e2 = e2.with_scale(C64::from_polar(1.0, phase2));
        let model = s.model;
        let mut system = SystemConfig::dispersive(omega_c, delta, alpha, scheme, model, [e1, e2], initial)?;
        if let Some(m) = s.n_max {
            system = system.with_n_max(m);
        }
        system.validate()?;

        let step_factor = positive("grid.step_factor", g.step_factor)?;
        if step_factor > MAX_STEP_FACTOR {
            return Err(bad("grid.step_factor", format!("= {step_factor} exceeds the stability limit {MAX_STEP_FACTOR}")));
        }
        let t_start = finite("grid.t_start", g.t_start)?;
        let t_end = match (g.t_end, default_end) {
            (Some(t), _) => finite("grid.t_end", t)?,
            (None, Some(t)) => t,
            (None, None) => {
                let mut drive = ramped_drive_from(&file, &system)?;
                drive.periods = 2.5;
                drive.t_end()?
            }
        };
        if t_end <= t_start {
            return Err(bad("grid.t_end", format!("= {t_end} must exceed grid.t_start = {t_start}")));
        }
        let mut grid = TimeGrid::new(t_start, t_end, step_factor / system.max_phase_frequency())?;
        if let Some(samples) = g.samples {
            if samples == 0 {
                return Err(bad("grid.samples", "must be at least 1"));
            }
            grid = grid.with_stride(grid.steps().div_ceil(samples));
        }
        let norm_tol = positive("grid.norm_tol", g.norm_tol)?;
        let output_dir = file
            .output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        let prefix = file.output.prefix.clone().unwrap_or_else(|| "run".into());
        Ok(Self {
            file,
            system,
            grid,
            norm_tol,
            output_dir,
            prefix,
        })
    }

    pub fn is_gaussian(&self) -> bool {
        self.file.lasers.shape == "gaussian"
    }

    /// Ramped-drive description of the configuration (ramp envelopes only).
    pub fn ramped_drive(&self) -> Result<RampedDrive> {
        if self.file.lasers.phase2 != 0.0 {
            return Err(bad("lasers.phase2", "must be 0 for ramped-drive commands"));
        }
        ramped_drive_from(&self.file, &self.system)
    }

    /// Every resolved parameter, derived quantities included.
    pub fn describe(&self) -> Value {
        let s = &self.file.system;
        let beta = beta_ratio(&DispersiveParams::single(1.0, s.omega_c, s.delta).with_alpha(s.alpha)).ok();
        json!({
            "file": self.file,
            "config": describe_config(&self.system),
            "grid": describe_grid(&self.grid),
            "norm_tol": self.norm_tol,
            "beta_balanced": beta,
            "output_dir": self.output_dir,
            "prefix": self.prefix,
        })
    }
}

fn ramped_drive_from(file: &FileConfig, system: &SystemConfig) -> Result<RampedDrive> {
    if file.lasers.shape != "ramp" {
        return Err(Error::invalid("this command needs `lasers.shape = \"ramp\"`"));
    }
    let s = &file.system;
    Ok(RampedDrive {
        omega_c: s.omega_c,
        delta: s.delta,
        alpha: s.alpha,
        omega1: file.lasers.omega1,
        omega2: system.lasers[1].envelope.peak_modulus(),
        scheme: system.scheme,
        model: system.model,
        initial: system.initial,
        ramp_time: file.lasers.ramp_time,
        periods: 1.5,
        step_factor: file.grid.step_factor,
        n_max: Some(system.n_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG5: &str = r#"
[system]
omega_c = 100.0
delta = 80.0
alpha = 2.0
scheme = 2
model = "collinear"
initial = "01"
n = 2

[lasers]
shape = "ramp"
omega1 = 1.0
ramp_time = 50.0
"#;

    #[test]
    fn minimal_fig5_config() {
        let run = RunConfig::from_file(parse_config_str(FIG5).unwrap()).unwrap();
        assert_eq!(run.system.dot_splitting(), 40.0);
        assert_eq!(run.system.n_max, 8);
        assert!(run.grid.t_end > 50.0);
        assert_eq!(run.describe()["config"]["detunings"][1][0], 120.0);
    }

    #[test]
    fn pole_is_rejected_by_key() {
        let text = FIG5.replace("delta = 80.0", "delta = 100.0");
        let err = RunConfig::from_file(parse_config_str(&text).unwrap()).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("system.delta")), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let text = FIG5.replace("omega_c = 100.0", "omega_cavity = 100.0");
        match parse_config_str(&text) {
            Err(Error::UnknownKey { section, key }) => {
                assert_eq!(key, "omega_cavity");
                assert_eq!(section, "system");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config_str("[extra]\nx = 1\n"), Err(Error::UnknownKey { .. })));
    }

    #[test]
    fn syntax_and_type_errors() {
        assert!(matches!(parse_config_str("[system\n"), Err(Error::ConfigSyntax(_))));
        let text = FIG5.replace("omega_c = 100.0", "omega_c = \"big\"");
        assert!(matches!(parse_config_str(&text), Err(Error::ConfigSyntax(_))));
    }

    #[test]
    fn constraint_violations_name_keys() {
        let cases = [
            ("scheme = 2", "scheme = 3", "system.scheme"),
            ("initial = \"01\"", "initial = \"02\"", "system.initial"),
            ("n = 2", "n = 2\nn_max = 1", "system.n_max"),
            ("omega1 = 1.0", "omega1 = 1.0\nbeta = 1.5\nomega2 = 2.0", "lasers.beta"),
            ("shape = \"ramp\"", "shape = \"gaussian\"", "lasers.tau"),
        ];
        for (from, to, key) in cases {
            let text = FIG5.replace(from, to);
            let err = RunConfig::from_file(parse_config_str(&text).unwrap()).unwrap_err();
            assert!(err.to_string().contains(key), "{key}: {err}");
        }
        let text = format!("{FIG5}\n[grid]\nstep_factor = 0.2\n");
        let err = RunConfig::from_file(parse_config_str(&text).unwrap()).unwrap_err();
        assert!(err.to_string().contains("grid.step_factor"));
    }

    #[test]
    fn gaussian_window_defaults_to_ten_widths() {
        let text = FIG5.replace("shape = \"ramp\"", "shape = \"gaussian\"\ntau = 3.0\nbeta = 1.1\nphase2 = 3.141592653589793");
        let run = RunConfig::from_file(parse_config_str(&text).unwrap()).unwrap();
        assert_eq!(run.grid.t_end, 30.0);
        let scale = run.system.lasers[1].envelope.scale;
        assert!((scale.re + 1.0).abs() < 1e-15);
        assert_eq!(run.system.lasers[1].envelope.peak_modulus(), 1.1);
    }
}
