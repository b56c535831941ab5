//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage (bad arguments, missing config file,
//! unknown scenario), 3 validation or physics-domain error, 4 numerical
//! failure, 5 config syntax error, 6 unknown config key, 1 anything else.

mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

pub use config::{
    parse_config, parse_config_str, FileConfig, GridSection, LaserSection, OutputSection, RunConfig, SystemSection,
    DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV,
};

use crate::analytic::{beta_ratio, omega_eff_collinear, p_max_00, p_max_11, DispersiveParams};
use crate::error::{Error, Result};
use crate::experiments::{
    calibrate_tau, describe_scenario, extract_rabi_frequency, gate_json, gate_tomography, max_population_scan,
    pulse_width, run_scenario, write_json, write_table_csv, write_trajectory_csv, CalibrationOptions, Overrides,
    Scenario,
};
use crate::fockspace::{DotPair, StateVector};
use crate::propagator::evolve;

#[derive(Debug, Parser)]
#[command(name = "dotcavity", version, about = "Two quantum dots in a driven optical cavity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    pub config: PathBuf,
    /// Output directory (overrides the config and the environment).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the resolved parameters and exit without computing.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate the configured initial state and write the trajectory CSV.
    Simulate(RunArgs),
    /// Evaluate the closed-form dispersive results.
    Analytic {
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        /// Amplitude of laser 2 (defaults to --omega).
        #[arg(long)]
        omega2: Option<f64>,
        #[arg(long)]
        omega_c: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        n: u32,
        #[arg(long)]
        alpha: Option<f64>,
        /// Print the amplitude ratio that balances the light shifts.
        #[arg(long)]
        beta: bool,
        #[arg(long)]
        dry_run: bool,
    },
    /// Fit the effective Rabi frequency of one population channel.
    Rabi {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "P10")]
        channel: String,
        /// Start of the fit window (defaults to the end of the ramp).
        #[arg(long)]
        fit_from: Option<f64>,
    },
    /// Maximum P00 and P11 against the cavity gap `omega_c - Delta`.
    Scan {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 15.0, 20.0, 25.0, 30.0])]
        gaps: Vec<f64>,
    },
    /// Gate tomography in one photon sector.
    Gate {
        #[command(flatten)]
        run: RunArgs,
        /// Photon sector (defaults to `system.n`).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Optimize the pulse width for the sqrt(SWAP) fidelity.
    Calibrate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 10.0)]
        lo: f64,
        #[arg(long, default_value_t = 25.0)]
        hi: f64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1e-3)]
        tau_tol: f64,
        #[arg(long, default_value_t = 7)]
        scan_points: usize,
    },
    /// Run a named standard scenario.
    Scenario {
        /// fig2, fig3, fig5, fig6, sqrtswap or scheme1-demo.
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        step_factor: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        dry_run: bool,
    },
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Sweep { source, .. } => exit_code(source),
        Error::UnknownScenario(_) => 2,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
        Error::InvalidArgument(_) | Error::Domain(_) | Error::DivisionByZero(_) | Error::Config(_) => 3,
        Error::IntegrationFailure { .. }
        | Error::NumericalFailure(_)
        | Error::ExtractionFailure(_)
        | Error::CannotFix(_)
        | Error::CalibrationFailure { .. } => 4,
        Error::ConfigSyntax(_) => 5,
        Error::UnknownKey { .. } => 6,
        Error::Io(_) | Error::Json(_) => 1,
    }
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let mut run = parse_config(&args.config)?;
    if let Some(out) = &args.out {
        run.output_dir = out.clone();
    }
    Ok(run)
}

fn print_json(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

/// Executes one parsed command.
pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let run = load(&args)?;
            if args.dry_run {
                return print_json(&run.describe());
            }
            let psi0 = StateVector::basis(run.system.n_max, run.system.initial)?;
            let (traj, _) = evolve(&run.system, &psi0, &run.grid, run.norm_tol)?;
            let csv = run.output_dir.join(format!("{}_trajectory.csv", run.prefix));
            write_trajectory_csv(&csv, &traj)?;
            let meta = run.output_dir.join(format!("{}_run.json", run.prefix));
            let peaks = traj.step_peaks;
            write_json(
                &meta,
                &json!({
                    "parameters": run.describe(),
                    "norm_drift": traj.norm_drift(),
                    "step_peaks": { "P00": peaks[0], "P01": peaks[1], "P10": peaks[2], "P11": peaks[3] },
                }),
            )?;
            report_files(&[csv, meta]);
        }
        Command::Analytic {
            omega,
            omega2,
            omega_c,
            delta,
            n,
            alpha,
            beta,
            dry_run,
        } => {
            let mut p = DispersiveParams::single(omega, omega_c, delta)
                .with_amplitudes(omega, omega2.unwrap_or(omega))
                .with_n(n);
            if let Some(a) = alpha {
                p = p.with_alpha(a);
            }
            if dry_run {
                return print_json(&serde_json::to_value(p)?);
            }
            if beta {
                if alpha.is_none() {
                    return Err(Error::invalid("--beta needs --alpha"));
                }
                let b = beta_ratio(&p)?;
                println!("beta = {b:.4}");
                println!("beta_full = {b}");
            } else {
                let w = omega_eff_collinear(&p)?;
                let p00 = p_max_00(&p)?;
                let p11 = p_max_11(&p)?;
                println!("omega_eff = {w:.7}");
                println!("omega_eff_full = {w}");
                println!("p_max_00 = {p00}");
                println!("p_max_11 = {p11}");
            }
        }
        Command::Rabi { run: args, channel, fit_from } => {
            let run = load(&args)?;
            let channel: DotPair = channel.parse()?;
            let from = match fit_from {
                Some(t) => t,
                None if run.is_gaussian() => run.grid.t_start,
                None => run.file.lasers.ramp_time,
            };
            if args.dry_run {
                return print_json(&json!({ "parameters": run.describe(), "channel": channel, "fit_from": from }));
            }
            let psi0 = StateVector::basis(run.system.n_max, run.system.initial)?;
            let (traj, _) = evolve(&run.system, &psi0, &run.grid, run.norm_tol)?;
            let fit = extract_rabi_frequency(&traj.window(from), channel)?;
            let p = DispersiveParams::single(1.0, run.system.omega_c, run.file.system.delta)
                .with_amplitudes(run.file.lasers.omega1, run.system.lasers[1].envelope.peak_modulus());
            let predicted = omega_eff_collinear(&p).ok();
            let csv = run.output_dir.join(format!("{}_trajectory.csv", run.prefix));
            write_trajectory_csv(&csv, &traj)?;
            let path = run.output_dir.join(format!("{}_rabi.json", run.prefix));
            write_json(
                &path,
                &json!({ "fit": fit, "predicted_frequency": predicted, "fit_from": from, "parameters": run.describe() }),
            )?;
            println!("frequency = {}", fit.frequency);
            report_files(&[csv, path]);
        }
        Command::Scan { run: args, gaps } => {
            let run = load(&args)?;
            let template = run.ramped_drive()?;
            if args.dry_run {
                return print_json(&json!({ "parameters": run.describe(), "gaps": gaps, "template": template }));
            }
            let rows = max_population_scan(&template, &gaps)?;
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r.gap, r.delta, r.max_p00, r.max_p11, r.predicted_p00, r.predicted_p11])
                .collect();
            let csv = run.output_dir.join(format!("{}_scan.csv", run.prefix));
            write_table_csv(&csv, &["gap", "delta", "max_P00", "max_P11", "predicted_P00", "predicted_P11"], &table)?;
            let path = run.output_dir.join(format!("{}_scan.json", run.prefix));
            write_json(&path, &json!({ "rows": rows, "parameters": run.describe() }))?;
            report_files(&[csv, path]);
        }
        Command::Gate { run: args, n } => {
            let run = load(&args)?;
            let n = n.unwrap_or(run.system.initial.n);
            if args.dry_run {
                return print_json(&json!({ "parameters": run.describe(), "photon_sector": n }));
            }
            let u = gate_tomography(&run.system, &run.grid, n)?;
            let path = run.output_dir.join(format!("{}_gate.json", run.prefix));
            write_json(&path, &gate_json(&u, run.describe()))?;
            report_files(&[path]);
        }
        Command::Calibrate {
            run: args,
            lo,
            hi,
            n,
            tau_tol,
            scan_points,
        } => {
            let run = load(&args)?;
            pulse_width(&run.system)?;
            let opts = CalibrationOptions {
                photon_sector: n.unwrap_or(run.system.initial.n),
                step_factor: run.file.grid.step_factor,
                tau_tol,
                scan_points,
            };
            if args.dry_run {
                return print_json(&json!({ "parameters": run.describe(), "bracket": [lo, hi], "options": opts }));
            }
            let cal = calibrate_tau(&run.system, (lo, hi), &opts)?;
            let path = run.output_dir.join(format!("{}_calibration.json", run.prefix));
            write_json(&path, &json!({ "calibration": cal, "bracket": [lo, hi], "options": opts, "parameters": run.describe() }))?;
            println!("tau = {}", cal.tau);
            println!("fidelity = {}", cal.fidelity);
            report_files(&[path]);
        }
        Command::Scenario {
            name,
            out,
            n,
            n_max,
            step_factor,
            tau,
            beta,
            dry_run,
        } => {
            let scenario: Scenario = name.parse()?;
            let overrides = Overrides {
                n,
                n_max,
                step_factor,
                tau,
                beta,
            };
            if dry_run {
                return print_json(&describe_scenario(scenario, &overrides)?);
            }
            let dir = out
                .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
            let output = run_scenario(scenario, &overrides, &dir)?;
            report_files(&output.files);
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::UnknownScenario("x".into())), 2);
        assert_eq!(exit_code(&Error::Config("x".into())), 3);
        assert_eq!(exit_code(&Error::NumericalFailure("x".into())), 4);
        let nested = Error::Sweep {
            index: 3,
            source: Box::new(Error::IntegrationFailure { drift: 1.0, tol: 0.1 }),
        };
        assert_eq!(exit_code(&nested), 4);
        assert_eq!(run(["dotcavity", "no-such-command"]), 2);
        assert_eq!(run(["dotcavity", "scenario", "fig4"]), 2);
        assert_eq!(run(["dotcavity", "simulate", "/nonexistent/config.toml"]), 2);
        assert_eq!(run(["dotcavity", "analytic", "--omega-c", "100", "--delta", "100"]), 3);
    }
}
