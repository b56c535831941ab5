use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_dotcavity");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("DOTCAVITY_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

// Small, fast config: weak drive, short window, tight truncation.
const SMALL: &str = r#"
[system]
omega_c = 100.0
delta = 80.0
model = "per_dot"
n = 1
n_max = 3

[lasers]
omega1 = 1.0
omega2 = 1.0
ramp_time = 20.0

[grid]
t_end = 60.0
step_factor = 0.1

[output]
dir = "results"
prefix = "small"
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn analytic_prints_rounded_and_full_values() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["analytic", "--omega", "1", "--omega-c", "100", "--delta", "80"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("omega_eff = 0.0277778"));

    let out = run(tmp.path(), &["analytic", "--omega-c", "100", "--delta", "80", "--alpha", "2", "--beta"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("beta = 1.6837"));
}

#[test]
fn usage_and_domain_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["scenario", "fig4"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["simulate", "missing.toml"]).status.code(), Some(2));
    let out = run(tmp.path(), &["analytic", "--omega-c", "100", "--delta=-100"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn config_errors_name_the_key() {
    let tmp = TempDir::new().unwrap();
    let typo = write_config(tmp.path(), "typo.toml", &SMALL.replace("omega_c", "omega_cavity"));
    let out = run(tmp.path(), &["simulate", &typo]);
    assert_eq!(out.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega_cavity"));

    let pole = write_config(tmp.path(), "pole.toml", &SMALL.replace("delta = 80.0", "delta = 100.0"));
    let out = run(tmp.path(), &["simulate", &pole]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("system.delta"));

    let syntax = write_config(tmp.path(), "syntax.toml", "[system\nomega_c = 1");
    assert_eq!(run(tmp.path(), &["simulate", &syntax]).status.code(), Some(5));

    let coarse = write_config(tmp.path(), "coarse.toml", &SMALL.replace("step_factor = 0.1", "step_factor = 0.5"));
    let out = run(tmp.path(), &["simulate", &coarse]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.step_factor"));
}

#[test]
fn dry_run_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = run(tmp.path(), &["simulate", &cfg, "--dry-run"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v.is_object());
    assert!(!tmp.path().join("results").exists());

    let out = run(tmp.path(), &["scenario", "sqrtswap", "--dry-run"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn simulate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    assert_eq!(run(tmp.path(), &["simulate", &cfg]).status.code(), Some(0));
    let csv = tmp.path().join("results/small_trajectory.csv");
    let first = fs::read(&csv).unwrap();
    let text = String::from_utf8_lossy(&first);
    assert!(text.starts_with("t,P00,P01,P10,P11,norm,n_mean\n"));
    assert!(tmp.path().join("results/small_run.json").exists());

    assert_eq!(run(tmp.path(), &["simulate", &cfg, "--out", "again"]).status.code(), Some(0));
    let second = fs::read(tmp.path().join("again/small_trajectory.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn output_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", &SMALL.replace("dir = \"results\"\n", ""));
    let out = Command::new(BIN)
        .args(["simulate", &cfg])
        .current_dir(tmp.path())
        .env("DOTCAVITY_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("from_env/small_trajectory.csv").exists());
}
