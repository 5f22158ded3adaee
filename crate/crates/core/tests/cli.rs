//! End-to-end tests of the `nelson-eff` binary: exit codes, CSV contracts,
//! and error surfacing.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nelson-eff"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn nelson-eff")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

fn check_csv(text: &str, header: &str) -> usize {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(header));
    let mut rows = 0;
    for line in lines {
        for cell in line.split(',') {
            let v: f64 = cell.parse().unwrap_or_else(|_| panic!("bad cell '{cell}'"));
            assert!(v.is_finite(), "non-finite cell in '{line}'");
        }
        rows += 1;
    }
    rows
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["--definitely-not-a-flag", "norms"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn solve_g_emits_grid_csv() {
    let out = run(&["--mu", "100", "--lambda", "1", "solve-g", "--grid", "64"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let rows = check_csv(&stdout(&out), "p,g");
    assert_eq!(rows, 64);
}

#[test]
fn region_query_names_binding_constraint() {
    let out = run(&["region", "--n", "2", "--a", "0.95", "--b", "0.3"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("outside"), "got: {text}");
    // b = 0.3 >= (N+2)(1-a) = 0.2 is the violated constraint
    assert!(text.contains("(N+2)(1-a)"), "binding constraint not named: {text}");

    let inside = run(&["region", "--n", "2", "--a", "0.95", "--b", "0.1"]);
    assert_eq!(inside.status.code(), Some(0));
    assert!(stdout(&inside).contains("inside"));
}

#[test]
fn region_boundary_emits_polyline() {
    let out = run(&["region", "--n", "2", "--samples", "50"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(check_csv(&stdout(&out), "a,b"), 50);
}

#[test]
fn probe_rejects_inadmissible_exponent() {
    let out = run(&["probe", "--n", "2", "--a", "0.5"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert_eq!(err.trim().lines().count(), 1, "error not single-line: {err}");
    assert!(err.contains("domain"), "got: {err}");
}

#[test]
fn gn_requires_mass() {
    let out = run(&["--mu", "50", "gn", "--n", "3", "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
}

#[test]
fn gn_massive_emits_csv() {
    let out = run(&[
        "--mu", "50", "--mass", "1", "--seed", "5",
        "gn", "--n", "3", "--grid", "4", "--samples", "2000",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(check_csv(&stdout(&out), "p,g1,g3,mc_err"), 4);
}

#[test]
fn propagate_emits_packet() {
    let out = run(&[
        "--mu", "100", "propagate", "--t", "1", "--p-lo", "1", "--p-hi", "2",
        "--generator", "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(check_csv(&text, "p,re,im,abs") > 0);
}

#[test]
fn oracle_small_run() {
    let out = run(&[
        "--mu", "8", "oracle", "--h", "0.5", "--kmax", "1.0", "--nmax", "1",
        "--t-grid", "0.5,1.0",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(check_csv(&stdout(&out), "mu,t,error,vacuum_pop,energy_drift"), 2);
}

#[test]
fn oracle_state_budget_is_resource_error() {
    let dir = std::env::temp_dir().join(format!("nelson-eff-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config: PathBuf = dir.join("tiny.toml");
    std::fs::write(&config, "[oracle]\nmax_states = 10\n").unwrap();
    let out = run(&["--config", config.to_str().unwrap(), "--mu", "8", "oracle"]);
    assert_eq!(out.status.code(), Some(5), "stderr: {}", stderr(&out));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn output_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("nelson-eff-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("coeffs.csv");
    let out = run(&["--mu", "1000", "--output", path.to_str().unwrap(), "coeffs", "--j-max", "4"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(check_csv(&text, "j,alpha_j,mu_j_alpha_j,limit"), 3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn selfcheck_passes_on_defaults() {
    let out = run(&["selfcheck"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
}
