use std::fs;
use std::process::Command as Process;

use dislocade_cli::run::Extra;
use dislocade_cli::{execute, parse_config_str, Command, Outcome, RunConfig};

fn config(command: Command, dir: &std::path::Path) -> RunConfig {
    RunConfig {
        command,
        output: dir.to_path_buf(),
        ..RunConfig::default()
    }
}

#[test]
fn defaults_survive_emit_and_parse() {
    let d = RunConfig::default();
    assert_eq!(parse_config_str(&d.to_toml(), &RunConfig::default()).unwrap(), d);
}

#[test]
fn ode_run_writes_trajectory_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nested/ode");
    let mut cfg = config(Command::Ode, &out);
    cfg.ode.positions = vec![0.0, 1.0];
    cfg.ode.gamma = dislocade_cli::GammaSpec::Value(2.0 * std::f64::consts::PI);
    let m = match execute(&cfg, &Extra::default()).unwrap() {
        Outcome::Done(m) => m,
        other => panic!("unexpected {other:?}"),
    };
    assert_eq!(m.files, vec!["trajectory.csv", "summary.json"]);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,x_1,x_2,min_gap");
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    let tc = v["result"]["collision_time"].as_f64().unwrap();
    assert!((tc * 8.0 * std::f64::consts::PI - 1.0).abs() < 1e-3, "{tc}");
    assert_eq!(v["manifest"]["schema_version"], 1);
}

#[test]
fn pde_run_file_set_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(Command::Pde, &tmp.path().join("a"));
    cfg.pde.t_end = 0.01;
    cfg.pde.snapshot_times = vec![0.005];
    let a = execute(&cfg, &Extra::default()).unwrap();
    let files = &a.manifest().files;
    assert!(files.iter().any(|f| f.starts_with("snapshots/") && f.ends_with(".csv")));
    assert!(files.contains(&"tracks.csv".to_string()));
    assert_eq!(files.last().unwrap(), "summary.json");
    let first = fs::read(tmp.path().join("a/summary.json")).unwrap();
    execute(&cfg, &Extra::default()).unwrap();
    let second = fs::read(tmp.path().join("a/summary.json")).unwrap();
    assert_eq!(first, second);
    let tracks = fs::read_to_string(tmp.path().join("a/tracks.csv")).unwrap();
    assert_eq!(tracks.lines().next().unwrap(), "t,crossing_1,crossing_2");
}

#[test]
fn layer_summary_exposes_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(Command::Layer, tmp.path());
    execute(&cfg, &Extra::default()).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    for key in ["gamma", "beta", "eta", "kappa", "residual"] {
        assert!(v["result"][key].is_number(), "missing {key}");
    }
    let head = fs::read_to_string(tmp.path().join("layer.csv")).unwrap();
    assert!(head.starts_with("x,u,u_prime,psi\n"));
}

#[test]
fn binary_reports_config_errors_with_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.toml");
    fs::write(&cfg_path, "s = 1.5\n").unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_dislocade"))
        .args(["ode", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("s must lie in (0,1)"));
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("ode.toml");
    fs::write(&cfg_path, "[ode]\nt_end = 0.01\ngamma = 6.0\n").unwrap();
    let out_dir = tmp.path().join("o");
    let out = Process::new(env!("CARGO_BIN_EXE_dislocade"))
        .args(["ode", "--t-end", "5.0", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert!((v["result"]["t_last"].as_f64().unwrap() - 0.01).abs() < 1e-12);
}

#[test]
fn verify_ode_scope_passes_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_dislocade"))
        .args(["verify", "--scope", "ode", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("verdicts.json")).unwrap()).unwrap();
    let verdicts = v["result"]["verdicts"].as_array().unwrap();
    assert_eq!(verdicts.len(), 4);
    assert!(verdicts.iter().all(|c| c["passed"] == true));
}
