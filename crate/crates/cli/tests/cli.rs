use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use collapse_cli::config::RunConfig;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn collapse(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_collapse"));
    cmd.args(args).arg("--quiet").env_remove("COLLAPSE_THREADS");
    if let Some(t) = threads {
        cmd.env("COLLAPSE_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn gaussian_config(out_dir: &Path) -> Value {
    serde_json::json!({
        "schema_version": 1,
        "grid": {"x_min": -1.6430775e-12, "x_max": 1.6430775e-12, "n_points": 256},
        "physical_params": {"total_mass": 1.0e-11, "omega": 1000.0},
        "initial_state": {"kind": "gaussian", "center": 4.1e-13, "width": 7.2e-14},
        "propagator": {"duration": 1.0e-3, "record_stride": 20},
        "output": {"dir": out_dir}
    })
}

#[test]
fn every_shipped_config_parses() {
    let mut n = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {}", path.display(), e.report()));
            n += 1;
        }
    }
    assert!(n >= 6);
}

#[test]
fn estimate_evaluates_the_formulas() {
    let out = collapse(&["estimate", "--mass", "1e-11", "--size", "1e-4"], None);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let omega = (6.674e-11 * 1e-11 / 1e-12f64).sqrt();
    let got = v["omega"].as_f64().unwrap();
    assert!((got / omega - 1.0).abs() < 1e-14);
    assert!((v["tau_slow"].as_f64().unwrap() * omega - 1.0).abs() < 1e-14);
    let x_c = v["x_c"].as_f64().unwrap();
    let tau_red = 1.0545718e-34 / (1e-11 * omega * omega * x_c * x_c);
    assert!((v["tau_red"].as_f64().unwrap() / tau_red - 1.0).abs() < 1e-12);
}

#[test]
fn unknown_key_is_rejected_with_a_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = gaussian_config(dir.path());
    config["physical_params"] = serde_json::json!({"total_mass": 1e-11, "omeg": 1000.0});
    let path = write_config(dir.path(), "c.json", &config);
    let out = collapse(&["simulate", "--config", &path], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("did you mean `omega`"), "{}", stderr(&out));
}

#[test]
fn every_problem_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "c.json",
        &serde_json::json!({"schema_version": 1, "gird": {}, "propagator": {"stride": 2}}),
    );
    let out = collapse(&["simulate", "--config", &path], None);
    assert_eq!(out.status.code(), Some(1));
    let text = stderr(&out);
    for needle in ["`gird`", "did you mean `grid`", "`stride`"] {
        assert!(text.contains(needle), "missing {needle} in {text}");
    }

    let path = write_config(dir.path(), "d.json", &serde_json::json!({"schema_version": 1}));
    let out = collapse(&["simulate", "--config", &path], None);
    assert_eq!(out.status.code(), Some(1));
    let text = stderr(&out);
    for needle in ["grid: required", "physical_params: required", "initial_state: required"] {
        assert!(text.contains(needle), "missing {needle} in {text}");
    }
}

#[test]
fn oversized_step_names_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = gaussian_config(dir.path());
    config["propagator"] = serde_json::json!({"dt": 1e-3, "n_steps": 10});
    let path = write_config(dir.path(), "c.json", &config);
    let out = collapse(&["simulate", "--config", &path], None);
    assert_eq!(out.status.code(), Some(1));
    let text = stderr(&out);
    assert!(text.contains("exceeds the bound"), "{text}");
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn simulate_is_reproducible_from_its_own_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let path = write_config(dir.path(), "c.json", &gaussian_config(&first));
    let out = collapse(&["simulate", "--config", &path, "--seed", "11"], None);
    assert!(out.status.success(), "{}", stderr(&out));
    let echo = first.join("effective_config.json");
    let effective = read_json(&echo);
    assert_eq!(effective["seed"], 11);
    assert!(effective["propagator"]["dt"].is_number());

    let second = dir.path().join("second");
    let out = collapse(
        &["simulate", "--config", echo.to_str().unwrap(), "--out-dir", second.to_str().unwrap()],
        None,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["trajectory.csv", "summary.json"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
    let summary = read_json(&first.join("summary.json"));
    assert!(summary["half_time"].is_number());
    assert_eq!(summary["oracle"]["agrees"], true);
    let csv = fs::read_to_string(first.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,mean_x,mean_x2,raw_norm,w_0,xi");
}

#[test]
fn minimal_config_gets_defaults_and_an_echo() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "schema_version": 1,
        "grid": {"x_min": -1.6e-12, "x_max": 1.6e-12, "n_points": 512},
        "physical_params": {"total_mass": 1.0e-11, "omega": 1000.0}
    });
    let path = write_config(dir.path(), "c.json", &config);
    let out_dir = dir.path().join("gs");
    let out = collapse(
        &["groundstate", "--config", &path, "--out-dir", out_dir.to_str().unwrap()],
        None,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let echo = read_json(&out_dir.join("effective_config.json"));
    assert_eq!(echo["seed"], 0);
    assert_eq!(echo["noise"]["kind"], "zero");
    assert!(echo["physical_params"]["hbar"].is_number());
    let summary = read_json(&out_dir.join("groundstate.json"));
    let var = summary["variance"].as_f64().unwrap();
    let expected = summary["expected_variance"].as_f64().unwrap();
    assert!((var / expected - 1.0).abs() < 1e-10);
}

#[test]
fn unsettled_sweep_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "schema_version": 1,
        "grid": {"x_min": -2.6e-12, "x_max": 2.6e-12, "n_points": 256},
        "initial_state": {"kind": "uniform"},
        "sweep": {
            "points": [{"total_mass": 1e-11, "omega": 300.0}],
            "stepping": {"duration": {"slow_times": 0.01}}
        },
        "output": {"dir": dir.path().join("out")}
    });
    let path = write_config(dir.path(), "c.json", &config);
    let out = collapse(&["sweep", "--config", &path], None);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("numerical failure"));
}

#[test]
fn born_with_equal_weights_is_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let mut config: Value =
        serde_json::from_str(&fs::read_to_string(configs().join("equal_weights.json")).unwrap())
            .unwrap();
    config["ensemble"]["runs_per_point"] = 300.into();
    let path = write_config(dir.path(), "c.json", &config);
    let out_dir = dir.path().join("born");
    let out = collapse(
        &["born", "--config", &path, "--out-dir", out_dir.to_str().unwrap()],
        Some("2"),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&out_dir.join("born.json"));
    assert_eq!(report["born_consistent"], true);
    let point = &report["points"][0];
    let f0 = point["frequencies"][0].as_f64().unwrap();
    let ci = &point["intervals"][0];
    assert!(ci[0].as_f64().unwrap() <= f0 && f0 <= ci[1].as_f64().unwrap());
    assert!(out_dir.join("runs.csv").exists());
    // the resolved noise is echoed so the run can be repeated from the echo alone
    let echo = read_json(&out_dir.join("effective_config.json"));
    assert!(echo["noise"]["sigma"].is_number());
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = collapse(
        &["born", "--config", configs().join("equal_weights.json").to_str().unwrap()],
        Some("zero"),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("COLLAPSE_THREADS"));
}

#[test]
fn crystal_outputs_have_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("crystal.json");
    for cmd in ["spectrum", "limits"] {
        let out = collapse(
            &[cmd, "--config", config.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()],
            None,
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let header = |f: &str| {
        fs::read_to_string(dir.path().join(f))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(header("spectrum.csv"), "k,E_k,A_k,B_k,u_k");
    assert_eq!(header("limits.csv"), "n_atoms,omega,x_c,width");
    let summary = read_json(&dir.path().join("spectrum.json"));
    assert!(summary["max_off_diagonal_relative"].as_f64().unwrap() <= 1e-12);
    assert!(summary["max_dispersion_residual"].as_f64().unwrap() <= 1e-12);
}
