use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ddmpc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddmpc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SCALAR_EXACT: &str = "\
[plant]
a = [[1.3]]
b = [[1.0]]

[data]
eps = 0.0
length = 6
x0 = [0.5]

[constraints]
enabled = false

[controller]
x0 = [0.5]
";

#[test]
fn single_sample_dataset_has_two_states() {
    let dir = TempDir::new().unwrap();
    let out = ddmpc(dir.path(), &["generate-data", "--length", "1", "--out", "d.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .count();
    // header plus x0 and x1
    assert_eq!(rows, 3, "{text}");
    assert!(dir.path().join("d.meta").exists());
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = ddmpc(dir.path(), &["generate-data", "--seed", "7", "--out", name]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn metadata_replays_as_config() {
    let dir = TempDir::new().unwrap();
    let out = ddmpc(
        dir.path(),
        &["generate-data", "--seed", "5", "--length", "30", "--out", "a.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = ddmpc(dir.path(), &["--config", "a.meta", "generate-data", "--out", "b.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn infeasible_problem_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = ddmpc(
        dir.path(),
        &["--set", "constraints.s_u=[[1e4]]", "synthesize", "--x0", "-0.5,-0.5"],
    );
    assert_eq!(code(&out), 2, "{}\n{}", stdout(&out), stderr(&out));
}

#[test]
fn certificate_round_trip_and_corruption() {
    let dir = TempDir::new().unwrap();
    let out = ddmpc(dir.path(), &["generate-data", "--out", "d.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = ddmpc(
        dir.path(),
        &["synthesize", "--data", "d.csv", "--certificate", "c.toml"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = ddmpc(
        dir.path(),
        &[
            "verify",
            "--certificate",
            "c.toml",
            "--data",
            "d.csv",
            "--samples",
            "200",
        ],
    );
    assert_eq!(code(&out), 0, "{}\n{}", stdout(&out), stderr(&out));

    let mut cert: toml::Table = fs::read_to_string(dir.path().join("c.toml")).unwrap().parse().unwrap();
    let p = cert["p"].as_array().unwrap().iter().map(|row| {
        let row: Vec<toml::Value> = row
            .as_array()
            .unwrap()
            .iter()
            .map(|v| toml::Value::Float(v.as_float().unwrap() * 0.5))
            .collect();
        toml::Value::Array(row)
    });
    cert.insert("p".into(), toml::Value::Array(p.collect()));
    fs::write(dir.path().join("bad.toml"), toml::to_string(&cert).unwrap()).unwrap();

    let out = ddmpc(
        dir.path(),
        &[
            "verify",
            "--certificate",
            "bad.toml",
            "--data",
            "d.csv",
            "--samples",
            "200",
        ],
    );
    assert_eq!(code(&out), 3, "{}\n{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("FAIL"), "{}", stdout(&out));
}

#[test]
fn malformed_config_exits_4_with_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.toml"), "[data]\nseed = 1\nlength = \"many\"\n").unwrap();
    let out = ddmpc(dir.path(), &["--config", "bad.toml", "generate-data"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_exits_4() {
    let dir = TempDir::new().unwrap();
    let out = ddmpc(dir.path(), &["synthesize", "--no-such-flag"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn data_dimension_mismatch_exits_4() {
    let dir = TempDir::new().unwrap();
    let out = ddmpc(dir.path(), &["generate-data", "--out", "d.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    fs::write(dir.path().join("scalar.toml"), SCALAR_EXACT).unwrap();
    let out = ddmpc(
        dir.path(),
        &["--config", "scalar.toml", "synthesize", "--data", "d.csv"],
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("config error"), "{}", stderr(&out));
}

#[test]
fn origin_query_reports_zero_cost() {
    let dir = TempDir::new().unwrap();
    let out = ddmpc(dir.path(), &["synthesize", "--x0", "0,0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("origin"), "{text}");
}

#[test]
fn exact_data_gives_singleton_note() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("scalar.toml"), SCALAR_EXACT).unwrap();
    let run = |args: &[&str]| {
        let mut full = vec!["--config", "scalar.toml"];
        full.extend_from_slice(args);
        ddmpc(dir.path(), &full)
    };
    let out = run(&["generate-data", "--out", "d.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(&["synthesize", "--data", "d.csv", "--certificate", "c.toml"]);
    assert_eq!(code(&out), 0, "{}\n{}", stdout(&out), stderr(&out));
    let out = run(&["verify", "--certificate", "c.toml", "--data", "d.csv"]);
    assert_eq!(code(&out), 0, "{}\n{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("singleton"), "{}", stdout(&out));
}

#[test]
fn zero_step_simulation_is_empty_run() {
    let dir = TempDir::new().unwrap();
    let out = ddmpc(dir.path(), &["simulate", "--steps", "0", "--out-dir", "run"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let traj = fs::read_to_string(dir.path().join("run/trajectory.csv")).unwrap();
    let rows = traj
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .count();
    assert_eq!(rows, 2, "{traj}");
    assert!(dir.path().join("run/plot.py").exists());
}
