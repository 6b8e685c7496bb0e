//! Drives the installed binary end to end: exit codes, artifact layout,
//! CSV round-trips, and the seed override.

use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use omniobs::numerics::Trajectory;

fn omniobs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omniobs"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).expect("config written");
    path.to_string_lossy().into_owned()
}

/// Two coupled single integrators, one second of simulated time.
const TINY: &str = r#"{
  "kind": "hetero-observer",
  "graph": { "nodes": 2, "edges": [[1, 2]] },
  "agents": [
    { "a": [[0]], "b": [[1]], "c": [[1]] },
    { "a": [[0]], "b": [[1]], "c": [[1]] }
  ],
  "x0": [1.0, -1.0],
  "params": { "gamma0": 5.0, "gamma_s0": 2.0, "phi": 1.0, "phi_s": 0.1 },
  "dt": 0.001,
  "t_end": 1.0,
  "seed": 5
}"#;

#[test]
fn usage_error_exits_1() {
    let out = omniobs(&[]);
    assert_eq!(exit_code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_config_file_exits_1() {
    let out = omniobs(&["--config", "/nonexistent/run.json", "--out", "/tmp/x"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn unknown_field_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = TINY.replacen("\"x0\"", "\"bogus\": 1,\n  \"x0\"", 1);
    let path = write_cfg(tmp.path(), "bad.json", &cfg);
    let out = omniobs(&["--config", &path, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn disconnected_graph_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "kind": "herding",
      "graph": { "nodes": 4, "edges": [[1, 2], [3, 4]] },
      "roots": [2],
      "leaders": [3],
      "schedules": [[{ "t": 0.0, "vx": 0.1, "vy": 0.0 }]],
      "initial_positions": [[0, 0], [1, 0], [0, 1], [1, 1]],
      "z_star": 1.0,
      "z_star_t": 0.5,
      "k_f": 0.5,
      "params": { "gamma0": 5.0, "gamma_s0": 2.0, "phi": 1.0, "phi_s": 0.1 },
      "dt": 0.01,
      "t_end": 1.0,
      "seed": 1
    }"#;
    let path = write_cfg(tmp.path(), "disconnected.json", cfg);
    let out = omniobs(&["--config", &path, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("connect"));
}

#[test]
fn empty_roots_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "kind": "homo-observer",
      "graph": { "nodes": 2, "edges": [[1, 2]] },
      "model": { "a": [[0]], "b": [[1]], "c": [[1]] },
      "roots": [],
      "x0": [1.0, -1.0],
      "params": { "gamma0": 5.0, "gamma_s0": 2.0, "phi": 1.0, "phi_s": 0.1 },
      "dt": 0.001,
      "t_end": 1.0,
      "seed": 5
    }"#;
    let path = write_cfg(tmp.path(), "rootless.json", cfg);
    let out = omniobs(&["--config", &path, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("root"));
}

#[test]
fn no_output_directory_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_cfg(tmp.path(), "tiny.json", TINY);
    let out = omniobs(&["--config", &path]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("out"));
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "kind": "hetero-observer",
      "graph": { "nodes": 1, "edges": [] },
      "agents": [{ "a": [[5]], "b": [[1]], "c": [[1]] }],
      "x0": [1.0],
      "inputs": [{ "amplitude": 1.0, "frequency": 1.0, "phase": 0.0 }],
      "params": { "gamma0": 1.0, "gamma_s0": 1.0, "phi": 1.0, "phi_s": 0.1 },
      "dt": 0.05,
      "t_end": 300.0,
      "seed": 1
    }"#;
    let path = write_cfg(tmp.path(), "unstable.json", cfg);
    let out = omniobs(&["--config", &path, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("finite"));
}

#[test]
fn tiny_run_writes_parseable_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_cfg(tmp.path(), "tiny.json", TINY);
    let out_dir = tmp.path().join("run");
    let out = omniobs(&["--config", &path, "--out", out_dir.to_str().unwrap(), "--summary"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("run complete"));
    assert!(stdout.contains("estimation error"));

    for name in ["metrics.json", "constraint_report.json"] {
        let text = fs::read_to_string(out_dir.join(name)).expect(name);
        serde_json::from_str::<serde_json::Value>(&text).expect("valid json");
    }
    // 1001 integration steps downsampled by 10, plus the header.
    for (name, dim) in [
        ("trajectory.csv", 2),
        ("estimation_errors.csv", 2),
        ("adaptive_gains.csv", 4),
    ] {
        let file = fs::File::open(out_dir.join(name)).expect(name);
        let traj = Trajectory::<f64>::from_csv(BufReader::new(file)).expect("parseable csv");
        assert_eq!(traj.dim(), dim, "{name}");
        assert_eq!(traj.len(), 101, "{name}");
        assert!((traj.last_time() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn seed_override_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_cfg(tmp.path(), "tiny.json", TINY);
    let base = tmp.path().join("base");
    let reseeded = tmp.path().join("reseeded");
    assert_eq!(exit_code(&omniobs(&["--config", &path, "--out", base.to_str().unwrap()])), 0);
    assert_eq!(
        exit_code(&omniobs(&[
            "--config",
            &path,
            "--out",
            reseeded.to_str().unwrap(),
            "--seed",
            "99"
        ])),
        0
    );
    let a = fs::read(base.join("trajectory.csv")).unwrap();
    let b = fs::read(reseeded.join("trajectory.csv")).unwrap();
    assert_ne!(a, b, "a different seed draws different inputs");
}
