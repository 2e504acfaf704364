use std::path::Path;
use std::process::{Command, Output};

use follower::vision::Frame;

fn follower(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_follower")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_ppm(frame: &Frame, path: &Path) {
    let mut buf = Vec::new();
    frame.write_ppm(&mut buf).unwrap();
    std::fs::write(path, buf).unwrap();
}

#[test]
fn envs_lists_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = follower(&["envs"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    for (line, name) in lines.iter().zip(["env1", "env2", "env3"]) {
        assert!(line.starts_with(name) && line.contains("path_length_m="), "{line}");
    }
}

#[test]
fn detect_without_target() {
    let dir = tempfile::tempdir().unwrap();
    write_ppm(&Frame::blank([60, 60, 60]), &dir.path().join("empty.ppm"));
    let out = follower(&["detect", "--image", "empty.ppm", "--out", "ann.ppm"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value, serde_json::json!({ "detected": false }));
    assert!(dir.path().join("ann.ppm").is_file());
}

#[test]
fn detect_with_target() {
    let dir = tempfile::tempdir().unwrap();
    let mut frame = Frame::blank([60, 60, 60]);
    frame.fill_disc(200.0, 100.0, 50.0, [240, 220, 30]);
    write_ppm(&frame, &dir.path().join("ball.ppm"));
    let out = follower(&["detect", "--image", "ball.ppm", "--out", "ann.ppm"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["detected"], true);
    assert_eq!(value["proximity"], "close");
    assert!((value["x_angle"].as_f64().unwrap() - 200.0).abs() <= 2.0);
    let annotated = Frame::read_ppm(std::fs::File::open(dir.path().join("ann.ppm")).unwrap()).unwrap();
    assert_eq!(annotated.get(250, 100), [255, 0, 0]);
}

#[test]
fn help_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[&str])] = &[
        ("gen-data", &["--rows", "--seed", "--out"]),
        ("train", &["--data", "--out", "--seed", "--epochs"]),
        ("simulate", &["--env", "--model", "--seed", "--trace", "--frames"]),
        ("detect", &["--image", "--out"]),
        ("step-response", &["--kp", "--ki", "--tau", "--out"]),
        ("tune", &[]),
        ("envs", &[]),
        ("repro", &["--seed", "--out"]),
    ];
    for (cmd, flags) in cases {
        let out = follower(&[cmd, "--help"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        let text = stdout(&out);
        for flag in flags.iter().chain(&["--config", "--set"]) {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
    assert_eq!(follower(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["envs", "--bogus"][..],
        &["gen-data", "--rows", "200", "--out", "d.csv"],
        &["train", "--data", "missing.csv", "--out", "m.json", "--seed", "1"],
        &["detect", "--image", "missing.ppm", "--out", "a.ppm"],
        &["--set", "control.nope=1", "envs"],
        &["gen-data", "--rows", "5", "--seed", "1", "--out", "d.csv"],
    ] {
        let out = follower(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn runtime_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "not,a,dataset\n").unwrap();
    let out = follower(&["train", "--data", "bad.csv", "--out", "m.json", "--seed", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn step_response_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"step": {"duration": 1.0}}"#).unwrap();
    let out = follower(
        &["--config", "cfg.json", "step-response", "--kp", "2.0", "--tau", "0.2", "--out", "resp.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["kp"], 2.0);
    assert_eq!(value["tau"], 0.2);
    let csv = std::fs::read_to_string(dir.path().join("resp.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,setpoint,output,u"));
    assert_eq!(csv.lines().count(), 1 + 1001);
}

fn pipeline_run(dir: &Path) -> Vec<u8> {
    let ok = |args: &[&str]| {
        let out = follower(args, dir);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    };
    ok(&["gen-data", "--rows", "400", "--seed", "42", "--out", "data.csv"]);
    ok(&["train", "--data", "data.csv", "--out", "model.json", "--seed", "42", "--epochs", "40"]);
    let sim = ok(&[
        "simulate", "--env", "env1", "--model", "model.json", "--seed", "42", "--trace", "trace.csv", "--frames", "frames",
    ]);
    let summary: serde_json::Value = serde_json::from_str(&stdout(&sim)).unwrap();
    assert!(summary["outcome"].is_string());
    assert_eq!(summary["seed"], 42);
    let frames = std::fs::read_dir(dir.join("frames")).unwrap().count();
    assert_eq!(frames as u64, summary["planner_ticks"].as_u64().unwrap());
    std::fs::read(dir.join("trace.csv")).unwrap()
}

#[test]
fn pipeline_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline_run(a.path());
    let second = pipeline_run(b.path());
    assert!(first.starts_with(b"t,x_true,y_true,a_true"));
    assert_eq!(first, second);
    assert_eq!(
        std::fs::read(a.path().join("data.csv")).unwrap(),
        std::fs::read(b.path().join("data.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.path().join("model.json")).unwrap(),
        std::fs::read(b.path().join("model.json")).unwrap()
    );
}

#[test]
fn repro_writes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let out = follower(&["repro", "--seed", "3", "--out", "r", "--rows", "300", "--epochs", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "dataset.csv",
        "model.json",
        "loss_v.csv",
        "loss_w.csv",
        "step_response.csv",
        "env1_trace.csv",
        "env2_trace.csv",
        "env3_trace.csv",
        "env1_desired_path.csv",
        "summary.json",
    ] {
        assert!(dir.path().join("r").join(name).is_file(), "{name}");
    }
}
