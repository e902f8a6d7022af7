use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fuzzytherm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_default_config_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("trace.csv");
    let out = run(&[
        "simulate",
        "--config",
        &cfg("default-config.json"),
        "--out",
        s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = stdout_json(&out);
    assert_eq!(summary["frames"], 600);
    assert_eq!(summary["settling_time"], 178.0);
    assert!(summary["overshoot"].as_f64().unwrap() <= 3.0);
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 601);
    assert!(text.starts_with("t,setpoint,sensed,error,defuzz,fan_duty,heater_duty,mu_NEG,mu_SNEG,mu_ZERO,mu_SPOZ,mu_POZ\n"));
}

#[test]
fn simulate_is_reproducible_with_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("noisy.json");
    let mut doc: Value = serde_json::from_str(
        &std::fs::read_to_string(configs().join("default-config.json")).unwrap(),
    )
    .unwrap();
    doc["plant"]["sensor_noise_std"] = 0.3.into();
    std::fs::write(&config, doc.to_string()).unwrap();
    let mut outputs = Vec::new();
    for (i, seed) in ["7", "7", "8"].iter().enumerate() {
        let path = dir.path().join(format!("run{i}.csv"));
        let out = run(&[
            "simulate",
            "--config",
            s(&config),
            "--out",
            s(&path),
            "--seed",
            seed,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let mut summary = stdout_json(&out);
        summary.as_object_mut().unwrap().remove("out");
        outputs.push((std::fs::read(&path).unwrap(), summary));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_ne!(outputs[0].0, outputs[2].0);
}

#[test]
fn simulate_json_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    let out = run(&[
        "simulate",
        "--config",
        &cfg("default-config.json"),
        "--out",
        s(&path),
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(rec["seed"], 3);
    assert_eq!(rec["frames"].as_array().unwrap().len(), 600);
    assert_eq!(rec["config"]["loop"]["setpoint"], 45.0);
    assert!(rec["frames"][0]["trace"]["activations"].is_array());
}

#[test]
fn simulate_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--config",
        "/no/such/config.json",
        "--out",
        s(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/no/such/config.json"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"controller": {"inputs": [], "output": 3}}"#).unwrap();
    let out = run(&[
        "simulate",
        "--config",
        s(&bad),
        "--out",
        s(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("controller.output"),
        "{}",
        stderr(&out)
    );

    let out = run(&[
        "simulate",
        "--config",
        &cfg("default-config.json"),
        "--out",
        "/no/such/dir/x.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/no/such/dir/x.csv"));
}

#[test]
fn step_worked_example() {
    let out = run(&[
        "step",
        "--controller",
        &cfg("fltc-controller.json"),
        "--error",
        "-1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0.04"));
    assert!(text.contains("0.9333"));
    let v = stdout_json(&out);
    assert!((v["output"].as_f64().unwrap() - 130.9).abs() < 0.05);
    assert!((v["fan_duty"].as_f64().unwrap() - 0.51).abs() < 0.01);
    assert_eq!(v["activations"].as_array().unwrap().len(), 5);
}

#[test]
fn step_zero_and_clamped() {
    let out = run(&[
        "step",
        "--controller",
        &cfg("default-config.json"),
        "--error",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["output"], 127.5);

    let out = run(&[
        "step",
        "--controller",
        &cfg("fltc-controller.json"),
        "--error",
        "999",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["inputs"][0]["raw"], 999.0);
    assert_eq!(v["inputs"][0]["value"], 50.0);
    assert_eq!(v["inputs"][0]["clamped"], true);
}

#[test]
fn step_invalid_controller_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("ctl.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = run(&["step", "--controller", s(&bad), "--error", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "step",
        "--controller",
        &cfg("fltc-controller.json"),
        "--error",
        "nan",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compile_rules_text_and_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("rules.frl");
    let out = run(&[
        "compile-rules",
        "--rules",
        &cfg("room-rules.frl"),
        "--vocab",
        &cfg("room-vocab.json"),
        "--out",
        s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["rules"], 3);
    let first = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(first.lines().count(), 3);

    // compiling the canonical text again is a fixed point
    let again = dir.path().join("again.frl");
    let out = run(&[
        "compile-rules",
        "--rules",
        s(&out_path),
        "--vocab",
        &cfg("room-vocab.json"),
        "--out",
        s(&again),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&again).unwrap(), first);

    let out = run(&[
        "compile-rules",
        "--rules",
        &cfg("room-matrix.json"),
        "--vocab",
        &cfg("room-vocab.json"),
        "--out",
        s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["rules"], 25);
    assert_eq!(
        std::fs::read_to_string(&out_path).unwrap().lines().count(),
        25
    );
}

#[test]
fn compile_rules_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("bad.frl");
    std::fs::write(
        &rules,
        "IF temperature is cold THEN command is heat\nIF temperature cold THEN command is heat\n",
    )
    .unwrap();
    let out_path = dir.path().join("out.frl");
    let out = run(&[
        "compile-rules",
        "--rules",
        s(&rules),
        "--vocab",
        &cfg("room-vocab.json"),
        "--out",
        s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("bad.frl:2:"), "{err}");
    assert!(!out_path.exists());
}

#[test]
fn default_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let out = run(&["default-config", "--out", s(&path)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"setpoint\": 45"));
    assert_eq!(
        text,
        std::fs::read_to_string(configs().join("default-config.json")).unwrap()
    );
    let doc: fuzzytherm::config::RunConfigDoc = fuzzytherm::config::from_json(&text).unwrap();
    doc.build().unwrap();

    let out = run(&["default-config", "--out", "/no/such/dir/cfg.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn demo_room_commands() {
    let decide = |t: &str, g: &str| {
        let out = run(&["demo-room", "--temperature", t, "--target", g]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        stdout_json(&out)
    };
    assert_eq!(decide("20", "30")["command"], "heat");
    for apex in ["0", "10", "20", "30", "40"] {
        assert_eq!(decide(apex, apex)["command"], "no-change");
    }
    let far = decide("0", "40");
    assert_eq!(far["command"], "heat");
    assert_eq!(far["degree"], 1.0);
    assert_eq!(decide("35", "10")["command"], "cool");

    for (t, g) in [("-1", "20"), ("20", "41"), ("nan", "20")] {
        let out = run(&["demo-room", "--temperature", t, "--target", g]);
        assert_eq!(out.status.code(), Some(2), "{t} {g}");
    }
}

#[test]
fn waveform_csv() {
    let out = run(&["waveform", "--duty", "0.8", "--resolution", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let states: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(states, ["1", "1", "1", "1", "1", "1", "1", "1", "0", "0"]);
    assert_eq!(run(&["waveform", "--duty", "1.5"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["default-config", "--unknown"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--help"]).status.code(), Some(0));
    assert_eq!(
        run(&["serve", "--listen", "not-an-address"]).status.code(),
        Some(2)
    );
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

fn http(port: u16, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut text = String::new();
    stream.read_to_string(&mut text).unwrap();
    let status = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = text
        .split_once("\r\n\r\n")
        .map(|(_, b)| b.to_string())
        .unwrap_or_default();
    (status, body)
}

fn wait_for_listen(child: &mut std::process::Child) {
    let stderr = child.stderr.take().unwrap();
    let mut line = String::new();
    BufReader::new(stderr).read_line(&mut line).unwrap();
    assert!(line.contains("listening on"), "{line}");
}

#[cfg(unix)]
#[test]
fn serve_persists_record_on_sigint() {
    let dir = tempfile::tempdir().unwrap();
    let port = free_port();
    let listen = format!("127.0.0.1:{port}");
    let mut child = bin()
        .args([
            "serve",
            "--listen",
            &listen,
            "--data-dir",
            s(dir.path()),
            "--speed",
            "50",
        ])
        .args(["--config", &cfg("default-config.json")])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    wait_for_listen(&mut child);

    let (status, body) = http(port, "GET", "/state", "");
    assert_eq!(status, 200);
    let state: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(state["phase"], "idle");

    let (status, body) = http(port, "POST", "/runs", "");
    assert_eq!(status, 201, "{body}");
    let run_id = serde_json::from_str::<Value>(&body).unwrap()["run_id"]
        .as_str()
        .unwrap()
        .to_string();
    std::thread::sleep(Duration::from_millis(200));

    let kill = Command::new("kill")
        .args(["-INT", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(kill.success());
    let deadline = Instant::now() + Duration::from_secs(10);
    let code = loop {
        if let Some(status) = child.try_wait().unwrap() {
            break status.code();
        }
        assert!(Instant::now() < deadline, "serve did not exit");
        std::thread::sleep(Duration::from_millis(20));
    };
    assert_eq!(code, Some(0));
    let rec: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join(format!("{run_id}.json"))).unwrap(),
    )
    .unwrap();
    assert_eq!(rec["run_id"], run_id.as_str());
    assert!(!rec["frames"].as_array().unwrap().is_empty());
}

#[test]
fn serve_port_in_use_exits_1() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let listen = taken.local_addr().unwrap().to_string();
    let out = run(&["serve", "--listen", &listen]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}
