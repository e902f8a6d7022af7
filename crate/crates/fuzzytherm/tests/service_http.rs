use std::time::Duration;

use fuzzytherm::config::RunConfigDoc;
use fuzzytherm::service::{serve, Service, ServiceOptions};
use serde_json::{json, Value};
use tokio::sync::oneshot;

struct Server {
    base: String,
    stop: Option<oneshot::Sender<()>>,
    handle: tokio::task::JoinHandle<std::io::Result<()>>,
    dir: tempfile::TempDir,
}

impl Server {
    async fn start(speed: f64) -> Server {
        let dir = tempfile::tempdir().unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let svc = Service::new(ServiceOptions {
            data_dir: dir.path().to_path_buf(),
            speed,
            default_config: None,
        });
        let (tx, rx) = oneshot::channel::<()>();
        let handle = tokio::spawn(serve(listener, svc, async move {
            let _ = rx.await;
        }));
        Server {
            base,
            stop: Some(tx),
            handle,
            dir,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// Returns the data directory so records can be inspected afterwards.
    async fn shutdown(mut self) -> tempfile::TempDir {
        let _ = self.stop.take().unwrap().send(());
        tokio::time::timeout(Duration::from_secs(10), self.handle)
            .await
            .expect("graceful shutdown")
            .unwrap()
            .unwrap();
        self.dir
    }
}

fn config(duration: f64) -> Value {
    let mut doc = serde_json::to_value(RunConfigDoc::default()).unwrap();
    doc["loop"]["duration"] = duration.into();
    doc
}

async fn get_json(client: &reqwest::Client, url: String) -> (u16, Value) {
    let r = client.get(url).send().await.unwrap();
    (r.status().as_u16(), r.json().await.unwrap())
}

async fn post_json(client: &reqwest::Client, url: String, body: Option<Value>) -> (u16, Value) {
    let mut req = client.post(url);
    if let Some(b) = body {
        req = req.json(&b);
    }
    let r = req.send().await.unwrap();
    (r.status().as_u16(), r.json().await.unwrap())
}

/// Minimal server-sent-events reader.
struct Events {
    resp: reqwest::Response,
    buf: String,
}

impl Events {
    async fn open(url: String) -> Events {
        let resp = reqwest::get(url).await.unwrap();
        assert_eq!(resp.status().as_u16(), 200);
        assert!(resp.headers()["content-type"]
            .to_str()
            .unwrap()
            .starts_with("text/event-stream"));
        Events {
            resp,
            buf: String::new(),
        }
    }

    /// Next `(event, data)`, or `None` when the stream ends.
    async fn next(&mut self) -> Option<(String, Value)> {
        loop {
            if let Some(end) = self.buf.find("\n\n") {
                let block: String = self.buf.drain(..end + 2).collect();
                let mut event = String::from("message");
                let mut data = String::new();
                for line in block.lines() {
                    if let Some(v) = line.strip_prefix("event:") {
                        event = v.trim().to_string();
                    } else if let Some(v) = line.strip_prefix("data:") {
                        data.push_str(v.trim_start());
                    }
                }
                if data.is_empty() {
                    continue;
                }
                return Some((event, serde_json::from_str(&data).unwrap()));
            }
            let chunk = tokio::time::timeout(Duration::from_secs(20), self.resp.chunk())
                .await
                .expect("stream stalled")
                .ok()??;
            self.buf.push_str(std::str::from_utf8(&chunk).unwrap());
        }
    }

    /// Frames until the `stopped` event.
    async fn frames_until_stopped(&mut self) -> Vec<Value> {
        let mut frames = Vec::new();
        while let Some((event, data)) = self.next().await {
            match event.as_str() {
                "frame" => frames.push(data),
                "stopped" => break,
                other => panic!("unexpected event {other}"),
            }
        }
        frames
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn lifecycle_and_errors() {
    let server = Server::start(100.0).await;
    let client = reqwest::Client::new();

    assert_eq!(
        get_json(&client, server.url("/state")).await,
        (200, json!({ "phase": "idle" }))
    );
    let (status, err) = post_json(
        &client,
        server.url("/runs/current/setpoint"),
        Some(json!({ "value": 45 })),
    )
    .await;
    assert_eq!((status, err["code"].as_str()), (409, Some("conflict")));
    let (status, _) = post_json(&client, server.url("/runs/current/stop"), None).await;
    assert_eq!(status, 409);

    let mut bad = config(600.0);
    bad["controller"]["inputs"][0]["terms"][1]["points"] = json!([0, -1, 2]);
    let (status, err) = post_json(&client, server.url("/runs"), Some(bad)).await;
    assert_eq!(status, 400);
    assert_eq!(err["code"], "invalid_config");
    assert_eq!(
        err["details"]["path"],
        "controller.inputs[0].terms[1].points"
    );
    assert!(err["message"].is_string());

    let r = client
        .post(server.url("/runs"))
        .header("content-type", "application/json")
        .body(r#"{"controller": {"inputs": [}"#)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 400);
    assert_eq!(r.json::<Value>().await.unwrap()["code"], "invalid_config");

    let (status, started) = post_json(&client, server.url("/runs"), Some(config(600.0))).await;
    assert_eq!(status, 201);
    let run_id = started["run_id"].as_str().unwrap().to_string();
    let (status, _) = post_json(&client, server.url("/runs"), Some(config(600.0))).await;
    assert_eq!(status, 409);

    tokio::time::sleep(Duration::from_millis(100)).await;
    let (_, state) = get_json(&client, server.url("/state")).await;
    assert_eq!(state["phase"], "running");
    assert_eq!(state["run_id"], run_id.as_str());
    assert_eq!(state["last_frame"]["run_id"], run_id.as_str());
    assert!(state["config"]["controller"]["inputs"].is_array());

    let (status, err) = post_json(
        &client,
        server.url("/runs/current/setpoint"),
        Some(json!({ "value": -10 })),
    )
    .await;
    assert_eq!(status, 422);
    assert_eq!(err["code"], "out_of_range");
    assert_eq!(err["details"]["limits"], json!([0.0, 120.0]));
    let (status, _) = post_json(
        &client,
        server.url("/runs/current/setpoint"),
        Some(json!({ "val": 3 })),
    )
    .await;
    assert_eq!(status, 400);

    let r = client
        .get(server.url(&format!("/runs/{run_id}/record")))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 409);

    let (status, stopped) = post_json(&client, server.url("/runs/current/stop"), None).await;
    assert_eq!(status, 200);
    assert_eq!(stopped["run_id"], run_id.as_str());
    let (status, _) = post_json(&client, server.url("/runs/current/stop"), None).await;
    assert_eq!(status, 409);

    let (_, state) = get_json(&client, server.url("/state")).await;
    assert_eq!(state["phase"], "stopped");
    assert_eq!(state["frames"], stopped["frames"]);
    assert!(state["last_frame"]["t"].is_number());

    let first = client
        .get(server.url(&format!("/runs/{run_id}/record")))
        .send()
        .await
        .unwrap();
    assert_eq!(first.status().as_u16(), 200);
    let first = first.bytes().await.unwrap();
    let second = client
        .get(server.url(&format!("/runs/{run_id}/record")))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(first, second);
    let record: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(
        record["frames"].as_array().unwrap().len() as u64,
        stopped["frames"].as_u64().unwrap()
    );
    assert_eq!(
        record["frames"].as_array().unwrap().last().unwrap()["t"],
        state["last_frame"]["t"]
    );

    for id in ["run-0-0", "..%2F..%2Fetc%2Fpasswd", "a.b"] {
        let r = client
            .get(server.url(&format!("/runs/{id}/record")))
            .send()
            .await
            .unwrap();
        assert_eq!(r.status().as_u16(), 404, "{id}");
        assert_eq!(r.json::<Value>().await.unwrap()["code"], "not_found");
    }

    // a stopped session accepts a new run
    let (status, again) = post_json(&client, server.url("/runs"), Some(config(5.0))).await;
    assert_eq!(status, 201);
    assert_ne!(again["run_id"], run_id.as_str());
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn consumers_agree_with_each_other_and_the_record() {
    let server = Server::start(400.0).await;
    let client = reqwest::Client::new();
    let mut a = Events::open(server.url("/telemetry")).await;
    let mut b = Events::open(server.url("/telemetry")).await;

    let (_, started) = post_json(&client, server.url("/runs"), Some(config(120.0))).await;
    let run_id = started["run_id"].as_str().unwrap().to_string();
    let fa = a.frames_until_stopped().await;
    let fb = b.frames_until_stopped().await;
    assert_eq!(fa.len(), 120);
    assert_eq!(fa, fb);
    for (i, f) in fa.iter().enumerate() {
        assert_eq!(f["run_id"], run_id.as_str());
        assert_eq!(f["t"], i as f64);
    }

    let (_, state) = get_json(&client, server.url("/state")).await;
    assert_eq!(state["phase"], "stopped");
    let record: Value = client
        .get(server.url(&format!("/runs/{run_id}/record")))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let stored = record["frames"].as_array().unwrap();
    assert_eq!(stored.len(), fa.len());
    for (streamed, stored) in fa.iter().zip(stored) {
        let mut streamed = streamed.clone();
        streamed.as_object_mut().unwrap().remove("run_id");
        assert_eq!(&streamed, stored);
    }
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn setpoint_applies_from_the_next_frame() {
    let server = Server::start(50.0).await;
    let client = reqwest::Client::new();
    let mut cfg = config(600.0);
    cfg["loop"]["setpoint"] = 30.0.into();
    let (_, started) = post_json(&client, server.url("/runs"), Some(cfg)).await;
    let run_id = started["run_id"].as_str().unwrap().to_string();

    let mut events = Events::open(server.url("/telemetry")).await;
    let (_, first) = events.next().await.unwrap();
    assert_eq!(first["setpoint"], 30.0);
    let (status, ack) = post_json(
        &client,
        server.url("/runs/current/setpoint"),
        Some(json!({ "value": 45 })),
    )
    .await;
    assert_eq!(status, 200);
    assert_eq!(ack["setpoint"], 45.0);
    let (_, state) = get_json(&client, server.url("/state")).await;
    let acked_at = state["last_frame"]["t"].as_f64().unwrap();

    let mut saw_new = false;
    for _ in 0..20 {
        let (event, frame) = events.next().await.unwrap();
        assert_eq!(event, "frame");
        let t = frame["t"].as_f64().unwrap();
        if t > acked_at {
            assert_eq!(
                frame["setpoint"], 45.0,
                "frame at t={t} after ack at {acked_at}"
            );
            saw_new = true;
        }
    }
    assert!(saw_new);

    // a late consumer starts at the current frame, not the beginning
    let mut late = Events::open(server.url("/telemetry")).await;
    let (_, head) = late.next().await.unwrap();
    assert!(head["t"].as_f64().unwrap() > acked_at);
    let (_, next) = late.next().await.unwrap();
    assert_eq!(
        next["t"].as_f64().unwrap(),
        head["t"].as_f64().unwrap() + 1.0
    );

    post_json(&client, server.url("/runs/current/stop"), None).await;
    let record: Value = client
        .get(server.url(&format!("/runs/{run_id}/record")))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let frames = record["frames"].as_array().unwrap();
    let switch = frames.iter().position(|f| f["setpoint"] == 45.0).unwrap();
    assert!(frames[..switch].iter().all(|f| f["setpoint"] == 30.0));
    assert!(frames[switch..].iter().all(|f| f["setpoint"] == 45.0));
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn shutdown_persists_the_active_run() {
    let server = Server::start(20.0).await;
    let client = reqwest::Client::new();
    let (_, started) = post_json(&client, server.url("/runs"), Some(config(600.0))).await;
    let run_id = started["run_id"].as_str().unwrap().to_string();
    let mut events = Events::open(server.url("/telemetry")).await;
    events.next().await.unwrap();
    let dir = server.shutdown().await;
    let text = std::fs::read_to_string(dir.path().join(format!("{run_id}.json"))).unwrap();
    let record: Value = serde_json::from_str(&text).unwrap();
    assert!(!record["frames"].as_array().unwrap().is_empty());
}
