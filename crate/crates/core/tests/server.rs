mod common;

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use pointselect::harness::agents::{DriverAgent, PointerAgent};
use pointselect::harness::server::{LiveServer, PaceMode, ServeOptions};
use pointselect::harness::{replay, run_session, EventLog, Input, SessionConfig, Simulation};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start(config: SessionConfig, mode: PaceMode) -> String {
    let server = LiveServer::bind("127.0.0.1:0", config, ServeOptions { mode, ..Default::default() }).await.unwrap();
    let addr = server.local_addr();
    tokio::spawn(server.run());
    format!("ws://{addr}")
}

async fn recv(ws: &mut Ws) -> Option<Value> {
    loop {
        match ws.next().await? {
            Ok(Message::Text(t)) => return Some(serde_json::from_str(&t).unwrap()),
            Ok(Message::Close(_)) | Err(_) => return None,
            Ok(_) => continue,
        }
    }
}

/// Reads until a message of `kind` arrives.
async fn until(ws: &mut Ws, kind: &str) -> Value {
    loop {
        let m = recv(ws).await.unwrap_or_else(|| panic!("closed before {kind}"));
        if m["type"] == kind {
            return m;
        }
    }
}

fn input_message(input: &Input) -> Value {
    match input {
        Input::Control(c) => json!({"type": "control", "steer": c.steer_rad, "accel": c.accel_mps2}),
        Input::Hand(h) => json!({"type": "hand", "tip": [h.tip.x, h.tip.y, h.tip.z], "joint3": [h.joint3.x, h.joint3.y, h.joint3.z]}),
        Input::Button(b) => json!({"type": "button", "id": b.as_str()}),
    }
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::text(v.to_string())).await.unwrap();
}

/// Drives a lockstep session with the synthetic agents and returns the server's final hash.
async fn drive_lockstep(url: String, config: SessionConfig) -> (String, usize) {
    let (mut ws, _) = connect_async(&url).await.unwrap();
    let hello = until(&mut ws, "hello").await;
    assert_eq!(hello["protocol"], 1);
    assert_eq!(hello["mode"], "lockstep");
    let mut sim = Simulation::new(&config).unwrap();
    assert_eq!(hello["scenario_digest"], sim.log().header.scenario_digest);
    let mut driver = DriverAgent::new(&config);
    let mut pointer = PointerAgent::new(&config);
    let mut events = 0;
    let mut inputs = Vec::new();
    while !sim.finished() {
        inputs.clear();
        inputs.push(Input::Control(driver.act(&sim)));
        pointer.act(&sim, &mut inputs);
        for i in &inputs {
            send(&mut ws, input_message(i)).await;
        }
        send(&mut ws, json!({"type": "tick"})).await;
        let first = sim.step(&inputs).unwrap();
        let expected = sim.log().records[first..].iter().filter(|r| r.event.kind() != "state").count();
        for _ in 0..expected {
            let m = until(&mut ws, "event").await;
            assert_eq!(m["record"]["tick"], sim.tick());
            events += 1;
        }
    }
    send(&mut ws, json!({"type": "tick"})).await;
    let end = until(&mut ws, "end").await;
    let local = sim.finish();
    assert_eq!(end["hash"], local.hash_hex());
    (end["hash"].as_str().unwrap().to_owned(), events)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn lockstep_session_matches_headless_run() {
    let mut config = common::zero_noise_config(21, 50.0, 30.0);
    config.pointer.noise_deg = 4.0;
    let url = start(config.clone(), PaceMode::Lockstep).await;
    let (hash, events) = drive_lockstep(url, config.clone()).await;
    assert!(events > 0);
    assert_eq!(hash, run_session(&config).unwrap().hash_hex());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn simultaneous_connections_are_independent() {
    let config = common::zero_noise_config(22, 50.0, 15.0);
    let url = start(config.clone(), PaceMode::Lockstep).await;
    let want = run_session(&config).unwrap().hash_hex();
    let a = tokio::spawn(drive_lockstep(url.clone(), config.clone()));
    let b = tokio::spawn(drive_lockstep(url, config));
    assert_eq!(a.await.unwrap().0, want);
    assert_eq!(b.await.unwrap().0, want);
}

#[tokio::test]
async fn frames_follow_ticks() {
    let config = common::zero_noise_config(23, 50.0, 10.0);
    let url = start(config, PaceMode::Lockstep).await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    until(&mut ws, "hello").await;
    let first = until(&mut ws, "frame").await;
    assert_eq!(first["tick"], 0);
    send(&mut ws, json!({"type": "control", "steer": 0.0, "accel": 1.0})).await;
    send(&mut ws, json!({"type": "tick", "n": 4})).await;
    let f = until(&mut ws, "frame").await;
    assert_eq!(f["tick"], 2);
    let f = until(&mut ws, "frame").await;
    assert_eq!(f["tick"], 4);
    assert!(f["vehicle"]["speed_mps"].as_f64().unwrap() > 0.0);
    assert_eq!(f["selection"]["phase"], "idle");
}

async fn expect_error(mode: PaceMode, text: &str, code: &str) {
    let url = start(common::zero_noise_config(24, 50.0, 10.0), mode).await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    until(&mut ws, "hello").await;
    ws.send(Message::text(text.to_owned())).await.unwrap();
    let err = until(&mut ws, "error").await;
    assert_eq!(err["code"], code, "{text}");
    // the session ends after an error
    let end = until(&mut ws, "end").await;
    if mode == PaceMode::Lockstep {
        assert_eq!(end["tick"], 0);
    }
    assert!(recv(&mut ws).await.is_none());
}

#[tokio::test]
async fn malformed_messages_get_error_frames() {
    expect_error(PaceMode::Lockstep, "{not json", "malformed").await;
    expect_error(PaceMode::Lockstep, r#"{"type":"teleport"}"#, "unknown_type").await;
    expect_error(PaceMode::Lockstep, r#"{"type":"button","id":"select"}"#, "bad_value").await;
    expect_error(PaceMode::Lockstep, r#"{"type":"control","steer":"left","accel":0}"#, "bad_value").await;
    expect_error(PaceMode::Realtime, r#"{"type":"tick"}"#, "unexpected").await;
}

#[tokio::test]
async fn realtime_mode_advances_on_its_own() {
    let url = start(common::zero_noise_config(25, 50.0, 10.0), PaceMode::Realtime).await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    until(&mut ws, "hello").await;
    let mut last = 0;
    while last < 20 {
        let f = until(&mut ws, "frame").await;
        let t = f["tick"].as_u64().unwrap();
        assert!(t >= last);
        last = t;
    }
}

#[tokio::test]
async fn closed_session_log_is_written_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let options = ServeOptions { mode: PaceMode::Lockstep, log_dir: Some(dir.path().to_path_buf()), ..Default::default() };
    let server = LiveServer::bind("127.0.0.1:0", common::zero_noise_config(26, 50.0, 60.0), options).await.unwrap();
    let url = format!("ws://{}", server.local_addr());
    tokio::spawn(server.run());

    let (mut ws, _) = connect_async(&url).await.unwrap();
    until(&mut ws, "hello").await;
    send(&mut ws, json!({"type": "control", "steer": 0.0, "accel": 1.0})).await;
    send(&mut ws, json!({"type": "tick", "n": 30})).await;
    send(&mut ws, json!({"type": "button", "id": "activate"})).await;
    send(&mut ws, json!({"type": "tick", "n": 10})).await;
    while until(&mut ws, "frame").await["tick"] != 40 {}
    ws.close(None).await.unwrap();
    while recv(&mut ws).await.is_some() {}

    let path = dir.path().join("session-1.jsonl");
    let mut waited = 0;
    while !path.exists() && waited < 100 {
        tokio::time::sleep(std::time::Duration::from_millis(20)).await;
        waited += 1;
    }
    let log = EventLog::read_from(&path).unwrap();
    assert_eq!(log.records.iter().filter(|r| r.event.kind() == "state").count(), 40);
    assert!(replay(&log).unwrap().is_verified());
}
