//! Live session server speaking JSON text messages over WebSocket.
//!
//! Every connection owns one [`Simulation`]. Client messages are queued in
//! arrival order and applied at the next tick boundary. In realtime mode a
//! wall-clock interval drives the ticks; in lockstep mode the client sends
//! `{"type":"tick"}` to advance, which makes scripted sessions exactly
//! reproducible.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;

use crate::geom::Vec3;
use crate::pointing::HandSample;
use crate::session::Button;
use crate::vehicle::Controls;
use crate::world::Scenario;

use super::config::SessionConfig;
use super::log::{digest_hex, encode_event, Event, EventLog};
use super::sim::{Input, Simulation};
use super::HarnessError;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaceMode {
    Realtime,
    Lockstep,
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub mode: PaceMode,
    /// Finished session logs are written here as `session-<n>.jsonl`.
    pub log_dir: Option<PathBuf>,
    /// Frames are sent every this many ticks.
    pub frame_every_ticks: u64,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self { mode: PaceMode::Realtime, log_dir: None, frame_every_ticks: 2 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ClientMsg {
    Control { steer: f64, accel: f64 },
    Hand { tip: [f64; 3], joint3: [f64; 3] },
    Button { id: String },
    Tick {
        #[serde(default)]
        n: Option<u32>,
    },
}

#[derive(Debug)]
struct ProtocolError {
    code: &'static str,
    message: String,
}

fn parse_client(text: &str, mode: PaceMode) -> Result<ClientAction, ProtocolError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| ProtocolError { code: "malformed", message: e.to_string() })?;
    let kind = value.get("type").and_then(Value::as_str).map(str::to_owned);
    let msg: ClientMsg = serde_json::from_value(value).map_err(|e| ProtocolError {
        code: if matches!(kind.as_deref(), Some("control" | "hand" | "button" | "tick")) {
            "bad_value"
        } else {
            "unknown_type"
        },
        message: e.to_string(),
    })?;
    Ok(match msg {
        ClientMsg::Control { steer, accel } => {
            ClientAction::Input(Input::Control(Controls { steer_rad: steer, accel_mps2: accel }))
        }
        ClientMsg::Hand { tip, joint3 } => {
            ClientAction::Input(Input::Hand(HandSample { tip: Vec3::from(tip), joint3: Vec3::from(joint3), t: 0.0 }))
        }
        ClientMsg::Button { id } => match Button::parse(&id) {
            Some(b) => ClientAction::Input(Input::Button(b)),
            None => return Err(ProtocolError { code: "bad_value", message: format!("unknown button {id:?}") }),
        },
        ClientMsg::Tick { n } => {
            if mode != PaceMode::Lockstep {
                return Err(ProtocolError { code: "unexpected", message: "tick is only valid in lockstep mode".into() });
            }
            ClientAction::Tick(n.unwrap_or(1))
        }
    })
}

#[derive(Debug)]
enum ClientAction {
    Input(Input),
    Tick(u32),
}

/// Frame message describing the current simulation state.
pub fn frame_message(sim: &Simulation) -> Value {
    let v = sim.vehicle();
    let pose = sim.pose();
    let sel = sim.selection();
    let nav = &sim.config().nav;
    let visible = sim.scene().ids_in_window(pose.s_m, pose.s_m + nav.view_distance_m);
    json!({
        "type": "frame",
        "tick": v.tick,
        "t_s": v.tick as f64 * sim.config().dt_s,
        "vehicle": {
            "position": v.position,
            "heading_rad": v.heading_rad,
            "speed_mps": v.speed_mps,
            "speed_kmh": v.speed_kmh(),
            "s_m": pose.s_m,
            "lateral_m": pose.lateral_m,
        },
        "alarm": sim.alarm(),
        "visible": visible,
        "target": sim.task().target_id,
        "selection": {
            "phase": sel.phase,
            "candidate": sel.candidate_id,
            "view_s": if sel.snapshot.is_some() { Some(sel.view_s_m) } else { None },
            "snapshot_ids": sel.snapshot.as_ref().map(|s| s.visible_ids.clone()),
        },
    })
}

fn hello_message(sim: &Simulation, scenario: &Value, mode: PaceMode) -> Value {
    json!({
        "type": "hello",
        "protocol": PROTOCOL_VERSION,
        "mode": mode,
        "dt_s": sim.config().dt_s,
        "config": sim.config(),
        "scenario_digest": sim.log().header.scenario_digest,
        "scenario": scenario,
    })
}

fn event_message(sim: &Simulation, from: usize) -> Vec<Value> {
    sim.log().records[from..]
        .iter()
        .filter(|r| !matches!(r.event, Event::State(_)))
        .map(|r| {
            let rec: Value = serde_json::from_str(&encode_event(r)).expect("record is json");
            json!({ "type": "event", "record": rec })
        })
        .collect()
}

pub struct LiveServer {
    listener: TcpListener,
    config: SessionConfig,
    options: ServeOptions,
    scenario: Arc<(Scenario, String)>,
    sessions: Arc<AtomicU64>,
}

impl LiveServer {
    pub async fn bind(addr: &str, config: SessionConfig, options: ServeOptions) -> Result<Self, HarnessError> {
        config.validate()?;
        let scenario = Scenario::generate(config.seed, config.course.clone(), config.scene.clone())?;
        let digest = digest_hex(scenario.to_json().as_bytes());
        let listener = TcpListener::bind(addr).await.map_err(|e| HarnessError::Io(format!("bind {addr}: {e}")))?;
        Ok(Self {
            listener,
            config,
            options,
            scenario: Arc::new((scenario, digest)),
            sessions: Arc::new(AtomicU64::new(0)),
        })
    }

    pub fn local_addr(&self) -> std::net::SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Accepts connections until the task is dropped.
    pub async fn run(self) -> Result<(), HarnessError> {
        loop {
            let (stream, _) = self.listener.accept().await.map_err(|e| HarnessError::Io(e.to_string()))?;
            let n = self.sessions.fetch_add(1, Ordering::SeqCst) + 1;
            let config = self.config.clone();
            let options = self.options.clone();
            let scenario = Arc::clone(&self.scenario);
            tokio::spawn(async move {
                if let Ok(log) = handle_connection(stream, &config, &options, &scenario).await {
                    if let Some(dir) = &options.log_dir {
                        let _ = log.write_to(&dir.join(format!("session-{n}.jsonl")));
                    }
                }
            });
        }
    }
}

async fn handle_connection(
    stream: TcpStream,
    config: &SessionConfig,
    options: &ServeOptions,
    scenario: &(Scenario, String),
) -> Result<EventLog, HarnessError> {
    let ws = tokio_tungstenite::accept_async(stream).await.map_err(|e| HarnessError::Io(e.to_string()))?;
    let (mut tx, mut rx) = ws.split();
    let scene = Arc::new(scenario.0.scene.clone());
    let mut sim = Simulation::with_scene(config, scene, scenario.1.clone())?;
    let scenario_json = serde_json::to_value(&scenario.0).expect("scenario is json");
    let io = |e: tokio_tungstenite::tungstenite::Error| HarnessError::Io(e.to_string());

    tx.send(Message::text(hello_message(&sim, &scenario_json, options.mode).to_string())).await.map_err(io)?;
    tx.send(Message::text(frame_message(&sim).to_string())).await.map_err(io)?;

    let mut queue: Vec<Input> = Vec::new();
    let mut interval = tokio::time::interval(Duration::from_secs_f64(config.dt_s));
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Burst);
    let realtime = options.mode == PaceMode::Realtime;

    loop {
        let mut ticks_due = 0u32;
        tokio::select! {
            msg = rx.next() => {
                let text = match msg {
                    None | Some(Err(_)) => break,
                    Some(Ok(Message::Close(_))) => break,
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Binary(_))) => {
                        let err = json!({"type": "error", "code": "malformed", "message": "binary frames are not supported"});
                        let _ = tx.send(Message::text(err.to_string())).await;
                        break;
                    }
                    Some(Ok(_)) => continue,
                };
                match parse_client(&text, options.mode) {
                    Ok(ClientAction::Input(i)) => queue.push(i),
                    Ok(ClientAction::Tick(n)) => ticks_due = n,
                    Err(e) => {
                        let err = json!({"type": "error", "code": e.code, "message": e.message});
                        let _ = tx.send(Message::text(err.to_string())).await;
                        break;
                    }
                }
            }
            _ = interval.tick(), if realtime => ticks_due = 1,
        }
        let mut ended = false;
        let mut outgoing = Vec::new();
        for _ in 0..ticks_due {
            if sim.finished() {
                ended = true;
                break;
            }
            let first = match sim.step(&queue) {
                Ok(i) => i,
                Err(e) => {
                    outgoing.push(json!({"type": "error", "code": "aborted", "message": e.to_string()}));
                    ended = true;
                    break;
                }
            };
            queue.clear();
            outgoing.extend(event_message(&sim, first));
            if sim.tick() % options.frame_every_ticks.max(1) == 0 {
                outgoing.push(frame_message(&sim));
            }
        }
        for m in outgoing {
            if tx.send(Message::text(m.to_string())).await.is_err() {
                ended = true;
                break;
            }
        }
        if ended || sim.finished() {
            break;
        }
    }
    let log = sim.finish();
    let end = json!({"type": "end", "tick": log.records.last().map_or(0, |r| r.tick), "hash": log.hash_hex()});
    let _ = tx.send(Message::text(end.to_string())).await;
    let _ = tx.send(Message::Close(None)).await;
    Ok(log)
}

/// Runs the server on a fresh multi-threaded runtime until interrupted.
pub fn serve(config: SessionConfig, port: u16, options: ServeOptions) -> Result<(), HarnessError> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| HarnessError::Io(e.to_string()))?;
    rt.block_on(async move {
        let server = LiveServer::bind(&format!("0.0.0.0:{port}"), config, options).await?;
        eprintln!("listening on ws://{}", server.local_addr());
        server.run().await
    })
}
