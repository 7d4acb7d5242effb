//! Live shared-control service over websockets.
//!
//! One task owns the [`Session`] and ticks it at a fixed rate. Connections
//! send requests into its queue and receive serialized frames from a
//! broadcast channel. Connect to `/ws?role=controller` (at most one) or
//! `/ws?role=observer` (the default).

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use dissector_core::dissect::StimulationEvokedMap;
use dissector_core::runtime::Session;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::Value;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::error::{Error, Result};
use crate::protocol::{
    ack_value, error_value, parse_client_message, reject_value, release_ack_value, simple_ack_value, snapshot_value,
    state_value, ClientMessage,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Controller,
    #[default]
    Observer,
}

#[derive(Deserialize)]
struct RoleQuery {
    #[serde(default)]
    role: Role,
}

enum Request {
    Message { msg: ClientMessage, reply: oneshot::Sender<Value> },
    /// Replies with the sequence number of the last broadcast frame and the snapshot.
    Snapshot { reply: oneshot::Sender<(u64, Value)> },
    ReleaseAll,
}

type Frame = Arc<(u64, String)>;

#[derive(Clone)]
struct AppState {
    requests: mpsc::Sender<Request>,
    frames: broadcast::Sender<Frame>,
    controller: Arc<AtomicBool>,
}

fn handle_message(session: &mut Session, msg: ClientMessage) -> Value {
    match msg {
        ClientMessage::Apply { cmd, k, duration } => match session.apply_command(&cmd, k, duration) {
            Ok(ack) => ack_value(&ack),
            Err(e) => reject_value(Some(&cmd), &e.to_string()),
        },
        ClientMessage::Release { cmd } => {
            let released = session.release_command(&cmd);
            release_ack_value(&cmd, released)
        }
        ClientMessage::Pause => {
            session.pause();
            simple_ack_value("pause")
        }
        ClientMessage::Resume => {
            session.resume();
            simple_ack_value("resume")
        }
        ClientMessage::Reset { seed } => {
            let seed = seed.unwrap_or_else(|| session.seed());
            match session.reset(seed) {
                Ok(()) => simple_ack_value("reset"),
                Err(e) => reject_value(Some("reset"), &e.to_string()),
            }
        }
    }
}

async fn simulation(
    mut session: Session,
    map: StimulationEvokedMap,
    tick: Duration,
    mut requests: mpsc::Receiver<Request>,
    frames: broadcast::Sender<Frame>,
) {
    let mut interval = tokio::time::interval(tick);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let mut seq = 0u64;
    loop {
        tokio::select! {
            biased;
            req = requests.recv() => match req {
                Some(Request::Message { msg, reply }) => {
                    let _ = reply.send(handle_message(&mut session, msg));
                }
                Some(Request::Snapshot { reply }) => {
                    let _ = reply.send((seq, snapshot_value(&session.snapshot(), &map)));
                }
                Some(Request::ReleaseAll) => session.release_all(),
                None => break,
            },
            _ = interval.tick() => {
                match session.tick() {
                    Ok(frame) => {
                        seq += 1;
                        // No receivers is fine; frames are only for whoever is listening.
                        let _ = frames.send(Arc::new((seq, state_value(&frame).to_string())));
                    }
                    Err(e) => log::error!("tick failed: {e}"),
                }
            }
        }
    }
}

async fn send_json(sink: &mut futures::stream::SplitSink<WebSocket, Message>, v: &Value) -> bool {
    sink.send(Message::Text(v.to_string().into())).await.is_ok()
}

async fn client(socket: WebSocket, role: Role, st: AppState) {
    let (mut sink, mut stream) = socket.split();
    if role == Role::Controller && st.controller.swap(true, Ordering::SeqCst) {
        let _ = send_json(&mut sink, &reject_value(None, "a controller is already connected")).await;
        let _ = sink.send(Message::Close(None)).await;
        return;
    }
    let mut frames = st.frames.subscribe();
    let (tx, rx) = oneshot::channel();
    let snap_seq = if st.requests.send(Request::Snapshot { reply: tx }).await.is_ok() {
        match rx.await {
            Ok((seq, snap)) if send_json(&mut sink, &snap).await => seq,
            _ => u64::MAX,
        }
    } else {
        u64::MAX
    };
    if snap_seq != u64::MAX {
        loop {
            tokio::select! {
                incoming = stream.next() => match incoming {
                    Some(Ok(Message::Text(text))) => {
                        let reply = if role == Role::Observer {
                            reject_value(None, "observers cannot send commands")
                        } else {
                            match parse_client_message(text.as_str()) {
                                Err(e) => error_value(&format!("malformed message: {e}")),
                                Ok(msg) => {
                                    let (tx, rx) = oneshot::channel();
                                    if st.requests.send(Request::Message { msg, reply: tx }).await.is_err() {
                                        break;
                                    }
                                    match rx.await {
                                        Ok(v) => v,
                                        Err(_) => break,
                                    }
                                }
                            }
                        };
                        if !send_json(&mut sink, &reply).await {
                            break;
                        }
                    }
                    Some(Ok(Message::Binary(_))) => {
                        if !send_json(&mut sink, &error_value("malformed message: expected a text frame")).await {
                            break;
                        }
                    }
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                    Some(Ok(_)) => {}
                },
                frame = frames.recv() => match frame {
                    Ok(f) if f.0 > snap_seq => {
                        if sink.send(Message::Text(f.1.clone().into())).await.is_err() {
                            break;
                        }
                    }
                    Ok(_) => {}
                    Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("client lagged; {n} frames dropped"),
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            }
        }
    }
    if role == Role::Controller {
        // Fail safe: a departing controller leaves nothing pinned.
        let _ = st.requests.send(Request::ReleaseAll).await;
        st.controller.store(false, Ordering::SeqCst);
    }
}

async fn ws_handler(ws: WebSocketUpgrade, Query(q): Query<RoleQuery>, State(st): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, q.role, st))
}

async fn index() -> &'static str {
    "dissector live session: connect a websocket to /ws?role=controller or /ws?role=observer\n"
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    server: JoinHandle<std::io::Result<()>>,
    sim: JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) -> Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let served = self.server.await.map_err(|e| Error::Server(e.to_string()))?;
        self.sim.abort();
        served.map_err(|e| Error::Server(e.to_string()))
    }

    /// Runs until the server task ends.
    pub async fn wait(self) -> Result<()> {
        let served = self.server.await.map_err(|e| Error::Server(e.to_string()))?;
        self.sim.abort();
        served.map_err(|e| Error::Server(e.to_string()))
    }
}

/// Starts the simulation loop and the HTTP server on `listener`.
pub fn spawn(session: Session, map: StimulationEvokedMap, listener: TcpListener, tick_hz: f64) -> Result<ServerHandle> {
    if !(tick_hz > 0.0 && tick_hz.is_finite()) {
        return Err(Error::Usage(format!("tick rate must be positive, got {tick_hz}")));
    }
    let addr = listener.local_addr().map_err(|e| Error::Server(e.to_string()))?;
    let (req_tx, req_rx) = mpsc::channel(256);
    let (frame_tx, _) = broadcast::channel(256);
    let sim = tokio::spawn(simulation(session, map, Duration::from_secs_f64(1.0 / tick_hz), req_rx, frame_tx.clone()));
    let state = AppState { requests: req_tx, frames: frame_tx, controller: Arc::new(AtomicBool::new(false)) };
    let app = Router::new().route("/", get(index)).route("/ws", get(ws_handler)).with_state(state);
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stop_rx.await;
            })
            .await
    });
    Ok(ServerHandle { addr, shutdown: Some(stop_tx), server, sim })
}

/// Serves until the process is interrupted.
pub fn serve_blocking(session: Session, map: StimulationEvokedMap, host: &str, port: u16, tick_hz: f64) -> Result<()> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Server(e.to_string()))?;
    rt.block_on(async {
        let listener =
            TcpListener::bind((host, port)).await.map_err(|e| Error::Server(format!("cannot bind {host}:{port}: {e}")))?;
        let handle = spawn(session, map, listener, tick_hz)?;
        log::info!("serving on ws://{}/ws", handle.addr);
        eprintln!("serving on ws://{}/ws", handle.addr);
        handle.wait().await
    })
}
