//! WebSocket endpoint for the operator console.
//!
//! One task owns the [`Session`]. Connection tasks talk to it only through
//! an ordered command queue; snapshots flow back through a watch channel
//! that always holds the newest one, so a slow client skips stale states
//! instead of queueing them.

use std::future::Future;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::MissedTickBehavior;

use crate::config::Scene;
use crate::error::{Result, SessionError};
use crate::protocol::{ErrorCode, ProtocolMessage, StateSnapshot};
use crate::session::Session;

/// Path of the WebSocket endpoint.
pub const WS_PATH: &str = "/ws";

type ErrorTx = mpsc::UnboundedSender<ProtocolMessage>;

enum Command {
    Connect {
        errors: ErrorTx,
        reply: oneshot::Sender<Option<u64>>,
    },
    Message {
        operator: u64,
        msg: ProtocolMessage,
    },
    Disconnect {
        operator: u64,
    },
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Command>,
    snapshots: watch::Receiver<Option<StateSnapshot>>,
}

/// A bound but not yet running server.
pub struct Server {
    listener: TcpListener,
    scene: Scene,
}

impl Server {
    pub async fn bind(scene: Scene, addr: &str) -> Result<Self> {
        let listener = TcpListener::bind(addr).await.map_err(|source| SessionError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        Ok(Self { listener, scene })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        self.listener.local_addr().map_err(|e| SessionError::Server(e.to_string()))
    }

    /// Runs until `shutdown` resolves.
    pub async fn run_until(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<()> {
        let session = Session::new(&self.scene)?;
        let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
        let (snap_tx, snap_rx) = watch::channel(None);
        let period = Duration::from_secs_f64(1.0 / self.scene.config.rate_hz);
        let session_loop = tokio::spawn(run_session(session, cmd_rx, snap_tx, period));
        let app = Router::new().route(WS_PATH, get(upgrade)).with_state(AppState {
            commands: cmd_tx,
            snapshots: snap_rx,
        });
        log::info!("listening on {}", self.local_addr()?);
        let served = axum::serve(self.listener, app).with_graceful_shutdown(shutdown).await;
        session_loop.abort();
        served.map_err(|e| SessionError::Server(e.to_string()))
    }

    pub async fn run(self) -> Result<()> {
        self.run_until(std::future::pending()).await
    }
}

/// The only owner of session state: applies commands in arrival order and
/// publishes a snapshot every period.
async fn run_session(
    mut session: Session,
    mut commands: mpsc::UnboundedReceiver<Command>,
    snapshots: watch::Sender<Option<StateSnapshot>>,
    period: Duration,
) {
    let start = Instant::now();
    let mut last_t = f64::NEG_INFINITY;
    // strictly increasing session time for every applied input
    let mut now = move || {
        let t = start.elapsed().as_secs_f64().max(last_t + 1e-9);
        last_t = t;
        t
    };
    let mut ticker = tokio::time::interval(period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut operator: Option<(u64, ErrorTx)> = None;
    let mut next_id = 0u64;
    loop {
        tokio::select! {
            biased;
            cmd = commands.recv() => match cmd {
                None => return,
                Some(Command::Connect { errors, reply }) => {
                    let accepted = match &operator {
                        Some((_, tx)) if !tx.is_closed() => None,
                        _ => {
                            next_id += 1;
                            operator = Some((next_id, errors));
                            Some(next_id)
                        }
                    };
                    let _ = reply.send(accepted);
                }
                Some(Command::Message { operator: id, msg }) => {
                    let Some((current, errors)) = &operator else { continue };
                    if *current != id {
                        continue;
                    }
                    if let Some(err) = session.handle(msg, now()) {
                        let _ = errors.send(err);
                    }
                }
                Some(Command::Disconnect { operator: id }) => {
                    if operator.as_ref().is_some_and(|(current, _)| *current == id) {
                        operator = None;
                        log::info!("operator {id} disconnected");
                    }
                }
            },
            _ = ticker.tick() => {
                if let Err(e) = session.hold(now()) {
                    log::warn!("execution tick failed: {e}");
                }
                snapshots.send_replace(Some(session.snapshot()));
            }
        }
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| operator_connection(socket, state))
}

async fn operator_connection(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (err_tx, mut err_rx) = mpsc::unbounded_channel();
    let (reply_tx, reply_rx) = oneshot::channel();
    let connect = Command::Connect {
        errors: err_tx.clone(),
        reply: reply_tx,
    };
    if state.commands.send(connect).is_err() {
        return;
    }
    let Ok(Some(id)) = reply_rx.await else {
        let busy = ProtocolMessage::error(ErrorCode::OperatorBusy, "another operator is connected to this session");
        let _ = sink.send(Message::Text(busy.to_json().into())).await;
        let _ = sink.close().await;
        return;
    };
    log::info!("operator {id} connected");

    let mut snapshots = state.snapshots.clone();
    snapshots.mark_changed();
    let writer = tokio::spawn(async move {
        loop {
            let msg = tokio::select! {
                changed = snapshots.changed() => {
                    if changed.is_err() {
                        break;
                    }
                    match snapshots.borrow_and_update().clone() {
                        Some(s) => ProtocolMessage::State(s),
                        None => continue,
                    }
                }
                err = err_rx.recv() => match err {
                    Some(e) => e,
                    None => break,
                },
            };
            if sink.send(Message::Text(msg.to_json().into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(frame)) = stream.next().await {
        let text = match frame {
            Message::Text(t) => t,
            Message::Close(_) => break,
            Message::Binary(_) => {
                let _ = err_tx.send(ProtocolMessage::error(ErrorCode::Malformed, "expected a text frame"));
                continue;
            }
            _ => continue,
        };
        match ProtocolMessage::from_json(text.as_str()) {
            Ok(msg) => {
                if state.commands.send(Command::Message { operator: id, msg }).is_err() {
                    break;
                }
            }
            Err(e) => {
                let _ = err_tx.send(e);
            }
        }
    }
    let _ = state.commands.send(Command::Disconnect { operator: id });
    writer.abort();
}
