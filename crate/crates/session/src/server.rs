use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use anatoview_core::render::RenderContext;
use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::sync::{mpsc, Semaphore};
use tokio::task::JoinSet;
use tokio::time::{interval, timeout, Instant, MissedTickBehavior};
use tokio_tungstenite::tungstenite::protocol::WebSocketConfig;
use tokio_tungstenite::tungstenite::Message;
use tracing::{debug, info, warn};

use crate::control::SessionState;
use crate::messages::DataMessage;
use crate::session::{render_stereo, Session};
use crate::wire::{decode_control, encode_data, HEADER_LEN, MAX_PAYLOAD};

/// When frames are produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cadence {
    /// A render loop at this rate draws the newest state whenever it changed.
    Fixed { fps: f64 },
    /// One stereo pair after every control message that changed the state,
    /// with navigation advanced by a fixed `dt`. Output depends only on the
    /// message sequence.
    Lockstep { dt: f64 },
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub cadence: Cadence,
    pub max_sessions: usize,
    /// Silence after which an Ack heartbeat is sent.
    pub idle_ack: Duration,
    pub width: u32,
    pub height: u32,
    pub reduction: u32,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            cadence: Cadence::Fixed { fps: 30.0 },
            max_sessions: 8,
            idle_ack: Duration::from_secs(2),
            width: 720,
            height: 480,
            reduction: 3,
        }
    }
}

pub struct Server {
    listener: TcpListener,
    ctx: Arc<RenderContext>,
    config: ServerConfig,
}

impl Server {
    pub async fn bind(
        addr: impl ToSocketAddrs,
        ctx: Arc<RenderContext>,
        config: ServerConfig,
    ) -> io::Result<Server> {
        if let Cadence::Fixed { fps } = config.cadence {
            if !(fps > 0.0 && fps.is_finite()) {
                return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("fps {fps}")));
            }
        }
        let listener = TcpListener::bind(addr).await?;
        Ok(Server {
            listener,
            ctx,
            config,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until `shutdown` resolves, then closes every
    /// open session.
    pub async fn run(self, shutdown: impl Future<Output = ()>) -> io::Result<()> {
        let permits = Arc::new(Semaphore::new(self.config.max_sessions));
        let mut sessions = JoinSet::new();
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = self.listener.accept() => {
                    let (stream, peer) = match accepted {
                        Ok(a) => a,
                        Err(e) => {
                            warn!("accept failed: {e}");
                            continue;
                        }
                    };
                    let ctx = self.ctx.clone();
                    let config = self.config.clone();
                    let permits = permits.clone();
                    sessions.spawn(async move {
                        connection(stream, peer, ctx, config, permits).await;
                    });
                }
                Some(_) = sessions.join_next(), if !sessions.is_empty() => {}
            }
        }
        sessions.abort_all();
        while sessions.join_next().await.is_some() {}
        info!("server stopped");
        Ok(())
    }
}

fn lock(session: &Mutex<Session>) -> MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|p| p.into_inner())
}

async fn connection(
    stream: TcpStream,
    peer: SocketAddr,
    ctx: Arc<RenderContext>,
    config: ServerConfig,
    permits: Arc<Semaphore>,
) {
    let _ = stream.set_nodelay(true);
    let ws_config = WebSocketConfig::default()
        .max_message_size(Some(HEADER_LEN + MAX_PAYLOAD))
        .max_frame_size(Some(HEADER_LEN + MAX_PAYLOAD));
    let ws = match tokio_tungstenite::accept_async_with_config(stream, Some(ws_config)).await {
        Ok(ws) => ws,
        Err(e) => {
            debug!(%peer, "handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let Ok(_permit) = permits.try_acquire_owned() else {
        let full = DataMessage::error("server-full", "session limit reached");
        let _ = sink.send(Message::binary(encode_data(&full))).await;
        let _ = sink.close().await;
        return;
    };
    info!(%peer, "session opened");

    let mut state = SessionState::initial(&ctx, config.width, config.height);
    state.scene.reduction = config.reduction;
    let session = Arc::new(Mutex::new(Session::with_state(ctx.clone(), state)));
    let (tx, mut rx) = mpsc::channel::<DataMessage>(16);
    let last_frame = Arc::new(AtomicU64::new(0));

    let writer = {
        let last_frame = last_frame.clone();
        let idle = config.idle_ack;
        tokio::spawn(async move {
            loop {
                let msg = match timeout(idle, rx.recv()).await {
                    Ok(Some(msg)) => msg,
                    Ok(None) => break,
                    Err(_) => DataMessage::Ack {
                        frame_id: last_frame.load(Ordering::Relaxed),
                    },
                };
                if let DataMessage::Frame(f) = &msg {
                    last_frame.fetch_max(f.frame_id, Ordering::Relaxed);
                }
                if sink.send(Message::binary(encode_data(&msg))).await.is_err() {
                    break;
                }
            }
            let _ = sink.close().await;
        })
    };

    let hello = lock(&session).hierarchy_message();
    if tx.send(hello).await.is_ok() {
        let reader = async {
            while let Some(incoming) = source.next().await {
                let bytes = match incoming {
                    Ok(Message::Binary(b)) => b,
                    Ok(Message::Close(_)) | Err(_) => break,
                    Ok(Message::Text(_)) => {
                        let e = DataMessage::error("bad-message", "control messages are binary HVW1 frames");
                        if tx.send(e).await.is_err() {
                            break;
                        }
                        continue;
                    }
                    Ok(_) => continue,
                };
                let reply = match decode_control(&bytes) {
                    Ok(msg) => lock(&session).handle(&msg),
                    Err(e) => Some(DataMessage::error(e.code(), e.to_string())),
                };
                if let Some(reply) = reply {
                    if tx.send(reply).await.is_err() {
                        break;
                    }
                }
                if let Cadence::Lockstep { dt } = config.cadence {
                    lock(&session).advance(dt);
                    if !render_if_changed(&session, &ctx, &tx).await {
                        break;
                    }
                }
            }
        };
        match config.cadence {
            Cadence::Fixed { fps } => {
                tokio::select! {
                    _ = reader => {}
                    _ = render_loop(&session, &ctx, &tx, fps) => {}
                }
            }
            Cadence::Lockstep { .. } => {
                if render_if_changed(&session, &ctx, &tx).await {
                    reader.await;
                }
            }
        }
    }
    drop(tx);
    let _ = timeout(Duration::from_secs(1), writer).await;
    info!(%peer, "session closed");
}

async fn render_loop(session: &Mutex<Session>, ctx: &Arc<RenderContext>, tx: &mpsc::Sender<DataMessage>, fps: f64) {
    let period = Duration::from_secs_f64(1.0 / fps);
    let mut ticker = interval(period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut last = Instant::now();
    loop {
        ticker.tick().await;
        let now = Instant::now();
        let dt = (now - last).as_secs_f64().min(0.25);
        last = now;
        lock(session).advance(dt);
        if !render_if_changed(session, ctx, tx).await {
            return;
        }
    }
}

/// Renders the current state if it changed since the last frame. Returns
/// false once the client is gone.
async fn render_if_changed(session: &Mutex<Session>, ctx: &Arc<RenderContext>, tx: &mpsc::Sender<DataMessage>) -> bool {
    let Some((scene, id)) = lock(session).pending_render() else {
        return true;
    };
    let ctx = ctx.clone();
    let rendered = tokio::task::spawn_blocking(move || render_stereo(&ctx, &scene, id)).await;
    match rendered {
        Ok(Ok(pair)) => {
            for frame in pair {
                if tx.send(DataMessage::Frame(frame)).await.is_err() {
                    return false;
                }
            }
            true
        }
        Ok(Err(e)) => tx.send(DataMessage::error("render-failed", e.to_string())).await.is_ok(),
        Err(_) => false,
    }
}
