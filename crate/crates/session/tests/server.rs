use std::net::SocketAddr;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use anatoview_core::foveate::FoveatedFrame;
use anatoview_core::render::{Eye, RenderContext};
use anatoview_core::volume::{generate_phantom, PhantomSpec};
use anatoview_session::*;
use futures_util::{SinkExt, StreamExt};
use sha2::{Digest, Sha256};
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

const W: u32 = 96;
const H: u32 = 64;

fn context() -> Arc<RenderContext> {
    static CTX: OnceLock<Arc<RenderContext>> = OnceLock::new();
    CTX.get_or_init(|| {
        let spec = PhantomSpec::preset("three-organs").unwrap();
        Arc::new(RenderContext::new(generate_phantom(&spec).unwrap(), spec.hierarchy().unwrap()))
    })
    .clone()
}

fn config(cadence: Cadence) -> ServerConfig {
    ServerConfig {
        cadence,
        max_sessions: 4,
        idle_ack: Duration::from_secs(2),
        width: W,
        height: H,
        reduction: 3,
    }
}

struct Running {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl Running {
    async fn start(config: ServerConfig) -> Running {
        let server = Server::bind("127.0.0.1:0", context(), config).await.unwrap();
        let addr = server.local_addr().unwrap();
        let (stop, stopped) = oneshot::channel::<()>();
        let task = tokio::spawn(server.run(async {
            let _ = stopped.await;
        }));
        Running {
            addr,
            stop: Some(stop),
            task,
        }
    }

    async fn shutdown(mut self) {
        self.stop.take().unwrap().send(()).unwrap();
        timeout(Duration::from_secs(5), self.task).await.unwrap().unwrap().unwrap();
    }
}

struct Client(WebSocketStream<MaybeTlsStream<TcpStream>>);

impl Client {
    async fn connect(addr: SocketAddr) -> Client {
        let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}")).await.unwrap();
        Client(ws)
    }

    async fn send(&mut self, msg: ControlMessage) {
        self.send_raw(encode_control(&msg)).await;
    }

    async fn send_raw(&mut self, bytes: Vec<u8>) {
        self.0.send(Message::binary(bytes)).await.unwrap();
    }

    async fn recv(&mut self) -> Option<DataMessage> {
        loop {
            let next = timeout(Duration::from_secs(20), self.0.next()).await.expect("server went quiet");
            match next {
                Some(Ok(Message::Binary(b))) => return Some(decode_data(&b).unwrap()),
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return None,
                Some(Ok(_)) => continue,
            }
        }
    }

    /// Next stereo pair, skipping heartbeats.
    async fn frames(&mut self) -> [FoveatedFrame; 2] {
        let mut got = Vec::new();
        while got.len() < 2 {
            match self.recv().await.expect("connection closed") {
                DataMessage::Frame(f) => got.push(f),
                DataMessage::Ack { .. } => {}
                other => panic!("unexpected {other:?}"),
            }
        }
        let [l, r]: [FoveatedFrame; 2] = got.try_into().unwrap();
        assert_eq!((l.eye, r.eye), (Eye::Left, Eye::Right));
        assert_eq!(l.frame_id, r.frame_id);
        [l, r]
    }

    async fn hello(&mut self) -> Vec<OrganInfo> {
        match self.recv().await {
            Some(DataMessage::Hierarchy(h)) => h,
            other => panic!("expected hierarchy, got {other:?}"),
        }
    }
}

fn hash(frames: &[FoveatedFrame]) -> Vec<[u8; 32]> {
    frames.iter().map(|f| Sha256::digest(f.encode()).into()).collect()
}

fn offline(messages: &[ControlMessage]) -> [FoveatedFrame; 2] {
    let ctx = context();
    let mut state = SessionState::initial(&ctx, W, H);
    state.scene.reduction = 3;
    let mut s = Session::with_state(ctx, state);
    for m in messages {
        s.handle(m);
    }
    s.render().unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn frames_follow_camera_gaze_and_selection() {
    let server = Running::start(config(Cadence::Fixed { fps: 60.0 })).await;
    let mut c = Client::connect(server.addr).await;
    let organs = c.hello().await;
    assert!(organs.iter().any(|o| o.name == "liver" && o.selected && o.color.starts_with('#')));

    let first = c.frames().await;
    assert_eq!(first[0].frame_id, 1);
    assert_eq!(first[0].mapping.full, (W, H));
    assert_eq!(first[0].mapping.reduced, (32, 21));
    assert_eq!(first[0].pixels, offline(&[])[0].pixels);

    let mut camera = SessionState::initial(&context(), W, H).scene.camera;
    camera.position.x += 5.0;
    c.send(ControlMessage::SetCamera { camera: camera.clone() }).await;
    c.send(ControlMessage::SetGaze { x: 44.0, y: 30.0 }).await;
    let mut pair = c.frames().await;
    while pair[0].mapping.gaze != (44.0, 30.0) {
        pair = c.frames().await;
    }
    assert!(pair[0].frame_id > first[0].frame_id);
    assert!(pair[0].pixels.chunks(4).any(|p| p != [0, 0, 0, 255]));

    let toggle = ControlMessage::ToggleOrgan { l1: 3, l2: 5 };
    c.send(toggle.clone()).await;
    let toggled = c.frames().await;
    let expected = offline(&[
        ControlMessage::SetCamera { camera },
        ControlMessage::SetGaze { x: 44.0, y: 30.0 },
        toggle,
    ]);
    assert_eq!(toggled[0].pixels, expected[0].pixels);
    assert_eq!(toggled[1].pixels, expected[1].pixels);
    assert_ne!(toggled[0].pixels, pair[0].pixels);
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sessions_are_isolated() {
    let server = Running::start(config(Cadence::Fixed { fps: 60.0 })).await;
    let mut a = Client::connect(server.addr).await;
    let mut b = Client::connect(server.addr).await;
    a.hello().await;
    b.hello().await;
    a.frames().await;
    b.frames().await;

    a.send(ControlMessage::ToggleOrgan { l1: 3, l2: 5 }).await;
    a.frames().await;
    b.send(ControlMessage::SetGaze { x: 40.0, y: 30.0 }).await;
    let bf = b.frames().await;
    assert_eq!(bf[0].pixels, offline(&[ControlMessage::SetGaze { x: 40.0, y: 30.0 }])[0].pixels);
    assert_eq!(bf[0].frame_id, 2);

    drop(a);
    b.send(ControlMessage::SetGaze { x: 41.0, y: 30.0 }).await;
    assert_eq!(b.frames().await[0].frame_id, 3);
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn malformed_input_is_answered_and_survived() {
    let server = Running::start(config(Cadence::Fixed { fps: 60.0 })).await;
    let mut c = Client::connect(server.addr).await;
    c.hello().await;
    let first = c.frames().await;

    let mut broken = encode_control(&ControlMessage::SetGaze { x: 1.0, y: 1.0 });
    broken[0] = b'Z';
    c.send_raw(broken).await;
    match c.recv().await {
        Some(DataMessage::Error(e)) => assert_eq!(e.code, "bad-magic"),
        other => panic!("{other:?}"),
    }
    c.send_raw(Vec::new()).await;
    match c.recv().await {
        Some(DataMessage::Error(e)) => assert_eq!(e.code, "truncated"),
        other => panic!("{other:?}"),
    }
    c.0.send(Message::text("hello")).await.unwrap();
    match c.recv().await {
        Some(DataMessage::Error(e)) => assert_eq!(e.code, "bad-message"),
        other => panic!("{other:?}"),
    }
    c.send(ControlMessage::EnterBioscope { l1: 9, l2: 9 }).await;
    match c.recv().await {
        Some(DataMessage::Error(e)) => assert_eq!(e.code, "unknown-organ"),
        other => panic!("{other:?}"),
    }

    c.send(ControlMessage::PickOrgan { x: 0.5, y: 0.5 }).await;
    match c.recv().await {
        Some(DataMessage::PickResult(p)) => assert!(p.organ.is_none()),
        other => panic!("{other:?}"),
    }
    c.send(ControlMessage::SetGaze { x: 3.0, y: 3.0 }).await;
    assert!(c.frames().await[0].frame_id > first[0].frame_id);
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn session_cap_and_heartbeat() {
    let mut cfg = config(Cadence::Fixed { fps: 60.0 });
    cfg.max_sessions = 1;
    cfg.idle_ack = Duration::from_millis(300);
    let server = Running::start(cfg).await;
    let mut a = Client::connect(server.addr).await;
    a.hello().await;
    let first = a.frames().await;

    let mut b = Client::connect(server.addr).await;
    match b.recv().await {
        Some(DataMessage::Error(e)) => assert_eq!(e.code, "server-full"),
        other => panic!("{other:?}"),
    }
    assert!(b.recv().await.is_none());

    match a.recv().await {
        Some(DataMessage::Ack { frame_id }) => assert_eq!(frame_id, first[0].frame_id),
        other => panic!("{other:?}"),
    }

    drop(a);
    let mut again = None;
    for _ in 0..50 {
        let mut c = Client::connect(server.addr).await;
        if let Some(DataMessage::Hierarchy(_)) = c.recv().await {
            again = Some(c);
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    assert!(again.is_some(), "slot never freed");
    server.shutdown().await;
}

fn script() -> Vec<ControlMessage> {
    vec![
        ControlMessage::SetGaze { x: 30.0, y: 20.0 },
        ControlMessage::DeselectAllInSystem { l1: 6 },
        ControlMessage::ToggleOrgan { l1: 1, l2: 2 },
        ControlMessage::SelectAllInSystem { l1: 6 },
        ControlMessage::SetClipPlane {
            point: [32.0, 32.0, 32.0],
            normal: [0.3, 1.0, 0.1],
            enabled: true,
        },
        ControlMessage::Navigate {
            direction: NavDirection::Forward,
            active: true,
        },
        ControlMessage::SetGaze { x: 31.0, y: 20.0 },
        ControlMessage::Navigate {
            direction: NavDirection::Forward,
            active: false,
        },
        ControlMessage::EnterBioscope { l1: 3, l2: 5 },
        ControlMessage::PickOrgan { x: 48.0, y: 32.0 },
        ControlMessage::ExitBioscope {},
    ]
}

async fn scripted_run(addr: SocketAddr) -> (Vec<FoveatedFrame>, Vec<DataMessage>) {
    let mut c = Client::connect(addr).await;
    c.hello().await;
    let mut frames = c.frames().await.to_vec();
    let mut replies = Vec::new();
    for msg in script() {
        c.send(msg).await;
    }
    c.send(ControlMessage::SetGaze { x: 0.0, y: 0.0 }).await;
    while frames.last().map(|f| (f.mapping.gaze, f.eye)) != Some(((0.0, 0.0), Eye::Right)) {
        match c.recv().await.expect("closed") {
            DataMessage::Frame(f) => frames.push(f),
            DataMessage::Ack { .. } => {}
            other => replies.push(other),
        }
    }
    (frames, replies)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn lockstep_replay_is_deterministic() {
    let server = Running::start(config(Cadence::Lockstep { dt: 0.05 })).await;
    let (a, replies) = scripted_run(server.addr).await;
    let (b, _) = scripted_run(server.addr).await;
    assert_eq!(hash(&a), hash(&b));
    assert!(a.len() >= 2 * script().len());
    let ids: Vec<u64> = a.iter().map(|f| f.frame_id).collect();
    assert!(ids.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
    assert!(matches!(&replies[..], [DataMessage::PickResult(_)]));

    // The same log through the offline engine gives the same pixels.
    let ctx = context();
    let mut state = SessionState::initial(&ctx, W, H);
    state.scene.reduction = 3;
    let mut s = Session::with_state(ctx, state);
    let mut expected = s.render().unwrap().to_vec();
    for msg in script().into_iter().chain([ControlMessage::SetGaze { x: 0.0, y: 0.0 }]) {
        s.handle(&msg);
        s.advance(0.05);
        if let Some((scene, id)) = s.pending_render() {
            expected.extend(render_stereo(s.context(), &scene, id).unwrap());
        }
    }
    assert_eq!(hash(&a), hash(&expected));

    let fresh = Running::start(config(Cadence::Lockstep { dt: 0.05 })).await;
    assert_eq!(hash(&scripted_run(fresh.addr).await.0), hash(&a));
    server.shutdown().await;
    fresh.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn shutdown_closes_open_sessions() {
    let server = Running::start(config(Cadence::Fixed { fps: 30.0 })).await;
    let mut c = Client::connect(server.addr).await;
    c.hello().await;
    c.frames().await;
    server.shutdown().await;
    while let Some(msg) = c.recv().await {
        assert!(matches!(msg, DataMessage::Frame(_) | DataMessage::Ack { .. }));
    }
}
