//! UDP and WebSocket front ends sharing one hub.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::{TcpListener, UdpSocket};
use tokio::sync::mpsc::{unbounded_channel, UnboundedSender};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

use crate::hub::{Hub, HubConfig};
use crate::protocol::MAX_DATAGRAM;
use crate::session::{Outgoing, PeerId, SessionLog};

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub hub: HubConfig,
    pub udp: Option<SocketAddr>,
    pub ws: Option<SocketAddr>,
    /// Directory served over HTTP next to the `/ws` endpoint.
    pub static_dir: Option<PathBuf>,
    /// Timer resolution for turn timeouts and bot pacing.
    pub tick: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            hub: HubConfig::default(),
            udp: None,
            ws: None,
            static_dir: None,
            tick: Duration::from_millis(20),
        }
    }
}

enum Sink {
    Udp(SocketAddr, UnboundedSender<(SocketAddr, String)>),
    Ws(UnboundedSender<String>),
}

#[derive(Default)]
struct PeerTable {
    next: u64,
    sinks: HashMap<PeerId, Sink>,
    udp_peers: HashMap<SocketAddr, PeerId>,
}

#[derive(Clone)]
struct Shared {
    hub: Arc<Mutex<Hub>>,
    router: Arc<Mutex<PeerTable>>,
}

impl Shared {
    fn handle(&self, peer: PeerId, text: &str) {
        let out = self.hub.lock().expect("hub lock").handle(peer, text, Instant::now());
        self.dispatch(out);
    }

    fn dispatch(&self, out: Vec<Outgoing>) {
        let router = self.router.lock().expect("router lock");
        for o in out {
            match router.sinks.get(&o.peer) {
                Some(Sink::Udp(addr, tx)) => {
                    let _ = tx.send((*addr, o.text));
                }
                Some(Sink::Ws(tx)) => {
                    let _ = tx.send(o.text);
                }
                None => {}
            }
        }
    }

    fn udp_peer(&self, addr: SocketAddr, tx: &UnboundedSender<(SocketAddr, String)>) -> PeerId {
        let mut r = self.router.lock().expect("router lock");
        if let Some(p) = r.udp_peers.get(&addr) {
            return *p;
        }
        r.next += 1;
        let peer = PeerId(r.next);
        r.udp_peers.insert(addr, peer);
        r.sinks.insert(peer, Sink::Udp(addr, tx.clone()));
        peer
    }

    fn ws_peer(&self, tx: UnboundedSender<String>) -> PeerId {
        let mut r = self.router.lock().expect("router lock");
        r.next += 1;
        let peer = PeerId(r.next);
        r.sinks.insert(peer, Sink::Ws(tx));
        peer
    }

    fn drop_peer(&self, peer: PeerId) {
        self.router.lock().expect("router lock").sinks.remove(&peer);
    }
}

/// A running server. Dropping it stops every task.
pub struct ServerHandle {
    shared: Shared,
    pub udp_addr: Option<SocketAddr>,
    pub ws_addr: Option<SocketAddr>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn session_log(&self, id: &str) -> Option<SessionLog> {
        self.shared.hub.lock().expect("hub lock").session_log(id)
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.shared.hub.lock().expect("hub lock").session_ids()
    }

    /// Waits until every task ends (they only end on error or abort).
    pub async fn join(mut self) {
        for t in self.tasks.drain(..) {
            let _ = t.await;
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

/// Binds the configured transports and starts serving.
pub async fn start(config: ServerConfig) -> io::Result<ServerHandle> {
    let shared = Shared {
        hub: Arc::new(Mutex::new(Hub::new(config.hub.clone()))),
        router: Arc::new(Mutex::new(PeerTable::default())),
    };
    let mut tasks = Vec::new();
    let mut udp_addr = None;
    let mut ws_addr = None;

    if let Some(addr) = config.udp {
        let socket = Arc::new(UdpSocket::bind(addr).await?);
        udp_addr = Some(socket.local_addr()?);
        let (tx, mut rx) = unbounded_channel::<(SocketAddr, String)>();
        let send_socket = Arc::clone(&socket);
        tasks.push(tokio::spawn(async move {
            while let Some((to, text)) = rx.recv().await {
                if let Err(e) = send_socket.send_to(text.as_bytes(), to).await {
                    eprintln!("udp send to {to}: {e}");
                }
            }
        }));
        let s = shared.clone();
        tasks.push(tokio::spawn(async move {
            let mut buf = vec![0u8; MAX_DATAGRAM];
            loop {
                let (len, from) = match socket.recv_from(&mut buf).await {
                    Ok(x) => x,
                    Err(e) => {
                        // ICMP errors from departed peers surface here.
                        eprintln!("udp recv: {e}");
                        continue;
                    }
                };
                let peer = s.udp_peer(from, &tx);
                let text = String::from_utf8_lossy(&buf[..len]);
                s.handle(peer, &text);
            }
        }));
    }

    if let Some(addr) = config.ws {
        let listener = TcpListener::bind(addr).await?;
        ws_addr = Some(listener.local_addr()?);
        let mut app = Router::new().route("/ws", get(ws_upgrade)).with_state(shared.clone());
        if let Some(dir) = &config.static_dir {
            app = app.fallback_service(ServeDir::new(dir));
        }
        tasks.push(tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                eprintln!("websocket server: {e}");
            }
        }));
    }

    let s = shared.clone();
    let tick = config.tick;
    tasks.push(tokio::spawn(async move {
        let mut interval = tokio::time::interval(tick);
        loop {
            interval.tick().await;
            let out = s.hub.lock().expect("hub lock").tick(Instant::now());
            s.dispatch(out);
        }
    }));

    Ok(ServerHandle {
        shared,
        udp_addr,
        ws_addr,
        tasks,
    })
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(shared): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| ws_session(socket, shared))
}

async fn ws_session(socket: WebSocket, shared: Shared) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = unbounded_channel::<String>();
    let peer = shared.ws_peer(tx);
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(WsMessage::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(frame)) = stream.next().await {
        match frame {
            WsMessage::Text(text) => shared.handle(peer, text.as_str()),
            WsMessage::Binary(bytes) => shared.handle(peer, &String::from_utf8_lossy(&bytes)),
            WsMessage::Close(_) => break,
            _ => {}
        }
    }
    shared.drop_peer(peer);
    writer.abort();
}
