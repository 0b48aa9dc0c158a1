//! Reference client for both transports.
//!
//! Requests are matched to replies by the `ack` field. Over UDP an
//! unanswered request is resent every 250 ms, at most 20 times; messages
//! the server repeats are dropped by `(session, seq)`.

use std::collections::{HashSet, VecDeque};
use std::net::SocketAddr;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use tokio::net::{TcpStream, UdpSocket};
use tokio::time::{timeout_at, Instant};
use tokio_tungstenite::tungstenite::Message as WsMessage;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use crate::protocol::{ActBody, Body, CreateBody, HelloBody, JoinBody, Message, MsgType, PingBody, MAX_DATAGRAM};
use uno_core::encoding::ActionId;

pub const RETRANSMIT_INTERVAL: Duration = Duration::from_millis(250);
pub const MAX_ATTEMPTS: u32 = 20;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("websocket: {0}")]
    Ws(String),
    #[error("no reply to seq {0}")]
    Timeout(u64),
    #[error("connection closed")]
    Closed,
}

enum Link {
    Udp { socket: UdpSocket, server: SocketAddr },
    Ws(Box<WebSocketStream<MaybeTlsStream<TcpStream>>>),
}

pub struct Client {
    link: Link,
    next_seq: u64,
    pub session: Option<String>,
    pub player: Option<usize>,
    inbox: VecDeque<Message>,
    seen: HashSet<(String, u64)>,
    /// Every message text received, duplicates included.
    pub raw_log: Vec<String>,
}

impl Client {
    pub async fn udp(server: SocketAddr) -> Result<Client, ClientError> {
        let bind: SocketAddr = if server.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }
            .parse()
            .expect("literal");
        let socket = UdpSocket::bind(bind).await?;
        Ok(Client::with_link(Link::Udp { socket, server }))
    }

    /// `url` like `ws://127.0.0.1:7778/ws`.
    pub async fn ws(url: &str) -> Result<Client, ClientError> {
        let (stream, _) = connect_async(url).await.map_err(|e| ClientError::Ws(e.to_string()))?;
        Ok(Client::with_link(Link::Ws(Box::new(stream))))
    }

    fn with_link(link: Link) -> Client {
        Client {
            link,
            next_seq: 1,
            session: None,
            player: None,
            inbox: VecDeque::new(),
            seen: HashSet::new(),
            raw_log: Vec::new(),
        }
    }

    pub fn is_udp(&self) -> bool {
        matches!(self.link, Link::Udp { .. })
    }

    /// Sends text as is.
    pub async fn send_raw(&mut self, text: &str) -> Result<(), ClientError> {
        match &mut self.link {
            Link::Udp { socket, server } => {
                socket.send_to(text.as_bytes(), *server).await?;
            }
            Link::Ws(ws) => ws
                .send(WsMessage::Text(text.to_string().into()))
                .await
                .map_err(|e| ClientError::Ws(e.to_string()))?,
        }
        Ok(())
    }

    /// Next text from the server before `deadline`.
    async fn recv_raw(&mut self, deadline: Instant) -> Result<Option<String>, ClientError> {
        match &mut self.link {
            Link::Udp { socket, .. } => {
                let mut buf = vec![0u8; MAX_DATAGRAM];
                match timeout_at(deadline, socket.recv_from(&mut buf)).await {
                    Err(_) => Ok(None),
                    Ok(r) => {
                        let (len, _) = r?;
                        Ok(Some(String::from_utf8_lossy(&buf[..len]).into_owned()))
                    }
                }
            }
            Link::Ws(ws) => loop {
                match timeout_at(deadline, ws.next()).await {
                    Err(_) => return Ok(None),
                    Ok(None) => return Err(ClientError::Closed),
                    Ok(Some(Err(e))) => return Err(ClientError::Ws(e.to_string())),
                    Ok(Some(Ok(WsMessage::Text(t)))) => return Ok(Some(t.to_string())),
                    Ok(Some(Ok(WsMessage::Close(_)))) => return Err(ClientError::Closed),
                    Ok(Some(Ok(_))) => continue,
                }
            },
        }
    }

    /// Reads one message, dropping repeats and undecodable text.
    async fn pull(&mut self, deadline: Instant) -> Result<Option<Message>, ClientError> {
        loop {
            let Some(text) = self.recv_raw(deadline).await? else {
                return Ok(None);
            };
            self.raw_log.push(text.clone());
            let Ok(msg) = Message::decode(&text) else {
                continue;
            };
            if let (Some(s), true) = (&msg.session, msg.seq > 0) {
                if !self.seen.insert((s.clone(), msg.seq)) {
                    continue;
                }
            }
            return Ok(Some(msg));
        }
    }

    /// Next unsolicited message (STATE, RESULT, ...) within `wait`.
    pub async fn next_message(&mut self, wait: Duration) -> Result<Option<Message>, ClientError> {
        if let Some(m) = self.inbox.pop_front() {
            return Ok(Some(m));
        }
        self.pull(Instant::now() + wait).await
    }

    /// Sends `body` with a fresh seq and waits for the message answering it.
    /// Everything else that arrives meanwhile is queued for
    /// [`Client::next_message`].
    pub async fn request(&mut self, body: Body) -> Result<Message, ClientError> {
        let seq = self.next_seq;
        self.next_seq += 1;
        let text = Message::new(seq, self.session.clone(), self.player, body).encode();
        self.request_text(&text, seq).await
    }

    /// Sends a prepared request text and waits for the reply acking `seq`.
    /// Used to re-drive a recorded transcript byte for byte.
    pub async fn request_text(&mut self, text: &str, seq: u64) -> Result<Message, ClientError> {
        self.next_seq = self.next_seq.max(seq + 1);
        let attempts = if self.is_udp() { MAX_ATTEMPTS } else { 1 };
        let wait = if self.is_udp() {
            RETRANSMIT_INTERVAL
        } else {
            RETRANSMIT_INTERVAL * MAX_ATTEMPTS
        };
        for _ in 0..attempts {
            self.send_raw(text).await?;
            let deadline = Instant::now() + wait;
            while let Some(msg) = self.pull(deadline).await? {
                if msg.body.ack() == Some(seq) {
                    return Ok(msg);
                }
                self.inbox.push_back(msg);
            }
        }
        Err(ClientError::Timeout(seq))
    }

    /// Text of the next request, without sending it. Lets tests repeat a
    /// datagram byte for byte.
    pub fn peek_request(&self, body: Body) -> String {
        Message::new(self.next_seq, self.session.clone(), self.player, body).encode()
    }

    pub async fn hello(&mut self, name: &str) -> Result<Message, ClientError> {
        self.request(Body::Hello(HelloBody {
            client: Some(name.to_string()),
        }))
        .await
    }

    pub async fn ping(&mut self) -> Result<Message, ClientError> {
        self.request(Body::Ping(PingBody { ack: None })).await
    }

    /// Creates a table; on success remembers its session id.
    pub async fn create(&mut self, body: CreateBody) -> Result<Message, ClientError> {
        let reply = self.request(Body::Create(body)).await?;
        if reply.msg_type() == MsgType::Ack {
            self.session = reply.session.clone();
        }
        Ok(reply)
    }

    /// Joins `session`; on success remembers the seat.
    pub async fn join(&mut self, session: &str, seat: Option<usize>) -> Result<Message, ClientError> {
        self.session = Some(session.to_string());
        let reply = self.request(Body::Join(JoinBody { seat })).await?;
        if reply.msg_type() == MsgType::Ack {
            self.player = reply.player;
        }
        Ok(reply)
    }

    pub async fn act(&mut self, action: ActionId) -> Result<Message, ClientError> {
        self.request(Body::Act(ActBody { action })).await
    }
}
