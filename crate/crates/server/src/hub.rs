//! Transport-independent message handling for all sessions.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use uno_core::rng::derive_seed;

use crate::protocol::{Body, DecodeError, ErrorBody, ErrorReason, HelloReply, Message, PingBody, PROTOCOL_VERSION};
use crate::session::{Outgoing, PeerId, Session, SessionLog, SessionOptions};

#[derive(Clone, Debug, Default)]
pub struct HubConfig {
    /// Seed for tables created without one.
    pub master_seed: u64,
    pub turn_timeout: Option<Duration>,
    pub bot_delay: Duration,
    /// Finished sessions are written here as `<id>.json`.
    pub log_dir: Option<PathBuf>,
}

/// Replies to session-less requests are remembered per peer so that a
/// retransmitted CREATE does not open a second table.
const REPLY_CACHE: usize = 4096;

pub struct Hub {
    config: HubConfig,
    sessions: BTreeMap<String, Session>,
    created: u64,
    replies: HashMap<(PeerId, u64), Vec<Outgoing>>,
    reply_order: VecDeque<(PeerId, u64)>,
}

impl Hub {
    pub fn new(config: HubConfig) -> Hub {
        Hub {
            config,
            sessions: BTreeMap::new(),
            created: 0,
            replies: HashMap::new(),
            reply_order: VecDeque::new(),
        }
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn session_log(&self, id: &str) -> Option<SessionLog> {
        self.sessions.get(id).map(|s| s.log().clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.keys().cloned().collect()
    }

    fn reply(peer: PeerId, msg: Message) -> Vec<Outgoing> {
        vec![Outgoing {
            peer,
            text: msg.encode(),
        }]
    }

    fn error(
        peer: PeerId,
        seq: Option<u64>,
        session: Option<String>,
        reason: ErrorReason,
        message: String,
    ) -> Vec<Outgoing> {
        Self::reply(
            peer,
            Message::new(
                0,
                session,
                None,
                Body::Error(ErrorBody {
                    ack: seq,
                    reason,
                    message,
                }),
            ),
        )
    }

    fn remember(&mut self, key: (PeerId, u64), out: &[Outgoing]) {
        if self.replies.insert(key, out.to_vec()).is_none() {
            self.reply_order.push_back(key);
            if self.reply_order.len() > REPLY_CACHE {
                if let Some(old) = self.reply_order.pop_front() {
                    self.replies.remove(&old);
                }
            }
        }
    }

    /// Processes one inbound text from `peer`.
    pub fn handle(&mut self, peer: PeerId, text: &str, now: Instant) -> Vec<Outgoing> {
        let msg = match Message::decode(text) {
            Ok(m) => m,
            Err(e @ DecodeError::BadVersion { .. }) => {
                return Self::error(
                    peer,
                    e.seq(),
                    None,
                    e.reason(),
                    format!("server speaks version {PROTOCOL_VERSION}"),
                )
            }
            Err(e) => return Self::error(peer, None, None, e.reason(), e.to_string()),
        };
        let seq = msg.seq;
        match msg.body {
            Body::Hello(_) => Self::reply(
                peer,
                Message::new(
                    seq,
                    None,
                    None,
                    Body::HelloReply(HelloReply {
                        ack: seq,
                        server: "uno-server".into(),
                        version: PROTOCOL_VERSION,
                    }),
                ),
            ),
            Body::Ping(_) => Self::reply(
                peer,
                Message::new(seq, msg.session, msg.player, Body::Ping(PingBody { ack: Some(seq) })),
            ),
            Body::Create(create) => {
                if let Some(cached) = self.replies.get(&(peer, seq)) {
                    return cached.clone();
                }
                self.created += 1;
                let id = format!("t{}", self.created);
                let seed = create
                    .seed
                    .unwrap_or_else(|| derive_seed(self.config.master_seed, self.created));
                let options = SessionOptions {
                    turn_timeout: create
                        .turn_timeout_ms
                        .map(Duration::from_millis)
                        .or(self.config.turn_timeout),
                    bot_delay: create.bot_delay_ms.map_or(self.config.bot_delay, Duration::from_millis),
                };
                let out = match Session::new(id.clone(), &create.seats, seed, options, peer, text) {
                    Ok(mut session) => {
                        let out = session.on_created(peer, seq, now);
                        self.sessions.insert(id.clone(), session);
                        self.persist(&id);
                        out
                    }
                    Err(e) => {
                        self.created -= 1;
                        Self::error(peer, Some(seq), None, e.reason, e.message)
                    }
                };
                self.remember((peer, seq), &out);
                out
            }
            Body::Join(join) => {
                let Some(id) = msg.session else {
                    return Self::error(
                        peer,
                        Some(seq),
                        None,
                        ErrorReason::UnknownSession,
                        "JOIN needs a session".into(),
                    );
                };
                let Some(session) = self.sessions.get_mut(&id) else {
                    return Self::error(
                        peer,
                        Some(seq),
                        Some(id.clone()),
                        ErrorReason::UnknownSession,
                        format!("no session {id}"),
                    );
                };
                let out = session.join(peer, seq, join.seat.or(msg.player), text, now);
                self.persist(&id);
                out
            }
            Body::Act(act) => {
                let Some(id) = msg.session else {
                    return Self::error(
                        peer,
                        Some(seq),
                        None,
                        ErrorReason::UnknownSession,
                        "ACT needs a session".into(),
                    );
                };
                let Some(session) = self.sessions.get_mut(&id) else {
                    return Self::error(
                        peer,
                        Some(seq),
                        Some(id.clone()),
                        ErrorReason::UnknownSession,
                        format!("no session {id}"),
                    );
                };
                let Some(seat) = msg.player.filter(|&p| p < session.table().num_players()) else {
                    return Self::error(
                        peer,
                        Some(seq),
                        Some(id),
                        ErrorReason::UnknownSeat,
                        "ACT needs a valid player".into(),
                    );
                };
                let out = session.act(peer, seat, seq, act.action, text, now);
                self.persist(&id);
                out
            }
            Body::State(_) | Body::Ack(_) | Body::Result(_) | Body::Error(_) | Body::HelloReply(_) => Self::error(
                peer,
                Some(seq),
                msg.session,
                ErrorReason::Unsupported,
                "clients may only send HELLO, CREATE, JOIN, ACT and PING".into(),
            ),
        }
    }

    /// Fires due timers in every session.
    pub fn tick(&mut self, now: Instant) -> Vec<Outgoing> {
        let mut out = Vec::new();
        let ids: Vec<String> = self.sessions.keys().cloned().collect();
        for id in ids {
            let session = self.sessions.get_mut(&id).expect("listed");
            let due = session.turn_deadline().is_some_and(|d| now >= d) || session.bot_due().is_some_and(|d| now >= d);
            if due {
                out.extend(session.tick(now));
                self.persist(&id);
            }
        }
        out
    }

    /// Writes the log of a finished session when a log directory is set.
    fn persist(&self, id: &str) {
        let (Some(dir), Some(session)) = (&self.config.log_dir, self.sessions.get(id)) else {
            return;
        };
        if !session.is_finished() {
            return;
        }
        let path = dir.join(format!("{id}.json"));
        if path.exists() {
            return;
        }
        let text = serde_json::to_string_pretty(session.log()).expect("log serializes");
        if let Err(e) = std::fs::write(&path, text) {
            eprintln!("cannot write session log {}: {e}", path.display());
        }
    }
}
