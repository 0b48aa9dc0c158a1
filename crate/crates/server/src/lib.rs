//! Uno table server.
//!
//! Tables mix human seats with bots (random players or greedy agents
//! loaded from checkpoints). The same JSON messages travel over UDP
//! datagrams and WebSocket frames; `docs/PROTOCOL.md` describes them.

pub mod client;
pub mod hub;
pub mod net;
pub mod protocol;
pub mod session;

pub use client::{Client, ClientError};
pub use hub::{Hub, HubConfig};
pub use net::{start, ServerConfig, ServerHandle};
pub use protocol::{
    Body, ErrorReason, Message, MsgType, SeatSpec, DEFAULT_UDP_PORT, DEFAULT_WS_PORT, PROTOCOL_VERSION,
};
pub use session::{replay, LogDirection, LogEntry, Outgoing, PeerId, Session, SessionLog};
