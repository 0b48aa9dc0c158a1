//! Wire format: one UTF-8 JSON object per datagram or frame.
//!
//! ```text
//! {"v":1,"type":"ACT","seq":4,"session":"t1","player":0,"body":{"action":13}}
//! ```
//!
//! `session` and `player` are `null` when they do not apply. The layout of
//! `body` depends on `type`; see `docs/PROTOCOL.md`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use uno_core::encoding::ActionId;
use uno_core::game::PlayerView;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_UDP_PORT: u16 = 7777;
pub const DEFAULT_WS_PORT: u16 = 7778;
/// Largest datagram the UDP transport reads.
pub const MAX_DATAGRAM: usize = 64 * 1024;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MsgType {
    Hello,
    Create,
    Join,
    State,
    Act,
    Ack,
    Result,
    Error,
    Ping,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelloBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelloReply {
    pub ack: u64,
    pub server: String,
    pub version: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateBody {
    /// One entry per seat: `"human"`, `"random"` or `"agent:<checkpoint>"`.
    pub seats: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_timeout_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bot_delay_ms: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JoinBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seat: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActBody {
    pub action: ActionId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AckBody {
    pub ack: u64,
}

/// A move every seat may know about. Draws do not reveal the drawn card.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicEvent {
    pub player: usize,
    pub action: ActionId,
    /// `"draw"` or the played card, e.g. `"r-5"` or `"g-wild"`.
    pub label: String,
    /// Set when the move came from the turn timer.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub forced: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateBody {
    /// Counts state changes of the session, starting at 1 when play begins.
    pub version: u64,
    pub view: PlayerView,
    /// Moves since the previous STATE, oldest first.
    pub events: Vec<PublicEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultBody {
    pub winner: usize,
    pub rewards: Vec<f64>,
    pub rounds: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ack: Option<u64>,
    pub reason: ErrorReason,
    pub message: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorReason {
    Malformed,
    BadVersion,
    BadSeats,
    Checkpoint,
    UnknownSession,
    UnknownSeat,
    SeatTaken,
    NotStarted,
    NotYourTurn,
    IllegalAction,
    StaleSeq,
    GameOver,
    Unsupported,
}

impl fmt::Display for ErrorReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("reason serializes");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PingBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ack: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Body {
    Hello(HelloBody),
    HelloReply(HelloReply),
    Create(CreateBody),
    Join(JoinBody),
    State(Box<StateBody>),
    Act(ActBody),
    Ack(AckBody),
    Result(ResultBody),
    Error(ErrorBody),
    Ping(PingBody),
}

impl Body {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Body::Hello(_) | Body::HelloReply(_) => MsgType::Hello,
            Body::Create(_) => MsgType::Create,
            Body::Join(_) => MsgType::Join,
            Body::State(_) => MsgType::State,
            Body::Act(_) => MsgType::Act,
            Body::Ack(_) => MsgType::Ack,
            Body::Result(_) => MsgType::Result,
            Body::Error(_) => MsgType::Error,
            Body::Ping(_) => MsgType::Ping,
        }
    }

    /// The client sequence number this message answers, if any.
    pub fn ack(&self) -> Option<u64> {
        match self {
            Body::HelloReply(b) => Some(b.ack),
            Body::Ack(b) => Some(b.ack),
            Body::Error(b) => b.ack,
            Body::Ping(b) => b.ack,
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub v: u32,
    pub seq: u64,
    pub session: Option<String>,
    pub player: Option<usize>,
    pub body: Body,
}

#[derive(Serialize)]
struct WireOut<'a> {
    v: u32,
    #[serde(rename = "type")]
    kind: MsgType,
    seq: u64,
    session: &'a Option<String>,
    player: Option<usize>,
    body: &'a Body,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireIn {
    v: u32,
    #[serde(rename = "type")]
    kind: MsgType,
    seq: u64,
    #[serde(default)]
    session: Option<String>,
    #[serde(default)]
    player: Option<usize>,
    #[serde(default)]
    body: serde_json::Value,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("malformed message: {0}")]
    Malformed(String),
    /// The envelope parsed but carries another protocol version.
    #[error("unsupported protocol version {version}")]
    BadVersion { version: u32, seq: u64 },
}

impl DecodeError {
    pub fn reason(&self) -> ErrorReason {
        match self {
            DecodeError::Malformed(_) => ErrorReason::Malformed,
            DecodeError::BadVersion { .. } => ErrorReason::BadVersion,
        }
    }

    pub fn seq(&self) -> Option<u64> {
        match self {
            DecodeError::BadVersion { seq, .. } => Some(*seq),
            DecodeError::Malformed(_) => None,
        }
    }
}

fn body_from<T: for<'de> Deserialize<'de>>(v: serde_json::Value) -> Result<T, DecodeError> {
    let v = if v.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        v
    };
    serde_json::from_value(v).map_err(|e| DecodeError::Malformed(format!("body: {e}")))
}

impl Message {
    pub fn new(seq: u64, session: Option<String>, player: Option<usize>, body: Body) -> Message {
        Message {
            v: PROTOCOL_VERSION,
            seq,
            session,
            player,
            body,
        }
    }

    pub fn msg_type(&self) -> MsgType {
        self.body.msg_type()
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(&WireOut {
            v: self.v,
            kind: self.msg_type(),
            seq: self.seq,
            session: &self.session,
            player: self.player,
            body: &self.body,
        })
        .expect("message serializes")
    }

    /// Parses a message. `HELLO` and `PING` bodies carrying `ack` decode as
    /// server replies; everything else decodes by `type`.
    pub fn decode(text: &str) -> Result<Message, DecodeError> {
        let raw: WireIn = serde_json::from_str(text).map_err(|e| DecodeError::Malformed(e.to_string()))?;
        if raw.v != PROTOCOL_VERSION {
            return Err(DecodeError::BadVersion {
                version: raw.v,
                seq: raw.seq,
            });
        }
        let has_ack = raw.body.get("ack").is_some();
        let body = match raw.kind {
            MsgType::Hello if has_ack => Body::HelloReply(body_from(raw.body)?),
            MsgType::Hello => Body::Hello(body_from(raw.body)?),
            MsgType::Create => Body::Create(body_from(raw.body)?),
            MsgType::Join => Body::Join(body_from(raw.body)?),
            MsgType::State => Body::State(Box::new(body_from(raw.body)?)),
            MsgType::Act => Body::Act(body_from(raw.body)?),
            MsgType::Ack => Body::Ack(body_from(raw.body)?),
            MsgType::Result => Body::Result(body_from(raw.body)?),
            MsgType::Error => Body::Error(body_from(raw.body)?),
            MsgType::Ping => Body::Ping(body_from(raw.body)?),
        };
        Ok(Message {
            v: raw.v,
            seq: raw.seq,
            session: raw.session,
            player: raw.player,
            body,
        })
    }
}

/// Who plays a seat.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SeatSpec {
    Human,
    Random,
    Agent(String),
}

impl FromStr for SeatSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<SeatSpec, String> {
        match s {
            "human" => Ok(SeatSpec::Human),
            "random" => Ok(SeatSpec::Random),
            _ => match s.strip_prefix("agent:") {
                Some(path) if !path.is_empty() => Ok(SeatSpec::Agent(path.to_string())),
                _ => Err(format!("unknown seat kind {s:?}")),
            },
        }
    }
}

impl fmt::Display for SeatSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeatSpec::Human => f.write_str("human"),
            SeatSpec::Random => f.write_str("random"),
            SeatSpec::Agent(p) => write!(f, "agent:{p}"),
        }
    }
}
