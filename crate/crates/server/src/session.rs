//! One table: seats, the authoritative game and the per-seat message
//! bookkeeping.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use uno_core::agents::{GreedyPolicy, Policy, RandomPolicy};
use uno_core::encoding::{ActionId, ActionSet};
use uno_core::game::{TableState, MAX_PLAYERS, MIN_PLAYERS};
use uno_core::neural::{load_checkpoint, DEFAULT_LAYERS};
use uno_core::rng::{derive_seed, rng_from_seed, GameRng};

use crate::protocol::{AckBody, Body, ErrorBody, ErrorReason, Message, PublicEvent, ResultBody, SeatSpec, StateBody};

/// Transport-level identity of a connection or UDP peer.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PeerId(pub u64);

/// Where an outgoing message goes.
#[derive(Clone, Debug, PartialEq)]
pub struct Outgoing {
    pub peer: PeerId,
    pub text: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogDirection {
    In,
    Out,
}

/// One line of a session transcript. Outgoing STATEs are recorded for
/// every seat, bots included; `delivered` tells whether a connection
/// received it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub dir: LogDirection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer: Option<PeerId>,
    pub seat: Option<usize>,
    pub delivered: bool,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session: String,
    pub seed: u64,
    pub seats: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_timeout_ms: Option<u64>,
    #[serde(default)]
    pub bot_delay_ms: u64,
    pub entries: Vec<LogEntry>,
}

impl SessionLog {
    /// Inbound message texts in arrival order.
    pub fn inbound(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.dir == LogDirection::In)
            .map(|e| e.text.as_str())
            .collect()
    }

    /// Outbound messages of one type, in emission order.
    pub fn outbound_of(&self, kind: &str) -> Vec<&LogEntry> {
        let tag = format!(r#""type":"{kind}""#);
        self.entries
            .iter()
            .filter(|e| e.dir == LogDirection::Out && e.text.contains(&tag))
            .collect()
    }
}

enum Seat {
    Human { peer: Option<PeerId> },
    Bot(Arc<dyn Policy>),
}

/// Options that do not come from the CREATE message.
#[derive(Copy, Clone, Debug, Default)]
pub struct SessionOptions {
    pub turn_timeout: Option<Duration>,
    pub bot_delay: Duration,
}

pub struct Session {
    pub id: String,
    pub seed: u64,
    specs: Vec<SeatSpec>,
    seats: Vec<Seat>,
    creator: PeerId,
    table: TableState,
    rng: GameRng,
    started: bool,
    version: u64,
    out_seq: u64,
    last_seq: Vec<Option<u64>>,
    cached: Vec<Vec<Outgoing>>,
    options: SessionOptions,
    turn_deadline: Option<Instant>,
    bot_due: Option<Instant>,
    log: SessionLog,
}

/// A rejected CREATE.
#[derive(Debug)]
pub struct CreateError {
    pub reason: ErrorReason,
    pub message: String,
}

fn load_agent(path: &str) -> Result<Arc<dyn Policy>, CreateError> {
    let ckpt = load_checkpoint(path, Some(&DEFAULT_LAYERS)).map_err(|e| CreateError {
        reason: ErrorReason::Checkpoint,
        message: format!("{path}: {e}"),
    })?;
    Ok(Arc::new(GreedyPolicy::new(ckpt.net, ckpt.meta.algorithm)))
}

impl Session {
    pub fn new(
        id: String,
        seats: &[String],
        seed: u64,
        options: SessionOptions,
        creator: PeerId,
        create_text: &str,
    ) -> Result<Session, CreateError> {
        if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&seats.len()) {
            return Err(CreateError {
                reason: ErrorReason::BadSeats,
                message: format!("{} seats; tables seat 2 to 10 players", seats.len()),
            });
        }
        let specs = seats
            .iter()
            .map(|s| s.parse::<SeatSpec>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|message| CreateError {
                reason: ErrorReason::BadSeats,
                message,
            })?;
        let seat_rt = specs
            .iter()
            .map(|s| {
                Ok(match s {
                    SeatSpec::Human => Seat::Human { peer: None },
                    SeatSpec::Random => Seat::Bot(Arc::new(RandomPolicy)),
                    SeatSpec::Agent(path) => Seat::Bot(load_agent(path)?),
                })
            })
            .collect::<Result<Vec<_>, CreateError>>()?;
        let n = specs.len();
        let table = TableState::new(n, seed).map_err(|e| CreateError {
            reason: ErrorReason::BadSeats,
            message: e.to_string(),
        })?;
        let mut log = SessionLog {
            session: id.clone(),
            seed,
            seats: specs.iter().map(ToString::to_string).collect(),
            turn_timeout_ms: options.turn_timeout.map(|t| t.as_millis() as u64),
            bot_delay_ms: options.bot_delay.as_millis() as u64,
            entries: Vec::new(),
        };
        log.entries.push(LogEntry {
            dir: LogDirection::In,
            peer: Some(creator),
            seat: None,
            delivered: true,
            text: create_text.to_string(),
        });
        Ok(Session {
            id,
            seed,
            specs,
            seats: seat_rt,
            creator,
            table,
            rng: rng_from_seed(derive_seed(seed, 1)),
            started: false,
            version: 0,
            out_seq: 0,
            last_seq: vec![None; n],
            cached: vec![Vec::new(); n],
            options,
            turn_deadline: None,
            bot_due: None,
            log,
        })
    }

    pub fn table(&self) -> &TableState {
        &self.table
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn is_started(&self) -> bool {
        self.started
    }

    pub fn is_finished(&self) -> bool {
        self.table.is_over()
    }

    pub fn seat_specs(&self) -> &[SeatSpec] {
        &self.specs
    }

    pub fn turn_deadline(&self) -> Option<Instant> {
        self.turn_deadline
    }

    pub fn bot_due(&self) -> Option<Instant> {
        self.bot_due
    }

    fn human_peer(&self, seat: usize) -> Option<PeerId> {
        match self.seats.get(seat) {
            Some(Seat::Human { peer }) => *peer,
            _ => None,
        }
    }

    fn has_humans(&self) -> bool {
        self.seats.iter().any(|s| matches!(s, Seat::Human { .. }))
    }

    fn next_seq(&mut self) -> u64 {
        self.out_seq += 1;
        self.out_seq
    }

    fn message(&mut self, player: Option<usize>, body: Body) -> Message {
        let seq = self.next_seq();
        Message::new(seq, Some(self.id.clone()), player, body)
    }

    /// Records and, when `peer` is set, queues a message.
    fn emit(&mut self, out: &mut Vec<Outgoing>, seat: Option<usize>, peer: Option<PeerId>, msg: Message) {
        let text = msg.encode();
        self.log.entries.push(LogEntry {
            dir: LogDirection::Out,
            peer,
            seat,
            delivered: peer.is_some(),
            text: text.clone(),
        });
        if let Some(peer) = peer {
            out.push(Outgoing { peer, text });
        }
    }

    fn log_inbound(&mut self, peer: PeerId, seat: Option<usize>, text: &str) {
        self.log.entries.push(LogEntry {
            dir: LogDirection::In,
            peer: Some(peer),
            seat,
            delivered: true,
            text: text.to_string(),
        });
    }

    pub fn error(
        &mut self,
        seat: Option<usize>,
        ack: Option<u64>,
        reason: ErrorReason,
        message: impl Into<String>,
    ) -> Message {
        self.message(
            seat,
            Body::Error(ErrorBody {
                ack,
                reason,
                message: message.into(),
            }),
        )
    }

    /// Reply to the CREATE, followed by the start of play when no human
    /// seat needs to join.
    pub fn on_created(&mut self, peer: PeerId, create_seq: u64, now: Instant) -> Vec<Outgoing> {
        let mut out = Vec::new();
        let ack = self.message(None, Body::Ack(AckBody { ack: create_seq }));
        self.emit(&mut out, None, Some(peer), ack);
        if !self.has_humans() {
            self.start(&mut out, now);
        }
        out
    }

    /// Seats `peer`. Returns the seat on success.
    pub fn join(&mut self, peer: PeerId, seq: u64, wanted: Option<usize>, text: &str, now: Instant) -> Vec<Outgoing> {
        let mut out = Vec::new();
        self.log_inbound(peer, wanted, text);
        let already = (0..self.seats.len()).find(|&s| self.human_peer(s) == Some(peer));
        let free = |s: &Seat| matches!(s, Seat::Human { peer: None });
        let seat = match (wanted, already) {
            (Some(w), _) if w >= self.seats.len() || !matches!(self.seats[w], Seat::Human { .. }) => {
                let err = self.error(
                    None,
                    Some(seq),
                    ErrorReason::UnknownSeat,
                    format!("seat {w} is not a human seat"),
                );
                self.emit(&mut out, None, Some(peer), err);
                return out;
            }
            (Some(w), _) if self.human_peer(w) == Some(peer) || free(&self.seats[w]) => w,
            (Some(w), _) => {
                let err = self.error(None, Some(seq), ErrorReason::SeatTaken, format!("seat {w} is taken"));
                self.emit(&mut out, None, Some(peer), err);
                return out;
            }
            (None, Some(s)) => s,
            (None, None) => match self.seats.iter().position(free) {
                Some(s) => s,
                None => {
                    let err = self.error(None, Some(seq), ErrorReason::SeatTaken, "no free human seat");
                    self.emit(&mut out, None, Some(peer), err);
                    return out;
                }
            },
        };
        let rejoin = self.human_peer(seat) == Some(peer);
        self.seats[seat] = Seat::Human { peer: Some(peer) };
        let ack = self.message(Some(seat), Body::Ack(AckBody { ack: seq }));
        self.emit(&mut out, Some(seat), Some(peer), ack);
        let all_joined = self.seats.iter().all(|s| !matches!(s, Seat::Human { peer: None }));
        if !self.started && all_joined {
            self.start(&mut out, now);
        } else if self.started && rejoin {
            // Reconnect: repeat the current view without a state change.
            let state = self.state_message(seat, Vec::new());
            self.emit(&mut out, Some(seat), Some(peer), state);
        }
        out
    }

    fn state_message(&mut self, seat: usize, events: Vec<PublicEvent>) -> Message {
        let body = StateBody {
            version: self.version,
            view: self.table.view(seat),
            events,
        };
        self.message(Some(seat), Body::State(Box::new(body)))
    }

    fn broadcast_state(&mut self, out: &mut Vec<Outgoing>, events: Vec<PublicEvent>) {
        self.version += 1;
        for seat in 0..self.seats.len() {
            let msg = self.state_message(seat, events.clone());
            let peer = self.human_peer(seat);
            self.emit(out, Some(seat), peer, msg);
        }
    }

    fn finish(&mut self, out: &mut Vec<Outgoing>) {
        let result = self.table.result().expect("game over");
        let body = ResultBody {
            winner: result.winner,
            rewards: result.rewards.clone(),
            rounds: self.table.round_count(),
        };
        let mut sent = false;
        for seat in 0..self.seats.len() {
            if let Some(peer) = self.human_peer(seat) {
                let msg = self.message(Some(seat), Body::Result(body.clone()));
                self.emit(out, Some(seat), Some(peer), msg);
                sent = true;
            }
        }
        if !sent {
            let msg = self.message(None, Body::Result(body));
            let creator = self.creator;
            self.emit(out, None, Some(creator), msg);
        }
        self.turn_deadline = None;
        self.bot_due = None;
    }

    fn start(&mut self, out: &mut Vec<Outgoing>, now: Instant) {
        self.started = true;
        self.broadcast_state(out, Vec::new());
        self.after_change(out, now);
    }

    fn apply(&mut self, out: &mut Vec<Outgoing>, action: ActionId, forced: bool) {
        let player = self.table.current_player();
        let label = action.action().to_string();
        self.table.apply_action(action).expect("action validated before apply");
        self.broadcast_state(
            out,
            vec![PublicEvent {
                player,
                action,
                label,
                forced,
            }],
        );
    }

    /// Runs bots (all at once without a delay, otherwise one per tick),
    /// then arms the turn timer for a human seat or reports the result.
    fn after_change(&mut self, out: &mut Vec<Outgoing>, now: Instant) {
        self.turn_deadline = None;
        self.bot_due = None;
        loop {
            if self.table.is_over() {
                self.finish(out);
                return;
            }
            let seat = self.table.current_player();
            let bot = match &self.seats[seat] {
                Seat::Bot(p) => Arc::clone(p),
                Seat::Human { .. } => {
                    self.turn_deadline = self.options.turn_timeout.map(|t| now + t);
                    return;
                }
            };
            if !self.options.bot_delay.is_zero() {
                self.bot_due = Some(now + self.options.bot_delay);
                return;
            }
            if self.table.is_stalled() {
                // Unreachable in practice; stop rather than spin.
                return;
            }
            let action = bot.act(&self.table.view(seat), &mut self.rng);
            self.apply(out, action, false);
        }
    }

    /// Handles an ACT from `peer` for `seat`.
    pub fn act(
        &mut self,
        peer: PeerId,
        seat: usize,
        seq: u64,
        action: ActionId,
        text: &str,
        now: Instant,
    ) -> Vec<Outgoing> {
        let mut out = Vec::new();
        let owner = self.human_peer(seat) == Some(peer);
        if owner && self.last_seq[seat] == Some(seq) {
            // Retransmission: repeat what the original produced for this
            // seat without touching the game or the log.
            return self.cached[seat].clone();
        }
        self.log_inbound(peer, Some(seat), text);
        if !owner {
            let err = self.error(
                Some(seat),
                Some(seq),
                ErrorReason::UnknownSeat,
                format!("seat {seat} is not joined by this client"),
            );
            self.emit(&mut out, Some(seat), Some(peer), err);
            return out;
        }
        if let Some(last) = self.last_seq[seat].filter(|&last| seq < last) {
            let err = self.error(
                Some(seat),
                Some(seq),
                ErrorReason::StaleSeq,
                format!("seq {seq} is older than {last}"),
            );
            self.emit(&mut out, Some(seat), Some(peer), err);
            return out;
        }
        self.last_seq[seat] = Some(seq);
        let rejection = if !self.started {
            Some((ErrorReason::NotStarted, "waiting for players".to_string()))
        } else if self.table.is_over() {
            Some((ErrorReason::GameOver, "the game is over".to_string()))
        } else if self.table.current_player() != seat {
            Some((
                ErrorReason::NotYourTurn,
                format!("seat {} is to move", self.table.current_player()),
            ))
        } else if !self.table.current_legal_actions().contains(action) {
            Some((ErrorReason::IllegalAction, format!("action {action} is not legal")))
        } else {
            None
        };
        match rejection {
            Some((reason, message)) => {
                let err = self.error(Some(seat), Some(seq), reason, message);
                self.emit(&mut out, Some(seat), Some(peer), err);
            }
            None => {
                let ack = self.message(Some(seat), Body::Ack(AckBody { ack: seq }));
                self.emit(&mut out, Some(seat), Some(peer), ack);
                self.apply(&mut out, action, false);
                self.after_change(&mut out, now);
            }
        }
        self.cached[seat] = out.iter().filter(|o| o.peer == peer).cloned().collect();
        out
    }

    /// The move the turn timer makes: Draw when legal, else the single (or
    /// lowest-id) legal action.
    pub fn forced_action(legal: ActionSet) -> Option<ActionId> {
        if legal.contains(ActionId::DRAW) {
            Some(ActionId::DRAW)
        } else {
            legal.first()
        }
    }

    /// Fires an expired turn timer or a due bot move.
    pub fn tick(&mut self, now: Instant) -> Vec<Outgoing> {
        let mut out = Vec::new();
        if self.table.is_over() {
            return out;
        }
        if self.turn_deadline.is_some_and(|d| now >= d) {
            if let Some(a) = Self::forced_action(self.table.current_legal_actions()) {
                self.apply(&mut out, a, true);
                self.after_change(&mut out, now);
            }
        } else if self.bot_due.is_some_and(|d| now >= d) {
            let seat = self.table.current_player();
            if let Seat::Bot(bot) = &self.seats[seat] {
                let bot = Arc::clone(bot);
                let action = bot.act(&self.table.view(seat), &mut self.rng);
                self.apply(&mut out, action, false);
                // One bot move per tick: schedule the next from here.
                let next_is_bot =
                    !self.table.is_over() && matches!(self.seats[self.table.current_player()], Seat::Bot(_));
                if next_is_bot {
                    self.bot_due = Some(now + self.options.bot_delay);
                } else {
                    self.after_change(&mut out, now);
                }
            }
        }
        out
    }
}

/// Re-runs a session from its transcript: the CREATE and every inbound
/// JOIN and ACT are fed again from the same peers, and timers fire when
/// the original transcript shows output that no inbound message caused.
/// A faithful server reproduces every outbound text byte for byte.
pub fn replay(log: &SessionLog) -> Result<SessionLog, CreateError> {
    let bad = |message: String| CreateError {
        reason: ErrorReason::Malformed,
        message,
    };
    let mut inbound = log
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.dir == LogDirection::In);
    let (_, create) = inbound.next().ok_or_else(|| bad("empty transcript".into()))?;
    let create_msg = Message::decode(&create.text).map_err(|e| bad(e.to_string()))?;
    let creator = create.peer.unwrap_or(PeerId(0));
    let options = SessionOptions {
        turn_timeout: log.turn_timeout_ms.map(Duration::from_millis),
        bot_delay: Duration::from_millis(log.bot_delay_ms),
    };
    let mut session = Session::new(
        log.session.clone(),
        &log.seats,
        log.seed,
        options,
        creator,
        &create.text,
    )?;
    // A virtual clock that jumps past every deadline between messages.
    let step = Duration::from_secs(86_400);
    let mut now = Instant::now();
    session.on_created(creator, create_msg.seq, now);

    let outbound_before = |idx: usize| log.entries[..idx].iter().filter(|e| e.dir == LogDirection::Out).count();
    let catch_up = |session: &mut Session, now: &mut Instant, target: usize| {
        while session
            .log
            .entries
            .iter()
            .filter(|e| e.dir == LogDirection::Out)
            .count()
            < target
        {
            *now += step;
            if session.tick(*now).is_empty() && session.turn_deadline.is_none() && session.bot_due.is_none() {
                break;
            }
        }
    };
    for (idx, entry) in inbound {
        catch_up(&mut session, &mut now, outbound_before(idx));
        let msg = Message::decode(&entry.text).map_err(|e| bad(e.to_string()))?;
        let peer = entry.peer.unwrap_or(PeerId(0));
        match msg.body {
            Body::Join(j) => {
                session.join(peer, msg.seq, j.seat.or(msg.player), &entry.text, now);
            }
            Body::Act(a) => {
                let seat = msg.player.ok_or_else(|| bad("ACT without player".into()))?;
                session.act(peer, seat, msg.seq, a.action, &entry.text, now);
            }
            _ => return Err(bad(format!("unexpected inbound {:?}", msg.msg_type()))),
        }
    }
    catch_up(&mut session, &mut now, outbound_before(log.entries.len()));
    Ok(session.log)
}
