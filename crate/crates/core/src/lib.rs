//! Uno game AI: rules engine, observation encodings, a small dense Q-network,
//! a multi-player MCTS that averages Q backups and reshapes rewards, learning
//! agents (DDQN with MCTS, DDQN, DMC, NFSP) and an evaluation harness.

pub mod agents;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod game;
pub mod mcts;
pub mod neural;
pub mod rng;

pub use encoding::{Action, ActionId, ActionSet, EncodedState, NUM_ACTIONS, STATE_SIZE};
pub use error::{AgentError, EncodingError, GameError, NetworkError, ParseError, SearchError};
pub use game::{Card, Color, Kind, PlayerView, TableState, TerminalResult};
