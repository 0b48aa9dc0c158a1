use thiserror::Error;

use crate::encoding::ActionId;
use crate::game::Card;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("invalid card {0:?}")]
    Card(String),
    #[error("invalid bit string: {0}")]
    BitString(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("action id {0} outside 0..=60")]
    ActionOutOfRange(usize),
    #[error("wild card {0} has no declared color")]
    UndeclaredWild(Card),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("player count {0} outside 2..=10")]
    InvalidPlayerCount(usize),
    #[error("player {player} acted out of turn (current player is {current})")]
    NotYourTurn { player: usize, current: usize },
    #[error("action {0} is not legal in this state")]
    IllegalAction(ActionId),
    #[error("the game is already over")]
    GameOver,
    #[error("no winner after {0} rounds")]
    Stalled(u32),
    #[error("inconsistent card counts: {0}")]
    InconsistentCounts(String),
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient; update skipped")]
    NonFiniteGradient,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no legal actions")]
    NoLegalActions,
    #[error("insufficient data: have {have}, need {need}")]
    InsufficientData { have: usize, need: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("evaluation failed: {0}")]
    Eval(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("no legal actions at the search root")]
    NoLegalActions,
    #[error("state has no recorded statistics")]
    UnknownState,
    #[error("search root belongs to player {root}, statistics recorded for player {found}")]
    Impure { root: usize, found: usize },
    #[error(transparent)]
    Game(#[from] GameError),
}
