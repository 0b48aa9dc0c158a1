//! Seedable Uno rules engine for 2-10 players.
//!
//! Rules implemented: match by color or kind, wilds always playable, Draw
//! only when nothing else is. A drawn card is never played in the same turn.
//! Reverse acts as skip with two players. The "Uno" call is not modelled.

mod card;
mod state;
mod view;

pub use card::{build_deck, Card, Color, Kind, DECK_SIZE};
pub use state::{
    legal_actions_for, Direction, StepOutcome, TableState, TerminalResult, HAND_SIZE, MAX_PLAYERS, MIN_PLAYERS,
    ROUND_LIMIT,
};
pub use view::{sample_determinization, PlayerView};
