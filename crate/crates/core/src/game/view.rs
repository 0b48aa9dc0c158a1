//! One player's observation and determinized resampling of hidden cards.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::card::{build_deck, Card, DECK_SIZE};
use super::state::{Direction, TableParts, TableState};
use crate::encoding::ActionSet;
use crate::error::GameError;
use crate::rng::rng_from_seed;

/// What a single seat can see. Opponents are summarized by hand sizes and
/// the piles by their lengths; no hidden card contents are present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerView {
    pub player: usize,
    pub hand: Vec<Card>,
    pub target: Card,
    /// Empty unless it is this player's turn.
    pub legal_actions: ActionSet,
    pub num_players: usize,
    pub current_player: usize,
    pub direction: Direction,
    pub hand_sizes: Vec<usize>,
    pub draw_pile_len: usize,
    pub discard_len: usize,
    pub round_count: u32,
}

impl PlayerView {
    pub fn is_my_turn(&self) -> bool {
        self.player == self.current_player
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("view serializes")
    }
}

/// Removes one copy of `card` from `pool`, or reports which card was missing.
fn take(pool: &mut Vec<Card>, card: Card) -> Result<(), GameError> {
    match pool.iter().position(|c| *c == card) {
        Some(pos) => {
            pool.swap_remove(pos);
            Ok(())
        }
        None => Err(GameError::InconsistentCounts(format!(
            "{card} appears more often than the deck allows"
        ))),
    }
}

/// Builds a full table consistent with `view`.
///
/// The unseen cards (deck minus own hand, target and `known_discards`) are
/// shuffled with `seed` and dealt to the opponents according to the
/// observed hand sizes; the rest fill the unknown part of the discard pile
/// and then the draw pile. The returned table's RNG is also seeded from
/// `seed`.
pub fn sample_determinization(view: &PlayerView, known_discards: &[Card], seed: u64) -> Result<TableState, GameError> {
    if view.hand_sizes.len() != view.num_players {
        return Err(GameError::InconsistentCounts(format!(
            "{} hand sizes for {} players",
            view.hand_sizes.len(),
            view.num_players
        )));
    }
    if view.hand_sizes[view.player] != view.hand.len() {
        return Err(GameError::InconsistentCounts(
            "own hand size does not match hand".into(),
        ));
    }
    if known_discards.len() > view.discard_len {
        return Err(GameError::InconsistentCounts(
            "more known discards than the discard pile holds".into(),
        ));
    }
    let total = view.hand_sizes.iter().sum::<usize>() + view.draw_pile_len + view.discard_len + 1;
    if total != DECK_SIZE {
        return Err(GameError::InconsistentCounts(format!(
            "zones hold {total} cards, expected {DECK_SIZE}"
        )));
    }

    let mut pool = build_deck();
    for &card in view.hand.iter().chain(known_discards) {
        take(&mut pool, card.undeclared())?;
    }
    take(&mut pool, view.target.undeclared())?;
    // swap_remove scrambled the order; restore a canonical one before shuffling.
    pool.sort();

    let mut rng = rng_from_seed(seed);
    pool.shuffle(&mut rng);

    let mut hands = Vec::with_capacity(view.num_players);
    for (seat, &size) in view.hand_sizes.iter().enumerate() {
        if seat == view.player {
            hands.push(view.hand.clone());
        } else {
            let split = pool.len() - size;
            hands.push(pool.split_off(split));
        }
    }
    let unknown_discards = view.discard_len - known_discards.len();
    let split = pool.len() - unknown_discards;
    let mut discard_pile = pool.split_off(split);
    discard_pile.extend(known_discards.iter().map(|c| c.undeclared()));
    let draw_pile = pool;
    debug_assert_eq!(draw_pile.len(), view.draw_pile_len);

    Ok(TableState::from_parts(TableParts {
        hands,
        draw_pile,
        discard_pile,
        target: view.target,
        current_player: view.current_player,
        direction: view.direction,
        num_players: view.num_players,
        rng,
        round_count: view.round_count,
    }))
}
