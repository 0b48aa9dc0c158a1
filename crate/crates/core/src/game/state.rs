//! Full hidden game state and the rules that advance it.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::card::{build_deck, Card, Kind, DECK_SIZE};
use super::view::PlayerView;
use crate::encoding::{action_to_id, Action, ActionId, ActionSet};
use crate::error::GameError;
use crate::rng::{rng_from_seed, GameRng};

pub const MIN_PLAYERS: usize = 2;
pub const MAX_PLAYERS: usize = 10;
pub const HAND_SIZE: usize = 7;
/// Round count treated as a stalled game by drivers.
pub const ROUND_LIMIT: u32 = 100_000;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Clockwise,
    Counterclockwise,
}

impl Direction {
    fn flipped(self) -> Direction {
        match self {
            Direction::Clockwise => Direction::Counterclockwise,
            Direction::Counterclockwise => Direction::Clockwise,
        }
    }
}

/// Outcome of a finished game: the winner gets +1, everyone else -1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalResult {
    pub winner: usize,
    pub rewards: Vec<f64>,
}

impl TerminalResult {
    pub fn new(winner: usize, num_players: usize) -> TerminalResult {
        let rewards = (0..num_players).map(|p| if p == winner { 1.0 } else { -1.0 }).collect();
        TerminalResult { winner, rewards }
    }

    pub fn reward(&self, player: usize) -> f64 {
        self.rewards[player]
    }
}

/// What one call to [`TableState::apply_action`] produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub done: bool,
    pub result: Option<TerminalResult>,
}

/// Ground-truth table: every hand, both piles, turn order and the RNG that
/// drives all reshuffles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableState {
    pub(crate) hands: Vec<Vec<Card>>,
    /// Top of the pile is the last element.
    pub(crate) draw_pile: Vec<Card>,
    pub(crate) discard_pile: Vec<Card>,
    pub(crate) target: Card,
    pub(crate) current_player: usize,
    pub(crate) direction: Direction,
    pub(crate) num_players: usize,
    pub(crate) rng: GameRng,
    pub(crate) round_count: u32,
    pub(crate) winner: Option<usize>,
}

impl TableState {
    /// Shuffles a fresh deck with `seed`, deals seven cards to each player
    /// and flips the first non-wild card as the target. Wilds turned up by the
    /// flip go back into the draw pile at a random position.
    pub fn new(num_players: usize, seed: u64) -> Result<TableState, GameError> {
        if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&num_players) {
            return Err(GameError::InvalidPlayerCount(num_players));
        }
        let mut rng = rng_from_seed(seed);
        let mut deck = build_deck();
        deck.shuffle(&mut rng);

        let mut hands = vec![Vec::with_capacity(HAND_SIZE); num_players];
        for _ in 0..HAND_SIZE {
            for hand in hands.iter_mut() {
                hand.push(deck.pop().expect("deck holds enough cards"));
            }
        }
        let target = loop {
            let card = deck.pop().expect("deck holds non-wild cards");
            if !card.kind.is_wild() {
                break card;
            }
            let pos = rng.random_range(0..=deck.len());
            deck.insert(pos, card);
        };

        Ok(TableState {
            hands,
            draw_pile: deck,
            discard_pile: Vec::new(),
            target,
            current_player: 0,
            direction: Direction::Clockwise,
            num_players,
            rng,
            round_count: 0,
            winner: None,
        })
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn current_player(&self) -> usize {
        self.current_player
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn target(&self) -> Card {
        self.target
    }

    pub fn hand(&self, player: usize) -> &[Card] {
        &self.hands[player]
    }

    pub fn hand_sizes(&self) -> Vec<usize> {
        self.hands.iter().map(Vec::len).collect()
    }

    pub fn draw_pile(&self) -> &[Card] {
        &self.draw_pile
    }

    pub fn discard_pile(&self) -> &[Card] {
        &self.discard_pile
    }

    pub fn round_count(&self) -> u32 {
        self.round_count
    }

    pub fn rng(&self) -> &GameRng {
        &self.rng
    }

    /// Replaces the generator used for future reshuffles.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = rng_from_seed(seed);
    }

    /// True once the round counter passes [`ROUND_LIMIT`]. Games only get
    /// there if every card is held and nobody can play.
    pub fn is_stalled(&self) -> bool {
        self.round_count >= ROUND_LIMIT
    }

    pub fn is_over(&self) -> bool {
        self.winner.is_some()
    }

    pub fn result(&self) -> Option<TerminalResult> {
        self.winner.map(|w| TerminalResult::new(w, self.num_players))
    }

    /// Cards across hands, both piles and the target.
    pub fn total_cards(&self) -> usize {
        self.hands.iter().map(Vec::len).sum::<usize>() + self.draw_pile.len() + self.discard_pile.len() + 1
    }

    /// Legal actions for the player to move, computed from hand and target.
    pub fn legal_actions(&self, player: usize) -> Result<ActionSet, GameError> {
        if self.is_over() {
            return Err(GameError::GameOver);
        }
        if player != self.current_player {
            return Err(GameError::NotYourTurn {
                player,
                current: self.current_player,
            });
        }
        Ok(legal_actions_for(&self.hands[player], self.target))
    }

    /// Legal actions of whoever is to move; empty once the game is over.
    pub fn current_legal_actions(&self) -> ActionSet {
        if self.is_over() {
            ActionSet::EMPTY
        } else {
            legal_actions_for(&self.hands[self.current_player], self.target)
        }
    }

    /// Applies `action` for the current player. Card effects, forced draws,
    /// reshuffles and the win check all happen here.
    pub fn apply_action(&mut self, action: ActionId) -> Result<StepOutcome, GameError> {
        if self.is_over() {
            return Err(GameError::GameOver);
        }
        let player = self.current_player;
        if !legal_actions_for(&self.hands[player], self.target).contains(action) {
            return Err(GameError::IllegalAction(action));
        }
        self.round_count += 1;

        let card = match action.action() {
            Action::Draw => {
                self.draw_cards(player, 1);
                self.current_player = self.seat_after(player, 1);
                return Ok(self.outcome());
            }
            Action::Play(card) => card,
        };

        let hand = &mut self.hands[player];
        let held = card.undeclared();
        let pos = hand
            .iter()
            .position(|c| *c == held)
            .expect("legal action implies the card is held");
        hand.remove(pos);
        let old_target = std::mem::replace(&mut self.target, card);
        self.discard_pile.push(old_target.undeclared());

        if self.hands[player].is_empty() {
            self.winner = Some(player);
            return Ok(self.outcome());
        }

        self.current_player = match card.kind {
            Kind::Number(_) | Kind::Wild => self.seat_after(player, 1),
            Kind::Skip => self.seat_after(player, 2),
            Kind::Reverse if self.num_players == 2 => player,
            Kind::Reverse => {
                self.direction = self.direction.flipped();
                self.seat_after(player, 1)
            }
            Kind::DrawTwo | Kind::WildDrawFour => {
                let victim = self.seat_after(player, 1);
                let n = if card.kind == Kind::DrawTwo { 2 } else { 4 };
                self.draw_cards(victim, n);
                self.seat_after(player, 2)
            }
        };
        Ok(self.outcome())
    }

    /// The observation available to `player`.
    pub fn view(&self, player: usize) -> PlayerView {
        let legal_actions = if player == self.current_player {
            self.current_legal_actions()
        } else {
            ActionSet::EMPTY
        };
        PlayerView {
            player,
            hand: self.hands[player].clone(),
            target: self.target,
            legal_actions,
            num_players: self.num_players,
            current_player: self.current_player,
            direction: self.direction,
            hand_sizes: self.hand_sizes(),
            draw_pile_len: self.draw_pile.len(),
            discard_len: self.discard_pile.len(),
            round_count: self.round_count,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("table state serializes")
    }

    pub fn from_json(s: &str) -> Result<TableState, serde_json::Error> {
        serde_json::from_str(s)
    }

    fn outcome(&self) -> StepOutcome {
        StepOutcome {
            done: self.is_over(),
            result: self.result(),
        }
    }

    fn seat_after(&self, player: usize, steps: usize) -> usize {
        let n = self.num_players;
        let steps = steps % n;
        match self.direction {
            Direction::Clockwise => (player + steps) % n,
            Direction::Counterclockwise => (player + n - steps) % n,
        }
    }

    /// Draws up to `n` cards, reshuffling the discard pile when the draw
    /// pile runs out. When both piles are empty the remaining draws are
    /// skipped.
    fn draw_cards(&mut self, player: usize, n: usize) {
        for _ in 0..n {
            if self.draw_pile.is_empty() {
                if self.discard_pile.is_empty() {
                    return;
                }
                std::mem::swap(&mut self.draw_pile, &mut self.discard_pile);
                self.draw_pile.shuffle(&mut self.rng);
            }
            let card = self.draw_pile.pop().expect("draw pile refilled");
            self.hands[player].push(card);
        }
    }

    pub(crate) fn from_parts(parts: TableParts) -> TableState {
        let state = TableState {
            hands: parts.hands,
            draw_pile: parts.draw_pile,
            discard_pile: parts.discard_pile,
            target: parts.target,
            current_player: parts.current_player,
            direction: parts.direction,
            num_players: parts.num_players,
            rng: parts.rng,
            round_count: parts.round_count,
            winner: None,
        };
        debug_assert_eq!(state.total_cards(), DECK_SIZE);
        state
    }
}

pub(crate) struct TableParts {
    pub hands: Vec<Vec<Card>>,
    pub draw_pile: Vec<Card>,
    pub discard_pile: Vec<Card>,
    pub target: Card,
    pub current_player: usize,
    pub direction: Direction,
    pub num_players: usize,
    pub rng: GameRng,
    pub round_count: u32,
}

/// A card may be played if it is wild, shares the target's color, or
/// shares the target's kind (rank for number cards). Draw is legal exactly
/// when nothing else is.
pub fn legal_actions_for(hand: &[Card], target: Card) -> ActionSet {
    let mut legal = ActionSet::EMPTY;
    for &card in hand {
        if card.kind.is_wild() {
            for color in super::Color::ALL {
                let declared = Card::colored(color, card.kind);
                legal.insert(action_to_id(Action::Play(declared)).expect("declared wild"));
            }
        } else if card.color == target.color || card.kind == target.kind {
            legal.insert(action_to_id(Action::Play(card)).expect("colored card"));
        }
    }
    if legal.is_empty() {
        legal.insert(ActionId::DRAW);
    }
    legal
}
