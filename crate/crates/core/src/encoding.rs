//! Action ids and the 240-bit observation encoding.
//!
//! Action table (61 ids): for color block `c` (red 0, green 1, blue 2,
//! yellow 3) the ids `15c .. 15c + 15` are ranks 0-9, skip, reverse, draw 2,
//! wild and wild draw 4 declared as that color. Id 60 is Draw.
//!
//! Observation layout: four planes of 4x15 cells. Rows are colors in the
//! order yellow, green, blue, red; columns use the same kind order as the
//! action table. Planes 0, 1 and 2 one-hot the number of copies of each
//! (color, kind) held in hand (0, 1, 2-or-more); plane 3 one-hots the
//! target card. Flattened index = `plane * 60 + row * 15 + column`.
//! Wilds in hand have no color, so a held wild is counted in every row of
//! its column.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{EncodingError, ParseError};
use crate::game::{Card, Color, Kind};

pub const NUM_ACTIONS: usize = 61;
pub const PLANES: usize = 4;
pub const ROWS: usize = 4;
pub const COLS: usize = 15;
pub const PLANE_SIZE: usize = ROWS * COLS;
pub const STATE_SIZE: usize = PLANES * PLANE_SIZE;

/// Row order of the observation planes.
pub const ROW_COLORS: [Color; ROWS] = [Color::Yellow, Color::Green, Color::Blue, Color::Red];

/// One of the 61 discrete actions.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ActionId(u8);

impl ActionId {
    pub const DRAW: ActionId = ActionId(60);

    pub fn new(id: usize) -> Result<ActionId, EncodingError> {
        if id < NUM_ACTIONS {
            Ok(ActionId(id as u8))
        } else {
            Err(EncodingError::ActionOutOfRange(id))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = ActionId> {
        (0..NUM_ACTIONS as u8).map(ActionId)
    }

    pub fn action(self) -> Action {
        if self == ActionId::DRAW {
            return Action::Draw;
        }
        let color = Color::from_index(self.index() / COLS).expect("id < 60");
        let kind = Kind::from_index(self.index() % COLS).expect("column < 15");
        Action::Play(Card::colored(color, kind))
    }
}

impl<'de> Deserialize<'de> for ActionId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = u64::deserialize(deserializer)?;
        ActionId::new(raw as usize).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A decoded action: play a (color-declared) card or draw.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Play(Card),
    Draw,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Play(card) => card.fmt(f),
            Action::Draw => f.write_str("draw"),
        }
    }
}

impl FromStr for Action {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "draw" {
            Ok(Action::Draw)
        } else {
            s.parse().map(Action::Play)
        }
    }
}

pub fn action_to_id(action: Action) -> Result<ActionId, EncodingError> {
    match action {
        Action::Draw => Ok(ActionId::DRAW),
        Action::Play(card) => {
            let color = card.color.ok_or(EncodingError::UndeclaredWild(card))?;
            Ok(ActionId((color.index() * COLS + card.kind.index()) as u8))
        }
    }
}

pub fn id_to_action(id: usize) -> Result<Action, EncodingError> {
    ActionId::new(id).map(ActionId::action)
}

/// A set of action ids stored as a 61-bit mask.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash)]
pub struct ActionSet(u64);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn full() -> ActionSet {
        ActionSet((1u64 << NUM_ACTIONS) - 1)
    }

    pub fn single(id: ActionId) -> ActionSet {
        ActionSet(1u64 << id.0)
    }

    pub fn insert(&mut self, id: ActionId) {
        self.0 |= 1u64 << id.0;
    }

    pub fn remove(&mut self, id: ActionId) {
        self.0 &= !(1u64 << id.0);
    }

    pub fn contains(self, id: ActionId) -> bool {
        self.0 & (1u64 << id.0) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// Ids in ascending order.
    pub fn iter(self) -> impl Iterator<Item = ActionId> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let id = rest.trailing_zeros() as u8;
                rest &= rest - 1;
                Some(ActionId(id))
            }
        })
    }

    /// The `n`-th id in ascending order.
    pub fn nth(self, n: usize) -> Option<ActionId> {
        self.iter().nth(n)
    }

    pub fn first(self) -> Option<ActionId> {
        self.iter().next()
    }
}

impl FromIterator<ActionId> for ActionSet {
    fn from_iter<I: IntoIterator<Item = ActionId>>(iter: I) -> Self {
        let mut set = ActionSet::EMPTY;
        for id in iter {
            set.insert(id);
        }
        set
    }
}

impl fmt::Debug for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|a| a.0)).finish()
    }
}

impl Serialize for ActionSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ActionSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<ActionId>::deserialize(deserializer)?;
        Ok(ids.into_iter().collect())
    }
}

/// 1 at legal ids, 0 elsewhere.
pub fn legal_mask(legal: ActionSet) -> [u8; NUM_ACTIONS] {
    let mut mask = [0u8; NUM_ACTIONS];
    for id in legal.iter() {
        mask[id.index()] = 1;
    }
    mask
}

/// The 240-bit observation of one player, packed into four words.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncodedState {
    words: [u64; 4],
}

fn row_of(color: Color) -> usize {
    ROW_COLORS
        .iter()
        .position(|&c| c == color)
        .expect("all colors have a row")
}

impl EncodedState {
    pub fn index(plane: usize, row: usize, col: usize) -> usize {
        debug_assert!(plane < PLANES && row < ROWS && col < COLS);
        plane * PLANE_SIZE + row * COLS + col
    }

    pub fn bit(&self, idx: usize) -> bool {
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    fn set(&mut self, idx: usize) {
        self.words[idx / 64] |= 1u64 << (idx % 64);
    }

    pub fn get(&self, plane: usize, row: usize, col: usize) -> bool {
        self.bit(Self::index(plane, row, col))
    }

    /// Cell for a (color, kind) pair in the given plane.
    pub fn cell(&self, plane: usize, color: Color, kind: Kind) -> bool {
        self.get(plane, row_of(color), kind.index())
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits in ascending order.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(w * 64 + b)
                }
            })
        })
    }

    /// Dense 0/1 network input.
    pub fn to_input(&self) -> [f64; STATE_SIZE] {
        let mut out = [0.0; STATE_SIZE];
        for i in self.active() {
            out[i] = 1.0;
        }
        out
    }

    pub fn to_bit_string(&self) -> String {
        (0..STATE_SIZE).map(|i| if self.bit(i) { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<EncodedState, ParseError> {
        if s.len() != STATE_SIZE {
            return Err(ParseError::BitString(format!("length {} != {STATE_SIZE}", s.len())));
        }
        let mut state = EncodedState::default();
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '1' => state.set(i),
                '0' => {}
                other => return Err(ParseError::BitString(format!("bad character {other:?}"))),
            }
        }
        Ok(state)
    }
}

impl fmt::Debug for EncodedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EncodedState({})", self.to_bit_string())
    }
}

/// Encodes a hand and a (color-declared) target card.
pub fn encode_hand_target(hand: &[Card], target: Card) -> EncodedState {
    let mut counts = [[0u8; COLS]; ROWS];
    for card in hand {
        match card.color {
            Some(color) => counts[row_of(color)][card.kind.index()] += 1,
            None => {
                for row in counts.iter_mut() {
                    row[card.kind.index()] += 1;
                }
            }
        }
    }
    let mut state = EncodedState::default();
    for (row, row_counts) in counts.iter().enumerate() {
        for (col, &n) in row_counts.iter().enumerate() {
            let plane = (n as usize).min(2);
            state.set(EncodedState::index(plane, row, col));
        }
    }
    let target_color = target.color.expect("target card always carries a color");
    state.set(EncodedState::index(3, row_of(target_color), target.kind.index()));
    state
}

/// Encodes the part of a view the agent observes: its hand and the target.
pub fn encode_state(view: &crate::game::PlayerView) -> EncodedState {
    encode_hand_target(&view.hand, view.target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_action_ids() {
        let red_skip = Action::Play(Card::colored(Color::Red, Kind::Skip));
        assert_eq!(action_to_id(red_skip).unwrap().index(), 10);
        let green_d2 = Action::Play(Card::colored(Color::Green, Kind::DrawTwo));
        assert_eq!(action_to_id(green_d2).unwrap().index(), 27);
        assert_eq!(action_to_id(Action::Draw).unwrap().index(), 60);
        let yellow_w4 = Action::Play(Card::colored(Color::Yellow, Kind::WildDrawFour));
        assert_eq!(action_to_id(yellow_w4).unwrap().index(), 59);
        let blue_wild = Action::Play(Card::colored(Color::Blue, Kind::Wild));
        assert_eq!(action_to_id(blue_wild).unwrap().index(), 43);
        let green_0 = Action::Play(Card::number(Color::Green, 0));
        assert_eq!(action_to_id(green_0).unwrap().index(), 15);
        let yellow_9 = Action::Play(Card::number(Color::Yellow, 9));
        assert_eq!(action_to_id(yellow_9).unwrap().index(), 54);
    }

    #[test]
    fn action_round_trip_all_ids() {
        for id in ActionId::all() {
            let action = id.action();
            assert_eq!(action_to_id(action).unwrap(), id);
            assert_eq!(id_to_action(id.index()).unwrap(), action);
            assert_eq!(action.to_string().parse::<Action>().unwrap(), action);
        }
    }

    #[test]
    fn out_of_range_and_undeclared_rejected() {
        assert!(id_to_action(61).is_err());
        assert!(ActionId::new(200).is_err());
        assert!(action_to_id(Action::Play(Card::wild(Kind::Wild))).is_err());
    }

    #[test]
    fn legal_mask_cases() {
        let m = legal_mask(ActionSet::single(ActionId::DRAW));
        assert_eq!(m.iter().map(|&b| b as usize).sum::<usize>(), 1);
        assert_eq!(m[60], 1);
        assert!(legal_mask(ActionSet::full()).iter().all(|&b| b == 1));
        assert!(legal_mask(ActionSet::EMPTY).iter().all(|&b| b == 0));
    }

    #[test]
    fn action_set_basics() {
        let mut s = ActionSet::EMPTY;
        s.insert(ActionId::DRAW);
        s.insert(ActionId::new(3).unwrap());
        s.insert(ActionId::new(3).unwrap());
        assert_eq!(s.len(), 2);
        assert_eq!(s.iter().map(|a| a.index()).collect::<Vec<_>>(), vec![3, 60]);
        s.remove(ActionId::DRAW);
        assert_eq!(s.first().unwrap().index(), 3);
        assert_eq!(ActionSet::full().len(), 61);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "[3]");
        assert_eq!(serde_json::from_str::<ActionSet>(&json).unwrap(), s);
    }

    #[test]
    fn red_eight_worked_example() {
        let target = Card::number(Color::Green, 1);
        // No red 8: plane 0 at (fourth row, ninth column).
        let enc = encode_hand_target(&[Card::number(Color::Blue, 2)], target);
        assert!(enc.get(0, 3, 8));
        assert!(!enc.get(1, 3, 8));
        assert!(!enc.get(2, 3, 8));
        // Two red 8s: plane 2 only.
        let hand = [Card::number(Color::Red, 8), Card::number(Color::Red, 8)];
        let enc = encode_hand_target(&hand, target);
        assert!(!enc.get(0, 3, 8));
        assert!(!enc.get(1, 3, 8));
        assert!(enc.get(2, 3, 8));
        assert!(enc.cell(2, Color::Red, Kind::Number(8)));
    }

    #[test]
    fn empty_hand_has_plane_zero_full() {
        let enc = encode_hand_target(&[], Card::number(Color::Red, 5));
        for i in 0..PLANE_SIZE {
            assert!(enc.bit(i));
            assert!(!enc.bit(PLANE_SIZE + i));
            assert!(!enc.bit(2 * PLANE_SIZE + i));
        }
        assert_eq!(enc.count_ones(), 61);
        assert!(enc.get(3, 3, 5));
    }

    #[test]
    fn declared_wild_target_and_held_wilds() {
        let hand = [
            Card::wild(Kind::Wild),
            Card::wild(Kind::Wild),
            Card::wild(Kind::Wild),
            Card::wild(Kind::WildDrawFour),
        ];
        let target = Card::colored(Color::Yellow, Kind::WildDrawFour);
        let enc = encode_hand_target(&hand, target);
        for row in 0..ROWS {
            assert!(enc.get(2, row, 13), "three wilds clamp to plane 2");
            assert!(enc.get(1, row, 14));
        }
        assert!(enc.get(3, 0, 14));
        assert_eq!(enc.count_ones(), 61);
    }

    #[test]
    fn bit_string_round_trip() {
        let enc = encode_hand_target(&[Card::number(Color::Red, 1)], Card::number(Color::Red, 2));
        let s = enc.to_bit_string();
        assert_eq!(s.len(), 240);
        assert_eq!(EncodedState::from_bit_string(&s).unwrap(), enc);
        assert!(EncodedState::from_bit_string("01").is_err());
        let to_input = enc.to_input();
        assert_eq!(to_input.iter().sum::<f64>(), 61.0);
    }
}
