//! Cards, colors and the canonical 108-card inventory.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseError;

/// Number of cards in a full deck.
pub const DECK_SIZE: usize = 108;

/// Card colors. The discriminant is the color's block index in the action
/// table (red actions occupy ids 0..15, green 15..30, and so on).
#[repr(u8)]
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    Red = 0,
    Green = 1,
    Blue = 2,
    Yellow = 3,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Red, Color::Green, Color::Blue, Color::Yellow];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Color> {
        Color::ALL.get(idx).copied()
    }

    fn letter(self) -> char {
        match self {
            Color::Red => 'r',
            Color::Green => 'g',
            Color::Blue => 'b',
            Color::Yellow => 'y',
        }
    }

    fn from_letter(c: &str) -> Option<Color> {
        match c {
            "r" => Some(Color::Red),
            "g" => Some(Color::Green),
            "b" => Some(Color::Blue),
            "y" => Some(Color::Yellow),
            _ => None,
        }
    }
}

/// What a card does, independent of color.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Number(u8),
    Skip,
    Reverse,
    DrawTwo,
    Wild,
    WildDrawFour,
}

impl Kind {
    /// All 15 kinds in column order: ranks 0-9, skip, reverse, draw 2, wild, wild draw 4.
    pub const ALL: [Kind; 15] = [
        Kind::Number(0),
        Kind::Number(1),
        Kind::Number(2),
        Kind::Number(3),
        Kind::Number(4),
        Kind::Number(5),
        Kind::Number(6),
        Kind::Number(7),
        Kind::Number(8),
        Kind::Number(9),
        Kind::Skip,
        Kind::Reverse,
        Kind::DrawTwo,
        Kind::Wild,
        Kind::WildDrawFour,
    ];

    /// Column index 0..15 shared by the action table and the state planes.
    pub fn index(self) -> usize {
        match self {
            Kind::Number(n) => n as usize,
            Kind::Skip => 10,
            Kind::Reverse => 11,
            Kind::DrawTwo => 12,
            Kind::Wild => 13,
            Kind::WildDrawFour => 14,
        }
    }

    pub fn from_index(idx: usize) -> Option<Kind> {
        Kind::ALL.get(idx).copied()
    }

    pub fn is_wild(self) -> bool {
        matches!(self, Kind::Wild | Kind::WildDrawFour)
    }

    fn token(self) -> &'static str {
        match self {
            Kind::Number(0) => "0",
            Kind::Number(1) => "1",
            Kind::Number(2) => "2",
            Kind::Number(3) => "3",
            Kind::Number(4) => "4",
            Kind::Number(5) => "5",
            Kind::Number(6) => "6",
            Kind::Number(7) => "7",
            Kind::Number(8) => "8",
            Kind::Number(_) => "9",
            Kind::Skip => "skip",
            Kind::Reverse => "reverse",
            Kind::DrawTwo => "draw_2",
            Kind::Wild => "wild",
            Kind::WildDrawFour => "wild_draw_4",
        }
    }
}

/// A physical card. Wilds sitting in a hand or pile have no color; a wild
/// that has been played (or is named by an action) carries the declared color.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Card {
    pub color: Option<Color>,
    pub kind: Kind,
}

impl Card {
    pub const fn colored(color: Color, kind: Kind) -> Card {
        Card {
            color: Some(color),
            kind,
        }
    }

    pub const fn wild(kind: Kind) -> Card {
        Card { color: None, kind }
    }

    pub fn number(color: Color, rank: u8) -> Card {
        assert!(rank <= 9, "rank {rank} out of range");
        Card::colored(color, Kind::Number(rank))
    }

    /// The card as it sits in a hand or pile: declared wild colors are dropped.
    pub fn undeclared(self) -> Card {
        if self.kind.is_wild() {
            Card::wild(self.kind)
        } else {
            self
        }
    }

    /// Whether the card obeys the color invariant for its zone.
    pub fn is_well_formed_in_hand(self) -> bool {
        match self.kind {
            Kind::Wild | Kind::WildDrawFour => self.color.is_none(),
            Kind::Number(n) => n <= 9 && self.color.is_some(),
            _ => self.color.is_some(),
        }
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.color {
            Some(c) => write!(f, "{}-{}", c.letter(), self.kind.token()),
            None => f.write_str(self.kind.token()),
        }
    }
}

impl FromStr for Card {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (color, token) = match s.split_once('-') {
            Some((c, t)) => (
                Some(Color::from_letter(c).ok_or_else(|| ParseError::Card(s.to_string()))?),
                t,
            ),
            None => (None, s),
        };
        let kind = Kind::ALL
            .iter()
            .copied()
            .find(|k| k.token() == token)
            .ok_or_else(|| ParseError::Card(s.to_string()))?;
        if color.is_none() && !kind.is_wild() {
            return Err(ParseError::Card(s.to_string()));
        }
        Ok(Card { color, kind })
    }
}

impl Serialize for Card {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Card {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The canonical ordered 108-card inventory: per color (red, green, blue,
/// yellow) one 0, two of each 1-9, two skips, two reverses, two draw 2s;
/// followed by four wilds and four wild draw 4s.
pub fn build_deck() -> Vec<Card> {
    let mut deck = Vec::with_capacity(DECK_SIZE);
    for color in Color::ALL {
        deck.push(Card::number(color, 0));
        for rank in 1..=9 {
            deck.push(Card::number(color, rank));
            deck.push(Card::number(color, rank));
        }
        for kind in [Kind::Skip, Kind::Reverse, Kind::DrawTwo] {
            deck.push(Card::colored(color, kind));
            deck.push(Card::colored(color, kind));
        }
    }
    deck.extend(std::iter::repeat_n(Card::wild(Kind::Wild), 4));
    deck.extend(std::iter::repeat_n(Card::wild(Kind::WildDrawFour), 4));
    deck
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_counts() {
        let deck = build_deck();
        assert_eq!(deck.len(), 108);
        assert_eq!(deck.iter().filter(|c| c.kind == Kind::WildDrawFour).count(), 4);
        assert_eq!(deck.iter().filter(|c| c.kind == Kind::Wild).count(), 4);
        for color in Color::ALL {
            assert_eq!(deck.iter().filter(|c| c.color == Some(color)).count(), 25);
            assert_eq!(deck.iter().filter(|c| **c == Card::number(color, 0)).count(), 1);
        }
        assert!(deck.iter().all(|c| c.is_well_formed_in_hand()));
    }

    #[test]
    fn card_text_round_trip() {
        for card in build_deck() {
            assert_eq!(card.to_string().parse::<Card>().unwrap(), card);
        }
        let declared = Card::colored(Color::Blue, Kind::WildDrawFour);
        assert_eq!(declared.to_string(), "b-wild_draw_4");
        assert_eq!("b-wild_draw_4".parse::<Card>().unwrap(), declared);
        assert_eq!(Card::number(Color::Yellow, 7).to_string(), "y-7");
    }

    #[test]
    fn rejects_malformed_cards() {
        for bad in ["", "x-5", "r-10", "5", "r-", "skip", "r-5-5"] {
            assert!(bad.parse::<Card>().is_err(), "{bad} parsed");
        }
    }

    #[test]
    fn undeclared_strips_wild_color() {
        let c = Card::colored(Color::Red, Kind::Wild);
        assert_eq!(c.undeclared(), Card::wild(Kind::Wild));
        let n = Card::number(Color::Red, 3);
        assert_eq!(n.undeclared(), n);
    }
}
