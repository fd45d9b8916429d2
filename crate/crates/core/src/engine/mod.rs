//! The referee: dealing, turn order, rounds and passes, termination, rewards
//! and per-seat observations.
//!
//! There is no bidding. The landlord seat receives 20 cards and leads the
//! first round; seats then act Landlord → Peasant Down → Peasant Up. After
//! two consecutive passes the player whose group went unanswered leads a new
//! round with any group.

mod record;

pub use record::{export_record, import_record, GameRecord, RecordEntry, RecordError};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cards::{beats, classify, CardGroup, CardMultiset, Rank};
use crate::movegen::{legal_moves, Move};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Seat {
    Landlord,
    PeasantDown,
    PeasantUp,
}

impl Seat {
    /// Turn order.
    pub const ALL: [Seat; 3] = [Seat::Landlord, Seat::PeasantDown, Seat::PeasantUp];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The seat that acts after this one.
    pub fn next(self) -> Seat {
        Seat::ALL[(self.index() + 1) % 3]
    }

    /// The seat that acted before this one.
    pub fn prev(self) -> Seat {
        Seat::ALL[(self.index() + 2) % 3]
    }

    pub fn is_peasant(self) -> bool {
        self != Seat::Landlord
    }

    pub fn same_team(self, other: Seat) -> bool {
        self.is_peasant() == other.is_peasant()
    }

    /// Record label: `Landlord`, `Peasant Down`, `Peasant Up`.
    pub fn label(self) -> &'static str {
        match self {
            Seat::Landlord => "Landlord",
            Seat::PeasantDown => "Peasant Down",
            Seat::PeasantUp => "Peasant Up",
        }
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown seat {0:?}")]
pub struct SeatParseError(pub String);

impl FromStr for Seat {
    type Err = SeatParseError;

    /// Accepts the record labels, the enum names, and labels followed by a
    /// `: player name` suffix as in the published record tables.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let head = s.split(':').next().unwrap_or("").trim();
        let norm: String = head
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .collect();
        match norm.to_ascii_lowercase().as_str() {
            "landlord" => Ok(Seat::Landlord),
            "peasantdown" => Ok(Seat::PeasantDown),
            "peasantup" => Ok(Seat::PeasantUp),
            _ => Err(SeatParseError(s.to_string())),
        }
    }
}

/// Why a move was rejected.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IllegalReason {
    /// Not a legal group, or not in the player's hand.
    BadCards,
    /// Does not beat the incumbent group.
    CannotBeat,
    /// A pass while leading a round.
    MustLead,
}

impl fmt::Display for IllegalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IllegalReason::BadCards => "bad-cards",
            IllegalReason::CannotBeat => "cannot-beat",
            IllegalReason::MustLead => "must-lead",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("illegal move {mv} by {seat}: {reason}")]
    IllegalMove {
        seat: Seat,
        mv: String,
        reason: IllegalReason,
    },
    #[error("the game is already over")]
    GameOver,
    #[error("the game has not ended")]
    NotTerminal,
    #[error("hands do not form a valid deal: {0}")]
    BadDeal(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Turn {
    pub seat: Seat,
    pub mv: Move,
}

/// Full referee state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    hands: [CardMultiset; 3],
    history: Vec<Turn>,
    incumbent: Option<(Seat, CardGroup)>,
    pass_streak: u8,
    to_act: Seat,
    winner: Option<Seat>,
}

/// Cards the landlord holds after the deal.
pub const LANDLORD_CARDS: usize = 20;
/// Cards each peasant holds after the deal.
pub const PEASANT_CARDS: usize = 17;

impl GameState {
    /// A fresh game from given hands (indexed by seat). The hands must
    /// partition the deck with 20 cards for the landlord.
    pub fn from_hands(hands: [CardMultiset; 3]) -> Result<GameState, EngineError> {
        let union = hands[0]
            .checked_union(&hands[1])
            .and_then(|u| u.checked_union(&hands[2]))
            .ok_or_else(|| EngineError::BadDeal("a rank appears too often".into()))?;
        if union != CardMultiset::full_deck() {
            return Err(EngineError::BadDeal("hands do not cover the deck".into()));
        }
        let sizes = hands.map(|h| h.len());
        if sizes != [LANDLORD_CARDS, PEASANT_CARDS, PEASANT_CARDS] {
            return Err(EngineError::BadDeal(format!("hand sizes {sizes:?}")));
        }
        Ok(GameState {
            hands,
            history: Vec::new(),
            incumbent: None,
            pass_streak: 0,
            to_act: Seat::Landlord,
            winner: None,
        })
    }

    /// A position with arbitrary disjoint hands, the landlord to lead. For
    /// endgames and tests; the hands need not cover the deck.
    pub fn from_position(hands: [CardMultiset; 3]) -> Result<GameState, EngineError> {
        hands[0]
            .checked_union(&hands[1])
            .and_then(|u| u.checked_union(&hands[2]))
            .ok_or_else(|| EngineError::BadDeal("a rank appears too often".into()))?;
        if hands.iter().any(|h| h.is_empty()) {
            return Err(EngineError::BadDeal("every seat needs a card".into()));
        }
        Ok(GameState {
            hands,
            history: Vec::new(),
            incumbent: None,
            pass_streak: 0,
            to_act: Seat::Landlord,
            winner: None,
        })
    }

    pub fn hand(&self, seat: Seat) -> &CardMultiset {
        &self.hands[seat.index()]
    }

    pub fn hands(&self) -> &[CardMultiset; 3] {
        &self.hands
    }

    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    pub fn incumbent(&self) -> Option<&(Seat, CardGroup)> {
        self.incumbent.as_ref()
    }

    pub fn incumbent_group(&self) -> Option<&CardGroup> {
        self.incumbent.as_ref().map(|(_, g)| g)
    }

    pub fn pass_streak(&self) -> u8 {
        self.pass_streak
    }

    pub fn to_act(&self) -> Seat {
        self.to_act
    }

    pub fn winner(&self) -> Option<Seat> {
        self.winner
    }

    pub fn is_terminal(&self) -> bool {
        self.winner.is_some()
    }

    /// Hands as dealt, recovered from the current hands and the history.
    pub fn initial_hands(&self) -> [CardMultiset; 3] {
        let mut hands = self.hands;
        for t in &self.history {
            let h = &mut hands[t.seat.index()];
            *h = h
                .checked_union(&t.mv.cards())
                .expect("history cards came from this hand");
        }
        hands
    }

    /// Cards played so far.
    pub fn played(&self) -> CardMultiset {
        self.history.iter().fold(CardMultiset::empty(), |acc, t| {
            acc.checked_union(&t.mv.cards()).expect("played cards fit in a deck")
        })
    }

    /// Legal moves for the seat to act (empty once the game is over).
    pub fn legal_moves(&self) -> Vec<Move> {
        if self.is_terminal() {
            return Vec::new();
        }
        legal_moves(self.hand(self.to_act), self.incumbent_group())
    }

    /// Checks `mv` for the seat to act and returns the canonical move (the
    /// group re-derived from its cards).
    pub fn validate(&self, mv: &Move) -> Result<Move, EngineError> {
        if self.is_terminal() {
            return Err(EngineError::GameOver);
        }
        let seat = self.to_act;
        let illegal = |reason| EngineError::IllegalMove {
            seat,
            mv: mv.notation(),
            reason,
        };
        match mv {
            Move::Pass => {
                if self.incumbent.is_none() {
                    Err(illegal(IllegalReason::MustLead))
                } else {
                    Ok(Move::Pass)
                }
            }
            Move::Play(g) => {
                let canonical = classify(&g.cards)
                    .filter(|c| !c.is_empty())
                    .ok_or_else(|| illegal(IllegalReason::BadCards))?;
                if !self.hand(seat).contains(&canonical.cards) {
                    return Err(illegal(IllegalReason::BadCards));
                }
                if let Some((_, inc)) = &self.incumbent {
                    if !beats(&canonical, inc) {
                        return Err(illegal(IllegalReason::CannotBeat));
                    }
                }
                Ok(Move::Play(canonical))
            }
        }
    }

    /// Applies a move for the seat to act, returning the successor state.
    pub fn apply_move(&self, mv: &Move) -> Result<GameState, EngineError> {
        let mv = self.validate(mv)?;
        let mut next = self.clone();
        let seat = self.to_act;
        next.history.push(Turn { seat, mv });
        match mv {
            Move::Pass => {
                next.pass_streak += 1;
                if next.pass_streak == 2 {
                    let (leader, _) = next.incumbent.take().expect("passes follow a play");
                    next.pass_streak = 0;
                    next.to_act = leader;
                } else {
                    next.to_act = seat.next();
                }
            }
            Move::Play(g) => {
                let hand = &mut next.hands[seat.index()];
                *hand = hand.checked_sub(&g.cards).expect("validated");
                next.pass_streak = 0;
                next.incumbent = Some((seat, g));
                if hand.is_empty() {
                    next.winner = Some(seat);
                } else {
                    next.to_act = seat.next();
                }
            }
        }
        Ok(next)
    }

    /// Terminal rewards indexed by seat: +1 for the winning side, -1 for the
    /// losing side; the peasants share one outcome.
    pub fn rewards(&self) -> Result<[i32; 3], EngineError> {
        let winner = self.winner.ok_or(EngineError::NotTerminal)?;
        Ok(Seat::ALL.map(|s| if s.same_team(winner) { 1 } else { -1 }))
    }

    /// The view available to `seat`.
    pub fn observe(&self, seat: Seat) -> Observation {
        let last_by = |s: Seat| self.history.iter().rev().find(|t| t.seat == s).map(|t| t.mv);
        Observation {
            seat,
            own_hand: self.hands[seat.index()],
            hand_sizes: self.hands.map(|h| h.len()),
            incumbent: self.incumbent,
            last_two_moves: [last_by(seat.prev()), last_by(seat.next())],
            full_history: self.history.clone(),
            to_act: self.to_act,
        }
    }
}

/// Deals a game: 20 cards to the landlord, 17 to each peasant.
pub fn deal<R: Rng + ?Sized>(rng: &mut R) -> GameState {
    let mut deck: Vec<Rank> = CardMultiset::full_deck().iter().collect();
    deck.shuffle(rng);
    let take = |cards: &[Rank]| CardMultiset::from_ranks(cards.iter().copied()).expect("deck split");
    let hands = [
        take(&deck[..LANDLORD_CARDS]),
        take(&deck[LANDLORD_CARDS..LANDLORD_CARDS + PEASANT_CARDS]),
        take(&deck[LANDLORD_CARDS + PEASANT_CARDS..]),
    ];
    GameState::from_hands(hands).expect("a shuffled deck is a valid deal")
}

/// One seat's imperfect-information view.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub seat: Seat,
    pub own_hand: CardMultiset,
    /// Card counts indexed by seat.
    pub hand_sizes: [usize; 3],
    pub incumbent: Option<(Seat, CardGroup)>,
    /// Most recent moves of the previous and the next seat, in that order.
    pub last_two_moves: [Option<Move>; 2],
    pub full_history: Vec<Turn>,
    pub to_act: Seat,
}

impl Observation {
    pub fn incumbent_group(&self) -> Option<&CardGroup> {
        self.incumbent.as_ref().map(|(_, g)| g)
    }

    pub fn is_leading(&self) -> bool {
        self.incumbent.is_none()
    }

    pub fn legal_moves(&self) -> Vec<Move> {
        legal_moves(&self.own_hand, self.incumbent_group())
    }

    /// Cards played by everyone so far.
    pub fn played(&self) -> CardMultiset {
        self.full_history.iter().fold(CardMultiset::empty(), |acc, t| {
            acc.checked_union(&t.mv.cards()).expect("played cards fit in a deck")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cards::parse_cards;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn play(s: &str) -> Move {
        Move::parse(s).unwrap()
    }

    #[test]
    fn deal_sizes_and_determinism() {
        let g = deal(&mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(g.hand(Seat::Landlord).len(), 20);
        assert_eq!(g.hand(Seat::PeasantDown).len(), 17);
        assert_eq!(g.hand(Seat::PeasantUp).len(), 17);
        assert_eq!(g.to_act(), Seat::Landlord);
        assert!(g.incumbent().is_none());
        assert_eq!(deal(&mut ChaCha8Rng::seed_from_u64(3)), g);
        assert_ne!(deal(&mut ChaCha8Rng::seed_from_u64(4)), g);
    }

    #[test]
    fn seat_order() {
        assert_eq!(Seat::Landlord.next(), Seat::PeasantDown);
        assert_eq!(Seat::PeasantDown.next(), Seat::PeasantUp);
        assert_eq!(Seat::PeasantUp.next(), Seat::Landlord);
        assert_eq!(Seat::Landlord.prev(), Seat::PeasantUp);
        assert_eq!("Landlord: Human Player 1".parse::<Seat>().unwrap(), Seat::Landlord);
        assert_eq!("Peasant Down: CQL".parse::<Seat>().unwrap(), Seat::PeasantDown);
        assert_eq!("PeasantUp".parse::<Seat>().unwrap(), Seat::PeasantUp);
        assert!("Dealer".parse::<Seat>().is_err());
    }

    fn fixed_game() -> GameState {
        let hands = [
            parse_cards("3,4,4,4,4,5,6,6,7,8,9,T,J,Q,Q,A,A,A,2,2").unwrap(),
            parse_cards("3,3,5,5,6,7,8,8,9,9,T,J,J,J,Q,K,K").unwrap(),
            parse_cards("3,5,6,7,7,8,9,T,T,Q,K,K,A,2,2,*,$").unwrap(),
        ];
        GameState::from_hands(hands).unwrap()
    }

    #[test]
    fn two_passes_return_the_lead() {
        let g = fixed_game();
        let g = g.apply_move(&play("5,6,7,8,9,T,J")).unwrap();
        assert_eq!(g.to_act(), Seat::PeasantDown);
        let g = g.apply_move(&Move::Pass).unwrap();
        assert_eq!(g.pass_streak(), 1);
        let g = g.apply_move(&Move::Pass).unwrap();
        assert_eq!(g.to_act(), Seat::Landlord);
        assert!(g.incumbent().is_none());
        assert_eq!(g.pass_streak(), 0);
        // Fresh lead: any category.
        assert!(g.legal_moves().iter().all(|m| !m.is_pass()));
        assert!(g.apply_move(&Move::Pass).is_err());
    }

    #[test]
    fn illegal_moves() {
        let g = fixed_game();
        let err = g.apply_move(&play("K,K")).unwrap_err();
        assert!(matches!(
            err,
            EngineError::IllegalMove {
                reason: IllegalReason::BadCards,
                ..
            }
        ));
        let g = g.apply_move(&play("3")).unwrap();
        let err = g.apply_move(&play("3")).unwrap_err();
        assert!(matches!(
            err,
            EngineError::IllegalMove {
                reason: IllegalReason::CannotBeat,
                ..
            }
        ));
        let err = g.apply_move(&play("8,8")).unwrap_err();
        assert!(matches!(
            err,
            EngineError::IllegalMove {
                reason: IllegalReason::CannotBeat,
                ..
            }
        ));
    }

    #[test]
    fn rewards_and_termination() {
        let g = fixed_game();
        assert_eq!(g.rewards(), Err(EngineError::NotTerminal));
        let mut g = g;
        let script = [
            "5,6,7,8,9,T,J",
            "None",
            "None",
            "3,4,4,4,4,6",
            "None",
            "None",
            "Q,Q,A,A,A",
            "None",
            "*,$",
            "None",
            "None",
            "5,6,7,8,9",
            "None",
            "6,7,8,9,T",
            "None",
            "None",
            "5,5",
            "2,2",
            "None",
            "None",
            "T,T",
            "2,2",
        ];
        for s in script {
            g = g.apply_move(&play(s)).unwrap();
        }
        assert_eq!(g.winner(), Some(Seat::Landlord));
        assert_eq!(g.rewards().unwrap(), [1, -1, -1]);
        assert_eq!(g.apply_move(&Move::Pass), Err(EngineError::GameOver));
    }

    #[test]
    fn peasant_team_reward() {
        let mut g = fixed_game();
        g.winner = Some(Seat::PeasantUp);
        assert_eq!(g.rewards().unwrap(), [-1, 1, 1]);
    }

    #[test]
    fn observation_projection() {
        let g = deal(&mut ChaCha8Rng::seed_from_u64(9));
        let o = g.observe(Seat::Landlord);
        assert_eq!(o.own_hand.len(), 20);
        assert_eq!(o.hand_sizes, [20, 17, 17]);
        assert!(o.full_history.is_empty());
        assert_eq!(o.last_two_moves, [None, None]);

        let m = g.legal_moves()[0];
        let g1 = g.apply_move(&m).unwrap();
        let down = g1.observe(Seat::PeasantDown);
        // Previous seat of Peasant Down is the Landlord.
        assert_eq!(down.last_two_moves, [Some(m), None]);
        let up = g1.observe(Seat::PeasantUp);
        assert_eq!(up.last_two_moves, [None, Some(m)]);
    }
}
