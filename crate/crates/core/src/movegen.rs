//! The global action space and legal-move generation.
//!
//! Groups are generated structurally from rank counts: a principal block
//! (single rank or run) plus kicker ranks chosen as combinations. Running the
//! generator on the full deck yields the action catalog; running it on a hand
//! yields every group the hand can play.
//!
//! Kicker conventions: kicker ranks are distinct and disjoint from the
//! principal ranks; pair kickers never use jokers; a kicker set that is
//! exactly the two jokers is rejected (that would be a nuke used as a
//! kicker). With these rules the catalog holds 13526 groups plus Pass.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cards::{beats, classify, format_cards, CardGroup, CardMultiset, Category, Rank, MAX_RUN_RANK};

/// No hand ever holds more than twenty cards.
pub const MAX_GROUP_CARDS: usize = 20;

/// A turn's action.
#[derive(Copy, Clone, PartialEq, Eq, Hash)]
pub enum Move {
    Pass,
    Play(CardGroup),
}

impl Move {
    pub fn group(&self) -> Option<&CardGroup> {
        match self {
            Move::Pass => None,
            Move::Play(g) => Some(g),
        }
    }

    pub fn cards(&self) -> CardMultiset {
        match self {
            Move::Pass => CardMultiset::empty(),
            Move::Play(g) => g.cards,
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Move::Pass)
    }

    /// Record notation: `None` for a pass, otherwise the comma separated cards.
    pub fn notation(&self) -> String {
        match self {
            Move::Pass => "None".to_string(),
            Move::Play(g) => format_cards(&g.cards),
        }
    }

    /// Parses record notation. `None` / `pass` (any case) and the empty
    /// string are a pass.
    pub fn parse(text: &str) -> Result<Move, MoveParseError> {
        let t = text.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("pass") {
            return Ok(Move::Pass);
        }
        let cards = crate::cards::parse_cards(t).map_err(MoveParseError::Cards)?;
        classify(&cards)
            .map(Move::Play)
            .ok_or_else(|| MoveParseError::NotAGroup(t.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MoveParseError {
    #[error(transparent)]
    Cards(crate::cards::CardError),
    #[error("{0:?} is not a legal card group")]
    NotAGroup(String),
}

impl fmt::Debug for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Pass => f.write_str("Pass"),
            Move::Play(g) => write!(f, "{g:?}"),
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.notation())
    }
}

impl Serialize for Move {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.notation())
    }
}

impl<'de> Deserialize<'de> for Move {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Move, D::Error> {
        let s = String::deserialize(d)?;
        Move::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Minimum run length per run category.
fn min_run(category: Category) -> u8 {
    match category {
        Category::SequentialSolos => 5,
        Category::SequentialPairs => 3,
        _ => 2,
    }
}

/// Visits `k`-combinations of `items` in lexicographic order.
fn for_each_combination<F: FnMut(&[Rank])>(items: &[Rank], k: usize, f: &mut F) {
    fn rec<F: FnMut(&[Rank])>(items: &[Rank], k: usize, start: usize, buf: &mut Vec<Rank>, f: &mut F) {
        if buf.len() == k {
            f(buf);
            return;
        }
        let need = k - buf.len();
        for i in start..items.len() {
            if items.len() - i < need {
                break;
            }
            buf.push(items[i]);
            rec(items, k, i + 1, buf, f);
            buf.pop();
        }
    }
    if k > items.len() {
        return;
    }
    let mut buf = Vec::with_capacity(k);
    rec(items, k, 0, &mut buf, f);
}

fn is_joker_pair(kickers: &[Rank]) -> bool {
    kickers.len() == 2 && kickers[0] == Rank::BlackJoker && kickers[1] == Rank::RedJoker
}

/// Visits every legal group of `category` that fits in `hand`, in catalog
/// order (run length, then principal rank, then kicker ranks).
pub fn for_each_group_of<F: FnMut(CardGroup)>(hand: &CardMultiset, category: Category, f: &mut F) {
    use Category::*;
    let counts = hand.counts();
    let has = |r: Rank, n: u8| counts[r.index()] >= n;
    match category {
        None => {}
        Nuke => {
            if has(Rank::BlackJoker, 1) && has(Rank::RedJoker, 1) {
                f(CardGroup::build(Nuke, Rank::RedJoker, 1, &[]));
            }
        }
        Solo | Pair | Trio | Bomb => {
            let copies = category.principal_copies();
            for r in Rank::ALL {
                if copies > r.copies_in_deck() || !has(r, copies) {
                    continue;
                }
                f(CardGroup::build(category, r, 1, &[]));
            }
        }
        SequentialSolos
        | SequentialPairs
        | SequentialTriosTakeNone
        | SequentialTriosSeriesTakeOne
        | SequentialTriosSeriesTakeTwo => {
            let copies = category.principal_copies();
            let kc = category.kicker_copies();
            let max_len = (MAX_RUN_RANK.index() + 1) as u8;
            for len in min_run(category)..=max_len {
                let size = len as usize * (copies + kc) as usize;
                if size > MAX_GROUP_CARDS {
                    break;
                }
                for top in (len as usize - 1)..=MAX_RUN_RANK.index() {
                    let low = top + 1 - len as usize;
                    if !(low..=top).all(|i| counts[i] >= copies) {
                        continue;
                    }
                    let top_rank = Rank::ALL[top];
                    if kc == 0 {
                        f(CardGroup::build(category, top_rank, len, &[]));
                        continue;
                    }
                    let candidates: Vec<Rank> = Rank::ALL
                        .iter()
                        .copied()
                        .filter(|r| !(low..=top).contains(&r.index()) && has(*r, kc) && (kc == 1 || !r.is_joker()))
                        .collect();
                    for_each_combination(&candidates, len as usize, &mut |ks: &[Rank]| {
                        if !is_joker_pair(ks) {
                            f(CardGroup::build(category, top_rank, len, ks));
                        }
                    });
                }
            }
        }
        SequentialTriosTakeOne | SequentialTriosTakeTwo | FourTakeTwoSolos | FourTakeTwoPairs => {
            let copies = category.principal_copies();
            let kc = category.kicker_copies();
            let nk = category.kicker_ranks(1) as usize;
            for r in Rank::ALL {
                if r.is_joker() || !has(r, copies) {
                    continue;
                }
                let candidates: Vec<Rank> = Rank::ALL
                    .iter()
                    .copied()
                    .filter(|k| *k != r && has(*k, kc) && (kc == 1 || !k.is_joker()))
                    .collect();
                for_each_combination(&candidates, nk, &mut |ks: &[Rank]| {
                    if !is_joker_pair(ks) {
                        f(CardGroup::build(category, r, 1, ks));
                    }
                });
            }
        }
    }
}

/// Visits every legal group contained in `hand`, in catalog order.
pub fn for_each_group<F: FnMut(CardGroup)>(hand: &CardMultiset, f: &mut F) {
    for category in &Category::ALL[1..] {
        for_each_group_of(hand, *category, f);
    }
}

/// Every legal group contained in `hand`, in catalog order.
pub fn groups_within(hand: &CardMultiset) -> Vec<CardGroup> {
    let mut out = Vec::new();
    for_each_group(hand, &mut |g| out.push(g));
    out
}

/// Legal moves for `hand`.
///
/// Leading (`incumbent` absent): every group in the hand; Pass is not
/// allowed. Responding: every group that beats the incumbent, then Pass.
pub fn legal_moves(hand: &CardMultiset, incumbent: Option<&CardGroup>) -> Vec<Move> {
    match incumbent {
        None => groups_within(hand).into_iter().map(Move::Play).collect(),
        Some(inc) => {
            let mut out = Vec::new();
            let mut push = |g: CardGroup| {
                if beats(&g, inc) {
                    out.push(Move::Play(g));
                }
            };
            match inc.category {
                Category::Bomb | Category::Nuke | Category::None => {}
                c => for_each_group_of(hand, c, &mut push),
            }
            for_each_group_of(hand, Category::Bomb, &mut push);
            for_each_group_of(hand, Category::Nuke, &mut push);
            out.push(Move::Pass);
            out
        }
    }
}

/// Dense, stable index over every distinct move of the game.
pub struct ActionCatalog {
    moves: Vec<Move>,
    index: HashMap<u64, usize>,
}

impl ActionCatalog {
    /// Builds the catalog: Pass at index 0, then every group in category
    /// order, run length, principal rank and lexicographic kicker ranks.
    pub fn build() -> ActionCatalog {
        let mut moves = vec![Move::Pass];
        for_each_group(&CardMultiset::full_deck(), &mut |g| moves.push(Move::Play(g)));
        let mut index = HashMap::with_capacity(moves.len());
        for (i, m) in moves.iter().enumerate() {
            let prev = index.insert(m.cards().key(), i);
            debug_assert!(prev.is_none(), "two catalog entries share a card multiset");
        }
        ActionCatalog { moves, index }
    }

    /// The process-wide catalog.
    pub fn global() -> &'static ActionCatalog {
        static CATALOG: OnceLock<ActionCatalog> = OnceLock::new();
        CATALOG.get_or_init(ActionCatalog::build)
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn get(&self, index: usize) -> Option<&Move> {
        self.moves.get(index)
    }

    pub fn index_of(&self, m: &Move) -> Option<usize> {
        self.index.get(&m.cards().key()).copied()
    }

    pub fn index_of_cards(&self, cards: &CardMultiset) -> Option<usize> {
        self.index.get(&cards.key()).copied()
    }

    pub fn lookup_cards(&self, cards: &CardMultiset) -> Option<&Move> {
        self.index_of_cards(cards).map(|i| &self.moves[i])
    }

    /// Entry counts per category (Pass is counted under `None`).
    pub fn category_counts(&self) -> Vec<(Category, usize)> {
        Category::ALL
            .iter()
            .map(|&c| {
                let n = self
                    .moves
                    .iter()
                    .filter(|m| match m {
                        Move::Pass => c == Category::None,
                        Move::Play(g) => g.category == c,
                    })
                    .count();
                (c, n)
            })
            .collect()
    }
}

/// Builds a fresh catalog.
pub fn enumerate_all_moves() -> ActionCatalog {
    ActionCatalog::build()
}
