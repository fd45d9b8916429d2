//! Ranks, card multisets, move categories and the comparison rules between
//! card groups.
//!
//! Dou Di Zhu ignores suits, so every card container is a count per rank.
//! The text notation used throughout (records, the service, the CLI) is
//! `3`..`9`, `T`, `J`, `Q`, `K`, `A`, `2`, `*` for the black joker and `$`
//! for the red joker, optionally comma separated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::Score;

/// The fifteen card ranks in increasing order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Rank {
    Three = 0,
    Four,
    Five,
    Six,
    Seven,
    Eight,
    Nine,
    Ten,
    Jack,
    Queen,
    King,
    Ace,
    Two,
    BlackJoker,
    RedJoker,
}

pub const NUM_RANKS: usize = 15;

/// Highest rank allowed inside a run.
pub const MAX_RUN_RANK: Rank = Rank::Ace;

impl Rank {
    pub const ALL: [Rank; NUM_RANKS] = [
        Rank::Three,
        Rank::Four,
        Rank::Five,
        Rank::Six,
        Rank::Seven,
        Rank::Eight,
        Rank::Nine,
        Rank::Ten,
        Rank::Jack,
        Rank::Queen,
        Rank::King,
        Rank::Ace,
        Rank::Two,
        Rank::BlackJoker,
        Rank::RedJoker,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Option<Rank> {
        Rank::ALL.get(i).copied()
    }

    /// Numeric value used by the category scores: 3..9 literal, T=10, J=11,
    /// Q=12, K=13, A=14, 2=15, black joker 16, red joker 17.
    #[inline]
    pub fn value(self) -> i32 {
        self as i32 + 3
    }

    pub fn symbol(self) -> char {
        b"3456789TJQKA2*$"[self.index()] as char
    }

    pub fn from_symbol(c: char) -> Option<Rank> {
        let idx = match c {
            '3'..='9' => c as usize - '3' as usize,
            'T' | 't' => 7,
            'J' | 'j' => 8,
            'Q' | 'q' => 9,
            'K' | 'k' => 10,
            'A' | 'a' => 11,
            '2' => 12,
            '*' => 13,
            '$' => 14,
            _ => return None,
        };
        Rank::from_index(idx)
    }

    pub fn is_joker(self) -> bool {
        matches!(self, Rank::BlackJoker | Rank::RedJoker)
    }

    /// Copies of this rank in a full deck.
    pub fn copies_in_deck(self) -> u8 {
        if self.is_joker() {
            1
        } else {
            4
        }
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CardError {
    #[error("unknown card symbol {0:?}")]
    UnknownSymbol(char),
    #[error("too many copies of rank {rank}: {count}")]
    CountOverflow { rank: Rank, count: u8 },
}

/// A multiset of cards: one count per rank.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CardMultiset {
    counts: [u8; NUM_RANKS],
}

impl CardMultiset {
    pub const fn empty() -> Self {
        CardMultiset { counts: [0; NUM_RANKS] }
    }

    /// The 54-card deck.
    pub fn full_deck() -> Self {
        let mut counts = [4; NUM_RANKS];
        counts[Rank::BlackJoker.index()] = 1;
        counts[Rank::RedJoker.index()] = 1;
        CardMultiset { counts }
    }

    pub fn from_counts(counts: [u8; NUM_RANKS]) -> Result<Self, CardError> {
        for rank in Rank::ALL {
            let count = counts[rank.index()];
            if count > rank.copies_in_deck() {
                return Err(CardError::CountOverflow { rank, count });
            }
        }
        Ok(CardMultiset { counts })
    }

    pub fn from_ranks<I: IntoIterator<Item = Rank>>(ranks: I) -> Result<Self, CardError> {
        let mut set = CardMultiset::empty();
        for rank in ranks {
            set.try_add(rank, 1)?;
        }
        Ok(set)
    }

    #[inline]
    pub fn counts(&self) -> &[u8; NUM_RANKS] {
        &self.counts
    }

    #[inline]
    pub fn count(&self, rank: Rank) -> u8 {
        self.counts[rank.index()]
    }

    pub fn len(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn try_add(&mut self, rank: Rank, n: u8) -> Result<(), CardError> {
        let count = self.counts[rank.index()] + n;
        if count > rank.copies_in_deck() {
            return Err(CardError::CountOverflow { rank, count });
        }
        self.counts[rank.index()] = count;
        Ok(())
    }

    /// Adds without the deck bound; used while building groups whose bounds
    /// are known by construction.
    #[inline]
    pub(crate) fn add_unchecked(&mut self, rank: Rank, n: u8) {
        self.counts[rank.index()] += n;
    }

    /// True if every card of `other` is also in `self`.
    #[inline]
    pub fn contains(&self, other: &CardMultiset) -> bool {
        self.counts.iter().zip(other.counts.iter()).all(|(a, b)| a >= b)
    }

    /// `self ∖ other`, or `None` if `other` is not a subset.
    #[inline]
    pub fn checked_sub(&self, other: &CardMultiset) -> Option<CardMultiset> {
        let mut counts = self.counts;
        for (c, o) in counts.iter_mut().zip(other.counts.iter()) {
            *c = c.checked_sub(*o)?;
        }
        Some(CardMultiset { counts })
    }

    /// Multiset union; `None` if a deck bound would be exceeded.
    pub fn checked_union(&self, other: &CardMultiset) -> Option<CardMultiset> {
        let mut counts = self.counts;
        for (c, o) in counts.iter_mut().zip(other.counts.iter()) {
            *c += *o;
        }
        CardMultiset::from_counts(counts).ok()
    }

    pub fn is_disjoint_by_rank(&self, other: &CardMultiset) -> bool {
        self.counts
            .iter()
            .zip(other.counts.iter())
            .all(|(a, b)| *a == 0 || *b == 0)
    }

    /// Lowest rank present.
    pub fn lowest(&self) -> Option<Rank> {
        self.counts.iter().position(|&c| c > 0).and_then(Rank::from_index)
    }

    /// Every card as a rank, ascending.
    pub fn iter(&self) -> impl Iterator<Item = Rank> + '_ {
        Rank::ALL
            .iter()
            .flat_map(move |&r| std::iter::repeat_n(r, self.count(r) as usize))
    }

    /// Packs the counts into 45 bits (3 per rank); injective on valid sets.
    #[inline]
    pub fn key(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &c)| acc | (c as u64) << (3 * i))
    }

    pub fn from_key(key: u64) -> CardMultiset {
        let mut counts = [0u8; NUM_RANKS];
        for (i, c) in counts.iter_mut().enumerate() {
            *c = ((key >> (3 * i)) & 0b111) as u8;
        }
        CardMultiset { counts }
    }

    /// Contiguous notation without separators, e.g. `QQQKKK89`.
    pub fn to_compact(&self) -> String {
        self.iter().map(Rank::symbol).collect()
    }
}

/// Parses a card string. Commas and whitespace are separators; the empty
/// string is the empty multiset.
pub fn parse_cards(text: &str) -> Result<CardMultiset, CardError> {
    let mut set = CardMultiset::empty();
    for c in text.chars() {
        if c == ',' || c.is_whitespace() {
            continue;
        }
        let rank = Rank::from_symbol(c).ok_or(CardError::UnknownSymbol(c))?;
        set.try_add(rank, 1)?;
    }
    Ok(set)
}

/// Comma separated record notation, e.g. `5,6,7,8,9,T,J`.
pub fn format_cards(cards: &CardMultiset) -> String {
    let mut out = String::with_capacity(cards.len() * 2);
    for (i, r) in cards.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push(r.symbol());
    }
    out
}

impl fmt::Display for CardMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_cards(self))
    }
}

impl fmt::Debug for CardMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.to_compact())
    }
}

impl FromStr for CardMultiset {
    type Err = CardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_cards(s)
    }
}

impl TryFrom<String> for CardMultiset {
    type Error = CardError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        parse_cards(&s)
    }
}

impl From<CardMultiset> for String {
    fn from(c: CardMultiset) -> String {
        format_cards(&c)
    }
}

/// Move categories, in the order of the category score table.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    None,
    Solo,
    Pair,
    Trio,
    SequentialSolos,
    SequentialPairs,
    SequentialTriosTakeNone,
    SequentialTriosTakeOne,
    SequentialTriosTakeTwo,
    SequentialTriosSeriesTakeOne,
    SequentialTriosSeriesTakeTwo,
    Bomb,
    FourTakeTwoSolos,
    FourTakeTwoPairs,
    Nuke,
}

impl Category {
    pub const ALL: [Category; 15] = [
        Category::None,
        Category::Solo,
        Category::Pair,
        Category::Trio,
        Category::SequentialSolos,
        Category::SequentialPairs,
        Category::SequentialTriosTakeNone,
        Category::SequentialTriosTakeOne,
        Category::SequentialTriosTakeTwo,
        Category::SequentialTriosSeriesTakeOne,
        Category::SequentialTriosSeriesTakeTwo,
        Category::Bomb,
        Category::FourTakeTwoSolos,
        Category::FourTakeTwoPairs,
        Category::Nuke,
    ];

    /// Copies of each principal rank.
    pub fn principal_copies(self) -> u8 {
        use Category::*;
        match self {
            None => 0,
            Solo | SequentialSolos | Nuke => 1,
            Pair | SequentialPairs => 2,
            Trio
            | SequentialTriosTakeNone
            | SequentialTriosTakeOne
            | SequentialTriosTakeTwo
            | SequentialTriosSeriesTakeOne
            | SequentialTriosSeriesTakeTwo => 3,
            Bomb | FourTakeTwoSolos | FourTakeTwoPairs => 4,
        }
    }

    /// Copies per kicker rank (0 when the category takes no kickers).
    pub fn kicker_copies(self) -> u8 {
        use Category::*;
        match self {
            SequentialTriosTakeOne | SequentialTriosSeriesTakeOne | FourTakeTwoSolos => 1,
            SequentialTriosTakeTwo | SequentialTriosSeriesTakeTwo | FourTakeTwoPairs => 2,
            _ => 0,
        }
    }

    /// Number of kicker ranks for a principal run of `run_length`.
    pub fn kicker_ranks(self, run_length: u8) -> u8 {
        use Category::*;
        match self {
            SequentialTriosTakeOne | SequentialTriosTakeTwo => 1,
            SequentialTriosSeriesTakeOne | SequentialTriosSeriesTakeTwo => run_length,
            FourTakeTwoSolos | FourTakeTwoPairs => 2,
            _ => 0,
        }
    }

    pub fn is_run(self) -> bool {
        use Category::*;
        matches!(
            self,
            SequentialSolos
                | SequentialPairs
                | SequentialTriosTakeNone
                | SequentialTriosSeriesTakeOne
                | SequentialTriosSeriesTakeTwo
        )
    }

    pub fn name(self) -> &'static str {
        use Category::*;
        match self {
            None => "None",
            Solo => "Solo",
            Pair => "Pair",
            Trio => "Trio",
            SequentialSolos => "SequentialSolos",
            SequentialPairs => "SequentialPairs",
            SequentialTriosTakeNone => "SequentialTriosTakeNone",
            SequentialTriosTakeOne => "SequentialTriosTakeOne",
            SequentialTriosTakeTwo => "SequentialTriosTakeTwo",
            SequentialTriosSeriesTakeOne => "SequentialTriosSeriesTakeOne",
            SequentialTriosSeriesTakeTwo => "SequentialTriosSeriesTakeTwo",
            Bomb => "Bomb",
            FourTakeTwoSolos => "FourTakeTwoSolos",
            FourTakeTwoPairs => "FourTakeTwoPairs",
            Nuke => "Nuke",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A classified playable combination.
///
/// `principal_rank` is the highest rank of the principal cards (the run top
/// for runs). The `None` group is the empty play: no cards, run length 0.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CardGroup {
    pub cards: CardMultiset,
    pub category: Category,
    pub principal_rank: Rank,
    pub run_length: u8,
    pub kickers: CardMultiset,
}

impl CardGroup {
    pub fn none() -> Self {
        CardGroup {
            cards: CardMultiset::empty(),
            category: Category::None,
            principal_rank: Rank::Three,
            run_length: 0,
            kickers: CardMultiset::empty(),
        }
    }

    /// Builds a group from its principal structure and kicker ranks. The
    /// caller guarantees the shape is legal.
    pub(crate) fn build(category: Category, top: Rank, run_length: u8, kicker_ranks: &[Rank]) -> Self {
        let mut cards = CardMultiset::empty();
        let copies = category.principal_copies();
        match category {
            Category::Nuke => {
                cards.add_unchecked(Rank::BlackJoker, 1);
                cards.add_unchecked(Rank::RedJoker, 1);
            }
            _ => {
                let top_idx = top.index();
                for i in (top_idx + 1 - run_length as usize)..=top_idx {
                    cards.add_unchecked(Rank::ALL[i], copies);
                }
            }
        }
        let mut kickers = CardMultiset::empty();
        let kc = category.kicker_copies();
        for &k in kicker_ranks {
            kickers.add_unchecked(k, kc);
            cards.add_unchecked(k, kc);
        }
        CardGroup {
            cards,
            category,
            principal_rank: top,
            run_length,
            kickers,
        }
    }

    /// Principal cards: `cards ∖ kickers`.
    pub fn principal_cards(&self) -> CardMultiset {
        self.cards
            .checked_sub(&self.kickers)
            .expect("kickers are a sub-multiset of cards")
    }

    /// Lowest principal rank.
    pub fn principal_low(&self) -> Rank {
        match self.category {
            Category::Nuke => Rank::BlackJoker,
            Category::None => Rank::Three,
            _ => Rank::ALL[self.principal_rank.index() + 1 - self.run_length as usize],
        }
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.category == Category::None
    }

    /// Category score used by the recursive partitioning baseline.
    pub fn score(&self) -> Score {
        category_score(self)
    }
}

impl fmt::Debug for CardGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({}; top {}, len {})",
            self.category,
            self.cards.to_compact(),
            self.principal_rank,
            self.run_length
        )
    }
}

impl fmt::Display for CardGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.category == Category::None {
            f.write_str("None")
        } else {
            f.write_str(&format_cards(&self.cards))
        }
    }
}

/// Classifies a multiset as a legal group.
///
/// Returns the `None` group for the empty multiset and `None` (absence) when
/// no category matches. Every legal group is an entry of the action catalog,
/// so classification is a catalog lookup.
pub fn classify(cards: &CardMultiset) -> Option<CardGroup> {
    if cards.is_empty() {
        return Some(CardGroup::none());
    }
    crate::movegen::ActionCatalog::global()
        .lookup_cards(cards)
        .map(|m| *m.group().expect("non-empty catalog entries carry a group"))
}

/// Category score `r(C)`.
pub fn category_score(group: &CardGroup) -> Score {
    use Category::*;
    let max = group.principal_rank.value();
    match group.category {
        None => Score::ZERO,
        Solo | Pair | Trio | SequentialTriosTakeOne | SequentialTriosTakeTwo => Score::whole(max - 10),
        SequentialSolos | SequentialPairs | SequentialTriosTakeNone => Score::whole(max - 10 + 1),
        SequentialTriosSeriesTakeOne | SequentialTriosSeriesTakeTwo => Score::halves(max - 3 + 1),
        Bomb => Score::whole(max - 3 + 7),
        FourTakeTwoSolos | FourTakeTwoPairs => Score::halves(max - 3),
        Nuke => Score::whole(20),
    }
}

/// True iff `candidate` may be played over `incumbent`.
///
/// Same category, run length and kicker shape with a strictly higher
/// principal rank; or a bomb over anything that is not a bomb or nuke; or a
/// nuke. Kicker ranks never matter.
pub fn beats(candidate: &CardGroup, incumbent: &CardGroup) -> bool {
    use Category::*;
    if candidate.category == None || incumbent.category == None {
        return false;
    }
    match (candidate.category, incumbent.category) {
        (Nuke, Nuke) => false,
        (Nuke, _) => true,
        (_, Nuke) => false,
        (Bomb, Bomb) => candidate.principal_rank > incumbent.principal_rank,
        (Bomb, _) => true,
        (a, b) => {
            a == b
                && candidate.run_length == incumbent.run_length
                && candidate.kickers.len() == incumbent.kickers.len()
                && candidate.principal_rank > incumbent.principal_rank
        }
    }
}
