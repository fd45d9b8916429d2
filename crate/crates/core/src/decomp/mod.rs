//! Partitions of a hand into legal card groups.
//!
//! A decomposition covers the hand exactly: the groups' cards add up to the
//! hand and every group is a legal, non-empty play. Two enumerators exist.
//! The depth-first one is complete. The exact-cover one encodes each group
//! as the lowest card instances of its ranks, which keeps the matrix small
//! and the search fast but only finds decompositions in which no rank is
//! split across groups. It is used for hands above ten cards.

pub mod dlx;

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cards::{classify, CardGroup, CardMultiset, Category, Rank, NUM_RANKS};
use crate::movegen::{for_each_group, ActionCatalog};

use dlx::ExactCover;

/// Hands strictly larger than this use the exact-cover enumerator.
pub const DFS_MAX_CARDS: usize = 10;

/// Default cap on sampled decompositions.
pub const DEFAULT_SAMPLE_LIMIT: usize = 100;

/// A hand split into legal groups, kept in catalog order.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decomposition {
    ids: Vec<u16>,
}

fn catalog_id(g: &CardGroup) -> u16 {
    ActionCatalog::global()
        .index_of_cards(&g.cards)
        .expect("legal groups are catalog entries") as u16
}

impl Decomposition {
    pub fn from_groups<I: IntoIterator<Item = CardGroup>>(groups: I) -> Self {
        let mut ids: Vec<u16> = groups.into_iter().map(|g| catalog_id(&g)).collect();
        ids.sort_unstable();
        Decomposition { ids }
    }

    fn from_ids(mut ids: Vec<u16>) -> Self {
        ids.sort_unstable();
        Decomposition { ids }
    }

    /// Catalog indices of the groups, ascending.
    pub fn ids(&self) -> &[u16] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn groups(&self) -> impl Iterator<Item = CardGroup> + '_ {
        let cat = ActionCatalog::global();
        self.ids
            .iter()
            .map(move |&i| *cat.get(i as usize).and_then(|m| m.group()).expect("catalog group"))
    }

    /// Multiset union of the groups' cards, or `None` on a deck overflow.
    pub fn union(&self) -> Option<CardMultiset> {
        let mut counts = [0u8; NUM_RANKS];
        for g in self.groups() {
            for (c, n) in counts.iter_mut().zip(g.cards.counts()) {
                *c = c.checked_add(*n)?;
            }
        }
        CardMultiset::from_counts(counts).ok()
    }

    /// Cover, disjointness and legality against `hand`.
    pub fn is_valid_for(&self, hand: &CardMultiset) -> bool {
        if self.ids.is_empty() {
            return hand.is_empty();
        }
        let legal = self
            .groups()
            .all(|g| g.category != Category::None && classify(&g.cards).as_ref() == Some(&g));
        // Multiset sum equal to the hand means every card instance is used
        // exactly once: covering and pairwise disjoint.
        legal && self.union().as_ref() == Some(hand)
    }
}

impl PartialOrd for Decomposition {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decomposition {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ids.cmp(&other.ids)
    }
}

impl fmt::Debug for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.groups().map(|g| g.cards.to_compact()).collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}

impl fmt::Display for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.groups().map(|g| g.to_string()).collect();
        write!(f, "{}", parts.join(" | "))
    }
}

/// A bounded, seeded subsample of a hand's decompositions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionSample {
    pub decompositions: Vec<Decomposition>,
    /// True when the full set was larger than the limit.
    pub truncated: bool,
}

/// Every decomposition of `hand`, by depth-first search.
///
/// Each step places a group containing the lowest remaining rank. Groups
/// that share that lowest rank are placed in non-increasing catalog order,
/// so every partition is produced exactly once.
pub fn enumerate_dfs(hand: &CardMultiset) -> BTreeSet<Decomposition> {
    let mut out = BTreeSet::new();
    let mut stack = Vec::new();
    dfs(hand, None, &mut stack, &mut out);
    out
}

fn dfs(rest: &CardMultiset, bound: Option<(Rank, u16)>, stack: &mut Vec<u16>, out: &mut BTreeSet<Decomposition>) {
    let Some(low) = rest.lowest() else {
        if !stack.is_empty() {
            out.insert(Decomposition::from_ids(stack.clone()));
        }
        return;
    };
    let limit = match bound {
        Some((r, id)) if r == low => id,
        _ => u16::MAX,
    };
    let mut candidates = Vec::new();
    for_each_group(rest, &mut |g| {
        if g.cards.count(low) > 0 {
            candidates.push(g);
        }
    });
    for g in candidates {
        let id = catalog_id(&g);
        if id > limit {
            continue;
        }
        let next = rest.checked_sub(&g.cards).expect("group within hand");
        stack.push(id);
        dfs(&next, Some((low, id)), stack, out);
        stack.pop();
    }
}

/// Column layout: card instances sorted by rank, then copy index.
fn instance_offsets(hand: &CardMultiset) -> [usize; NUM_RANKS + 1] {
    let mut offsets = [0usize; NUM_RANKS + 1];
    for (i, &c) in hand.counts().iter().enumerate() {
        offsets[i + 1] = offsets[i] + c as usize;
    }
    offsets
}

/// Builds the exact-cover matrix for `hand`: one column per card instance,
/// one row per legal group, mapped to the lowest instances of its ranks.
pub fn exact_cover_matrix(hand: &CardMultiset) -> (ExactCover, Vec<u16>) {
    let offsets = instance_offsets(hand);
    let mut matrix = ExactCover::new(offsets[NUM_RANKS]);
    let mut row_ids = Vec::new();
    let mut cols = Vec::with_capacity(20);
    for_each_group(hand, &mut |g| {
        cols.clear();
        for (i, &c) in g.cards.counts().iter().enumerate() {
            cols.extend(offsets[i]..offsets[i] + c as usize);
        }
        matrix.add_row(&cols);
        row_ids.push(catalog_id(&g));
    });
    (matrix, row_ids)
}

/// Decompositions found by exact-cover search over the ordered instance
/// encoding. Always a subset of [`enumerate_dfs`].
pub fn enumerate_dlx(hand: &CardMultiset) -> BTreeSet<Decomposition> {
    let mut out = BTreeSet::new();
    if hand.is_empty() {
        return out;
    }
    let (mut matrix, row_ids) = exact_cover_matrix(hand);
    matrix.for_each_solution(|rows| {
        out.insert(Decomposition::from_ids(rows.iter().map(|&r| row_ids[r]).collect()));
        true
    });
    out
}

/// Full decomposition set for `hand` using the size-based enumerator choice.
pub fn enumerate(hand: &CardMultiset) -> BTreeSet<Decomposition> {
    if hand.len() > DFS_MAX_CARDS {
        enumerate_dlx(hand)
    } else {
        enumerate_dfs(hand)
    }
}

/// Samples at most `limit` decompositions of `hand` uniformly without
/// replacement. The result keeps canonical order.
pub fn decompositions<R: Rng + ?Sized>(hand: &CardMultiset, limit: usize, rng: &mut R) -> DecompositionSample {
    assert!(limit >= 1, "sampling limit must be positive");
    let all: Vec<Decomposition> = enumerate(hand).into_iter().collect();
    if all.len() <= limit {
        return DecompositionSample {
            decompositions: all,
            truncated: false,
        };
    }
    let mut picked = sample(rng, all.len(), limit).into_vec();
    picked.sort_unstable();
    DecompositionSample {
        decompositions: picked.into_iter().map(|i| all[i].clone()).collect(),
        truncated: true,
    }
}
