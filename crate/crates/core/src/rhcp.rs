//! Recursive hand-cards partitioning (RHCP) baseline.
//!
//! The strategy score of playing `C` from hand `H` is
//!
//! ```text
//! Q(C, H) = r(C) + max over legal C' ⊆ H∖C of Q(C', H∖C),   0 when H∖C = ∅
//! ```
//!
//! Unrolled, the recursive term is the best total category score over all
//! partitions of `H∖C`. That total is computed by a memoized search that
//! always places a group containing the lowest remaining rank, since every
//! partition has exactly one group holding each card.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cards::{CardGroup, CardMultiset, Category};
use crate::engine::Observation;
use crate::movegen::{for_each_group, legal_moves, ActionCatalog, Move};
use crate::score::Score;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhcpConfig {
    /// Subtracted from the hand's best score when scoring a pass.
    pub pass_penalty: Score,
}

impl Default for RhcpConfig {
    fn default() -> Self {
        RhcpConfig {
            pass_penalty: Score::whole(3),
        }
    }
}

/// Memo of best partition totals and best groups, keyed by canonical hand.
#[derive(Default, Clone, Debug)]
pub struct StrategyScoreCache {
    totals: HashMap<u64, Score>,
    best: HashMap<u64, (Score, u16)>,
}

impl StrategyScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn clear(&mut self) {
        self.totals.clear();
        self.best.clear();
    }

    /// Best total category score over all partitions of `hand`; 0 for the
    /// empty hand.
    pub fn best_total(&mut self, hand: &CardMultiset) -> Score {
        let Some(low) = hand.lowest() else {
            return Score::ZERO;
        };
        let key = hand.key();
        if let Some(&s) = self.totals.get(&key) {
            return s;
        }
        let mut candidates = Vec::new();
        for_each_group(hand, &mut |g| {
            if g.cards.count(low) > 0 {
                candidates.push(g);
            }
        });
        let mut best: Option<Score> = None;
        for g in candidates {
            let rest = hand.checked_sub(&g.cards).expect("group within hand");
            let s = g.score() + self.best_total(&rest);
            if best.is_none_or(|b| s > b) {
                best = Some(s);
            }
        }
        let best = best.expect("every non-empty hand has a solo");
        self.totals.insert(key, best);
        best
    }

    /// `Q(C, H)`.
    pub fn strategy_score(&mut self, group: &CardGroup, hand: &CardMultiset) -> Score {
        let rest = hand
            .checked_sub(&group.cards)
            .expect("group must be contained in the hand");
        group.score() + self.best_total(&rest)
    }

    /// `C★ = argmax_C Q(C, H)` with its score. Ties prefer larger groups,
    /// then a higher principal rank, then the earlier catalog entry.
    pub fn best_group(&mut self, hand: &CardMultiset) -> (CardGroup, Score) {
        assert!(!hand.is_empty(), "best_group needs a non-empty hand");
        let cat = ActionCatalog::global();
        if let Some(&(s, id)) = self.best.get(&hand.key()) {
            return (*cat.get(id as usize).and_then(Move::group).expect("catalog group"), s);
        }
        let mut groups = Vec::new();
        for_each_group(hand, &mut |g| groups.push(g));
        let mut best: Option<(CardGroup, Score)> = None;
        for g in groups {
            let s = self.strategy_score(&g, hand);
            let better = match &best {
                None => true,
                Some((bg, bs)) => (s, g.len(), g.principal_rank) > (*bs, bg.len(), bg.principal_rank),
            };
            if better {
                best = Some((g, s));
            }
        }
        let (g, s) = best.expect("non-empty hand");
        let id = cat.index_of_cards(&g.cards).expect("catalog group") as u16;
        self.best.insert(hand.key(), (s, id));
        (g, s)
    }
}

/// `Q(C, H)` computed literally from the recursion, without memoization.
/// Exponential; intended for small hands and cross-checks.
pub fn strategy_score_unmemoized(group: &CardGroup, hand: &CardMultiset) -> Score {
    let rest = hand
        .checked_sub(&group.cards)
        .expect("group must be contained in the hand");
    if rest.is_empty() {
        return group.score();
    }
    let mut best: Option<Score> = None;
    for_each_group(&rest, &mut |g| {
        let s = strategy_score_unmemoized(&g, &rest);
        if best.is_none_or(|b| s > b) {
            best = Some(s);
        }
    });
    group.score() + best.expect("non-empty remainder has a solo")
}

/// The RHCP player. Holds a per-instance score cache.
#[derive(Clone, Debug, Default)]
pub struct RhcpAgent {
    pub config: RhcpConfig,
    cache: StrategyScoreCache,
}

/// Bound on cached hands before the cache is reset.
const CACHE_LIMIT: usize = 2_000_000;

impl RhcpAgent {
    pub fn new(config: RhcpConfig) -> Self {
        RhcpAgent {
            config,
            cache: StrategyScoreCache::new(),
        }
    }

    pub fn cache(&mut self) -> &mut StrategyScoreCache {
        &mut self.cache
    }

    /// Chooses a move for `hand` facing `incumbent` (absent when leading).
    ///
    /// Leading plays the best group. Responding scores each beating move by
    /// `Q(C, H)` and a pass by the hand's best score minus the pass penalty.
    /// Among equal-scoring plays the one leaving the stronger remainder wins;
    /// a pass is chosen only when it scores strictly higher than every play.
    pub fn choose(&mut self, hand: &CardMultiset, incumbent: Option<&CardGroup>) -> Move {
        if self.cache.len() > CACHE_LIMIT {
            self.cache.clear();
        }
        let Some(inc) = incumbent else {
            return Move::Play(self.cache.best_group(hand).0);
        };
        let mut best: Option<(Score, Score, CardGroup)> = None;
        for m in legal_moves(hand, Some(inc)) {
            let Move::Play(g) = m else { continue };
            let rest = hand.checked_sub(&g.cards).expect("legal move within hand");
            let rest_total = self.cache.best_total(&rest);
            let q = g.score() + rest_total;
            let better = match &best {
                None => true,
                Some((bq, brest, _)) => (q, rest_total) > (*bq, *brest),
            };
            if better {
                best = Some((q, rest_total, g));
            }
        }
        let pass_score = self.cache.best_total(hand) - self.config.pass_penalty;
        match best {
            Some((q, _, g)) if q >= pass_score => Move::Play(g),
            _ => Move::Pass,
        }
    }

    /// Acts on a seat observation.
    pub fn act(&mut self, obs: &Observation) -> Move {
        let incumbent = obs.incumbent.as_ref().map(|(_, g)| g);
        debug_assert!(incumbent.is_none_or(|g| g.category != Category::None));
        self.choose(&obs.own_hand, incumbent)
    }
}
