//! Dou Di Zhu rules engine and agent workbench.
//!
//! The crate covers the card rules and the 13527-move action space, hand
//! decompositions (depth-first and dancing-links exact cover), the recursive
//! hand-partitioning baseline, the referee, numeric encodings, a small
//! reverse-mode network library, combinational Q-learning, and the
//! tournament harness.

pub mod arena;
pub mod cards;
pub mod cql;
pub mod decomp;
pub mod engine;
pub mod features;
pub mod movegen;
pub mod neural;
pub mod rhcp;
pub mod score;

pub use cards::{beats, category_score, classify, format_cards, parse_cards, CardGroup, CardMultiset, Category, Rank};
pub use engine::{deal, GameState, Observation, Seat};
pub use movegen::{legal_moves, ActionCatalog, Move};
pub use score::Score;
