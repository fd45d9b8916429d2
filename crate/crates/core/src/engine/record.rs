//! Game records in the published table layout: one entry per (round, seat)
//! with the hand held before acting and the move made, in card notation.
//!
//! Text form, one entry per line, `|` separated:
//!
//! ```text
//! 1 | Landlord | 3,4,4,4,4,5,6,6,7,8,9,T,J,Q,Q,A,A,A,2,2 | 5,6,7,8,9,T,J
//! 1 | Peasant Down | 3,3,5,5,6,7,8,8,9,9,T,J,J,J,Q,K,K | None
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. A round is one pass
//! around the table starting at the landlord.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EngineError, GameState, Seat};
use crate::cards::{format_cards, parse_cards, CardMultiset};
use crate::movegen::Move;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub round: u32,
    pub seat: Seat,
    /// Hand before this move.
    pub hand: CardMultiset,
    #[serde(rename = "move")]
    pub mv: Move,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRecord {
    pub entries: Vec<RecordEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner: Option<Seat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("illegal move at round {round}: {source}")]
    IllegalMoveAtRound { round: u32, source: EngineError },
}

impl RecordError {
    pub fn round(&self) -> Option<u32> {
        match self {
            RecordError::IllegalMoveAtRound { round, .. } => Some(*round),
            RecordError::MalformedRecord(_) => None,
        }
    }
}

fn malformed(msg: impl Into<String>) -> RecordError {
    RecordError::MalformedRecord(msg.into())
}

/// Builds the record of a game so far.
pub fn export_record(state: &GameState) -> GameRecord {
    let mut hands = state.initial_hands();
    let mut entries = Vec::with_capacity(state.history().len());
    for (i, t) in state.history().iter().enumerate() {
        let hand = &mut hands[t.seat.index()];
        entries.push(RecordEntry {
            round: (i / 3) as u32 + 1,
            seat: t.seat,
            hand: *hand,
            mv: t.mv,
        });
        *hand = hand.checked_sub(&t.mv.cards()).expect("history is consistent");
    }
    GameRecord {
        entries,
        winner: state.winner(),
    }
}

/// Replays a record, checking seat order, hands and the legality of every
/// move. Returns the final state.
pub fn import_record(record: &GameRecord) -> Result<GameState, RecordError> {
    let mut initial: [Option<CardMultiset>; 3] = [None; 3];
    for e in &record.entries {
        initial[e.seat.index()].get_or_insert(e.hand);
    }
    let hands = initial.map(|h| h.unwrap_or_default());
    if record.entries.is_empty() {
        return Err(malformed("record has no entries"));
    }
    let mut state = GameState::from_hands(hands).map_err(|e| malformed(e.to_string()))?;
    for (i, e) in record.entries.iter().enumerate() {
        let expected_round = (i / 3) as u32 + 1;
        if e.round != expected_round {
            return Err(malformed(format!(
                "entry {} has round {}, expected {}",
                i + 1,
                e.round,
                expected_round
            )));
        }
        if e.seat != state.to_act() {
            return Err(malformed(format!("round {}: {} acts out of turn", e.round, e.seat)));
        }
        if *state.hand(e.seat) != e.hand {
            return Err(malformed(format!(
                "round {}: {} holds {} but the record says {}",
                e.round,
                e.seat,
                format_cards(state.hand(e.seat)),
                format_cards(&e.hand)
            )));
        }
        state = state
            .apply_move(&e.mv)
            .map_err(|source| RecordError::IllegalMoveAtRound { round: e.round, source })?;
    }
    if let Some(w) = record.winner {
        if state.winner() != Some(w) {
            return Err(malformed(format!(
                "record claims {w} won, replay gives {:?}",
                state.winner()
            )));
        }
    }
    Ok(state)
}

impl GameRecord {
    /// Table text form.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# round | seat | hand | move\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{} | {} | {} | {}",
                e.round,
                e.seat,
                format_cards(&e.hand),
                e.mv.notation()
            );
        }
        if let Some(w) = self.winner {
            let _ = writeln!(out, "# winner: {w}");
        }
        out
    }

    /// Parses the table text form. Move cells are parsed as card groups; a
    /// cell that is not a legal group is reported as an illegal move at its
    /// round.
    pub fn from_text(text: &str) -> Result<GameRecord, RecordError> {
        let mut entries = Vec::new();
        let mut winner = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(w) = comment.trim().strip_prefix("winner:") {
                    winner = Some(w.trim().parse::<Seat>().map_err(|e| malformed(e.to_string()))?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('|').map(str::trim).collect();
            if cells.len() != 4 {
                return Err(malformed(format!(
                    "line {}: expected 4 cells, found {}",
                    lineno + 1,
                    cells.len()
                )));
            }
            let round: u32 = cells[0]
                .parse()
                .map_err(|_| malformed(format!("line {}: bad round {:?}", lineno + 1, cells[0])))?;
            let seat: Seat = cells[1]
                .parse()
                .map_err(|e: super::SeatParseError| malformed(e.to_string()))?;
            let hand = parse_cards(cells[2]).map_err(|e| malformed(format!("line {}: {e}", lineno + 1)))?;
            let mv = Move::parse(cells[3]).map_err(|e| RecordError::IllegalMoveAtRound {
                round,
                source: EngineError::IllegalMove {
                    seat,
                    mv: cells[3].to_string(),
                    reason: match e {
                        crate::movegen::MoveParseError::Cards(_) | crate::movegen::MoveParseError::NotAGroup(_) => {
                            super::IllegalReason::BadCards
                        }
                    },
                },
            })?;
            entries.push(RecordEntry { round, seat, hand, mv });
        }
        Ok(GameRecord { entries, winner })
    }

    /// One JSON object per line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn from_json_line(line: &str) -> Result<GameRecord, RecordError> {
        serde_json::from_str(line).map_err(|e| malformed(e.to_string()))
    }
}
