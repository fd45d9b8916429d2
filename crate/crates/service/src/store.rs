//! Append-only log of finished games, one JSON object per line.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ddz_core::engine::{GameRecord, Seat};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub id: Uuid,
    pub session: Uuid,
    /// Unix seconds.
    pub finished_at: u64,
    /// Controller of each seat, in seat order.
    pub controllers: [String; 3],
    pub record: GameRecord,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub id: Uuid,
    pub session: Uuid,
    pub finished_at: u64,
    pub controllers: [String; 3],
    pub winner: Option<Seat>,
    pub moves: usize,
}

impl From<&StoredRecord> for RecordSummary {
    fn from(r: &StoredRecord) -> Self {
        RecordSummary {
            id: r.id,
            session: r.session,
            finished_at: r.finished_at,
            controllers: r.controllers.clone(),
            winner: r.record.winner,
            moves: r.record.entries.len(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFilter {
    pub winner: Option<Seat>,
    pub limit: Option<usize>,
}

/// Finished games, loaded from and appended to `records.jsonl` in the data
/// directory. Lines that do not parse (such as a final line cut short by a
/// crash) are skipped on load.
#[derive(Debug)]
pub struct RecordStore {
    path: Option<PathBuf>,
    records: Vec<StoredRecord>,
    skipped: usize,
}

impl RecordStore {
    /// A store that keeps records in memory only.
    pub fn in_memory() -> RecordStore {
        RecordStore {
            path: None,
            records: Vec::new(),
            skipped: 0,
        }
    }

    pub fn open(dir: &Path) -> io::Result<RecordStore> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(RECORDS_FILE);
        let mut records = Vec::new();
        let mut skipped = 0;
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str(&line) {
                    Ok(r) => records.push(r),
                    Err(_) => skipped += 1,
                }
            }
        }
        Ok(RecordStore {
            path: Some(path),
            records,
            skipped,
        })
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn append(&mut self, record: StoredRecord) -> io::Result<()> {
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&record).map_err(io::Error::other)?;
            line.push('\n');
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            f.write_all(line.as_bytes())?;
            f.sync_data()?;
        }
        self.records.push(record);
        Ok(())
    }

    /// Newest first.
    pub fn list(&self, filter: &RecordFilter) -> Vec<RecordSummary> {
        self.records
            .iter()
            .rev()
            .filter(|r| filter.winner.is_none_or(|w| r.record.winner == Some(w)))
            .take(filter.limit.unwrap_or(usize::MAX))
            .map(RecordSummary::from)
            .collect()
    }

    pub fn get(&self, id: Uuid) -> Option<&StoredRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}
