//! Session-based game service: humans play seated games against agents over
//! JSON/HTTP, clients poll a per-session version counter, and finished games
//! are appended to a line-delimited record log.
//!
//! Sessions live in memory and are lost on restart; finished records are
//! reloaded from the log.

mod http;
mod session;
mod store;

pub use http::{router, serve};
pub use session::{
    Controller, CreateSession, MoveRequest, PlayedMove, SeatView, Service, ServiceError, SessionCreated, VersionInfo,
};
pub use store::{RecordFilter, RecordStore, RecordSummary, StoredRecord, RECORDS_FILE};
