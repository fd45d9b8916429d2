use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use ddz_core::arena::{Agent, AgentFactory, AgentKind};
use ddz_core::engine::{deal, export_record, EngineError, GameState, IllegalReason, Seat};
use ddz_core::format_cards;
use ddz_core::movegen::Move;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::store::{RecordFilter, RecordStore, RecordSummary, StoredRecord};

/// Who plays a seat.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Controller {
    Human,
    Random,
    Rhcp,
    /// The service's configured checkpoint.
    Cql,
}

impl FromStr for Controller {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Controller, ServiceError> {
        match s {
            "human" => Ok(Controller::Human),
            "random" => Ok(Controller::Random),
            "rhcp" => Ok(Controller::Rhcp),
            "cql" => Ok(Controller::Cql),
            other => Err(ServiceError::InvalidConfig(format!(
                "unknown controller {other:?}; expected human, random, rhcp or cql"
            ))),
        }
    }
}

impl Controller {
    pub fn as_str(&self) -> &'static str {
        match self {
            Controller::Human => "human",
            Controller::Random => "random",
            Controller::Rhcp => "rhcp",
            Controller::Cql => "cql",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("invalid session configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("seat {0} is not controlled by a human")]
    Forbidden(Seat),
    #[error("illegal move: {reason}")]
    IllegalMove { reason: String, message: String },
    #[error("stale version {supplied}, current is {current}")]
    Conflict { supplied: u64, current: u64 },
    #[error("storage failure: {0}")]
    Storage(String),
}

impl ServiceError {
    fn illegal(reason: &str, message: impl Into<String>) -> ServiceError {
        ServiceError::IllegalMove {
            reason: reason.to_string(),
            message: message.into(),
        }
    }

    fn from_engine(e: EngineError) -> ServiceError {
        let reason = match &e {
            EngineError::IllegalMove { reason, .. } => match reason {
                IllegalReason::BadCards => "bad-cards",
                IllegalReason::CannotBeat => "cannot-beat",
                IllegalReason::MustLead => "must-lead",
            },
            EngineError::GameOver => "game-over",
            EngineError::NotTerminal | EngineError::BadDeal(_) => "bad-cards",
        };
        ServiceError::illegal(reason, e.to_string())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CreateSession {
    /// Controller per seat: `human`, `random`, `rhcp` or `cql`.
    pub seats: BTreeMap<Seat, String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoveRequest {
    pub seat: Seat,
    /// Card notation such as `5,6,7,8,9`, or `pass`.
    #[serde(rename = "move")]
    pub mv: String,
    /// Last version the client saw; a mismatch is a conflict.
    #[serde(default)]
    pub version: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayedMove {
    pub seat: Seat,
    #[serde(rename = "move")]
    pub mv: String,
}

/// What one seat may see.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeatView {
    pub session: Uuid,
    pub seat: Seat,
    pub version: u64,
    pub hand: String,
    pub hand_sizes: BTreeMap<Seat, usize>,
    pub controllers: BTreeMap<Seat, String>,
    pub to_act: Option<Seat>,
    pub incumbent: Option<PlayedMove>,
    pub history: Vec<PlayedMove>,
    /// Empty unless this seat is to act.
    pub legal_moves: Vec<String>,
    pub winner: Option<Seat>,
    pub record_id: Option<Uuid>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: Uuid,
    pub seat: Seat,
    pub seed: u64,
    pub view: SeatView,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionInfo {
    pub version: u64,
    pub changed: bool,
    pub to_act: Option<Seat>,
    pub finished: bool,
}

struct Session {
    id: Uuid,
    state: GameState,
    controllers: [Controller; 3],
    agents: [Option<Box<dyn Agent>>; 3],
    rng: ChaCha8Rng,
    version: u64,
    record_id: Option<Uuid>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Session {
    fn human_seat(&self) -> Seat {
        Seat::ALL
            .into_iter()
            .find(|s| self.controllers[s.index()] == Controller::Human)
            .expect("sessions have one human seat")
    }

    /// Lets agents move until a human is to act or the game ends.
    fn advance(&mut self) -> Result<(), ServiceError> {
        while !self.state.is_terminal() {
            let seat = self.state.to_act();
            let Some(agent) = self.agents[seat.index()].as_mut() else {
                break;
            };
            let mv = agent.act(&self.state.observe(seat), &mut self.rng);
            self.state = self
                .state
                .apply_move(&mv)
                .map_err(|e| ServiceError::Storage(format!("agent {} produced an illegal move: {e}", agent.name())))?;
            self.version += 1;
        }
        Ok(())
    }

    fn view(&self, seat: Seat) -> SeatView {
        let played = |seat: Seat, mv: &Move| PlayedMove {
            seat,
            mv: mv.notation(),
        };
        let terminal = self.state.is_terminal();
        let legal = if !terminal && self.state.to_act() == seat {
            self.state.legal_moves().iter().map(Move::notation).collect()
        } else {
            Vec::new()
        };
        SeatView {
            session: self.id,
            seat,
            version: self.version,
            hand: format_cards(self.state.hand(seat)),
            hand_sizes: Seat::ALL.iter().map(|&s| (s, self.state.hand(s).len())).collect(),
            controllers: Seat::ALL
                .iter()
                .map(|&s| (s, self.controllers[s.index()].as_str().to_string()))
                .collect(),
            to_act: (!terminal).then(|| self.state.to_act()),
            incumbent: self.state.incumbent().map(|(s, g)| played(*s, &Move::Play(*g))),
            history: self.state.history().iter().map(|t| played(t.seat, &t.mv)).collect(),
            legal_moves: legal,
            winner: self.state.winner(),
            record_id: self.record_id,
        }
    }
}

/// Session registry plus the record store.
pub struct Service {
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<Session>>>>,
    store: Mutex<RecordStore>,
    factory: AgentFactory,
    checkpoint: Option<PathBuf>,
}

impl Service {
    /// `factory` must already hold the model for `checkpoint`, if any.
    pub fn new(store: RecordStore, factory: AgentFactory, checkpoint: Option<PathBuf>) -> Service {
        Service {
            sessions: RwLock::new(HashMap::new()),
            store: Mutex::new(store),
            factory,
            checkpoint,
        }
    }

    fn agent_for(&self, c: &Controller, seat: Seat) -> Result<Option<Box<dyn Agent>>, ServiceError> {
        let kind = match c {
            Controller::Human => return Ok(None),
            Controller::Random => AgentKind::Random,
            Controller::Rhcp => AgentKind::Rhcp,
            Controller::Cql => AgentKind::Cql(
                self.checkpoint
                    .clone()
                    .ok_or_else(|| ServiceError::InvalidConfig("no CQL checkpoint is configured".into()))?,
            ),
        };
        self.factory
            .build(&kind, seat)
            .map(Some)
            .map_err(|e| ServiceError::InvalidConfig(e.to_string()))
    }

    fn session(&self, id: Uuid) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(&id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }

    pub fn create_session(&self, req: &CreateSession) -> Result<SessionCreated, ServiceError> {
        let mut controllers = Vec::with_capacity(3);
        for seat in Seat::ALL {
            let c = req
                .seats
                .get(&seat)
                .ok_or_else(|| ServiceError::InvalidConfig(format!("no controller for {seat}")))?;
            controllers.push(c.parse::<Controller>()?);
        }
        let controllers: [Controller; 3] = controllers.try_into().expect("three seats");
        let humans = controllers.iter().filter(|c| **c == Controller::Human).count();
        if humans != 1 {
            return Err(ServiceError::InvalidConfig(format!(
                "exactly one human seat is required, found {humans}"
            )));
        }
        let agents = [
            self.agent_for(&controllers[0], Seat::Landlord)?,
            self.agent_for(&controllers[1], Seat::PeasantDown)?,
            self.agent_for(&controllers[2], Seat::PeasantUp)?,
        ];
        let seed = req.seed.unwrap_or_else(rand::random);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = deal(&mut rng);
        let mut session = Session {
            id: Uuid::new_v4(),
            state,
            controllers,
            agents,
            rng,
            version: 0,
            record_id: None,
        };
        session.advance()?;
        self.finish_if_over(&mut session)?;
        let seat = session.human_seat();
        let created = SessionCreated {
            id: session.id,
            seat,
            seed,
            view: session.view(seat),
        };
        self.sessions
            .write()
            .expect("session map lock")
            .insert(session.id, Arc::new(Mutex::new(session)));
        Ok(created)
    }

    pub fn view(&self, id: Uuid, seat: Seat) -> Result<SeatView, ServiceError> {
        let s = self.session(id)?;
        let s = s.lock().expect("session lock");
        if s.controllers[seat.index()] != Controller::Human {
            return Err(ServiceError::Forbidden(seat));
        }
        Ok(s.view(seat))
    }

    pub fn version(&self, id: Uuid, since: Option<u64>) -> Result<VersionInfo, ServiceError> {
        let s = self.session(id)?;
        let s = s.lock().expect("session lock");
        let finished = s.state.is_terminal();
        Ok(VersionInfo {
            version: s.version,
            changed: since != Some(s.version),
            to_act: (!finished).then(|| s.state.to_act()),
            finished,
        })
    }

    /// Re-validates and applies a human move, then lets agents reply.
    pub fn post_move(&self, id: Uuid, req: &MoveRequest) -> Result<SeatView, ServiceError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session lock");
        if let Some(v) = req.version {
            if v != s.version {
                return Err(ServiceError::Conflict {
                    supplied: v,
                    current: s.version,
                });
            }
        }
        if s.controllers[req.seat.index()] != Controller::Human {
            return Err(ServiceError::Forbidden(req.seat));
        }
        if s.state.is_terminal() {
            return Err(ServiceError::from_engine(EngineError::GameOver));
        }
        if s.state.to_act() != req.seat {
            return Err(ServiceError::illegal(
                "not-your-turn",
                format!("{} is to act", s.state.to_act()),
            ));
        }
        let mv = Move::parse(&req.mv).map_err(|e| ServiceError::illegal("bad-cards", e.to_string()))?;
        s.state = s.state.apply_move(&mv).map_err(ServiceError::from_engine)?;
        s.version += 1;
        s.advance()?;
        self.finish_if_over(&mut s)?;
        Ok(s.view(req.seat))
    }

    fn finish_if_over(&self, s: &mut Session) -> Result<(), ServiceError> {
        if !s.state.is_terminal() || s.record_id.is_some() {
            return Ok(());
        }
        let stored = StoredRecord {
            id: Uuid::new_v4(),
            session: s.id,
            finished_at: now(),
            controllers: s.controllers.clone().map(|c| c.as_str().to_string()),
            record: export_record(&s.state),
        };
        let id = stored.id;
        self.store
            .lock()
            .expect("store lock")
            .append(stored)
            .map_err(|e| ServiceError::Storage(e.to_string()))?;
        s.record_id = Some(id);
        Ok(())
    }

    pub fn list_records(&self, filter: &RecordFilter) -> Vec<RecordSummary> {
        self.store.lock().expect("store lock").list(filter)
    }

    pub fn get_record(&self, id: Uuid) -> Result<StoredRecord, ServiceError> {
        self.store
            .lock()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("record {id}")))
    }
}
