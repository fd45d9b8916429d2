//! Agents, matches and win-rate tables.

mod config;

pub use config::{apply_config, parse_config, ConfigError, RunConfig};

use std::collections::VecDeque;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cards::CardMultiset;
use crate::cql::{CqlModel, TrainingConfig};
use crate::engine::{deal, EngineError, GameRecord, GameState, Observation, Seat};
use crate::movegen::Move;
use crate::rhcp::{RhcpAgent, RhcpConfig};

/// A player. `act` must return a legal move for the observation.
pub trait Agent: Send {
    fn act(&mut self, obs: &Observation, rng: &mut dyn RngCore) -> Move;
    fn name(&self) -> String;
}

/// Uniform over the legal moves; Pass is one of the options when responding.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn act(&mut self, obs: &Observation, rng: &mut dyn RngCore) -> Move {
        *obs.legal_moves()
            .choose(rng)
            .expect("a seat to act always has a legal move")
    }

    fn name(&self) -> String {
        "random".into()
    }
}

impl Agent for RhcpAgent {
    fn act(&mut self, obs: &Observation, _rng: &mut dyn RngCore) -> Move {
        RhcpAgent::act(self, obs)
    }

    fn name(&self) -> String {
        "rhcp".into()
    }
}

/// Greedy combinational Q-learning player.
#[derive(Clone)]
pub struct CqlAgent {
    pub model: Arc<CqlModel>,
    pub epsilon: f64,
}

impl Agent for CqlAgent {
    fn act(&mut self, obs: &Observation, rng: &mut dyn RngCore) -> Move {
        self.model.select_action(obs, self.epsilon, rng).mv
    }

    fn name(&self) -> String {
        "cql".into()
    }
}

/// Plays one seat's moves from a record, in order. Pass once the script
/// runs out.
#[derive(Clone, Debug)]
pub struct ScriptedAgent {
    moves: VecDeque<Move>,
}

impl ScriptedAgent {
    pub fn new(moves: impl IntoIterator<Item = Move>) -> ScriptedAgent {
        ScriptedAgent {
            moves: moves.into_iter().collect(),
        }
    }

    pub fn from_record(record: &GameRecord, seat: Seat) -> ScriptedAgent {
        ScriptedAgent::new(record.entries.iter().filter(|e| e.seat == seat).map(|e| e.mv))
    }
}

impl Agent for ScriptedAgent {
    fn act(&mut self, _obs: &Observation, _rng: &mut dyn RngCore) -> Move {
        self.moves.pop_front().unwrap_or(Move::Pass)
    }

    fn name(&self) -> String {
        "scripted".into()
    }
}

/// How to build an agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AgentKind {
    Random,
    Rhcp,
    /// Loaded from a checkpoint file.
    Cql(PathBuf),
    /// Replays a record file.
    Scripted(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown agent kind {0:?}; expected random, rhcp, cql:<checkpoint> or scripted:<record>")]
pub struct AgentKindError(pub String);

impl FromStr for AgentKind {
    type Err = AgentKindError;

    fn from_str(s: &str) -> Result<AgentKind, AgentKindError> {
        let s = s.trim();
        match s {
            "random" => return Ok(AgentKind::Random),
            "rhcp" => return Ok(AgentKind::Rhcp),
            _ => {}
        }
        match s.split_once(':') {
            Some(("cql", p)) if !p.is_empty() => Ok(AgentKind::Cql(p.into())),
            Some(("scripted", p)) if !p.is_empty() => Ok(AgentKind::Scripted(p.into())),
            _ => Err(AgentKindError(s.to_string())),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentKind::Random => f.write_str("random"),
            AgentKind::Rhcp => f.write_str("rhcp"),
            AgentKind::Cql(p) => write!(f, "cql:{}", p.display()),
            AgentKind::Scripted(p) => write!(f, "scripted:{}", p.display()),
        }
    }
}

impl TryFrom<String> for AgentKind {
    type Error = AgentKindError;

    fn try_from(s: String) -> Result<AgentKind, AgentKindError> {
        s.parse()
    }
}

impl From<AgentKind> for String {
    fn from(k: AgentKind) -> String {
        k.to_string()
    }
}

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("cannot load {kind}: {message}")]
    Load { kind: AgentKind, message: String },
    #[error("{agent} at {seat} played {mv}: {source}")]
    IllegalMove {
        agent: String,
        seat: Seat,
        mv: String,
        source: EngineError,
    },
    #[error("card conservation violated after {0} moves")]
    Conservation(usize),
}

/// Builds agents, loading each checkpoint once.
#[derive(Clone, Default)]
pub struct AgentFactory {
    pub rhcp: RhcpConfig,
    pub cql: TrainingConfig,
    models: Vec<(PathBuf, Arc<CqlModel>)>,
    records: Vec<(PathBuf, GameRecord)>,
}

impl AgentFactory {
    pub fn new(rhcp: RhcpConfig, cql: TrainingConfig) -> AgentFactory {
        AgentFactory {
            rhcp,
            cql,
            models: Vec::new(),
            records: Vec::new(),
        }
    }

    /// Loads any checkpoints and records the kinds refer to.
    pub fn prepare(&mut self, kinds: &[AgentKind]) -> Result<(), ArenaError> {
        for kind in kinds {
            match kind {
                AgentKind::Cql(path) if !self.models.iter().any(|(p, _)| p == path) => {
                    let model = CqlModel::load(path, &self.cql).map_err(|e| ArenaError::Load {
                        kind: kind.clone(),
                        message: e.to_string(),
                    })?;
                    self.models.push((path.clone(), Arc::new(model)));
                }
                AgentKind::Scripted(path) if !self.records.iter().any(|(p, _)| p == path) => {
                    let load = || -> Result<GameRecord, String> {
                        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
                        GameRecord::from_text(&text).map_err(|e| e.to_string())
                    };
                    let record = load().map_err(|message| ArenaError::Load {
                        kind: kind.clone(),
                        message,
                    })?;
                    self.records.push((path.clone(), record));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Registers an in-memory model under a path-like key.
    pub fn insert_model(&mut self, key: impl Into<PathBuf>, model: Arc<CqlModel>) {
        self.models.push((key.into(), model));
    }

    pub fn build(&self, kind: &AgentKind, seat: Seat) -> Result<Box<dyn Agent>, ArenaError> {
        let missing = || ArenaError::Load {
            kind: kind.clone(),
            message: "not prepared".into(),
        };
        Ok(match kind {
            AgentKind::Random => Box::new(RandomAgent),
            AgentKind::Rhcp => Box::new(RhcpAgent::new(self.rhcp)),
            AgentKind::Cql(path) => {
                let model = self
                    .models
                    .iter()
                    .find(|(p, _)| p == path)
                    .ok_or_else(missing)?
                    .1
                    .clone();
                Box::new(CqlAgent { model, epsilon: 0.0 })
            }
            AgentKind::Scripted(path) => {
                let record = &self.records.iter().find(|(p, _)| p == path).ok_or_else(missing)?.1;
                Box::new(ScriptedAgent::from_record(record, seat))
            }
        })
    }
}

/// Plays one game to the end, checking legality and card conservation
/// after every move.
pub fn play_game(
    mut state: GameState,
    agents: &mut [Box<dyn Agent>; 3],
    rng: &mut dyn RngCore,
) -> Result<GameState, ArenaError> {
    let total: CardMultiset = state.hands().iter().fold(state.played(), |acc, h| {
        acc.checked_union(h).expect("a game's cards fit in a deck")
    });
    let mut moves = 0;
    while !state.is_terminal() {
        let seat = state.to_act();
        let agent = &mut agents[seat.index()];
        let mv = agent.act(&state.observe(seat), rng);
        state = state.apply_move(&mv).map_err(|source| ArenaError::IllegalMove {
            agent: agent.name(),
            seat,
            mv: mv.notation(),
            source,
        })?;
        moves += 1;
        let now = state
            .hands()
            .iter()
            .try_fold(state.played(), |acc, h| acc.checked_union(h));
        if now != Some(total) {
            return Err(ArenaError::Conservation(moves));
        }
    }
    Ok(state)
}

/// Aggregated results of repeated seeded matches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub roles: [AgentKind; 3],
    pub episodes: usize,
    pub repeats: usize,
    pub seeds: Vec<u64>,
    /// Mean win rate of each seat's team, indexed by seat.
    pub winrates: [f64; 3],
    /// Standard deviation of each seat's win rate across repeats.
    pub std: [f64; 3],
    pub landlord_wins: Vec<usize>,
}

impl MatchReport {
    pub fn landlord_winrate(&self) -> f64 {
        self.winrates[0]
    }

    pub fn peasant_winrate(&self) -> f64 {
        self.winrates[1]
    }
}

/// Per-episode source: the master seed with the episode number as stream.
pub fn episode_rng(seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64);
    rng
}

/// Landlord wins over `episodes` games dealt from `seed`. Episodes are
/// spread over worker threads; each has its own source, so the result does
/// not depend on scheduling.
fn landlord_wins(
    factory: &AgentFactory,
    roles: &[AgentKind; 3],
    episodes: usize,
    seed: u64,
) -> Result<usize, ArenaError> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .clamp(1, episodes.max(1));
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || -> Result<usize, ArenaError> {
                    let mut agents: [Box<dyn Agent>; 3] = [
                        factory.build(&roles[0], Seat::Landlord)?,
                        factory.build(&roles[1], Seat::PeasantDown)?,
                        factory.build(&roles[2], Seat::PeasantUp)?,
                    ];
                    let mut wins = 0;
                    for i in (w..episodes).step_by(workers) {
                        let mut rng = episode_rng(seed, i);
                        let game = deal(&mut rng);
                        let end = play_game(game, &mut agents, &mut rng)?;
                        if end.winner() == Some(Seat::Landlord) {
                            wins += 1;
                        }
                    }
                    Ok(wins)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("match worker")).sum()
    })
}

/// Runs `repeats` matches of `episodes` games, repeat `k` dealt from
/// `seeds[k]` (or `k` when seeds run out).
pub fn run_match(
    factory: &AgentFactory,
    roles: &[AgentKind; 3],
    episodes: usize,
    repeats: usize,
    seeds: &[u64],
) -> Result<MatchReport, ArenaError> {
    let seeds: Vec<u64> = (0..repeats)
        .map(|k| seeds.get(k).copied().unwrap_or(k as u64))
        .collect();
    let mut landlord = Vec::with_capacity(repeats);
    for &seed in &seeds {
        landlord.push(landlord_wins(factory, roles, episodes, seed)?);
    }
    let rates: Vec<f64> = landlord.iter().map(|&w| w as f64 / episodes.max(1) as f64).collect();
    let mean = rates.iter().sum::<f64>() / repeats.max(1) as f64;
    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / repeats.max(1) as f64;
    Ok(MatchReport {
        roles: roles.clone(),
        episodes,
        repeats,
        seeds,
        winrates: [mean, 1.0 - mean, 1.0 - mean],
        std: [var.sqrt(); 3],
        landlord_wins: landlord,
    })
}

/// Rows are agent kinds; the cell for a seat is that agent's team win rate
/// when it holds the seat and `opponents` fill the other two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinrateMatrix {
    pub opponents: AgentKind,
    pub episodes: usize,
    pub repeats: usize,
    pub rows: Vec<MatrixRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub agent: AgentKind,
    pub winrates: [f64; 3],
    pub std: [f64; 3],
}

pub fn winrate_matrix(
    factory: &AgentFactory,
    agents: &[AgentKind],
    opponents: &AgentKind,
    episodes: usize,
    repeats: usize,
    seeds: &[u64],
) -> Result<WinrateMatrix, ArenaError> {
    let mut rows = Vec::with_capacity(agents.len());
    for agent in agents {
        let mut row = MatrixRow {
            agent: agent.clone(),
            winrates: [0.0; 3],
            std: [0.0; 3],
        };
        for seat in Seat::ALL {
            let mut roles = [opponents.clone(), opponents.clone(), opponents.clone()];
            roles[seat.index()] = agent.clone();
            let report = run_match(factory, &roles, episodes, repeats, seeds)?;
            row.winrates[seat.index()] = report.winrates[seat.index()];
            row.std[seat.index()] = report.std[seat.index()];
        }
        rows.push(row);
    }
    Ok(WinrateMatrix {
        opponents: opponents.clone(),
        episodes,
        repeats,
        rows,
    })
}

impl WinrateMatrix {
    /// Fixed-width table, one row per agent kind.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# opponents: {}, {} episodes x {} repeats\n{:<24} {:>14} {:>14} {:>14}\n",
            self.opponents, self.episodes, self.repeats, "agent", "Landlord", "Peasant Down", "Peasant Up"
        );
        for row in &self.rows {
            let cell = |i: usize| format!("{:.3}±{:.3}", row.winrates[i], row.std[i]);
            out.push_str(&format!(
                "{:<24} {:>14} {:>14} {:>14}\n",
                row.agent.to_string(),
                cell(0),
                cell(1),
                cell(2)
            ));
        }
        out
    }
}

impl MatchReport {
    pub fn to_text(&self) -> String {
        format!(
            "roles: {} / {} / {}\nepisodes: {} x {} repeats (seeds {:?})\nlandlord winrate: {:.3} ± {:.3}\npeasant winrate: {:.3} ± {:.3}\n",
            self.roles[0],
            self.roles[1],
            self.roles[2],
            self.episodes,
            self.repeats,
            self.seeds,
            self.winrates[0],
            self.std[0],
            self.winrates[1],
            self.std[1]
        )
    }
}
