//! Combinational Q-learning.
//!
//! Each decision is split in two stages. At the combination stage the agent
//! scores a sample of decompositions of its hand (DPN) and picks one. At the
//! fine stage it scores the groups of that decomposition that are legal now,
//! plus Pass when responding (MPN), and plays one. The replay buffer stores
//! the two stages as separate transitions; only the fine stage carries the
//! terminal reward.
//!
//! Group codes come from the frozen pre-trained encoder. A shared dense layer
//! (FC1) turns a group code into a local feature. DPN max-pools local features
//! over a decomposition into a global feature and scores it with the state;
//! MPN scores a local feature together with the global feature and the state.

mod buffer;
mod model;
mod train;

pub use buffer::ReplayBuffer;
pub use model::{infer_architecture, Architecture, CqlModel, Head, QNet};
pub use train::{evaluate_vs_rhcp, train, CurvePoint, TrainMode, TrainOutcome};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureError;
use crate::movegen::Move;
use crate::neural::ParamFileError;

#[derive(Debug, Error)]
pub enum CqlError {
    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    InsufficientBuffer { have: usize, need: usize },
    #[error(transparent)]
    Params(#[from] ParamFileError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("checkpoint layout not recognised: {0}")]
    BadCheckpoint(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub steps_per_epoch: usize,
    /// Environment steps between optimiser updates.
    pub update_frequency: usize,
    pub memory: usize,
    pub sampling_limit: usize,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_epochs: usize,
    /// Optimiser updates between target syncs.
    pub target_sync: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub eval_episodes: usize,
    pub fc1_units: usize,
    pub head_units: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 8,
            steps_per_epoch: 2500,
            update_frequency: 4,
            memory: 3000,
            sampling_limit: 100,
            gamma: 1.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_epochs: 10,
            target_sync: 500,
            learning_rate: 1e-4,
            epochs: 10,
            eval_episodes: 50,
            fc1_units: 256,
            head_units: vec![512, 256, 128],
            seed: 0,
        }
    }
}

impl TrainingConfig {
    /// Exploration rate after `step` environment steps: linear from start to
    /// end over the anneal window, constant afterwards.
    pub fn epsilon_at(&self, step: usize) -> f64 {
        let window = (self.epsilon_anneal_epochs * self.steps_per_epoch).max(1);
        let t = (step as f64 / window as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("batch_size", self.batch_size),
            ("steps_per_epoch", self.steps_per_epoch),
            ("update_frequency", self.update_frequency),
            ("memory", self.memory),
            ("sampling_limit", self.sampling_limit),
            ("target_sync", self.target_sync),
            ("fc1_units", self.fc1_units),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.head_units.is_empty() || self.head_units.contains(&0) {
            return Err("head_units must be a non-empty list of positive widths".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err("epsilon must lie in [0, 1]".into());
        }
        if self.batch_size > self.memory {
            return Err("batch_size exceeds memory".into());
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.gamma.is_nan() || self.gamma < 0.0 {
            return Err("learning_rate must be positive and gamma non-negative".into());
        }
        Ok(())
    }
}

/// What the agent chooses among at one stage.
#[derive(Clone, Debug, PartialEq)]
pub enum Candidates {
    /// Combination stage: decompositions as catalog ids.
    Decompositions(Vec<Vec<u16>>),
    /// Fine stage: the chosen decomposition and the playable catalog ids in
    /// it (0 is Pass).
    Groups { decomposition: Vec<u16>, moves: Vec<u16> },
}

impl Candidates {
    pub fn len(&self) -> usize {
        match self {
            Candidates::Decompositions(d) => d.len(),
            Candidates::Groups { moves, .. } => moves.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Combination,
    Fine,
}

/// A decision point: state features and candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub state: Arc<[f64]>,
    pub candidates: Candidates,
}

impl Decision {
    pub fn stage(&self) -> Stage {
        match self.candidates {
            Candidates::Decompositions(_) => Stage::Combination,
            Candidates::Groups { .. } => Stage::Fine,
        }
    }
}

/// One stage of a decision as stored for replay.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedTransition {
    pub decision: Arc<Decision>,
    pub chosen: usize,
    pub reward: f64,
    /// `None` at the end of the episode.
    pub next: Option<Arc<Decision>>,
}

impl AugmentedTransition {
    pub fn stage(&self) -> Stage {
        self.decision.stage()
    }
}

/// The outcome of [`CqlModel::select_action`].
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub mv: Move,
    pub combination: Arc<Decision>,
    pub chosen_combination: usize,
    pub fine: Arc<Decision>,
    pub chosen_fine: usize,
}

impl Selection {
    /// The stage pair for replay. The combination stage leads to the fine
    /// stage with zero reward; the fine stage leads to `next` with `reward`.
    pub fn transitions(&self, reward: f64, next: Option<Arc<Decision>>) -> [AugmentedTransition; 2] {
        [
            AugmentedTransition {
                decision: self.combination.clone(),
                chosen: self.chosen_combination,
                reward: 0.0,
                next: Some(self.fine.clone()),
            },
            AugmentedTransition {
                decision: self.fine.clone(),
                chosen: self.chosen_fine,
                reward,
                next,
            },
        ]
    }
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
