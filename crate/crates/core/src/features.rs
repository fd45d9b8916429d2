//! Numeric encodings of hands, groups and observations, the hidden-hand
//! belief, and the card-group auto-encoder.
//!
//! A hand is 15 ranks × 4 count slots, rank-major. A rank holding `c` cards
//! sets its first `c` slots (thermometer); jokers use the first slot only.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cards::{CardMultiset, Rank, NUM_RANKS};
use crate::engine::Observation;
use crate::movegen::{ActionCatalog, Move};
use crate::neural::{load_params, save_params, Adam, Conv1d, Dense, Layer, Network, Param, ParamFileError};

pub const SLOTS: usize = 4;
pub const HAND_WIDTH: usize = NUM_RANKS * SLOTS;
pub const BELIEF_WIDTH: usize = 2 * HAND_WIDTH;
pub const LATENT_WIDTH: usize = 256;
/// Own hand, belief, and the latents of the previous and next seat's last move.
pub const STATE_WIDTH: usize = HAND_WIDTH + BELIEF_WIDTH + 2 * LATENT_WIDTH;

pub type HandEncoding = [f64; HAND_WIDTH];

pub fn encode_hand(cards: &CardMultiset) -> HandEncoding {
    let mut out = [0.0; HAND_WIDTH];
    for (r, &c) in cards.counts().iter().enumerate() {
        out[r * SLOTS..r * SLOTS + c as usize].iter_mut().for_each(|v| *v = 1.0);
    }
    out
}

/// Pass encodes as the empty group.
pub fn encode_move(mv: &Move) -> HandEncoding {
    encode_hand(&mv.cards())
}

/// Inverse of [`encode_hand`], thresholding at 0.5. A rank's count is the
/// number of its slots that are set. Returns `None` when the counts exceed
/// the deck.
pub fn decode_hand(values: &[f64]) -> Option<CardMultiset> {
    assert_eq!(values.len(), HAND_WIDTH, "hand encoding width");
    let mut counts = [0u8; NUM_RANKS];
    for (r, c) in counts.iter_mut().enumerate() {
        *c = values[r * SLOTS..(r + 1) * SLOTS].iter().filter(|&&v| v > 0.5).count() as u8;
    }
    CardMultiset::from_counts(counts).ok()
}

/// Per-instance probabilities that each card sits in the previous or the
/// next seat's hand.
#[derive(Clone, Debug, PartialEq)]
pub struct Belief {
    pub prev: HandEncoding,
    pub next: HandEncoding,
}

impl Belief {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.prev.to_vec();
        v.extend_from_slice(&self.next);
        v
    }
}

/// Splits every unseen card between the two hidden hands in proportion to
/// their sizes. For each rank, the unseen instances occupy the lowest slots;
/// instances held or already played get zero in both blocks.
pub fn infer_belief(obs: &Observation) -> Belief {
    let n_prev = obs.hand_sizes[obs.seat.prev().index()] as f64;
    let n_next = obs.hand_sizes[obs.seat.next().index()] as f64;
    let mut belief = Belief {
        prev: [0.0; HAND_WIDTH],
        next: [0.0; HAND_WIDTH],
    };
    if n_prev + n_next == 0.0 {
        return belief;
    }
    let (p_prev, p_next) = (n_prev / (n_prev + n_next), n_next / (n_prev + n_next));
    let played = obs.played();
    for r in 0..NUM_RANKS {
        let rank = Rank::from_index(r).expect("rank index");
        let unseen = rank.copies_in_deck() - obs.own_hand.count(rank) - played.count(rank);
        for k in 0..unseen as usize {
            belief.prev[r * SLOTS + k] = p_prev;
            belief.next[r * SLOTS + k] = p_next;
        }
    }
    belief
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("auto-encoder reached {accuracy:.4} exact reconstruction after {epochs} epochs, below {target}")]
    NonConvergence { accuracy: f64, epochs: usize, target: f64 },
    #[error(transparent)]
    Params(#[from] ParamFileError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    /// Filters per convolution branch.
    pub filters: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Training stops once exact reconstruction reaches this fraction.
    pub target_accuracy: f64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            filters: 8,
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            target_accuracy: 0.99,
        }
    }
}

/// Four convolution branches over a group's encoding, one per window of
/// 1 to 4 count slots, each stepping one rank at a time, then a dense
/// projection to the latent. The decoder maps the latent back to 60 values.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupEncoder {
    pub encoder: Network,
    pub decoder: Network,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainReport {
    pub epochs: usize,
    pub accuracy: f64,
    pub final_loss: f64,
}

impl GroupEncoder {
    pub fn new<R: Rng + ?Sized>(filters: usize, rng: &mut R) -> GroupEncoder {
        let branches = (1..=SLOTS)
            .map(|k| {
                let conv = Conv1d::new(&format!("enc.conv{k}"), 1, HAND_WIDTH, filters, k, SLOTS, rng);
                Network::new(HAND_WIDTH, vec![Layer::Conv1d(conv), Layer::Relu]).expect("branch shapes")
            })
            .collect::<Vec<_>>();
        let width = SLOTS * filters * NUM_RANKS;
        let encoder = Network::new(
            HAND_WIDTH,
            vec![
                Layer::Branches(branches),
                Layer::Dense(Dense::new("enc.fc", width, LATENT_WIDTH, rng)),
            ],
        )
        .expect("encoder shapes");
        let decoder = Network::new(
            LATENT_WIDTH,
            vec![Layer::Dense(Dense::new("dec.fc", LATENT_WIDTH, HAND_WIDTH, rng))],
        )
        .expect("decoder shapes");
        GroupEncoder { encoder, decoder }
    }

    pub fn latent(&self, group: &[f64]) -> Vec<f64> {
        self.encoder.forward(group)
    }

    pub fn reconstruct(&self, group: &[f64]) -> Option<CardMultiset> {
        decode_hand(&self.decoder.forward(&self.latent(group)))
    }

    /// Fraction of catalog entries reconstructed exactly.
    pub fn accuracy(&self, catalog: &ActionCatalog) -> f64 {
        let hits = catalog
            .moves()
            .iter()
            .filter(|m| self.reconstruct(&encode_move(m)) == Some(m.cards()))
            .count();
        hits as f64 / catalog.len() as f64
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.encoder.params();
        v.extend(self.decoder.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.encoder.params_mut();
        v.extend(self.decoder.params_mut());
        v
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        Ok(save_params(path, &self.params())?)
    }

    /// Loads parameters into an encoder built with the same filter count.
    pub fn load(path: &Path, filters: usize) -> Result<GroupEncoder, FeatureError> {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut enc = GroupEncoder::new(filters, &mut rng);
        load_params(path, &mut enc.params_mut())?;
        Ok(enc)
    }

    /// Trains encoder and decoder to reconstruct every catalog group under
    /// squared error.
    pub fn pretrain<R: Rng + ?Sized>(
        catalog: &ActionCatalog,
        config: &AutoencoderConfig,
        rng: &mut R,
    ) -> Result<(GroupEncoder, PretrainReport), FeatureError> {
        let mut ae = GroupEncoder::new(config.filters, rng);
        let inputs: Vec<HandEncoding> = catalog.moves().iter().map(encode_move).collect();
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut opt = Adam::new(config.learning_rate);
        let mut report = PretrainReport {
            epochs: 0,
            accuracy: 0.0,
            final_loss: f64::INFINITY,
        };
        for epoch in 1..=config.epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for batch in order.chunks(config.batch_size) {
                ae.encoder.zero_grad();
                ae.decoder.zero_grad();
                let scale = 2.0 / (batch.len() * HAND_WIDTH) as f64;
                for &i in batch {
                    let x = &inputs[i];
                    let (z, et) = ae.encoder.forward_traced(x);
                    let (y, dt) = ae.decoder.forward_traced(&z);
                    let dy: Vec<f64> = y.iter().zip(x).map(|(a, b)| (a - b) * scale).collect();
                    total += y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                    let dz = ae.decoder.backward(&dt, &dy);
                    ae.encoder.backward(&et, &dz);
                }
                opt.step(&mut ae.params_mut());
            }
            report.epochs = epoch;
            report.final_loss = total / (inputs.len() * HAND_WIDTH) as f64;
            report.accuracy = ae.accuracy(catalog);
            if report.accuracy >= config.target_accuracy {
                return Ok((ae, report));
            }
        }
        Err(FeatureError::NonConvergence {
            accuracy: report.accuracy,
            epochs: report.epochs,
            target: config.target_accuracy,
        })
    }
}

/// Latents of every catalog entry, indexed by catalog id.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTable {
    values: Vec<f64>,
}

impl LatentTable {
    pub fn build(encoder: &GroupEncoder, catalog: &ActionCatalog) -> LatentTable {
        let mut values = Vec::with_capacity(catalog.len() * LATENT_WIDTH);
        for m in catalog.moves() {
            values.extend(encoder.latent(&encode_move(m)));
        }
        LatentTable { values }
    }

    pub fn len(&self) -> usize {
        self.values.len() / LATENT_WIDTH
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: usize) -> &[f64] {
        &self.values[id * LATENT_WIDTH..(id + 1) * LATENT_WIDTH]
    }

    /// Latent of a move; Pass is catalog id 0.
    pub fn of_move(&self, mv: &Move) -> &[f64] {
        let id = ActionCatalog::global()
            .index_of(mv)
            .expect("every move is in the catalog");
        self.get(id)
    }
}

/// Own hand, belief, and the latents of the previous and next seat's most
/// recent moves (Pass latent when they have not moved).
pub fn state_features(obs: &Observation, table: &LatentTable) -> Vec<f64> {
    let mut v = Vec::with_capacity(STATE_WIDTH);
    v.extend_from_slice(&encode_hand(&obs.own_hand));
    let b = infer_belief(obs);
    v.extend_from_slice(&b.prev);
    v.extend_from_slice(&b.next);
    for last in &obs.last_two_moves {
        v.extend_from_slice(table.of_move(&last.unwrap_or(Move::Pass)));
    }
    v
}
