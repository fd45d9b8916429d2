use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CqlModel, ReplayBuffer, Selection, TrainingConfig};
use crate::engine::{deal, GameState, Seat};
use crate::features::{GroupEncoder, LatentTable};
use crate::rhcp::{RhcpAgent, RhcpConfig};

/// Which seats learn.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainMode {
    /// One learner against two fixed RHCP players.
    Single(Seat),
    /// Three independent learners.
    Adversarial,
}

impl TrainMode {
    pub fn seats(self) -> Vec<Seat> {
        match self {
            TrainMode::Single(s) => vec![s],
            TrainMode::Adversarial => Seat::ALL.to_vec(),
        }
    }
}

/// One learning-curve record, written after every epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub steps: usize,
    pub epsilon: f64,
    /// Mean training loss over the epoch's updates.
    pub loss: Option<f64>,
    /// Win rate of the first learning seat against RHCP opponents.
    pub winrate: f64,
    pub seat_winrates: Vec<(Seat, f64)>,
}

pub struct TrainOutcome {
    pub models: Vec<(Seat, CqlModel)>,
    pub curve: Vec<CurvePoint>,
}

struct Learner {
    seat: Seat,
    model: CqlModel,
    buffer: ReplayBuffer,
    pending: Option<Selection>,
    steps: usize,
}

impl Learner {
    fn close_pending(&mut self, reward: f64, next: Option<Arc<super::Decision>>) {
        if let Some(prev) = self.pending.take() {
            for t in prev.transitions(reward, next) {
                self.buffer.push(t);
            }
        }
    }
}

/// Runs the training loop. `on_epoch` sees each curve point as it is made.
pub fn train<F: FnMut(&CurvePoint)>(
    config: &TrainingConfig,
    mode: TrainMode,
    encoder: Arc<GroupEncoder>,
    latents: Arc<LatentTable>,
    mut on_epoch: F,
) -> TrainOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut learners: Vec<Learner> = mode
        .seats()
        .into_iter()
        .map(|seat| Learner {
            seat,
            model: CqlModel::new(encoder.clone(), latents.clone(), config, &mut rng),
            buffer: ReplayBuffer::new(config.memory),
            pending: None,
            steps: 0,
        })
        .collect();
    let mut rhcp = RhcpAgent::new(RhcpConfig::default());
    let total = config.epochs * config.steps_per_epoch;
    let mut curve = Vec::new();
    let mut losses = Vec::new();
    let mut step = 0;
    let mut state = deal(&mut rng);
    while step < total {
        if state.is_terminal() {
            let rewards = state.rewards().expect("terminal");
            for l in &mut learners {
                l.close_pending(rewards[l.seat.index()] as f64, None);
            }
            state = deal(&mut rng);
            continue;
        }
        let seat = state.to_act();
        let obs = state.observe(seat);
        let Some(l) = learners.iter_mut().find(|l| l.seat == seat) else {
            let mv = rhcp.act(&obs);
            state = state.apply_move(&mv).expect("RHCP plays legal moves");
            continue;
        };
        let sel = l.model.select_action(&obs, config.epsilon_at(step), &mut rng);
        l.close_pending(0.0, Some(sel.combination.clone()));
        state = state.apply_move(&sel.mv).expect("CQL plays legal moves");
        l.pending = Some(sel);
        l.steps += 1;
        step += 1;
        if l.steps % config.update_frequency == 0 && l.buffer.len() >= config.batch_size {
            let loss = l
                .model
                .train_step(&l.buffer, config.batch_size, &mut rng)
                .expect("buffer is large enough");
            losses.push(loss);
        }
        if step % config.steps_per_epoch == 0 {
            let epoch = step / config.steps_per_epoch;
            let eval_seed = config.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(epoch as u64));
            let seat_winrates: Vec<(Seat, f64)> = learners
                .iter()
                .map(|l| {
                    (
                        l.seat,
                        evaluate_vs_rhcp(&l.model, l.seat, config.eval_episodes, eval_seed),
                    )
                })
                .collect();
            let point = CurvePoint {
                epoch,
                steps: step,
                epsilon: config.epsilon_at(step),
                loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
                winrate: seat_winrates[0].1,
                seat_winrates,
            };
            losses.clear();
            on_epoch(&point);
            curve.push(point);
        }
    }
    TrainOutcome {
        models: learners.into_iter().map(|l| (l.seat, l.model)).collect(),
        curve,
    }
}

/// Greedy play at `seat` against RHCP in the other seats. Episode `i` is
/// dealt from `seed + i`; episodes run in parallel.
pub fn evaluate_vs_rhcp(model: &CqlModel, seat: Seat, episodes: usize, seed: u64) -> f64 {
    if episodes == 0 {
        return 0.0;
    }
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(episodes);
    let wins: usize = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut rhcp = RhcpAgent::new(RhcpConfig::default());
                    (w..episodes)
                        .step_by(workers)
                        .filter(|&i| {
                            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                            let mut g: GameState = deal(&mut rng);
                            while !g.is_terminal() {
                                let obs = g.observe(g.to_act());
                                let mv = if g.to_act() == seat {
                                    model.select_action(&obs, 0.0, &mut rng).mv
                                } else {
                                    rhcp.act(&obs)
                                };
                                g = g.apply_move(&mv).expect("agents play legal moves");
                            }
                            g.winner().is_some_and(|w| w.same_team(seat))
                        })
                        .count()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker")).sum()
    });
    wins as f64 / episodes as f64
}
