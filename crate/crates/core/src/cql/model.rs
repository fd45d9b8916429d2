use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::rngs::mock::StepRng;
use rand::Rng;

use super::{argmax, Candidates, CqlError, Decision, ReplayBuffer, Selection, TrainingConfig};
use crate::cards::beats;
use crate::decomp::decompositions;
use crate::engine::Observation;
use crate::features::{state_features, GroupEncoder, LatentTable, LATENT_WIDTH, STATE_WIDTH};
use crate::movegen::{ActionCatalog, Move};
use crate::neural::{
    load_params, load_shapes, max_pool_set, max_pool_set_backward, save_params, Adam, Dense, Layer, Network, Param,
};

/// A scoring head whose first layer is split over its concatenated inputs:
/// `rest(sum_i parts[i](x_i))`, which equals a dense layer on the
/// concatenation and lets shared inputs be projected once.
#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub parts: Vec<Dense>,
    pub rest: Network,
}

impl Head {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: &[usize], units: &[usize], rng: &mut R) -> Head {
        let parts = inputs
            .iter()
            .enumerate()
            .map(|(i, &w)| Dense::new(&format!("{name}.in{i}"), w, units[0], rng))
            .collect();
        let mut layers = Vec::new();
        let mut prev = units[0];
        for (i, &u) in units[1..].iter().enumerate() {
            layers.push(Layer::Relu);
            layers.push(Layer::Dense(Dense::new(&format!("{name}.fc{}", i + 1), prev, u, rng)));
            prev = u;
        }
        layers.push(Layer::Relu);
        layers.push(Layer::Dense(Dense::new(&format!("{name}.out"), prev, 1, rng)));
        Head {
            parts,
            rest: Network::new(units[0], layers).expect("head shapes"),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v: Vec<&Param> = self.parts.iter().flat_map(Dense::params).collect();
        v.extend(self.rest.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v: Vec<&mut Param> = self.parts.iter_mut().flat_map(Dense::params_mut).collect();
        v.extend(self.rest.params_mut());
        v
    }

    fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Network sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    /// Filters per encoder convolution branch.
    pub filters: usize,
    pub fc1_units: usize,
    pub head_units: Vec<usize>,
}

/// FC1 plus the two heads: DPN over (global feature, state) and MPN over
/// (local feature, global feature, state).
#[derive(Clone, Debug, PartialEq)]
pub struct QNet {
    pub fc1: Network,
    pub dpn: Head,
    pub mpn: Head,
}

impl QNet {
    pub fn new<R: Rng + ?Sized>(fc1_units: usize, head_units: &[usize], rng: &mut R) -> QNet {
        let fc1 = Network::new(
            LATENT_WIDTH,
            vec![
                Layer::Dense(Dense::new("fc1", LATENT_WIDTH, fc1_units, rng)),
                Layer::Relu,
            ],
        )
        .expect("fc1 shapes");
        QNet {
            fc1,
            dpn: Head::new("dpn", &[fc1_units, STATE_WIDTH], head_units, rng),
            mpn: Head::new("mpn", &[fc1_units, fc1_units, STATE_WIDTH], head_units, rng),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.fc1.params();
        v.extend(self.dpn.params());
        v.extend(self.mpn.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.fc1.params_mut();
        v.extend(self.dpn.params_mut());
        v.extend(self.mpn.params_mut());
        v
    }

    pub fn zero_grad(&mut self) {
        self.fc1.zero_grad();
        self.dpn.zero_grad();
        self.mpn.zero_grad();
    }

    /// Local feature of one catalog entry.
    pub fn local_feature(&self, latents: &LatentTable, id: u16) -> Vec<f64> {
        self.fc1.forward(latents.get(id as usize))
    }

    fn fill(&self, latents: &LatentTable, ids: &[u16], cache: &mut HashMap<u16, Vec<f64>>) {
        for &id in ids {
            cache.entry(id).or_insert_with(|| self.local_feature(latents, id));
        }
    }

    fn global(cache: &HashMap<u16, Vec<f64>>, ids: &[u16]) -> Vec<f64> {
        let feats: Vec<&[f64]> = ids.iter().map(|id| cache[id].as_slice()).collect();
        max_pool_set(&feats).0
    }

    /// DPN scores, one per decomposition.
    pub fn q_combination(&self, latents: &LatentTable, state: &[f64], decomps: &[Vec<u16>]) -> Vec<f64> {
        let s = self.dpn.parts[1].forward(state);
        let mut cache = HashMap::new();
        decomps
            .iter()
            .map(|d| {
                self.fill(latents, d, &mut cache);
                let g = Self::global(&cache, d);
                let pre = add(&self.dpn.parts[0].forward(&g), &s);
                self.dpn.rest.forward(&pre)[0]
            })
            .collect()
    }

    /// Global feature of a decomposition.
    pub fn global_feature(&self, latents: &LatentTable, decomposition: &[u16]) -> Vec<f64> {
        let mut cache = HashMap::new();
        self.fill(latents, decomposition, &mut cache);
        Self::global(&cache, decomposition)
    }

    /// MPN scores, one per candidate move of the decomposition.
    pub fn q_fine(&self, latents: &LatentTable, state: &[f64], decomposition: &[u16], moves: &[u16]) -> Vec<f64> {
        let g = self.global_feature(latents, decomposition);
        let shared = add(&self.mpn.parts[1].forward(&g), &self.mpn.parts[2].forward(state));
        moves
            .iter()
            .map(|&id| {
                let local = self.local_feature(latents, id);
                let pre = add(&self.mpn.parts[0].forward(&local), &shared);
                self.mpn.rest.forward(&pre)[0]
            })
            .collect()
    }

    pub fn q_values(&self, latents: &LatentTable, d: &Decision) -> Vec<f64> {
        match &d.candidates {
            Candidates::Decompositions(ds) => self.q_combination(latents, &d.state, ds),
            Candidates::Groups { decomposition, moves } => self.q_fine(latents, &d.state, decomposition, moves),
        }
    }

    pub fn q_single(&self, latents: &LatentTable, d: &Decision, index: usize) -> f64 {
        match &d.candidates {
            Candidates::Decompositions(ds) => self.q_combination(latents, &d.state, &ds[index..=index])[0],
            Candidates::Groups { decomposition, moves } => {
                self.q_fine(latents, &d.state, decomposition, &moves[index..=index])[0]
            }
        }
    }

    /// Adds `dq * dQ(d, index)/dθ` to the gradients.
    pub fn accumulate_gradient(&mut self, latents: &LatentTable, d: &Decision, index: usize, dq: f64) {
        let QNet { fc1, dpn, mpn } = self;
        let pooled = |fc1: &Network, ids: &[u16]| {
            let traced: Vec<_> = ids
                .iter()
                .map(|&id| fc1.forward_traced(latents.get(id as usize)))
                .collect();
            let feats: Vec<&[f64]> = traced.iter().map(|(f, _)| f.as_slice()).collect();
            let (g, arg) = max_pool_set(&feats);
            (traced, g, arg)
        };
        let back_pooled =
            |fc1: &mut Network, traced: &[(Vec<f64>, crate::neural::Trace)], dg: &[f64], arg: &[usize]| {
                for (i, grad) in max_pool_set_backward(dg, arg, traced.len()).into_iter().enumerate() {
                    if grad.iter().any(|&v| v != 0.0) {
                        fc1.backward(&traced[i].1, &grad);
                    }
                }
            };
        match &d.candidates {
            Candidates::Decompositions(ds) => {
                let (traced, g, arg) = pooled(fc1, &ds[index]);
                let pre = add(&dpn.parts[0].forward(&g), &dpn.parts[1].forward(&d.state));
                let (_, t) = dpn.rest.forward_traced(&pre);
                let dpre = dpn.rest.backward(&t, &[dq]);
                let dg = dpn.parts[0].backward(&g, &dpre);
                dpn.parts[1].backward(&d.state, &dpre);
                back_pooled(fc1, &traced, &dg, &arg);
            }
            Candidates::Groups { decomposition, moves } => {
                let (traced, g, arg) = pooled(fc1, decomposition);
                let (local, lt) = fc1.forward_traced(latents.get(moves[index] as usize));
                let shared = add(&mpn.parts[1].forward(&g), &mpn.parts[2].forward(&d.state));
                let pre = add(&mpn.parts[0].forward(&local), &shared);
                let (_, t) = mpn.rest.forward_traced(&pre);
                let dpre = mpn.rest.backward(&t, &[dq]);
                let dlocal = mpn.parts[0].backward(&local, &dpre);
                let dg = mpn.parts[1].backward(&g, &dpre);
                mpn.parts[2].backward(&d.state, &dpre);
                fc1.backward(&lt, &dlocal);
                back_pooled(fc1, &traced, &dg, &arg);
            }
        }
    }
}

/// Online and target Q-networks over a frozen group encoder.
#[derive(Clone, Debug)]
pub struct CqlModel {
    pub arch: Architecture,
    pub encoder: Arc<GroupEncoder>,
    pub latents: Arc<LatentTable>,
    pub online: QNet,
    pub target: QNet,
    pub sampling_limit: usize,
    pub gamma: f64,
    pub target_sync: usize,
    optimizer: Adam,
    updates: u64,
}

impl CqlModel {
    pub fn new<R: Rng + ?Sized>(
        encoder: Arc<GroupEncoder>,
        latents: Arc<LatentTable>,
        config: &TrainingConfig,
        rng: &mut R,
    ) -> CqlModel {
        let filters = encoder_filters(&encoder);
        let online = QNet::new(config.fc1_units, &config.head_units, rng);
        CqlModel {
            arch: Architecture {
                filters,
                fc1_units: config.fc1_units,
                head_units: config.head_units.clone(),
            },
            encoder,
            latents,
            target: online.clone(),
            online,
            sampling_limit: config.sampling_limit,
            gamma: config.gamma,
            target_sync: config.target_sync,
            optimizer: Adam::new(config.learning_rate),
            updates: 0,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Samples decompositions of the hand, picks one ε-greedily by DPN, then
    /// picks ε-greedily by MPN among its groups that are legal now, plus
    /// Pass when responding. Pass is the only candidate when nothing in the
    /// decomposition beats the incumbent.
    pub fn select_action<R: Rng + ?Sized>(&self, obs: &Observation, epsilon: f64, rng: &mut R) -> Selection {
        let latents = &self.latents;
        let sample = decompositions(&obs.own_hand, self.sampling_limit, rng);
        let decomps: Vec<Vec<u16>> = sample.decompositions.iter().map(|d| d.ids().to_vec()).collect();
        let state: Arc<[f64]> = state_features(obs, latents).into();
        let combination = Arc::new(Decision {
            state: state.clone(),
            candidates: Candidates::Decompositions(decomps),
        });
        let chosen_combination = self.pick(&combination, epsilon, rng);
        let Candidates::Decompositions(decomps) = &combination.candidates else {
            unreachable!()
        };
        let decomposition = decomps[chosen_combination].clone();

        let catalog = ActionCatalog::global();
        let incumbent = obs.incumbent_group();
        let mut moves: Vec<u16> = decomposition
            .iter()
            .copied()
            .filter(|&id| match (incumbent, catalog.get(id as usize)) {
                (None, _) => true,
                (Some(inc), Some(Move::Play(g))) => beats(g, inc),
                _ => false,
            })
            .collect();
        moves.dedup();
        if incumbent.is_some() {
            moves.push(0);
        }
        let fine = Arc::new(Decision {
            state,
            candidates: Candidates::Groups { decomposition, moves },
        });
        let chosen_fine = self.pick(&fine, epsilon, rng);
        let Candidates::Groups { moves, .. } = &fine.candidates else {
            unreachable!()
        };
        let mv = *catalog.get(moves[chosen_fine] as usize).expect("catalog id");
        Selection {
            mv,
            combination,
            chosen_combination,
            fine,
            chosen_fine,
        }
    }

    fn pick<R: Rng + ?Sized>(&self, d: &Decision, epsilon: f64, rng: &mut R) -> usize {
        let explore = rng.gen::<f64>() < epsilon;
        if explore || d.candidates.len() == 1 {
            rng.gen_range(0..d.candidates.len())
        } else {
            argmax(&self.online.q_values(&self.latents, d))
        }
    }

    /// Double-Q regression target: the online network picks the successor's
    /// best candidate and the target network scores it.
    pub fn target_value(&self, t: &super::AugmentedTransition) -> f64 {
        match &t.next {
            None => t.reward,
            Some(next) => {
                let best = argmax(&self.online.q_values(&self.latents, next));
                t.reward + self.gamma * self.target.q_single(&self.latents, next, best)
            }
        }
    }

    /// Plain max backup through the target network.
    pub fn max_backup(&self, t: &super::AugmentedTransition) -> f64 {
        match &t.next {
            None => t.reward,
            Some(next) => {
                let q = self.target.q_values(&self.latents, next);
                t.reward + self.gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// One optimiser update on a uniform batch. Returns the batch's mean
    /// squared error before the update.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<f64, CqlError> {
        if buffer.len() < batch_size {
            return Err(CqlError::InsufficientBuffer {
                have: buffer.len(),
                need: batch_size,
            });
        }
        let batch = buffer.sample(batch_size, rng);
        let targets: Vec<f64> = batch.iter().map(|t| self.target_value(t)).collect();
        self.online.zero_grad();
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(&targets) {
            let q = self.online.q_single(&self.latents, &t.decision, t.chosen);
            let e = q - y;
            loss += e * e;
            let dq = 2.0 * e / batch_size as f64;
            self.online
                .accumulate_gradient(&self.latents, &t.decision, t.chosen, dq);
        }
        self.optimizer.step(&mut self.online.params_mut());
        self.updates += 1;
        if self.updates.is_multiple_of(self.target_sync as u64) {
            self.sync_target();
        }
        Ok(loss / batch_size as f64)
    }

    /// Writes encoder and online parameters.
    pub fn save(&self, path: &Path) -> Result<(), CqlError> {
        let mut params = self.encoder.params();
        params.extend(self.online.params());
        Ok(save_params(path, &params)?)
    }

    /// Reads a checkpoint, recovering the layout from its shapes. Online and
    /// target networks both get the stored parameters.
    pub fn load(path: &Path, config: &TrainingConfig) -> Result<CqlModel, CqlError> {
        let arch = infer_architecture(&load_shapes(path)?)?;
        let mut rng = StepRng::new(0, 0);
        let mut encoder = GroupEncoder::new(arch.filters, &mut rng);
        let mut online = QNet::new(arch.fc1_units, &arch.head_units, &mut rng);
        {
            let mut params = encoder.params_mut();
            params.extend(online.params_mut());
            load_params(path, &mut params)?;
        }
        let latents = LatentTable::build(&encoder, ActionCatalog::global());
        let config = TrainingConfig {
            fc1_units: arch.fc1_units,
            head_units: arch.head_units.clone(),
            ..config.clone()
        };
        let mut model = CqlModel::new(Arc::new(encoder), Arc::new(latents), &config, &mut rng);
        model.online = online;
        model.sync_target();
        Ok(model)
    }
}

fn encoder_filters(encoder: &GroupEncoder) -> usize {
    encoder.encoder.params()[0].value.shape[0]
}

/// Encoder parameters: four convolutions, the dense projection, the decoder.
const ENCODER_PARAMS: usize = 12;

/// Recovers network sizes from a checkpoint's parameter shapes.
pub fn infer_architecture(shapes: &[Vec<usize>]) -> Result<Architecture, CqlError> {
    let bad = |m: &str| CqlError::BadCheckpoint(m.to_string());
    if shapes.len() < ENCODER_PARAMS + 2 + 6 {
        return Err(bad("too few parameters"));
    }
    let filters = shapes[0][0];
    let fc1 = &shapes[ENCODER_PARAMS];
    if fc1.len() != 2 || fc1[1] != LATENT_WIDTH {
        return Err(bad("fc1 weight"));
    }
    let fc1_units = fc1[0];
    let dpn = ENCODER_PARAMS + 2;
    let mut head_units = vec![shapes[dpn][0]];
    let mut i = dpn + 4;
    loop {
        let w = shapes.get(i).ok_or_else(|| bad("dpn head truncated"))?;
        if w.len() != 2 {
            return Err(bad("dpn head weight"));
        }
        if w[0] == 1 {
            break;
        }
        head_units.push(w[0]);
        i += 2;
    }
    let expected = ENCODER_PARAMS + 2 + (4 + 2 * head_units.len()) + (6 + 2 * head_units.len());
    if shapes.len() != expected {
        return Err(bad("parameter count"));
    }
    Ok(Architecture {
        filters,
        fc1_units,
        head_units,
    })
}
