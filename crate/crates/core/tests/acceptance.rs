//! Acceptance suite. Runs each criterion in order, prints one PASS/FAIL line
//! per criterion and exits non-zero if any fail.

use std::collections::HashMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use ddz_core::arena::{play_game, run_match, Agent, AgentFactory, AgentKind, CqlAgent, RandomAgent, ScriptedAgent};
use ddz_core::cql::{argmax, train, AugmentedTransition, Candidates, CqlModel, Decision, TrainMode, TrainingConfig};
use ddz_core::decomp::{decompositions, enumerate_dfs, enumerate_dlx};
use ddz_core::engine::{export_record, import_record, GameRecord};
use ddz_core::features::{state_features, AutoencoderConfig, GroupEncoder, LatentTable, STATE_WIDTH};
use ddz_core::movegen::enumerate_all_moves;
use ddz_core::neural::{max_pool_set, max_pool_set_backward, AvgPool1d, Conv1d, Dense, Layer, Network, Residual};
use ddz_core::rhcp::{RhcpAgent, RhcpConfig, StrategyScoreCache};
use ddz_core::{classify, deal, ActionCatalog, CardMultiset, Category, GameState, Move, Rank, Seat};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Tables = (Arc<GroupEncoder>, Arc<LatentTable>);
type Pretrained = Result<(Arc<GroupEncoder>, Arc<LatentTable>, f64), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("action catalog size", catalog_size),
        ("RHCP equals brute-force partition oracle", rhcp_oracle),
        ("decomposition validity and DLX within DFS", decomposition_validity),
        ("Human Player 1 record replays", record_replay),
        ("DPN group-order invariance", dpn_invariance),
        ("layer gradient checks", gradient_checks),
        ("double-Q backups", double_q_backups),
        ("RHCP landlord beats random landlord", rhcp_strength),
        ("toy CQL landlord training", toy_cql_training),
        ("autoencoder reconstruction", autoencoder_reconstruction),
        ("legality fuzz over all agent kinds", legality_fuzz),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[{:>2}] PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[{:>2}] FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn random_hand(rng: &mut ChaCha8Rng, size: usize) -> CardMultiset {
    let mut deck: Vec<Rank> = Rank::ALL
        .iter()
        .flat_map(|&r| std::iter::repeat_n(r, r.copies_in_deck() as usize))
        .collect();
    deck.shuffle(rng);
    let mut counts = [0u8; 15];
    for r in &deck[..size] {
        counts[r.index()] += 1;
    }
    CardMultiset::from_counts(counts).unwrap()
}

// 1. Catalog size and per-category subtotals against closed-form counts.

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Closed-form subtotals. Runs use ranks 3..A (12 ranks) and at most 20
/// cards; kicker ranks are distinct and outside the principal ranks; pair
/// kickers exclude jokers; a kicker set of exactly the two jokers is barred.
fn expected_counts() -> Vec<(Category, usize)> {
    let runs = |len: usize| 13 - len;
    let seq = |min: usize, width: usize| (min..=12).filter(|l| l * width <= 20).map(runs).sum::<usize>();
    let airplane_solos: usize = (2..=5)
        .map(|l| runs(l) * (binom(15 - l, l) - if l == 2 { 1 } else { 0 }))
        .sum();
    let airplane_pairs: usize = (2..=4).map(|l| runs(l) * binom(13 - l, l)).sum();
    use Category::*;
    vec![
        (None, 1),
        (Solo, 15),
        (Pair, 13),
        (Trio, 13),
        (SequentialSolos, seq(5, 1)),
        (SequentialPairs, seq(3, 2)),
        (SequentialTriosTakeNone, seq(2, 3)),
        (SequentialTriosTakeOne, 13 * 14),
        (SequentialTriosTakeTwo, 13 * 12),
        (SequentialTriosSeriesTakeOne, airplane_solos),
        (SequentialTriosSeriesTakeTwo, airplane_pairs),
        (Bomb, 13),
        (FourTakeTwoSolos, 13 * (binom(14, 2) - 1)),
        (FourTakeTwoPairs, 13 * binom(12, 2)),
        (Nuke, 1),
    ]
}

fn catalog_size() -> Outcome {
    let start = Instant::now();
    let catalog = enumerate_all_moves();
    let elapsed = start.elapsed();
    let counts = catalog.category_counts();
    for (category, n) in &counts {
        println!("       {:<30} {n}", category.to_string());
    }
    ensure!(
        counts == expected_counts(),
        "subtotals {counts:?} differ from closed forms"
    );
    ensure!(catalog.len() == 13527, "total {} != 13527", catalog.len());
    ensure!(catalog.get(0) == Some(&Move::Pass), "Pass is not entry 0");
    ensure!(elapsed < Duration::from_secs(10), "enumeration took {elapsed:?}");
    Ok(format!("13527 entries in {elapsed:?}"))
}

// 2. RHCP against an oracle that classifies and scores sub-hands itself and
// enumerates every partition.

mod oracle {
    /// Rank values by index: 3..A = 3..14, 2 = 15, jokers 16 and 17.
    fn value(i: usize) -> i32 {
        i as i32 + 3
    }

    const ACE: usize = 11;
    const BJ: usize = 13;
    const RJ: usize = 14;

    fn run_of(ranks: &[usize]) -> bool {
        ranks.windows(2).all(|w| w[1] == w[0] + 1) && ranks.last().is_some_and(|&r| r <= ACE)
    }

    /// Score in half points of every way to read `c` as one group.
    pub fn parses(c: &[u8; 15]) -> Vec<i32> {
        let n: usize = c.iter().map(|&x| x as usize).sum();
        let present: Vec<usize> = (0..15).filter(|&i| c[i] > 0).collect();
        let mut out = Vec::new();
        if n == 0 {
            return out;
        }
        if present.len() == 1 {
            let r = present[0];
            let v = value(r);
            match c[r] {
                1..=3 => out.push(2 * (v - 10)),
                4 => out.push(2 * (v - 3 + 7)),
                _ => {}
            }
        }
        if n == 2 && c[BJ] == 1 && c[RJ] == 1 {
            out.push(40);
        }
        let top = present.last().map_or(0, |&r| value(r));
        let uniform = |k: u8| present.iter().all(|&r| c[r] == k);
        if uniform(1) && present.len() >= 5 && run_of(&present) {
            out.push(2 * (top - 10 + 1));
        }
        if uniform(2) && present.len() >= 3 && run_of(&present) {
            out.push(2 * (top - 10 + 1));
        }
        if uniform(3) && present.len() >= 2 && run_of(&present) {
            out.push(2 * (top - 10 + 1));
        }
        // Principal block of `copies` per rank over `run`, the rest kickers.
        for copies in [3u8, 4] {
            for lo in 0..13 {
                for hi in lo..13 {
                    let run: Vec<usize> = (lo..=hi).collect();
                    if run.iter().any(|&r| c[r] != copies) {
                        continue;
                    }
                    let len = run.len();
                    if copies == 4 && len > 1 || len > 1 && !run_of(&run) {
                        continue;
                    }
                    let kick: Vec<usize> = present.iter().copied().filter(|r| !run.contains(r)).collect();
                    let solo_kick = kick.iter().all(|&r| c[r] == 1) && !(kick.len() == 2 && c[BJ] == 1 && c[RJ] == 1);
                    let pair_kick = kick.iter().all(|&r| c[r] == 2);
                    let v = value(hi);
                    match (copies, len) {
                        (3, 1) if kick.len() == 1 && solo_kick => out.push(2 * (v - 10)),
                        (3, 1) if kick.len() == 1 && pair_kick => out.push(2 * (v - 10)),
                        (3, l) if l >= 2 && kick.len() == l && (solo_kick || pair_kick) => out.push(v - 3 + 1),
                        (4, 1) if kick.len() == 2 && (solo_kick || pair_kick) => out.push(v - 3),
                        _ => {}
                    }
                }
            }
        }
        out
    }

    /// Best total over all partitions of `c`, in half points.
    pub fn best_total(c: &[u8; 15]) -> i32 {
        let Some(low) = (0..15).find(|&i| c[i] > 0) else {
            return 0;
        };
        let mut best = i32::MIN;
        // Every sub-multiset holding a card of the lowest rank.
        let mut sub = [0u8; 15];
        fn rec(c: &[u8; 15], low: usize, i: usize, sub: &mut [u8; 15], best: &mut i32) {
            if i == 15 {
                if sub[low] == 0 {
                    return;
                }
                let ps = parses(sub);
                assert!(ps.len() <= 1, "ambiguous group {sub:?}: {ps:?}");
                if let Some(&s) = ps.first() {
                    let mut rest = *c;
                    for k in 0..15 {
                        rest[k] -= sub[k];
                    }
                    *best = (*best).max(s + best_total(&rest));
                }
                return;
            }
            for k in 0..=c[i] {
                sub[i] = k;
                rec(c, low, i + 1, sub, best);
            }
            sub[i] = 0;
        }
        rec(c, low, 0, &mut sub, &mut best);
        best
    }
}

fn rhcp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cache = StrategyScoreCache::new();
    for trial in 0..1000 {
        let size = rng.gen_range(1..=8);
        let hand = random_hand(&mut rng, size);
        let expected = oracle::best_total(hand.counts());
        let (group, score) = cache.best_group(&hand);
        ensure!(
            score.as_halves() == expected,
            "hand {hand}: RHCP {score:?}, oracle {expected} half points (trial {trial})"
        );
        let mut rest = *hand.counts();
        for (k, r) in rest.iter_mut().enumerate() {
            *r -= group.cards.counts()[k];
        }
        let own = oracle::parses(group.cards.counts());
        ensure!(own.len() == 1, "oracle cannot read chosen group {}", group.cards);
        ensure!(
            own[0] + oracle::best_total(&rest) == expected,
            "chosen group {} is not optimal for {hand}",
            group.cards
        );
    }
    Ok("1000 hands of 1..=8 cards, exact half-point equality".into())
}

// 3. Decomposition validity.

fn decomposition_is_valid(hand: &CardMultiset, groups: &[CardMultiset]) -> bool {
    let mut total = [0u8; 15];
    for g in groups {
        match classify(g) {
            Some(c) if c.category != Category::None && c.cards == *g => {}
            _ => return false,
        }
        for (t, &k) in total.iter_mut().zip(g.counts()) {
            *t += k;
        }
    }
    total == *hand.counts()
}

fn decomposition_validity() -> Outcome {
    let catalog = ActionCatalog::global();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut emitted = 0usize;
    let mut compared = 0usize;
    for _ in 0..1000 {
        let size = rng.gen_range(1..=20);
        let hand = random_hand(&mut rng, size);
        let sample = decompositions(&hand, 100, &mut rng);
        ensure!(!sample.decompositions.is_empty(), "no decomposition of {hand}");
        for d in &sample.decompositions {
            let groups: Vec<CardMultiset> = d
                .ids()
                .iter()
                .map(|&id| catalog.get(id as usize).unwrap().cards())
                .collect();
            ensure!(
                decomposition_is_valid(&hand, &groups),
                "invalid decomposition {d} of {hand}"
            );
            emitted += 1;
        }
        if size <= 10 {
            let dfs = enumerate_dfs(&hand);
            let dlx = enumerate_dlx(&hand);
            ensure!(dlx.is_subset(&dfs), "DLX result outside DFS for {hand}");
            for d in &dfs {
                let groups: Vec<CardMultiset> = d
                    .ids()
                    .iter()
                    .map(|&id| catalog.get(id as usize).unwrap().cards())
                    .collect();
                ensure!(
                    decomposition_is_valid(&hand, &groups),
                    "invalid DFS decomposition {d} of {hand}"
                );
            }
            compared += 1;
        }
    }
    let bulk = start.elapsed();
    ensure!(bulk < Duration::from_secs(120), "1000 hands took {bulk:?}");

    let mut slowest = Duration::ZERO;
    for _ in 0..100 {
        let hand = random_hand(&mut rng, 20);
        let t = Instant::now();
        let sample = decompositions(&hand, 100, &mut rng);
        slowest = slowest.max(t.elapsed());
        ensure!(!sample.decompositions.is_empty(), "no decomposition of {hand}");
    }
    ensure!(
        slowest < Duration::from_millis(100),
        "slowest 20-card sample took {slowest:?}"
    );
    Ok(format!(
        "{emitted} decompositions valid, DLX within DFS on {compared} hands, bulk {bulk:.1?}, slowest 20-card sample {slowest:.1?}"
    ))
}

// 4. Record replay.

fn record_replay() -> Outcome {
    let text = include_str!("data/human_player_1.txt");
    let record = GameRecord::from_text(text).map_err(|e| e.to_string())?;
    let end = import_record(&record).map_err(|e| e.to_string())?;
    ensure!(
        record.entries.len() == 22,
        "{} entries transcribed",
        record.entries.len()
    );
    ensure!(end.winner() == Some(Seat::Landlord), "winner {:?}", end.winner());
    Ok("22 moves legal, Landlord wins".into())
}

// 5. Permutation invariance of the decomposition scorer.

fn untrained_tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let enc = GroupEncoder::new(8, &mut rng);
        let table = LatentTable::build(&enc, ActionCatalog::global());
        (Arc::new(enc), Arc::new(table))
    })
}

fn random_midgame(rng: &mut ChaCha8Rng) -> GameState {
    loop {
        let mut g = deal(rng);
        for _ in 0..rng.gen_range(0..30) {
            if g.is_terminal() {
                break;
            }
            let mv = *g.legal_moves().choose(rng).unwrap();
            g = g.apply_move(&mv).unwrap();
        }
        if !g.is_terminal() {
            return g;
        }
    }
}

fn dpn_invariance() -> Outcome {
    let (enc, table) = untrained_tables();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let model = CqlModel::new(enc.clone(), table.clone(), &TrainingConfig::default(), &mut rng);
    let mut multi = 0;
    for _ in 0..1000 {
        let g = random_midgame(&mut rng);
        let obs = g.observe(g.to_act());
        let state = state_features(&obs, table);
        let sample = decompositions(&obs.own_hand, 100, &mut rng);
        let d = sample.decompositions.choose(&mut rng).unwrap().ids().to_vec();
        let mut shuffled = d.clone();
        shuffled.shuffle(&mut rng);
        shuffled.reverse();
        multi += usize::from(d.len() > 1);
        let a = model.online.q_combination(table, &state, std::slice::from_ref(&d))[0];
        let b = model
            .online
            .q_combination(table, &state, std::slice::from_ref(&shuffled))[0];
        ensure!(
            a.to_bits() == b.to_bits(),
            "Q changed under reordering: {a} vs {b} for {d:?} / {shuffled:?}"
        );
    }
    Ok(format!("1000 states bitwise equal ({multi} with several groups)"))
}

// 6. Gradient checks through the public layer API.

const STEP: f64 = 1e-4;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Worst relative error over input and parameter gradients of `c . net(x)`.
fn network_error(mut net: Network, x: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let c = random_vec(rng, net.output_width());
    let loss = |n: &Network, x: &[f64]| n.forward(x).iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
    net.zero_grad();
    let (_, trace) = net.forward_traced(x);
    let dx = net.backward(&trace, &c);
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let (mut p, mut m) = (x.to_vec(), x.to_vec());
        p[i] += STEP;
        m[i] -= STEP;
        worst = worst.max(rel_err(dx[i], (loss(&net, &p) - loss(&net, &m)) / (2.0 * STEP)));
    }
    let analytic: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();
    for (pi, grads) in analytic.iter().enumerate() {
        for (k, &g) in grads.iter().enumerate() {
            let orig = net.params()[pi].value.values[k];
            net.params_mut()[pi].value.values[k] = orig + STEP;
            let lp = loss(&net, x);
            net.params_mut()[pi].value.values[k] = orig - STEP;
            let lm = loss(&net, x);
            net.params_mut()[pi].value.values[k] = orig;
            worst = worst.max(rel_err(g, (lp - lm) / (2.0 * STEP)));
        }
    }
    worst
}

fn instance(kind: &str, rng: &mut ChaCha8Rng) -> f64 {
    match kind {
        "dense" => {
            let (i, o) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
            let net = Network::new(i, vec![Layer::Dense(Dense::new("d", i, o, rng))]).unwrap();
            let x = random_vec(rng, i);
            network_error(net, &x, rng)
        }
        "relu" => {
            let n = rng.gen_range(1..=8);
            let net = Network::new(n, vec![Layer::Relu]).unwrap();
            // Keep inputs clear of the kink.
            let x: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(0.01..1.0) * if rng.gen() { 1.0 } else { -1.0 })
                .collect();
            network_error(net, &x, rng)
        }
        "conv1d" => {
            let (ch, len) = (rng.gen_range(1..=3), rng.gen_range(2..=10));
            let kernel = rng.gen_range(1..=len);
            let conv = Conv1d::new("c", ch, len, rng.gen_range(1..=3), kernel, rng.gen_range(1..=3), rng);
            let net = Network::new(ch * len, vec![Layer::Conv1d(conv)]).unwrap();
            let x = random_vec(rng, ch * len);
            network_error(net, &x, rng)
        }
        "avgpool1d" => {
            let (ch, len) = (rng.gen_range(1..=3), rng.gen_range(1..=10));
            let pool = AvgPool1d {
                channels: ch,
                length: len,
                window: rng.gen_range(1..=len),
                stride: rng.gen_range(1..=3),
            };
            let net = Network::new(ch * len, vec![Layer::AvgPool1d(pool)]).unwrap();
            let x = random_vec(rng, ch * len);
            network_error(net, &x, rng)
        }
        "residual" => {
            let (i, o) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
            let net = Network::new(i, vec![Layer::Residual(Residual::new("r", i, o, rng))]).unwrap();
            let x = random_vec(rng, i);
            network_error(net, &x, rng)
        }
        "branches" => {
            let i = rng.gen_range(1..=5);
            let branches: Vec<Network> = (0..rng.gen_range(2..=3))
                .map(|b| {
                    let o = rng.gen_range(1..=4);
                    Network::new(i, vec![Layer::Dense(Dense::new(&format!("b{b}"), i, o, rng))]).unwrap()
                })
                .collect();
            let net = Network::new(i, vec![Layer::Branches(branches)]).unwrap();
            let x = random_vec(rng, i);
            network_error(net, &x, rng)
        }
        "set max-pool" => {
            let (k, w) = (rng.gen_range(1..=5), rng.gen_range(1..=6));
            // Distinct per coordinate so the winner is stable under the step.
            let items: Vec<Vec<f64>> = loop {
                let items: Vec<Vec<f64>> = (0..k).map(|_| random_vec(rng, w)).collect();
                let clear = (0..w).all(|j| (0..k).all(|a| (0..a).all(|b| (items[a][j] - items[b][j]).abs() > 1e-3)));
                if clear {
                    break items;
                }
            };
            let c = random_vec(rng, w);
            let loss = |items: &[Vec<f64>]| {
                let refs: Vec<&[f64]> = items.iter().map(|v| v.as_slice()).collect();
                max_pool_set(&refs).0.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()
            };
            let refs: Vec<&[f64]> = items.iter().map(|v| v.as_slice()).collect();
            let grads = max_pool_set_backward(&c, &max_pool_set(&refs).1, k);
            let mut worst: f64 = 0.0;
            for a in 0..k {
                for j in 0..w {
                    let (mut p, mut m) = (items.clone(), items.clone());
                    p[a][j] += STEP;
                    m[a][j] -= STEP;
                    worst = worst.max(rel_err(grads[a][j], (loss(&p) - loss(&m)) / (2.0 * STEP)));
                }
            }
            worst
        }
        _ => unreachable!(),
    }
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut report = Vec::new();
    for kind in [
        "dense",
        "relu",
        "conv1d",
        "avgpool1d",
        "residual",
        "branches",
        "set max-pool",
    ] {
        let worst = (0..100).map(|_| instance(kind, &mut rng)).fold(0.0, f64::max);
        ensure!(worst < 1e-4, "{kind}: relative error {worst:e}");
        report.push(format!("{kind} {worst:.1e}"));
    }
    Ok(format!(
        "100 instances each, worst relative error: {}",
        report.join(", ")
    ))
}

// 7. Double-Q targets on hand-built episodes with scalar networks.

/// Weights of a network whose every layer has one unit.
#[derive(Clone, Copy)]
struct Scalar {
    fc1: (f64, f64),
    /// DPN: global, state, bias, out weight, out bias.
    dpn: [f64; 5],
    /// MPN: local, global, state, bias, out weight, out bias.
    mpn: [f64; 6],
}

fn set_dense(d: &mut Dense, weights: &[f64], bias: f64) {
    d.weight.value.values.iter_mut().for_each(|w| *w = 0.0);
    d.weight.value.values[..weights.len()].copy_from_slice(weights);
    d.bias.value.values[0] = bias;
}

fn load_scalar(net: &mut ddz_core::cql::QNet, s: Scalar) {
    let fc1 = net.fc1.params_mut();
    let [w, b] = <[_; 2]>::try_from(fc1).ok().unwrap();
    w.value.values.iter_mut().for_each(|x| *x = 0.0);
    w.value.values[0] = s.fc1.0;
    b.value.values[0] = s.fc1.1;
    set_dense(&mut net.dpn.parts[0], &[s.dpn[0]], s.dpn[2]);
    set_dense(&mut net.dpn.parts[1], &[s.dpn[1]], 0.0);
    let rest = net.dpn.rest.params_mut();
    let [w, b] = <[_; 2]>::try_from(rest).ok().unwrap();
    w.value.values[0] = s.dpn[3];
    b.value.values[0] = s.dpn[4];
    set_dense(&mut net.mpn.parts[0], &[s.mpn[0]], s.mpn[3]);
    set_dense(&mut net.mpn.parts[1], &[s.mpn[1]], 0.0);
    set_dense(&mut net.mpn.parts[2], &[s.mpn[2]], 0.0);
    let rest = net.mpn.rest.params_mut();
    let [w, b] = <[_; 2]>::try_from(rest).ok().unwrap();
    w.value.values[0] = s.mpn[4];
    b.value.values[0] = s.mpn[5];
}

/// The scalar network's Q values, written out by hand.
fn scalar_q(s: &Scalar, table: &LatentTable, d: &Decision) -> Vec<f64> {
    let relu = |x: f64| x.max(0.0);
    let local = |id: u16| relu(s.fc1.0 * table.get(id as usize)[0] + s.fc1.1);
    let global = |ids: &[u16]| ids.iter().map(|&i| local(i)).fold(f64::NEG_INFINITY, f64::max);
    let st = d.state[0];
    match &d.candidates {
        Candidates::Decompositions(ds) => ds
            .iter()
            .map(|g| s.dpn[3] * relu(s.dpn[0] * global(g) + s.dpn[1] * st + s.dpn[2]) + s.dpn[4])
            .collect(),
        Candidates::Groups { decomposition, moves } => moves
            .iter()
            .map(|&m| {
                let pre = s.mpn[0] * local(m) + s.mpn[1] * global(decomposition) + s.mpn[2] * st + s.mpn[3];
                s.mpn[4] * relu(pre) + s.mpn[5]
            })
            .collect(),
    }
}

fn double_q_backups() -> Outcome {
    let (enc, table) = untrained_tables();
    let catalog = ActionCatalog::global();
    let id = |cards: &str| catalog.index_of_cards(&ddz_core::parse_cards(cards).unwrap()).unwrap() as u16;
    let config = TrainingConfig {
        fc1_units: 1,
        head_units: vec![1],
        gamma: 1.0,
        ..TrainingConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut model = CqlModel::new(enc.clone(), table.clone(), &config, &mut rng);
    // The online net prefers high local features, the target net low ones.
    let online = Scalar {
        fc1: (1.0, 2.0),
        dpn: [1.0, 0.5, 3.0, 1.0, 0.0],
        mpn: [1.0, 0.0, 0.5, 3.0, 1.0, 0.0],
    };
    let target = Scalar {
        fc1: (1.0, 2.0),
        dpn: [-1.0, 0.5, 6.0, 2.0, -1.0],
        mpn: [-1.0, 0.0, 0.5, 6.0, 2.0, -1.0],
    };
    load_scalar(&mut model.online, online);
    load_scalar(&mut model.target, target);

    let state = |x: f64| -> Arc<[f64]> {
        let mut s = vec![0.0; STATE_WIDTH];
        s[0] = x;
        s.into()
    };
    // Landlord holds 3,3,K,K,A and plays twice; the second play ends the game.
    let first_split = vec![id("3"), id("3"), id("K"), id("K"), id("A")];
    let c1 = Arc::new(Decision {
        state: state(0.2),
        candidates: Candidates::Decompositions(vec![
            vec![id("33"), id("KK"), id("A")],
            first_split.clone(),
            vec![id("33"), id("K"), id("K"), id("A")],
        ]),
    });
    let f1 = Arc::new(Decision {
        state: state(0.2),
        candidates: Candidates::Groups {
            decomposition: first_split,
            moves: vec![id("3"), id("K"), id("A")],
        },
    });
    let c2 = Arc::new(Decision {
        state: state(0.7),
        candidates: Candidates::Decompositions(vec![vec![id("33"), id("KK")], vec![id("3"), id("3"), id("KK")]]),
    });
    let f2 = Arc::new(Decision {
        state: state(0.7),
        candidates: Candidates::Groups {
            decomposition: vec![id("33"), id("KK")],
            moves: vec![id("33"), id("KK")],
        },
    });
    let episode = [
        AugmentedTransition {
            decision: c1,
            chosen: 1,
            reward: 0.0,
            next: Some(f1.clone()),
        },
        AugmentedTransition {
            decision: f1,
            chosen: 2,
            reward: 0.0,
            next: Some(c2.clone()),
        },
        AugmentedTransition {
            decision: c2,
            chosen: 0,
            reward: 0.0,
            next: Some(f2.clone()),
        },
        AugmentedTransition {
            decision: f2,
            chosen: 1,
            reward: 1.0,
            next: None,
        },
    ];

    let mut differs = 0;
    for (k, t) in episode.iter().enumerate() {
        let (expected, plain) = match &t.next {
            None => (t.reward, t.reward),
            Some(next) => {
                let pick = argmax(&scalar_q(&online, table, next));
                let tq = scalar_q(&target, table, next);
                (
                    t.reward + tq[pick],
                    t.reward + tq.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            }
        };
        let q_online = model.online.q_values(table, &t.decision);
        let hand_online = scalar_q(&online, table, &t.decision);
        for (a, b) in q_online.iter().zip(&hand_online) {
            ensure!((a - b).abs() < 1e-12, "transition {k}: network Q {a} vs hand {b}");
        }
        let got = model.target_value(t);
        ensure!(
            (got - expected).abs() < 1e-12,
            "transition {k}: target {got}, by hand {expected}"
        );
        ensure!(
            (model.max_backup(t) - plain).abs() < 1e-12,
            "transition {k}: max backup mismatch"
        );
        differs += usize::from((expected - plain).abs() > 1e-9);
    }
    ensure!(
        differs > 0,
        "online and target nets agree everywhere; episode does not separate double-Q from max"
    );

    // With online = target, double-Q equals the plain max backup.
    model.sync_target();
    for (k, t) in episode.iter().enumerate() {
        ensure!(
            model.target_value(t) == model.max_backup(t),
            "synced transition {k}: double-Q differs from max"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let random = CqlModel::new(
        enc.clone(),
        table.clone(),
        &TrainingConfig {
            fc1_units: 16,
            head_units: vec![16, 8],
            ..config
        },
        &mut rng,
    );
    for _ in 0..200 {
        let g = random_midgame(&mut rng);
        let sel = random.select_action(&g.observe(g.to_act()), 0.5, &mut rng);
        let g2 = random_midgame(&mut rng);
        let next = random.select_action(&g2.observe(g2.to_act()), 0.5, &mut rng);
        for t in sel.transitions(0.0, Some(next.combination.clone())) {
            ensure!(
                random.target_value(&t) == random.max_backup(&t),
                "synced random model: double-Q differs from max"
            );
        }
    }
    Ok(format!(
        "4 hand-built transitions exact ({differs} where double-Q differs from max), 400 synced transitions equal"
    ))
}

// 8. RHCP strength.

fn rhcp_strength() -> Outcome {
    let factory = AgentFactory::default();
    let seeds = [11, 12, 13, 14, 15];
    let rhcp = run_match(
        &factory,
        &[AgentKind::Rhcp, AgentKind::Random, AgentKind::Random],
        500,
        5,
        &seeds,
    )
    .map_err(|e| e.to_string())?;
    let random = run_match(
        &factory,
        &[AgentKind::Random, AgentKind::Random, AgentKind::Random],
        500,
        5,
        &seeds,
    )
    .map_err(|e| e.to_string())?;
    let margin = 100.0 * (rhcp.landlord_winrate() - random.landlord_winrate());
    let detail = format!(
        "RHCP landlord {:.3}±{:.3}, random landlord {:.3}±{:.3}, margin {margin:.1} points",
        rhcp.landlord_winrate(),
        rhcp.std[0],
        random.landlord_winrate(),
        random.std[0]
    );
    ensure!(margin >= 20.0, "{detail}");
    Ok(detail)
}

// 9 and 10. Autoencoder pretraining and toy CQL training.

fn pretrained() -> &'static Pretrained {
    static P: OnceLock<Pretrained> = OnceLock::new();
    P.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let catalog = ActionCatalog::global();
        let (enc, report) =
            GroupEncoder::pretrain(catalog, &AutoencoderConfig::default(), &mut rng).map_err(|e| e.to_string())?;
        let table = LatentTable::build(&enc, catalog);
        Ok((Arc::new(enc), Arc::new(table), report.accuracy))
    })
}

fn autoencoder_reconstruction() -> Outcome {
    let (enc, _, reported) = pretrained().as_ref().map_err(Clone::clone)?;
    let accuracy = enc.accuracy(ActionCatalog::global());
    ensure!(accuracy == *reported, "reported {reported} but measured {accuracy}");
    ensure!(accuracy >= 0.99, "exact reconstruction {accuracy:.4}");
    Ok(format!(
        "exact reconstruction {:.2}% over 13527 entries",
        100.0 * accuracy
    ))
}

fn toy_cql_training() -> Outcome {
    let (enc, table, _) = pretrained().as_ref().map_err(Clone::clone)?;
    let config = TrainingConfig {
        fc1_units: 64,
        head_units: vec![64, 32],
        ..TrainingConfig::default()
    };
    let start = Instant::now();
    let outcome = train(
        &config,
        TrainMode::Single(Seat::Landlord),
        enc.clone(),
        table.clone(),
        |p| {
            println!(
                "       epoch {:>2}: epsilon {:.3}, loss {}, winrate over {} episodes {:.2}",
                p.epoch,
                p.epsilon,
                p.loss.map_or("-".into(), |l| format!("{l:.4}")),
                config.eval_episodes,
                p.winrate
            );
        },
    );
    let elapsed = start.elapsed();
    ensure!(outcome.curve.len() == 10, "{} curve points", outcome.curve.len());
    let (_, model) = outcome.models.into_iter().next().ok_or("no model")?;

    let mut factory = AgentFactory::default();
    let key = PathBuf::from("toy-landlord");
    factory.insert_model(key.clone(), Arc::new(model));
    let opponents = [AgentKind::Rhcp, AgentKind::Rhcp];
    let roles = |l: AgentKind| [l, opponents[0].clone(), opponents[1].clone()];
    let seed = [2024];
    let cql = run_match(&factory, &roles(AgentKind::Cql(key)), 200, 1, &seed).map_err(|e| e.to_string())?;
    let base = run_match(&factory, &roles(AgentKind::Random), 200, 1, &seed).map_err(|e| e.to_string())?;
    let margin = 100.0 * (cql.landlord_winrate() - base.landlord_winrate());
    let detail = format!(
        "CQL landlord {:.3} vs random landlord {:.3} over 200 deals against RHCP: margin {margin:.1} points, trained in {:.0}s",
        cql.landlord_winrate(),
        base.landlord_winrate(),
        elapsed.as_secs_f64()
    );
    ensure!(margin >= 10.0, "{detail}");
    ensure!(elapsed < Duration::from_secs(7200), "{detail}");
    Ok(detail)
}

// 11. Legality fuzz.

fn legality_fuzz() -> Outcome {
    let (enc, table) = untrained_tables();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let small = TrainingConfig {
        fc1_units: 16,
        head_units: vec![16, 8],
        ..TrainingConfig::default()
    };
    let model = Arc::new(CqlModel::new(enc.clone(), table.clone(), &small, &mut rng));
    let kinds = ["random", "rhcp", "cql", "cql-explore"];
    let build = |kind: &str| -> Box<dyn Agent> {
        match kind {
            "random" => Box::new(RandomAgent),
            "rhcp" => Box::new(RhcpAgent::new(RhcpConfig::default())),
            "cql" => Box::new(CqlAgent {
                model: model.clone(),
                epsilon: 0.0,
            }),
            _ => Box::new(CqlAgent {
                model: model.clone(),
                epsilon: 0.3,
            }),
        }
    };
    let mut turns: HashMap<&str, usize> = HashMap::new();
    let mut total = 0usize;
    let mut games = 0usize;
    while total < 100_000 {
        let start = deal(&mut rng);
        let roles: [&str; 3] = std::array::from_fn(|_| *kinds.choose(&mut rng).unwrap());
        let mut agents: [Box<dyn Agent>; 3] = roles.map(build);
        let end = play_game(start.clone(), &mut agents, &mut rng).map_err(|e| format!("game {games}: {e}"))?;
        check_game(&start, &end)?;
        for t in end.history() {
            *turns.entry(roles[t.seat.index()]).or_default() += 1;
        }
        total += end.history().len();
        games += 1;

        // Replay the same deal with scripted agents.
        let record = export_record(&end);
        let mut scripted: [Box<dyn Agent>; 3] =
            Seat::ALL.map(|s| Box::new(ScriptedAgent::from_record(&record, s)) as Box<dyn Agent>);
        let replayed =
            play_game(start.clone(), &mut scripted, &mut rng).map_err(|e| format!("scripted replay: {e}"))?;
        ensure!(replayed == end, "scripted replay diverged in game {games}");
        *turns.entry("scripted").or_default() += replayed.history().len();
        total += replayed.history().len();
    }
    let mut counts: Vec<String> = turns.iter().map(|(k, v)| format!("{k} {v}")).collect();
    counts.sort();
    Ok(format!(
        "{total} turns over {games} deals, no illegal move or conservation failure ({})",
        counts.join(", ")
    ))
}

/// Every card of the deal is either played exactly once or still held, and
/// the record replays.
fn check_game(start: &GameState, end: &GameState) -> Result<(), String> {
    let mut seen = [0u8; 15];
    for seat in Seat::ALL {
        for (s, k) in seen.iter_mut().zip(end.hand(seat).counts()) {
            *s += k;
        }
    }
    for t in end.history() {
        for (s, k) in seen.iter_mut().zip(t.mv.cards().counts()) {
            *s += k;
        }
    }
    let deck = CardMultiset::full_deck();
    ensure!(seen == *deck.counts(), "cards not conserved: {seen:?}");
    let dealt: usize = Seat::ALL.iter().map(|&s| start.hand(s).len()).sum();
    ensure!(dealt == 54, "deal holds {dealt} cards");
    ensure!(end.is_terminal(), "game did not finish");
    let replay = import_record(&export_record(end)).map_err(|e| e.to_string())?;
    ensure!(replay.winner() == end.winner(), "record replay disagrees on the winner");
    Ok(())
}
