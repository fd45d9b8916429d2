use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

const H: f64 = 1e-6;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()))
}

/// Compares analytic input and parameter gradients of `c . net(x)` with
/// central differences.
fn check_network(mut net: Network, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_vec(&mut rng, net.input_width());
    let c = random_vec(&mut rng, net.output_width());
    let loss = |n: &Network, x: &[f64]| n.forward(x).iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();

    net.zero_grad();
    let (_, trace) = net.forward_traced(&x);
    let dx = net.backward(&trace, &c);

    for i in 0..x.len() {
        let mut xp = x.clone();
        xp[i] += H;
        let mut xm = x.clone();
        xm[i] -= H;
        let num = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * H);
        assert!(close(num, dx[i]), "dx[{i}]: numeric {num}, analytic {}", dx[i]);
    }

    let analytic: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();
    for (pi, grads) in analytic.iter().enumerate() {
        for (k, &g) in grads.iter().enumerate() {
            let orig = net.params()[pi].value.values[k];
            net.params_mut()[pi].value.values[k] = orig + H;
            let lp = loss(&net, &x);
            net.params_mut()[pi].value.values[k] = orig - H;
            let lm = loss(&net, &x);
            net.params_mut()[pi].value.values[k] = orig;
            let num = (lp - lm) / (2.0 * H);
            assert!(close(num, g), "param {pi}[{k}]: numeric {num}, analytic {g}");
        }
    }
}

#[test]
fn dense_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Network::new(5, vec![Layer::Dense(Dense::new("d", 5, 4, &mut rng))]).unwrap();
    check_network(net, 2);
}

#[test]
fn relu_stack_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Network::new(
        6,
        vec![
            Layer::Dense(Dense::new("a", 6, 8, &mut rng)),
            Layer::Relu,
            Layer::Dense(Dense::new("b", 8, 3, &mut rng)),
        ],
    )
    .unwrap();
    check_network(net, 4);
}

#[test]
fn conv_and_pool_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let conv = Conv1d::new("c", 2, 9, 3, 3, 2, &mut rng);
    let out_len = conv.out_len();
    let pool = AvgPool1d {
        channels: 3,
        length: out_len,
        window: 2,
        stride: 1,
    };
    let net = Network::new(18, vec![Layer::Conv1d(conv), Layer::AvgPool1d(pool)]).unwrap();
    check_network(net, 6);
}

#[test]
fn residual_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let same = Network::new(5, vec![Layer::Residual(Residual::new("r", 5, 5, &mut rng))]).unwrap();
    check_network(same, 8);
    let proj = Network::new(5, vec![Layer::Residual(Residual::new("p", 5, 7, &mut rng))]).unwrap();
    check_network(proj, 9);
}

#[test]
fn branch_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a = Network::new(4, vec![Layer::Dense(Dense::new("a", 4, 3, &mut rng)), Layer::Relu]).unwrap();
    let b = Network::new(4, vec![Layer::Residual(Residual::new("b", 4, 2, &mut rng))]).unwrap();
    let net = Network::new(
        4,
        vec![
            Layer::Branches(vec![a, b]),
            Layer::Dense(Dense::new("h", 5, 2, &mut rng)),
        ],
    )
    .unwrap();
    check_network(net, 11);
}

#[test]
fn max_pool_set_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let items: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 6)).collect();
    let c = random_vec(&mut rng, 6);
    let loss = |items: &[Vec<f64>]| {
        let refs: Vec<&[f64]> = items.iter().map(|v| v.as_slice()).collect();
        max_pool_set(&refs).0.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()
    };
    let refs: Vec<&[f64]> = items.iter().map(|v| v.as_slice()).collect();
    let (_, arg) = max_pool_set(&refs);
    let grads = max_pool_set_backward(&c, &arg, items.len());
    for k in 0..items.len() {
        for i in 0..6 {
            let mut p = items.clone();
            p[k][i] += H;
            let mut m = items.clone();
            m[k][i] -= H;
            let num = (loss(&p) - loss(&m)) / (2.0 * H);
            assert!(close(num, grads[k][i]));
        }
    }
}

#[test]
fn max_pool_ties_go_to_first_item() {
    let a = [1.0, 2.0];
    let b = [1.0, 3.0];
    let (y, arg) = max_pool_set(&[&a, &b]);
    assert_eq!(y, vec![1.0, 3.0]);
    assert_eq!(arg, vec![0, 1]);
}

#[test]
fn concat_and_split_are_inverse() {
    let parts = [vec![1.0, 2.0], vec![3.0], vec![4.0, 5.0, 6.0]];
    let refs: Vec<&[f64]> = parts.iter().map(|v| v.as_slice()).collect();
    let joined = concat(&refs);
    assert_eq!(split(&joined, &[2, 1, 3]), parts.to_vec());
}

#[test]
fn residual_with_zero_branch_is_identity() {
    let r = Residual {
        fc1: Dense::zeros("a", 4, 4),
        fc2: Dense::zeros("b", 4, 4),
        proj: None,
    };
    let x = [0.5, -1.0, 2.0, 0.0];
    assert_eq!(r.forward(&x), x.to_vec());
}

#[test]
fn shape_mismatch_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let err = Network::new(
        3,
        vec![
            Layer::Dense(Dense::new("a", 3, 4, &mut rng)),
            Layer::Dense(Dense::new("b", 5, 1, &mut rng)),
        ],
    );
    assert!(matches!(err, Err(NeuralError::ShapeMismatch { .. })));
}

fn small_net(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Network::new(
        3,
        vec![
            Layer::Residual(Residual::new("r", 3, 6, &mut rng)),
            Layer::Relu,
            Layer::Dense(Dense::new("o", 6, 1, &mut rng)),
        ],
    )
    .unwrap()
}

fn fit(seed: u64, steps: usize) -> (Network, Vec<f64>) {
    let mut net = small_net(seed);
    let mut opt = Adam::new(1e-2);
    let data: Vec<([f64; 3], f64)> = (0..16)
        .map(|i| {
            let t = i as f64 / 8.0 - 1.0;
            ([t, t * t, 1.0 - t], 2.0 * t - 0.5)
        })
        .collect();
    let mut losses = Vec::new();
    for _ in 0..steps {
        net.zero_grad();
        let mut total = 0.0;
        for (x, y) in &data {
            let (out, trace) = net.forward_traced(x);
            let e = out[0] - y;
            total += e * e;
            net.backward(&trace, &[2.0 * e / data.len() as f64]);
        }
        losses.push(total / data.len() as f64);
        opt.step(&mut net.params_mut());
    }
    (net, losses)
}

#[test]
fn adam_reduces_regression_loss() {
    let (_, losses) = fit(21, 100);
    assert!(losses[99] < losses[0] * 0.5, "{} -> {}", losses[0], losses[99]);
}

#[test]
fn adam_decreases_quadratic_every_step() {
    let mut p = Param::new("x", Tensor::from_vec(&[3], vec![3.0, -2.0, 1.5]).unwrap());
    let mut opt = Adam::new(1e-2);
    let f = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let mut last = f(&p.value.values);
    for _ in 0..100 {
        p.grad = p.value.values.iter().map(|x| 2.0 * x).collect();
        opt.step(&mut [&mut p]);
        let now = f(&p.value.values);
        assert!(now < last);
        last = now;
    }
}

#[test]
fn adam_with_zero_gradient_keeps_values() {
    let mut net = small_net(4);
    let before = net.clone();
    let mut opt = Adam::default();
    net.zero_grad();
    for _ in 0..5 {
        opt.step(&mut net.params_mut());
    }
    assert_eq!(net, before);
}

#[test]
fn training_is_bitwise_reproducible() {
    let (a, la) = fit(33, 30);
    let (b, lb) = fit(33, 30);
    assert_eq!(a, b);
    assert_eq!(
        la.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        lb.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn param_file_round_trip() {
    let src = small_net(5);
    let mut buf = Vec::new();
    write_params(&mut buf, &src.params()).unwrap();
    assert_eq!(&buf[..4], &PARAM_MAGIC);
    let mut dst = small_net(6);
    assert_ne!(src, dst);
    read_params(&mut buf.as_slice(), &mut dst.params_mut()).unwrap();
    assert_eq!(src, dst);
}

#[test]
fn param_file_rejects_other_shapes() {
    let src = small_net(5);
    let mut buf = Vec::new();
    write_params(&mut buf, &src.params()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut other = Network::new(3, vec![Layer::Dense(Dense::new("d", 3, 1, &mut rng))]).unwrap();
    let before = other.clone();
    assert!(read_params(&mut buf.as_slice(), &mut other.params_mut()).is_err());
    assert_eq!(other, before);

    let mut bad = buf.clone();
    bad[0] = b'X';
    let mut dst = small_net(6);
    assert!(matches!(
        read_params(&mut bad.as_slice(), &mut dst.params_mut()),
        Err(ParamFileError::BadMagic)
    ));
}
