use rand::Rng;

use super::{axpy, dot, relu, relu_backward, Param};

/// Fully connected layer, `y = W x + b` with `W` stored row-major `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Dense {
        Dense {
            inputs,
            outputs,
            weight: Param::uniform(format!("{name}.w"), &[outputs, inputs], inputs, rng),
            bias: Param::uniform(format!("{name}.b"), &[outputs], inputs, rng),
        }
    }

    pub fn zeros(name: &str, inputs: usize, outputs: usize) -> Dense {
        Dense {
            inputs,
            outputs,
            weight: Param::zeros(format!("{name}.w"), &[outputs, inputs]),
            bias: Param::zeros(format!("{name}.b"), &[outputs]),
        }
    }

    /// Square identity map (zero bias).
    pub fn identity(name: &str, size: usize) -> Dense {
        let mut d = Dense::zeros(name, size, size);
        for i in 0..size {
            d.weight.value.values[i * size + i] = 1.0;
        }
        d
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.inputs, "dense input width");
        let w = &self.weight.value.values;
        let b = &self.bias.value.values;
        (0..self.outputs)
            .map(|o| b[o] + dot(&w[o * self.inputs..(o + 1) * self.inputs], x))
            .collect()
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let n = self.inputs;
        let mut dx = vec![0.0; n];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.bias.grad[o] += g;
            axpy(g, x, &mut self.weight.grad[o * n..(o + 1) * n]);
            axpy(g, &self.weight.value.values[o * n..(o + 1) * n], &mut dx);
        }
        dx
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// 1D convolution over `[channels, length]` input, producing
/// `[filters, (length - kernel) / stride + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub channels: usize,
    pub length: usize,
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `[filters, channels, kernel]`
    pub weight: Param,
    pub bias: Param,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        channels: usize,
        length: usize,
        filters: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Conv1d {
        assert!(kernel >= 1 && kernel <= length && stride >= 1);
        let fan_in = channels * kernel;
        Conv1d {
            channels,
            length,
            filters,
            kernel,
            stride,
            weight: Param::uniform(format!("{name}.w"), &[filters, channels, kernel], fan_in, rng),
            bias: Param::uniform(format!("{name}.b"), &[filters], fan_in, rng),
        }
    }

    pub fn out_len(&self) -> usize {
        (self.length - self.kernel) / self.stride + 1
    }

    pub fn output_size(&self) -> usize {
        self.filters * self.out_len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.channels * self.length, "conv input size");
        let out_len = self.out_len();
        let w = &self.weight.value.values;
        let mut y = vec![0.0; self.filters * out_len];
        for f in 0..self.filters {
            for p in 0..out_len {
                let start = p * self.stride;
                let mut acc = self.bias.value.values[f];
                for c in 0..self.channels {
                    let wk = &w[(f * self.channels + c) * self.kernel..][..self.kernel];
                    let xk = &x[c * self.length + start..][..self.kernel];
                    acc += dot(wk, xk);
                }
                y[f * out_len + p] = acc;
            }
        }
        y
    }

    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let out_len = self.out_len();
        let mut dx = vec![0.0; x.len()];
        for f in 0..self.filters {
            for p in 0..out_len {
                let g = dy[f * out_len + p];
                if g == 0.0 {
                    continue;
                }
                self.bias.grad[f] += g;
                let start = p * self.stride;
                for c in 0..self.channels {
                    let wo = (f * self.channels + c) * self.kernel;
                    let xo = c * self.length + start;
                    for k in 0..self.kernel {
                        self.weight.grad[wo + k] += g * x[xo + k];
                        dx[xo + k] += g * self.weight.value.values[wo + k];
                    }
                }
            }
        }
        dx
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Average pooling along the length axis of `[channels, length]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AvgPool1d {
    pub channels: usize,
    pub length: usize,
    pub window: usize,
    pub stride: usize,
}

impl AvgPool1d {
    pub fn out_len(&self) -> usize {
        (self.length - self.window) / self.stride + 1
    }

    pub fn output_size(&self) -> usize {
        self.channels * self.out_len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.channels * self.length, "pool input size");
        let out_len = self.out_len();
        let scale = 1.0 / self.window as f64;
        let mut y = Vec::with_capacity(self.channels * out_len);
        for c in 0..self.channels {
            for p in 0..out_len {
                let s: f64 = x[c * self.length + p * self.stride..][..self.window].iter().sum();
                y.push(s * scale);
            }
        }
        y
    }

    pub fn backward(&self, dy: &[f64]) -> Vec<f64> {
        let out_len = self.out_len();
        let scale = 1.0 / self.window as f64;
        let mut dx = vec![0.0; self.channels * self.length];
        for c in 0..self.channels {
            for p in 0..out_len {
                let g = dy[c * out_len + p] * scale;
                for v in &mut dx[c * self.length + p * self.stride..][..self.window] {
                    *v += g;
                }
            }
        }
        dx
    }
}

/// Residual fully connected block:
/// `y = skip(x) + W2 relu(W1 x + b1) + b2`, where `skip` is the identity
/// when widths match and a learned projection otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub fc1: Dense,
    pub fc2: Dense,
    pub proj: Option<Dense>,
}

/// Intermediate values of a residual block's forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualTrace {
    pub x: Vec<f64>,
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl Residual {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Residual {
        Residual {
            fc1: Dense::new(&format!("{name}.fc1"), inputs, outputs, rng),
            fc2: Dense::new(&format!("{name}.fc2"), outputs, outputs, rng),
            proj: (inputs != outputs).then(|| Dense::new(&format!("{name}.proj"), inputs, outputs, rng)),
        }
    }

    pub fn inputs(&self) -> usize {
        self.fc1.inputs
    }

    pub fn outputs(&self) -> usize {
        self.fc2.outputs
    }

    pub fn forward_traced(&self, x: &[f64]) -> (Vec<f64>, ResidualTrace) {
        let pre = self.fc1.forward(x);
        let hidden = relu(&pre);
        let mut y = self.fc2.forward(&hidden);
        match &self.proj {
            Some(p) => y.iter_mut().zip(p.forward(x)).for_each(|(a, b)| *a += b),
            None => y.iter_mut().zip(x).for_each(|(a, b)| *a += b),
        }
        (
            y,
            ResidualTrace {
                x: x.to_vec(),
                pre,
                hidden,
            },
        )
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_traced(x).0
    }

    pub fn backward(&mut self, trace: &ResidualTrace, dy: &[f64]) -> Vec<f64> {
        let dh = self.fc2.backward(&trace.hidden, dy);
        let dpre = relu_backward(&trace.pre, &dh);
        let mut dx = self.fc1.backward(&trace.x, &dpre);
        match &mut self.proj {
            Some(p) => {
                let dskip = p.backward(&trace.x, dy);
                dx.iter_mut().zip(dskip).for_each(|(a, b)| *a += b);
            }
            None => dx.iter_mut().zip(dy).for_each(|(a, b)| *a += b),
        }
        dx
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.fc1.params();
        v.extend(self.fc2.params());
        if let Some(p) = &self.proj {
            v.extend(p.params());
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.fc1.params_mut();
        v.extend(self.fc2.params_mut());
        if let Some(p) = &mut self.proj {
            v.extend(p.params_mut());
        }
        v
    }
}

/// Element-wise maximum over a non-empty set of equal-width vectors.
/// Returns the pooled vector and, per coordinate, the index of the first
/// item attaining the maximum.
pub fn max_pool_set(items: &[&[f64]]) -> (Vec<f64>, Vec<usize>) {
    assert!(!items.is_empty(), "max pool over an empty set");
    let width = items[0].len();
    let mut out = items[0].to_vec();
    let mut arg = vec![0usize; width];
    for (k, item) in items.iter().enumerate().skip(1) {
        assert_eq!(item.len(), width, "set items differ in width");
        for i in 0..width {
            if item[i] > out[i] {
                out[i] = item[i];
                arg[i] = k;
            }
        }
    }
    (out, arg)
}

/// Routes the pooled gradient to the recorded argmax items.
pub fn max_pool_set_backward(dy: &[f64], arg: &[usize], count: usize) -> Vec<Vec<f64>> {
    let mut grads = vec![vec![0.0; dy.len()]; count];
    for (i, (&g, &k)) in dy.iter().zip(arg).enumerate() {
        grads[k][i] += g;
    }
    grads
}

pub fn concat(parts: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend_from_slice(p);
    }
    out
}

/// Splits a concatenated gradient back into pieces of the given widths.
pub fn split(dy: &[f64], widths: &[usize]) -> Vec<Vec<f64>> {
    assert_eq!(dy.len(), widths.iter().sum::<usize>(), "split widths");
    let mut out = Vec::with_capacity(widths.len());
    let mut at = 0;
    for &w in widths {
        out.push(dy[at..at + w].to_vec());
        at += w;
    }
    out
}
