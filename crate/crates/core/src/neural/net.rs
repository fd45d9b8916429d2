use super::layers::{AvgPool1d, Conv1d, Dense, Residual, ResidualTrace};
use super::{relu, relu_backward, NeuralError, Param};

/// One stage of a [`Network`].
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Relu,
    Conv1d(Conv1d),
    AvgPool1d(AvgPool1d),
    Residual(Residual),
    /// Feeds the same input to every branch and concatenates the outputs.
    Branches(Vec<Network>),
}

/// What a layer kept from its forward pass.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerTrace {
    Input(Vec<f64>),
    Residual(ResidualTrace),
    Branches(Vec<Trace>),
    None,
}

/// Per-layer forward record, enough to run the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub layers: Vec<LayerTrace>,
}

impl Layer {
    fn output_width(&self, input: usize) -> usize {
        match self {
            Layer::Dense(d) => d.outputs,
            Layer::Relu => input,
            Layer::Conv1d(c) => c.output_size(),
            Layer::AvgPool1d(p) => p.output_size(),
            Layer::Residual(r) => r.outputs(),
            Layer::Branches(bs) => bs.iter().map(|b| b.output_width()).sum(),
        }
    }

    fn input_width(&self) -> Option<usize> {
        match self {
            Layer::Dense(d) => Some(d.inputs),
            Layer::Relu => None,
            Layer::Conv1d(c) => Some(c.channels * c.length),
            Layer::AvgPool1d(p) => Some(p.channels * p.length),
            Layer::Residual(r) => Some(r.inputs()),
            Layer::Branches(bs) => bs.first().map(|b| b.input_width()),
        }
    }
}

/// A feed-forward stack of layers with a fixed input width.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input: usize,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds a network, checking that consecutive widths agree.
    pub fn new(input: usize, layers: Vec<Layer>) -> Result<Network, NeuralError> {
        let mut width = input;
        for layer in &layers {
            if let Some(expected) = layer.input_width() {
                if expected != width {
                    return Err(NeuralError::ShapeMismatch {
                        expected: vec![expected],
                        got: vec![width],
                    });
                }
            }
            if let Layer::Branches(bs) = layer {
                if bs.iter().any(|b| b.input_width() != width) {
                    return Err(NeuralError::ShapeMismatch {
                        expected: vec![width],
                        got: bs.iter().map(|b| b.input_width()).collect(),
                    });
                }
            }
            width = layer.output_width(width);
        }
        Ok(Network { input, layers })
    }

    pub fn input_width(&self) -> usize {
        self.input
    }

    pub fn output_width(&self) -> usize {
        self.layers.iter().fold(self.input, |w, l| l.output_width(w))
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.check_input(x);
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = match layer {
                Layer::Dense(d) => d.forward(&h),
                Layer::Relu => relu(&h),
                Layer::Conv1d(c) => c.forward(&h),
                Layer::AvgPool1d(p) => p.forward(&h),
                Layer::Residual(r) => r.forward(&h),
                Layer::Branches(bs) => bs.iter().flat_map(|b| b.forward(&h)).collect(),
            };
        }
        h
    }

    fn check_input(&self, x: &[f64]) {
        assert_eq!(x.len(), self.input, "network input width");
    }

    /// Forward pass that keeps what the backward pass needs.
    pub fn forward_traced(&self, x: &[f64]) -> (Vec<f64>, Trace) {
        self.check_input(x);
        let mut h = x.to_vec();
        let mut traces = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, t) = match layer {
                Layer::Dense(d) => (d.forward(&h), LayerTrace::Input(h)),
                Layer::Relu => (relu(&h), LayerTrace::Input(h)),
                Layer::Conv1d(c) => (c.forward(&h), LayerTrace::Input(h)),
                Layer::AvgPool1d(p) => (p.forward(&h), LayerTrace::None),
                Layer::Residual(r) => {
                    let (y, t) = r.forward_traced(&h);
                    (y, LayerTrace::Residual(t))
                }
                Layer::Branches(bs) => {
                    let mut out = Vec::new();
                    let mut ts = Vec::with_capacity(bs.len());
                    for b in bs {
                        let (y, t) = b.forward_traced(&h);
                        out.extend(y);
                        ts.push(t);
                    }
                    (out, LayerTrace::Branches(ts))
                }
            };
            traces.push(t);
            h = next;
        }
        (h, Trace { layers: traces })
    }

    /// Accumulates parameter gradients for `dy` and returns `dL/dx`.
    pub fn backward(&mut self, trace: &Trace, dy: &[f64]) -> Vec<f64> {
        assert_eq!(trace.layers.len(), self.layers.len(), "trace from another network");
        let mut g = dy.to_vec();
        for (layer, t) in self.layers.iter_mut().zip(&trace.layers).rev() {
            g = match (layer, t) {
                (Layer::Dense(d), LayerTrace::Input(x)) => d.backward(x, &g),
                (Layer::Relu, LayerTrace::Input(x)) => relu_backward(x, &g),
                (Layer::Conv1d(c), LayerTrace::Input(x)) => c.backward(x, &g),
                (Layer::AvgPool1d(p), LayerTrace::None) => p.backward(&g),
                (Layer::Residual(r), LayerTrace::Residual(rt)) => r.backward(rt, &g),
                (Layer::Branches(bs), LayerTrace::Branches(ts)) => {
                    let mut dx = vec![0.0; bs[0].input_width()];
                    let mut at = 0;
                    for (b, bt) in bs.iter_mut().zip(ts) {
                        let w = b.output_width();
                        let d = b.backward(bt, &g[at..at + w]);
                        dx.iter_mut().zip(d).for_each(|(a, b)| *a += b);
                        at += w;
                    }
                    dx
                }
                _ => unreachable!("layer and trace kinds always match"),
            };
        }
        g
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => out.extend(d.params()),
                Layer::Conv1d(c) => out.extend(c.params()),
                Layer::Residual(r) => out.extend(r.params()),
                Layer::Branches(bs) => bs.iter().for_each(|b| out.extend(b.params())),
                Layer::Relu | Layer::AvgPool1d(_) => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => out.extend(d.params_mut()),
                Layer::Conv1d(c) => out.extend(c.params_mut()),
                Layer::Residual(r) => out.extend(r.params_mut()),
                Layer::Branches(bs) => bs.iter_mut().for_each(|b| out.extend(b.params_mut())),
                Layer::Relu | Layer::AvgPool1d(_) => {}
            }
        }
        out
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}
