//! A small deterministic network library with hand-written reverse-mode
//! gradients for the layer types the Q-networks need: dense, rectifier, 1D
//! convolution, average pooling, set-wise max pooling, concatenation and
//! residual blocks.
//!
//! All arithmetic is `f64`. Batches are evaluated item by item; the order of
//! every reduction is fixed, so repeated evaluation is bitwise identical.

mod adam;
mod io;
mod layers;
mod net;

pub use adam::Adam;
pub use io::{
    load_params, load_shapes, read_params, read_shapes, save_params, write_params, ParamFileError, PARAM_MAGIC,
    PARAM_VERSION,
};
pub use layers::{concat, max_pool_set, max_pool_set_backward, split, AvgPool1d, Conv1d, Dense, Residual};
pub use net::{Layer, LayerTrace, Network, Trace};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A shaped block of numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], values: Vec<f64>) -> Result<Tensor, NeuralError> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(NeuralError::ShapeMismatch {
                expected: shape.to_vec(),
                got: vec![values.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A named trainable tensor with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Param {
        let n = value.len();
        Param {
            name: name.into(),
            value,
            grad: vec![0.0; n],
        }
    }

    /// Fan-in scaled uniform initialisation, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn uniform<R: Rng + ?Sized>(name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut R) -> Param {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        Param::new(name, Tensor::from_vec(shape, values).expect("shape matches"))
    }

    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Param {
        Param::new(name, Tensor::zeros(shape))
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Dot product with four interleaved accumulators. The summation order is
/// fixed, so results are reproducible.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

pub fn relu_backward(x: &[f64], dy: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(dy)
        .map(|(&xi, &g)| if xi > 0.0 { g } else { 0.0 })
        .collect()
}

/// Copies every parameter value from `src` into `dst` (same layout).
pub fn copy_params(dst: &mut [&mut Param], src: &[&Param]) {
    assert_eq!(dst.len(), src.len(), "parameter lists differ");
    for (d, s) in dst.iter_mut().zip(src) {
        assert_eq!(d.value.shape, s.value.shape, "shape of {}", d.name);
        d.value.values.copy_from_slice(&s.value.values);
    }
}

#[cfg(test)]
mod tests;
