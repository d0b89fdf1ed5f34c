//! Explicit-backprop layer stack.
//!
//! Samples flow through the stack one at a time as `channels x length`
//! tensors (or flat vectors after [`LayerSpec::Flatten`] / dense layers).
//! Parameters live in 64-bit floats; checkpoints round them to 32 bits.

mod layer;
mod loss;
mod optim;
mod stack;
mod train;

pub use layer::{conv1d, Layer, LayerSpec};
pub use loss::{bce_grad, bce_loss, BCE_EPS};
pub use optim::{Optimizer, OptimizerKind};
pub use stack::{Cache, Gradients, LayerStack};
pub use train::{mean_loss, train, train_with_validation, Sample, SelectionReport, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    /// A flat vector.
    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    /// A single-channel sequence `[1 x len]`.
    pub fn sequence(data: Vec<f64>) -> Self {
        Tensor { shape: vec![1, data.len()], data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
