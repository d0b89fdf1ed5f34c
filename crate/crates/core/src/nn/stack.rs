use serde::{Deserialize, Serialize};

use super::layer::{Aux, Layer, LayerSpec};
use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

/// Layers plus a per-layer freeze mask (`true` = frozen).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
    pub freeze_mask: Vec<bool>,
}

/// Activations of one forward pass: `activations[i]` is the input of layer
/// `i`, the last entry is the stack output.
#[derive(Debug, Clone)]
pub struct Cache {
    activations: Vec<Vec<f64>>,
    aux: Vec<Aux>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Parameter gradients, one (possibly empty) vector per layer, laid out like
/// [`Layer::params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub layers: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(stack: &LayerStack) -> Self {
        Gradients { layers: stack.layers.iter().map(|l| vec![0.0; l.params.len()]).collect() }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.layers.iter_mut().flatten().for_each(|x| *x *= s);
    }
}

impl LayerStack {
    /// Build and initialize a stack for inputs of `input_shape`.
    pub fn new(specs: &[LayerSpec], input_shape: &[usize], seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = Layer::new(*spec, &shape, &mut rng)?;
            shape = layer.out_shape.clone();
            layers.push(layer);
        }
        Ok(LayerStack { input_shape: input_shape.to_vec(), freeze_mask: vec![false; layers.len()], layers })
    }

    /// Rebuild a stack from specs and stored parameters.
    pub fn from_parts(specs: &[LayerSpec], input_shape: &[usize], params: Vec<Vec<f64>>) -> Result<Self> {
        let mut stack = LayerStack::new(specs, input_shape, 0)?;
        if params.len() != stack.layers.len() {
            return Err(Error::shape("parameter list length differs from layer count"));
        }
        for (i, (layer, p)) in stack.layers.iter_mut().zip(params).enumerate() {
            if p.len() != layer.params.len() {
                return Err(Error::shape(format!(
                    "layer {} expects {} parameters, got {}",
                    i + 1,
                    layer.params.len(),
                    p.len()
                )));
            }
            layer.params = p;
        }
        Ok(stack)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn output_shape(&self) -> &[usize] {
        self.layers.last().map(|l| l.out_shape.as_slice()).unwrap_or(&self.input_shape)
    }

    /// Freeze everything except the last `k` layers.
    pub fn set_trainable_last_k(&mut self, k: usize) -> Result<()> {
        let n = self.layers.len();
        if k > n {
            return Err(Error::config(format!("k = {k} exceeds layer count {n}")));
        }
        for (i, m) in self.freeze_mask.iter_mut().enumerate() {
            *m = i < n - k;
        }
        Ok(())
    }

    pub fn freeze_all(&mut self) {
        self.freeze_mask.fill(true);
    }

    /// Forward one sample. Dropout is active iff `rng` is given.
    pub fn forward(&self, input: &Tensor, mut rng: Option<&mut Rng>) -> Result<(Tensor, Cache)> {
        if input.shape != self.input_shape {
            return Err(Error::shape(format!(
                "input shape {:?}, stack expects {:?}",
                input.shape, self.input_shape
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut aux = Vec::with_capacity(self.layers.len());
        activations.push(input.data.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, a) = layer.forward(activations.last().expect("nonempty"), rng.as_deref_mut());
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric { layer: i + 1, kind: layer.spec.name().into() });
            }
            activations.push(y);
            aux.push(a);
        }
        let out = Tensor::new(self.output_shape().to_vec(), activations.last().expect("nonempty").clone())?;
        Ok((out, Cache { activations, aux }))
    }

    /// Inference on one sample.
    pub fn predict(&self, input: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward(input, None)?.0.data)
    }

    /// Parameter gradients for every layer, frozen or not, given the gradient
    /// of the loss with respect to the stack output.
    pub fn backward(&self, cache: &Cache, grad_output: &[f64]) -> Result<Gradients> {
        Ok(self.backward_with_input(cache, grad_output)?.0)
    }

    /// As [`backward`](Self::backward), also returning the input gradient.
    pub fn backward_with_input(&self, cache: &Cache, grad_output: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        self.backward_until(cache, grad_output, 0)
    }

    /// Backpropagate only down to layer index `stop`; gradients of earlier
    /// layers are left empty and the returned input gradient is the one
    /// entering layer `stop`.
    pub fn backward_until(&self, cache: &Cache, grad_output: &[f64], stop: usize) -> Result<(Gradients, Vec<f64>)> {
        let n = self.layers.len();
        if cache.activations.len() != n + 1 || cache.aux.len() != n {
            return Err(Error::State("forward cache does not belong to this stack".into()));
        }
        for (layer, x) in self.layers.iter().zip(&cache.activations) {
            if x.len() != layer.in_shape.iter().product::<usize>() {
                return Err(Error::State("forward cache does not belong to this stack".into()));
            }
        }
        if grad_output.len() != cache.output().len() {
            return Err(Error::shape("loss gradient length differs from stack output"));
        }
        let mut grads = vec![Vec::new(); n];
        let mut g = grad_output.to_vec();
        for i in (stop.min(n)..n).rev() {
            let (gx, gp) =
                self.layers[i].backward(&cache.activations[i], &cache.activations[i + 1], &cache.aux[i], &g);
            grads[i] = gp;
            g = gx;
        }
        Ok((Gradients { layers: grads }, g))
    }

    /// Round every parameter to the nearest 32-bit float.
    pub fn round_to_f32(&mut self) {
        for p in self.layers.iter_mut().flat_map(|l| l.params.iter_mut()) {
            *p = f64::from(*p as f32);
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.params.len()).sum()
    }
}
