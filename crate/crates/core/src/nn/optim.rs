use serde::{Deserialize, Serialize};

use super::{Gradients, LayerStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// Optimizer state. Frozen layers are skipped at update time, so their
/// parameters never change regardless of their gradients.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    beta1: f64,
    beta2: f64,
    eps: f64,
    clip_norm: Option<f64>,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, stack: &LayerStack, beta1: f64, beta2: f64, eps: f64, clip_norm: Option<f64>) -> Self {
        let zeros: Vec<Vec<f64>> = stack.layers.iter().map(|l| vec![0.0; l.params.len()]).collect();
        Optimizer { kind, beta1, beta2, eps, clip_norm, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn adam(stack: &LayerStack) -> Self {
        Optimizer::new(OptimizerKind::Adam, stack, 0.9, 0.999, 1e-8, None)
    }

    pub fn step(&mut self, stack: &mut LayerStack, grads: &Gradients, lr: f64) {
        self.t += 1;
        let trainable = |i: usize| !stack.freeze_mask[i];
        let mut scale = 1.0;
        if let Some(max) = self.clip_norm {
            let norm = grads
                .layers
                .iter()
                .enumerate()
                .filter(|(i, _)| trainable(*i))
                .flat_map(|(_, g)| g.iter())
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            if norm > max {
                scale = max / norm;
            }
        }
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (i, layer) in stack.layers.iter_mut().enumerate() {
            if stack.freeze_mask[i] || layer.params.is_empty() {
                continue;
            }
            let g = &grads.layers[i];
            match self.kind {
                OptimizerKind::Sgd => {
                    for (p, gi) in layer.params.iter_mut().zip(g) {
                        *p -= lr * gi * scale;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[i], &mut self.v[i]);
                    for j in 0..layer.params.len() {
                        let gj = g[j] * scale;
                        m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                        v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                        let mhat = m[j] / bc1;
                        let vhat = v[j] / bc2;
                        layer.params[j] -= lr * mhat / (vhat.sqrt() + self.eps);
                    }
                }
            }
        }
    }
}
