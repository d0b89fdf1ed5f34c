use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{bce_grad, bce_loss, Gradients, LayerStack, Optimizer, OptimizerKind, Tensor};
use crate::error::{Error, Result};
use crate::rng::{seeded, substream};

const DROPOUT_STREAM: u64 = 0xd0;

/// One training example; `target` has the stack's output length.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted so that a no-op run can be expressed.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::config("invalid optimizer moment coefficients"));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return Err(Error::config("clip norm must be positive"));
        }
        Ok(())
    }
}

/// Mean loss over `samples` in inference mode.
pub fn mean_loss(stack: &LayerStack, samples: &[Sample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        total += bce_loss(&stack.predict(&s.input)?, &s.target)?;
    }
    Ok(total / samples.len() as f64)
}

/// Mini-batch training. Returns the loss trace: the loss before training
/// followed by the loss after each epoch, all measured in inference mode.
pub fn train(stack: &mut LayerStack, samples: &[Sample], config: &TrainConfig) -> Result<Vec<f64>> {
    run(stack, samples, config, |_, _| Ok(()))
}

/// Loss traces of [`train_with_validation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
}

/// As [`train`], and afterwards restore the parameters of the epoch with the
/// lowest validation loss (earliest on ties). With `epochs == 0` the stack is
/// left untouched and `best_epoch` is 0.
pub fn train_with_validation(
    stack: &mut LayerStack,
    samples: &[Sample],
    validation: &[Sample],
    config: &TrainConfig,
) -> Result<SelectionReport> {
    if validation.is_empty() {
        return Err(Error::input("model selection needs at least one validation sample"));
    }
    let mut validation_loss = vec![mean_loss(stack, validation)?];
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;
    let train_loss = run(stack, samples, config, |s, epoch| {
        let loss = mean_loss(s, validation)?;
        validation_loss.push(loss);
        if best.as_ref().is_none_or(|(b, _, _)| loss < *b) {
            best = Some((loss, epoch, s.layers.iter().map(|l| l.params.clone()).collect()));
        }
        Ok(())
    })?;
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            for (layer, p) in stack.layers.iter_mut().zip(params) {
                layer.params = p;
            }
            epoch
        }
        None => 0,
    };
    Ok(SelectionReport { train_loss, validation_loss, best_epoch })
}

fn run(
    stack: &mut LayerStack,
    samples: &[Sample],
    config: &TrainConfig,
    mut after_epoch: impl FnMut(&LayerStack, usize) -> Result<()>,
) -> Result<Vec<f64>> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::input("training needs at least one sample"));
    }
    let mut opt = Optimizer::new(
        config.optimizer,
        stack,
        config.beta1,
        config.beta2,
        config.eps,
        config.clip_norm,
    );
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = seeded(config.seed);
    // nothing below the first trainable layer needs a gradient
    let stop = stack.freeze_mask.iter().position(|f| !f).unwrap_or(stack.len());
    let mut trace = vec![mean_loss(stack, samples)?];
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = Gradients::zeros_like(stack);
            for (pos, &i) in batch.iter().enumerate() {
                let s = &samples[i];
                let mut rng = substream(config.seed ^ DROPOUT_STREAM, epoch as u64, (b * config.batch_size + pos) as u64);
                let (out, cache) = stack.forward(&s.input, Some(&mut rng)).map_err(|e| match e {
                    Error::Numeric { .. } => Error::Training { epoch, loss: f64::NAN },
                    e => e,
                })?;
                let g = bce_grad(&out.data, &s.target)?;
                grads.add_assign(&stack.backward_until(&cache, &g, stop)?.0);
            }
            grads.scale(1.0 / batch.len() as f64);
            opt.step(stack, &grads, config.learning_rate);
        }
        let loss = mean_loss(stack, samples).map_err(|e| match e {
            Error::Numeric { .. } => Error::Training { epoch, loss: f64::NAN },
            e => e,
        })?;
        if !loss.is_finite() {
            return Err(Error::Training { epoch, loss });
        }
        trace.push(loss);
        after_epoch(stack, epoch)?;
    }
    Ok(trace)
}
