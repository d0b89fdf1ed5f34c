use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::autoencoder::{pretrain_autoencoder, Autoencoder, ReconstructionReport};
use crate::error::{Error, Result};
use crate::nn::{train, train_with_validation, LayerSpec, LayerStack, Sample, Tensor, TrainConfig};
use crate::preprocess::{FeatureMatrix, FeatureSchema, ScalerParams};
use crate::rng::substream;

pub const CNN_LAYERS: usize = 18;
const SUBSAMPLE_STREAM: u64 = 0x5ab;

/// The 18-layer convolutional head. Parameterized layers sit at positions
/// 1, 3, 6, 8, 12, 15 and 18, so some values of k add no new parameters.
pub fn cnn_specs() -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Conv1d { out_channels: 8, kernel_size: 5, stride: 1 },
        Relu,
        Conv1d { out_channels: 8, kernel_size: 5, stride: 1 },
        Relu,
        MaxPool1d { window: 2 },
        Conv1d { out_channels: 16, kernel_size: 3, stride: 1 },
        Relu,
        Conv1d { out_channels: 16, kernel_size: 3, stride: 1 },
        Relu,
        MaxPool1d { window: 2 },
        Flatten,
        Dense { out_dim: 64 },
        Relu,
        Dropout { rate: 0.3 },
        Dense { out_dim: 32 },
        Relu,
        Dropout { rate: 0.3 },
        SigmoidDense { out_dim: 1 },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraConfig {
    pub embedding_dim: usize,
    pub autoencoder: TrainConfig,
    pub cnn: TrainConfig,
}

impl Default for GraConfig {
    fn default() -> Self {
        GraConfig {
            embedding_dim: 32,
            autoencoder: TrainConfig { epochs: 30, batch_size: 32, learning_rate: 3e-3, ..TrainConfig::default() },
            cnn: TrainConfig { epochs: 8, batch_size: 32, learning_rate: 1e-3, ..TrainConfig::default() },
        }
    }
}

impl GraConfig {
    /// Same configuration with every training seed derived from `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.autoencoder.seed = crate::rng::mix(seed, 1);
        self.cnn.seed = crate::rng::mix(seed, 2);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraModel {
    pub dx_ae: Autoencoder,
    pub med_ae: Autoencoder,
    pub cnn: LayerStack,
    pub schema: FeatureSchema,
    pub scaler: ScalerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub dx_autoencoder: ReconstructionReport,
    pub med_autoencoder: ReconstructionReport,
    pub cnn_loss: Vec<f64>,
}

/// Held-out inputs used to pick the training epoch.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a> {
    pub inputs: &'a [Tensor],
    pub labels: &'a [bool],
}

/// Train `stack`, keeping the epoch with the lowest validation loss when a
/// validation set is given.
fn fit(stack: &mut LayerStack, train_set: &[Sample], validation: Option<Validation>, config: &TrainConfig) -> Result<()> {
    match validation {
        Some(v) if !v.inputs.is_empty() => {
            if v.inputs.len() != v.labels.len() {
                return Err(Error::shape("one label per validation input required"));
            }
            train_with_validation(stack, train_set, &samples(v.inputs, v.labels), config)?;
        }
        _ => {
            train(stack, train_set, config)?;
        }
    }
    Ok(())
}

fn block(matrix: &FeatureMatrix, rows: &[usize], range: std::ops::Range<usize>) -> Vec<Vec<f64>> {
    rows.iter().map(|&i| matrix.row(i)[range.clone()].to_vec()).collect()
}

impl GraModel {
    /// Length of the assembled single-channel input.
    pub fn input_len(&self) -> usize {
        self.dx_ae.embedding_dim()
            + self.med_ae.embedding_dim()
            + self.schema.demographic_range().len()
            + self.schema.continuous_range().len()
    }

    fn check_matrix(&self, matrix: &FeatureMatrix) -> Result<()> {
        matrix.schema.validate()?;
        if matrix.schema != self.schema {
            return Err(Error::shape("matrix schema differs from the model schema"));
        }
        if matrix.has_missing_values() {
            return Err(Error::input("matrix still has missing values; impute before inference"));
        }
        Ok(())
    }

    /// `[dx embedding | med embedding | demographics | continuous]` for one
    /// model-ready row.
    pub fn assemble_row(&self, row: &[f64]) -> Result<Tensor> {
        let s = &self.schema;
        if row.len() != s.n_columns() {
            return Err(Error::shape(format!("row has {} values, schema has {}", row.len(), s.n_columns())));
        }
        let mut out = Vec::with_capacity(self.input_len());
        out.extend(self.dx_ae.embed(&row[s.dx_range()]));
        out.extend(self.med_ae.embed(&row[s.med_range()]));
        out.extend_from_slice(&row[s.demographic_range()]);
        out.extend_from_slice(&row[s.continuous_range()]);
        Ok(Tensor::sequence(out))
    }

    /// Assembled inputs for the given rows (all rows if `rows` is `None`).
    pub fn assemble(&self, matrix: &FeatureMatrix, rows: Option<&[usize]>) -> Result<Vec<Tensor>> {
        self.check_matrix(matrix)?;
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..matrix.n_rows).collect();
                &all
            }
        };
        rows.par_iter().map(|&i| self.assemble_row(matrix.row(i))).collect()
    }

    pub fn predict_inputs(&self, inputs: &[Tensor]) -> Result<Vec<f64>> {
        inputs.par_iter().map(|x| Ok(self.cnn.predict(x)?[0])).collect()
    }

    /// Risk score for every row of a model-ready matrix.
    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        self.predict_inputs(&self.assemble(matrix, None)?)
    }

    pub fn predict_rows(&self, matrix: &FeatureMatrix, rows: &[usize]) -> Result<Vec<f64>> {
        self.predict_inputs(&self.assemble(matrix, Some(rows))?)
    }
}

fn samples(inputs: &[Tensor], labels: &[bool]) -> Vec<Sample> {
    inputs
        .iter()
        .zip(labels)
        .map(|(x, y)| Sample { input: x.clone(), target: vec![f64::from(u8::from(*y))] })
        .collect()
}

/// Pretrain both autoencoders on the training rows, freeze them, then train
/// the convolutional head end to end.
pub fn pretrain_gra(
    matrix: &FeatureMatrix,
    labels: &[bool],
    train_rows: &[usize],
    scaler: ScalerParams,
    config: &GraConfig,
) -> Result<(GraModel, PretrainReport)> {
    if labels.len() != matrix.n_rows {
        return Err(Error::shape("one label per matrix row required"));
    }
    let schema = matrix.schema.clone();
    let (dx_ae, dx_rep) = pretrain_autoencoder(
        &block(matrix, train_rows, schema.dx_range()),
        schema.dx_columns.clone(),
        config.embedding_dim,
        &config.autoencoder,
    )?;
    let med_cfg = TrainConfig { seed: crate::rng::mix(config.autoencoder.seed, 7), ..config.autoencoder.clone() };
    let (med_ae, med_rep) = pretrain_autoencoder(
        &block(matrix, train_rows, schema.med_range()),
        schema.med_columns.clone(),
        config.embedding_dim,
        &med_cfg,
    )?;
    let mut model = GraModel { dx_ae, med_ae, cnn: LayerStack::new(&[], &[1], 0)?, schema, scaler };
    model.cnn = LayerStack::new(&cnn_specs(), &[1, model.input_len()], config.cnn.seed)?;
    let inputs = model.assemble(matrix, Some(train_rows))?;
    let y: Vec<bool> = train_rows.iter().map(|&i| labels[i]).collect();
    let cnn_loss = train(&mut model.cnn, &samples(&inputs, &y), &config.cnn)?;
    model.cnn.round_to_f32();
    Ok((model, PretrainReport { dx_autoencoder: dx_rep, med_autoencoder: med_rep, cnn_loss }))
}

/// Seeded order of row positions in which every prefix is label-stratified:
/// positives and negatives are shuffled separately and interleaved in
/// proportion. Prefixes of one order give nested subsamples.
pub fn stratified_order(labels: &[bool], seed: u64) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut substream(seed, SUBSAMPLE_STREAM, 1));
    neg.shuffle(&mut substream(seed, SUBSAMPLE_STREAM, 0));
    let (np, nn) = (pos.len(), neg.len());
    let mut out = Vec::with_capacity(labels.len());
    let (mut ip, mut in_) = (0, 0);
    while ip < np || in_ < nn {
        // take from the class that is furthest behind its share:
        // (ip + 1/2) / np  vs  (in + 1/2) / nn
        let take_pos = in_ == nn || (ip < np && (2 * ip + 1) * nn <= (2 * in_ + 1) * np);
        if take_pos {
            out.push(pos[ip]);
            ip += 1;
        } else {
            out.push(neg[in_]);
            in_ += 1;
        }
    }
    out
}

/// Rows used when fine-tuning on `fraction` percent of the training set:
/// the first `floor(fraction * n / 100)` entries of [`stratified_order`].
pub fn subsample(labels: &[bool], fraction: u32, seed: u64) -> Result<Vec<usize>> {
    if fraction == 0 || fraction > 100 {
        return Err(Error::config(format!("fraction {fraction}% outside 1..=100")));
    }
    let m = fraction as usize * labels.len() / 100;
    let mut order = stratified_order(labels, seed);
    order.truncate(m);
    Ok(order)
}

/// Fine-tune the last `k` CNN layers on `fraction` percent of the target
/// training rows. The autoencoders stay frozen; `k = 0` returns the model
/// unchanged.
pub fn finetune(
    model: &GraModel,
    matrix: &FeatureMatrix,
    labels: &[bool],
    k: usize,
    fraction: u32,
    config: &TrainConfig,
) -> Result<GraModel> {
    let inputs = model.assemble(matrix, None)?;
    finetune_inputs(model, &inputs, labels, None, k, fraction, config)
}

/// As [`finetune`], on inputs already assembled by `model`. With a
/// validation set the epoch with the lowest validation loss is kept.
pub fn finetune_inputs(
    model: &GraModel,
    inputs: &[Tensor],
    labels: &[bool],
    validation: Option<Validation>,
    k: usize,
    fraction: u32,
    config: &TrainConfig,
) -> Result<GraModel> {
    if k > CNN_LAYERS {
        return Err(Error::config(format!("k = {k} outside 0..={CNN_LAYERS}")));
    }
    if inputs.len() != labels.len() {
        return Err(Error::shape("one label per input required"));
    }
    let rows = subsample(labels, fraction, config.seed)?;
    if k == 0 {
        return Ok(model.clone());
    }
    if rows.is_empty() {
        return Err(Error::input("fine-tuning subsample is empty"));
    }
    let mut out = model.clone();
    out.cnn.set_trainable_last_k(k)?;
    let sel: Vec<Tensor> = rows.iter().map(|&i| inputs[i].clone()).collect();
    let y: Vec<bool> = rows.iter().map(|&i| labels[i]).collect();
    fit(&mut out.cnn, &samples(&sel, &y), validation, config)?;
    out.cnn.round_to_f32();
    Ok(out)
}
