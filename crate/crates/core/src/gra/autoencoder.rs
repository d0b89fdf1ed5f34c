use serde::{Deserialize, Serialize};

use crate::cohort::ConceptId;
use crate::error::{Error, Result};
use crate::nn::{mean_loss, train, LayerSpec, LayerStack, Sample, Tensor, TrainConfig};

/// One-hot concept block compressed to a dense code:
/// `Dense(d) -> ReLU -> SigmoidDense(D)`; the first two layers are the
/// encoder. Codes are standardized per dimension with statistics taken on
/// the pretraining rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub stack: LayerStack,
    pub columns: Vec<ConceptId>,
    pub code_mean: Vec<f64>,
    pub code_sd: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub initial_heldout_loss: f64,
    pub final_heldout_loss: f64,
}

pub fn autoencoder_specs(input_dim: usize, embedding_dim: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { out_dim: embedding_dim },
        LayerSpec::Relu,
        LayerSpec::SigmoidDense { out_dim: input_dim },
    ]
}

impl Autoencoder {
    pub fn input_dim(&self) -> usize {
        self.stack.input_shape[0]
    }

    pub fn embedding_dim(&self) -> usize {
        self.stack.layers[0].out_shape[0]
    }

    fn raw_code(&self, bits: &[f64]) -> Vec<f64> {
        let (h, _) = self.stack.layers[0].forward(bits, None);
        self.stack.layers[1].forward(&h, None).0
    }

    pub fn embed(&self, bits: &[f64]) -> Vec<f64> {
        let mut z = self.raw_code(bits);
        for ((v, m), s) in z.iter_mut().zip(&self.code_mean).zip(&self.code_sd) {
            *v = (*v - m) / s;
        }
        z
    }

    pub fn reconstruct(&self, bits: &[f64]) -> Result<Vec<f64>> {
        self.stack.predict(&Tensor::vector(bits.to_vec()))
    }
}

/// Train an autoencoder on boolean rows. Every tenth row is held out to
/// confirm that reconstruction improved on it.
pub fn pretrain_autoencoder(
    rows: &[Vec<f64>],
    columns: Vec<ConceptId>,
    embedding_dim: usize,
    config: &TrainConfig,
) -> Result<(Autoencoder, ReconstructionReport)> {
    let d_in = columns.len();
    if embedding_dim == 0 || embedding_dim >= d_in {
        return Err(Error::config(format!(
            "embedding dimension {embedding_dim} must lie in [1, {d_in})"
        )));
    }
    if rows.is_empty() {
        return Err(Error::input("autoencoder needs at least one row"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d_in || r.iter().any(|v| *v != 0.0 && *v != 1.0)) {
        return Err(Error::input(format!(
            "autoencoder rows must be boolean with {d_in} columns, got length {}",
            r.len()
        )));
    }
    let samples: Vec<Sample> = rows
        .iter()
        .map(|r| Sample { input: Tensor::vector(r.clone()), target: r.clone() })
        .collect();
    let (fit, heldout): (Vec<Sample>, Vec<Sample>) = if samples.len() >= 10 {
        let (h, f): (Vec<_>, Vec<_>) = samples.into_iter().enumerate().partition(|(i, _)| i % 10 == 9);
        (f.into_iter().map(|x| x.1).collect(), h.into_iter().map(|x| x.1).collect())
    } else {
        (samples.clone(), samples)
    };
    let mut stack = LayerStack::new(&autoencoder_specs(d_in, embedding_dim), &[d_in], config.seed)?;
    let initial = mean_loss(&stack, &heldout)?;
    train(&mut stack, &fit, config)?;
    stack.round_to_f32();
    let final_loss = mean_loss(&stack, &heldout)?;
    if config.learning_rate > 0.0 && config.epochs > 0 && !(final_loss < initial) {
        return Err(Error::Training { epoch: config.epochs, loss: final_loss });
    }
    stack.freeze_all();
    let mut ae = Autoencoder { stack, columns, code_mean: vec![0.0; embedding_dim], code_sd: vec![1.0; embedding_dim] };
    let codes: Vec<Vec<f64>> = rows.iter().map(|r| ae.raw_code(r)).collect();
    let n = codes.len() as f64;
    for j in 0..embedding_dim {
        let mean = codes.iter().map(|c| c[j]).sum::<f64>() / n;
        let var = codes.iter().map(|c| (c[j] - mean).powi(2)).sum::<f64>() / n;
        // a dead unit stays at zero after centering
        ae.code_mean[j] = f64::from(mean as f32);
        ae.code_sd[j] = if var.sqrt() > 1e-6 { f64::from(var.sqrt() as f32) } else { 1.0 };
    }
    Ok((
        ae,
        ReconstructionReport { initial_heldout_loss: initial, final_heldout_loss: final_loss },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patterns(n: usize, d: usize) -> Vec<Vec<f64>> {
        // each row switches on one column, plus a companion for every other row
        (0..n)
            .map(|i| {
                let mut r = vec![0.0; d];
                r[i % d] = 1.0;
                if i % 2 == 1 {
                    r[(i / 2 + 3) % d] = 1.0;
                }
                r
            })
            .collect()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig { epochs, batch_size: 10, learning_rate: 0.01, seed: 3, ..TrainConfig::default() }
    }

    #[test]
    fn near_orthogonal_patterns_reconstruct() {
        let d = 12;
        let rows = patterns(50, d);
        let (ae, report) = pretrain_autoencoder(&rows, (0..d as u64).collect(), d - 1, &cfg(200)).unwrap();
        assert!(report.final_heldout_loss < report.initial_heldout_loss);
        let mut err = 0.0;
        for r in &rows {
            let out = ae.reconstruct(r).unwrap();
            err += out.iter().zip(r).map(|(a, b)| (a - b).abs()).sum::<f64>();
        }
        let per_cell = err / (rows.len() * d) as f64;
        assert!(per_cell < 0.1, "{per_cell}");
    }

    #[test]
    fn zero_rows_decode_below_half() {
        let mut rows = patterns(40, 10);
        rows.extend(std::iter::repeat_n(vec![0.0; 10], 20));
        let (ae, _) = pretrain_autoencoder(&rows, (0..10).collect(), 4, &cfg(100)).unwrap();
        assert!(ae.reconstruct(&[0.0; 10]).unwrap().iter().all(|p| *p < 0.5));
    }

    #[test]
    fn deterministic_and_validated() {
        let rows = patterns(30, 8);
        let (a, _) = pretrain_autoencoder(&rows, (0..8).collect(), 3, &cfg(5)).unwrap();
        let (b, _) = pretrain_autoencoder(&rows, (0..8).collect(), 3, &cfg(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.embed(&rows[0]).len(), 3);
        assert!(matches!(pretrain_autoencoder(&rows, (0..8).collect(), 8, &cfg(5)), Err(Error::Config(_))));
        assert!(pretrain_autoencoder(&[vec![0.5; 8]], (0..8).collect(), 3, &cfg(5)).is_err());
    }
}
