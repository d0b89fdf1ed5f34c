use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{finetune_inputs, GraModel, Validation, CNN_LAYERS};
use crate::error::{Error, Result};
use crate::eval::{evaluate, tune_threshold, EvalReport};
use crate::nn::TrainConfig;
use crate::pipeline::PreparedSite;

pub const DEFAULT_K_LIST: [usize; 12] = [0, 1, 3, 6, 7, 8, 9, 11, 12, 15, 16, 18];
pub const DEFAULT_FRACTIONS: [u32; 5] = [20, 40, 60, 80, 100];
/// Adam step size for fine-tuning; pretraining uses a smaller one.
pub const FINETUNE_LEARNING_RATE: f64 = 3e-3;

pub const GRID_CSV_HEADER: &str = "k,fraction,seed,auroc,auprc,accuracy,sensitivity,specificity,ppv,npv,f1,threshold";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub k: usize,
    pub fraction: u32,
    pub seed: u64,
    pub threshold: f64,
    pub metrics: EvalReport,
}

/// Fine-tune on a target site's training rows for every `(k, fraction,
/// seed)` cell, pick the threshold on its validation rows and evaluate on
/// its fixed test rows. Results are ordered by `(k, fraction, seed)`.
pub fn run_grid(
    model: &GraModel,
    target: &PreparedSite,
    k_list: &[usize],
    fractions: &[u32],
    seeds: &[u64],
    config: &TrainConfig,
) -> Result<Vec<GridResult>> {
    if k_list.is_empty() || fractions.is_empty() || seeds.is_empty() {
        return Err(Error::config("grid lists must be nonempty"));
    }
    if let Some(k) = k_list.iter().find(|k| **k > CNN_LAYERS) {
        return Err(Error::config(format!("k = {k} outside 0..={CNN_LAYERS}")));
    }
    if let Some(f) = fractions.iter().find(|f| **f == 0 || **f > 100) {
        return Err(Error::config(format!("fraction {f}% outside 1..=100")));
    }
    let train_inputs = model.assemble(&target.matrix, Some(&target.train_rows))?;
    let val_inputs = model.assemble(&target.matrix, Some(&target.validation_rows))?;
    let test_inputs = model.assemble(&target.matrix, Some(&target.test_rows))?;
    let train_labels = target.labels_at(&target.train_rows);
    let val_labels = target.labels_at(&target.validation_rows);
    let test_labels = target.labels_at(&target.test_rows);

    let cells: Vec<(usize, u32, u64)> = k_list
        .iter()
        .flat_map(|&k| fractions.iter().flat_map(move |&f| seeds.iter().map(move |&s| (k, f, s))))
        .collect();
    cells
        .par_iter()
        .map(|&(k, fraction, seed)| {
            let cfg = TrainConfig { seed, ..config.clone() };
            let validation = Validation { inputs: &val_inputs, labels: &val_labels };
            let tuned = finetune_inputs(model, &train_inputs, &train_labels, Some(validation), k, fraction, &cfg)?;
            let threshold = tune_threshold(&tuned.predict_inputs(&val_inputs)?, &val_labels)?;
            let metrics = evaluate(&tuned.predict_inputs(&test_inputs)?, &test_labels, threshold)?;
            Ok(GridResult { k, fraction, seed, threshold, metrics })
        })
        .collect()
}

pub fn grid_csv(results: &[GridResult]) -> String {
    let mut out = format!("{GRID_CSV_HEADER}\n");
    for r in results {
        let m = &r.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.k, r.fraction, r.seed, m.auroc, m.auprc, m.accuracy, m.sensitivity, m.specificity, m.ppv, m.npv, m.f1, r.threshold
        ));
    }
    out
}

/// Mean test AUROC over seeds for every `(k, fraction)` cell.
pub fn heatmap(results: &[GridResult]) -> BTreeMap<(usize, u32), f64> {
    let mut acc: BTreeMap<(usize, u32), (f64, usize)> = BTreeMap::new();
    for r in results {
        let e = acc.entry((r.k, r.fraction)).or_default();
        e.0 += r.metrics.auroc;
        e.1 += 1;
    }
    acc.into_iter().map(|(key, (s, n))| (key, s / n as f64)).collect()
}

pub fn heatmap_csv(results: &[GridResult]) -> String {
    let mut out = String::from("k,fraction,auroc\n");
    for ((k, f), a) in heatmap(results) {
        out.push_str(&format!("{k},{f},{a}\n"));
    }
    out
}

/// For each k, the fraction with the highest mean AUROC (lowest fraction on
/// ties) and that AUROC.
pub fn best_per_k(results: &[GridResult]) -> Vec<(usize, u32, f64)> {
    let mut best: BTreeMap<usize, (u32, f64)> = BTreeMap::new();
    for ((k, f), a) in heatmap(results) {
        match best.get(&k) {
            Some((_, b)) if *b >= a => {}
            _ => {
                best.insert(k, (f, a));
            }
        }
    }
    best.into_iter().map(|(k, (f, a))| (k, f, a)).collect()
}
