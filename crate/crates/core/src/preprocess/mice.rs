//! Multivariate imputation by chained equations.
//!
//! Round-robin least-squares regression: every continuous column with missing
//! cells is regressed on all other real-valued columns (age and the remaining
//! continuous columns, plus an intercept) over its observed rows, and its
//! missing cells are replaced by the fitted values. Sweeps repeat until the
//! largest change of any imputed cell falls below `tol` or `max_iter` sweeps
//! have run. Missing cells start at the observed column mean.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiceOrder {
    /// Columns visited in schema order.
    Ascending,
    /// Columns visited in a seeded random order, reshuffled every sweep.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiceConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub order: MiceOrder,
}

impl Default for MiceConfig {
    fn default() -> Self {
        Self {
            max_iter: 10,
            tol: 1e-3,
            seed: 0,
            order: MiceOrder::Ascending,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiceReport {
    pub iterations: usize,
    pub converged: bool,
    /// Largest absolute change of an imputed cell, per sweep.
    pub max_change: Vec<f64>,
}

pub fn mice_impute(matrix: &FeatureMatrix, config: &MiceConfig) -> Result<(FeatureMatrix, MiceReport)> {
    if !(config.tol >= 0.0) {
        return Err(Error::config("mice tol must be non-negative"));
    }
    for (k, (v, m)) in matrix.data.iter().zip(&matrix.missing_mask).enumerate() {
        if !m && !v.is_finite() {
            let (i, j) = (k / matrix.n_cols, k % matrix.n_cols);
            return Err(Error::input(format!("non-finite observed value at row {i}, column {j}")));
        }
    }
    let names = matrix.schema.column_names();
    let design = matrix.schema.scaled_columns();
    let mut out = matrix.clone();
    let n = matrix.n_rows;

    let mut targets = Vec::new();
    for j in matrix.schema.continuous_range() {
        let missing: Vec<usize> = (0..n).filter(|&i| matrix.is_missing(i, j)).collect();
        if missing.is_empty() {
            continue;
        }
        if missing.len() == n {
            return Err(Error::MissingAllValues(names[j].clone()));
        }
        let observed: Vec<usize> = (0..n).filter(|&i| !matrix.is_missing(i, j)).collect();
        let mean = observed.iter().map(|&i| matrix.get(i, j)).sum::<f64>() / observed.len() as f64;
        for &i in &missing {
            out.set(i, j, mean);
        }
        targets.push((j, observed, missing));
    }

    let mut report = MiceReport {
        iterations: 0,
        converged: targets.is_empty(),
        max_change: Vec::new(),
    };
    if targets.is_empty() {
        return Ok((out, report));
    }

    let mut order_rng = rng::substream(config.seed, 0x31ce, 0);
    let mut order: Vec<usize> = (0..targets.len()).collect();
    for _ in 0..config.max_iter {
        if config.order == MiceOrder::Random {
            order.shuffle(&mut order_rng);
        }
        let mut max_change = 0.0f64;
        for &t in &order {
            let (j, observed, missing) = &targets[t];
            let predictors: Vec<usize> = design.iter().copied().filter(|c| c != j).collect();
            let beta = least_squares(&out, observed, &predictors, *j)?;
            for &i in missing {
                let pred = beta[0]
                    + predictors
                        .iter()
                        .enumerate()
                        .map(|(k, &c)| beta[k + 1] * out.get(i, c))
                        .sum::<f64>();
                if !pred.is_finite() {
                    return Err(Error::Numeric {
                        layer: *j,
                        kind: "mice regression".into(),
                    });
                }
                max_change = max_change.max((pred - out.get(i, *j)).abs());
                out.set(i, *j, pred);
            }
        }
        report.iterations += 1;
        report.max_change.push(max_change);
        if max_change < config.tol {
            report.converged = true;
            break;
        }
    }
    Ok((out, report))
}

/// Intercept-first coefficients of `target ~ predictors` over `rows`.
fn least_squares(m: &FeatureMatrix, rows: &[usize], predictors: &[usize], target: usize) -> Result<Vec<f64>> {
    let p = predictors.len() + 1;
    let x = DMatrix::from_fn(rows.len(), p, |r, c| {
        if c == 0 {
            1.0
        } else {
            m.get(rows[r], predictors[c - 1])
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| m.get(i, target)));
    let svd = x.svd(true, true);
    let beta = svd
        .solve(&y, 1e-12)
        .map_err(|e| Error::input(format!("least squares failed: {e}")))?;
    Ok(beta.iter().copied().collect())
}
