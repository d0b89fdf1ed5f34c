use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Z-score parameters for the real-valued columns (age and continuous
/// measurements), fitted on training rows with the population sd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<usize>,
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

pub fn fit_standardizer(matrix: &FeatureMatrix, train_ids: &[u64]) -> Result<ScalerParams> {
    if train_ids.is_empty() {
        return Err(Error::input("standardizer needs at least one training row"));
    }
    let rows = matrix.row_indices(train_ids)?;
    let names = matrix.schema.column_names();
    let columns = matrix.schema.scaled_columns();
    let mut params = ScalerParams {
        columns: columns.clone(),
        names: columns.iter().map(|&j| names[j].clone()).collect(),
        mean: Vec::with_capacity(columns.len()),
        sd: Vec::with_capacity(columns.len()),
    };
    for &j in &columns {
        let values: Vec<f64> = rows
            .iter()
            .map(|&i| matrix.get(i, j))
            .filter(|v| !v.is_nan())
            .collect();
        let n = values.len() as f64;
        let distinct = values.iter().any(|v| *v != values[0]);
        if values.len() < 2 || !distinct {
            return Err(Error::DegenerateColumn(names[j].clone()));
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::DegenerateColumn(names[j].clone()));
        }
        params.mean.push(mean);
        params.sd.push(sd);
    }
    Ok(params)
}

/// Apply train-fitted parameters to every row. Missing cells stay missing;
/// boolean and one-hot columns are untouched.
pub fn apply_standardizer(matrix: &FeatureMatrix, params: &ScalerParams) -> Result<FeatureMatrix> {
    if params.columns != matrix.schema.scaled_columns() {
        return Err(Error::shape("scaler was fitted on a different column layout"));
    }
    let mut out = matrix.clone();
    for i in 0..out.n_rows {
        for (k, &j) in params.columns.iter().enumerate() {
            let v = out.get(i, j);
            if !v.is_nan() {
                out.set(i, j, (v - params.mean[k]) / params.sd[k]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{ContinuousColumn, FeatureSchema};

    fn matrix(values: &[f64]) -> FeatureMatrix {
        let schema = FeatureSchema {
            dx_columns: vec![1],
            med_columns: vec![],
            continuous_columns: vec![ContinuousColumn {
                concept_id: 9,
                name: "lab".into(),
            }],
            demographic_columns: vec!["age".into()],
            exclusion_list: vec![],
        };
        let mut data = Vec::new();
        let mut mask = Vec::new();
        for (i, v) in values.iter().enumerate() {
            data.extend([(i % 2) as f64, 40.0 + i as f64, *v]);
            mask.extend([false, false, v.is_nan()]);
        }
        FeatureMatrix::new(schema, (0..values.len() as u64).collect(), data, mask).unwrap()
    }

    #[test]
    fn z_scores_with_population_sd() {
        let m = matrix(&[1.0, 2.0, 3.0, 2.0]);
        let p = fit_standardizer(&m, &[0, 1, 2]).unwrap();
        assert_eq!(p.mean[1], 2.0);
        assert!((p.sd[1] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let s = apply_standardizer(&m, &p).unwrap();
        let z: Vec<f64> = (0..3).map(|i| s.get(i, 2)).collect();
        for (a, b) in z.iter().zip([-1.224744871391589, 0.0, 1.224744871391589]) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        // row 3 is a held-out value equal to the train mean
        assert_eq!(s.get(3, 2), 0.0);
        // boolean column untouched
        assert_eq!(s.column(0), m.column(0));
        let train_mean = (0..3).map(|i| s.get(i, 2)).sum::<f64>() / 3.0;
        assert!(train_mean.abs() < 1e-9);
        // not idempotent
        let twice = apply_standardizer(&s, &p).unwrap();
        assert_ne!(twice.column(2), s.column(2));
    }

    #[test]
    fn zero_variance_names_column() {
        let m = matrix(&[5.0, 5.0, 5.0]);
        match fit_standardizer(&m, &[0, 1, 2]) {
            Err(Error::DegenerateColumn(name)) => assert_eq!(name, "lab"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_cells_ignored_and_preserved() {
        let m = matrix(&[1.0, f64::NAN, 3.0]);
        let p = fit_standardizer(&m, &[0, 1, 2]).unwrap();
        assert_eq!(p.mean[1], 2.0);
        assert!(apply_standardizer(&m, &p).unwrap().get(1, 2).is_nan());
    }

    #[test]
    fn test_rows_do_not_move_params() {
        let a = matrix(&[1.0, 2.0, 3.0, 100.0]);
        let b = matrix(&[1.0, 2.0, 3.0, -7.0]);
        assert_eq!(
            fit_standardizer(&a, &[0, 1, 2]).unwrap(),
            fit_standardizer(&b, &[0, 1, 2]).unwrap()
        );
    }
}
