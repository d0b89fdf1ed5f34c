use crate::error::{Error, Result};

pub const BCE_EPS: f64 = 1e-7;

fn check_labels(predictions: &[f64], labels: &[f64]) -> Result<()> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(Error::shape(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if let Some(y) = labels.iter().find(|y| **y != 0.0 && **y != 1.0) {
        return Err(Error::input(format!("label {y} is not 0 or 1")));
    }
    Ok(())
}

/// Mean binary cross-entropy with predictions clamped to `[eps, 1 - eps]`.
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_labels(predictions, labels)?;
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Gradient of [`bce_loss`] with respect to each prediction. Zero where the
/// clamp is active.
pub fn bce_grad(predictions: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
    check_labels(predictions, labels)?;
    let n = predictions.len() as f64;
    Ok(predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            if !(BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
                0.0
            } else {
                (p - y) / (p * (1.0 - p)) / n
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng as _;

    #[test]
    fn known_values() {
        assert!((bce_loss(&[0.5], &[1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let l = bce_loss(&[1.0 - BCE_EPS], &[1.0]).unwrap();
        assert!((l - 1e-7).abs() < 1e-12);
        assert!(matches!(bce_loss(&[0.5], &[2.0]), Err(Error::Input(_))));
    }

    #[test]
    fn batch_is_mean_of_samples() {
        let mut rng = seeded(9);
        let p: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..100).map(|_| f64::from(rng.random::<bool>() as u8)).collect();
        let oracle: f64 = p
            .iter()
            .zip(&y)
            .map(|(p, y)| if *y == 1.0 { -p.max(BCE_EPS).ln() } else { -(1.0 - p.min(1.0 - BCE_EPS)).ln() })
            .sum::<f64>()
            / 100.0;
        assert!((bce_loss(&p, &y).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn grad_matches_difference() {
        let p = [0.3, 0.8];
        let y = [1.0, 0.0];
        let g = bce_grad(&p, &y).unwrap();
        for i in 0..2 {
            let mut hi = p;
            let mut lo = p;
            hi[i] += 1e-6;
            lo[i] -= 1e-6;
            let fd = (bce_loss(&hi, &y).unwrap() - bce_loss(&lo, &y).unwrap()) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6);
        }
    }
}
