use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.1, 0.2];

/// Patient-level train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<u64>,
    pub validation: Vec<u64>,
    pub test: Vec<u64>,
    pub seed: u64,
}

fn floor_share(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64) + 1e-9).floor() as usize
}

/// Label-stratified split. Totals are exactly `floor(r0 n)`, `floor(r1 n)`
/// and the remainder; within each part positives get their proportional
/// share (rounded), negatives fill the rest.
pub fn split(patient_ids: &[u64], labels: &[bool], ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if patient_ids.len() != labels.len() {
        return Err(Error::shape("patient ids and labels differ in length"));
    }
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let n = patient_ids.len();
    if n < 10 {
        return Err(Error::config(format!("split needs at least 10 patients, got {n}")));
    }
    let mut pos: Vec<u64> = patient_ids.iter().zip(labels).filter(|(_, l)| **l).map(|(id, _)| *id).collect();
    let mut neg: Vec<u64> = patient_ids.iter().zip(labels).filter(|(_, l)| !**l).map(|(id, _)| *id).collect();
    pos.shuffle(&mut rng::substream(seed, 0x5b1, 1));
    neg.shuffle(&mut rng::substream(seed, 0x5b1, 0));

    let n_train = floor_share(ratios[0], n);
    let n_val = floor_share(ratios[1], n);
    let (np, nn) = (pos.len(), neg.len());

    let alloc = |part: usize, ratio: f64, pos_left: usize, neg_left: usize| -> (usize, usize) {
        let want = (ratio * np as f64).round() as usize;
        let lo = part.saturating_sub(neg_left);
        let hi = part.min(pos_left);
        let p = want.clamp(lo, hi);
        (p, part - p)
    };
    let (p_train, n_train_neg) = alloc(n_train, ratios[0], np, nn);
    let (p_val, n_val_neg) = alloc(n_val, ratios[1], np - p_train, nn - n_train_neg);

    let mut train: Vec<u64> = pos[..p_train].iter().chain(&neg[..n_train_neg]).copied().collect();
    let mut validation: Vec<u64> = pos[p_train..p_train + p_val]
        .iter()
        .chain(&neg[n_train_neg..n_train_neg + n_val_neg])
        .copied()
        .collect();
    let mut test: Vec<u64> = pos[p_train + p_val..]
        .iter()
        .chain(&neg[n_train_neg + n_val_neg..])
        .copied()
        .collect();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        validation,
        test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn labels(n: usize, every: usize) -> (Vec<u64>, Vec<bool>) {
        ((0..n as u64).collect(), (0..n).map(|i| i % every == 0).collect())
    }

    #[test]
    fn published_cohort_sizes() {
        let (ids, y) = labels(20_636, 7);
        let s = split(&ids, &y, DEFAULT_RATIOS, 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (14_445, 2_063, 4_128));
    }

    #[test]
    fn ten_patients() {
        let (ids, y) = labels(10, 3);
        let s = split(&ids, &y, DEFAULT_RATIOS, 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (7, 1, 2));
    }

    #[test]
    fn deterministic_and_stratified() {
        let (ids, y) = labels(1000, 6);
        let a = split(&ids, &y, DEFAULT_RATIOS, 9).unwrap();
        assert_eq!(a, split(&ids, &y, DEFAULT_RATIOS, 9).unwrap());
        assert_ne!(a, split(&ids, &y, DEFAULT_RATIOS, 10).unwrap());
        let prev = |part: &[u64]| part.iter().filter(|id| y[**id as usize]).count() as f64 / part.len() as f64;
        let overall = y.iter().filter(|v| **v).count() as f64 / 1000.0;
        for part in [&a.train, &a.validation, &a.test] {
            assert!((prev(part) - overall).abs() < 0.01);
        }
    }

    #[test]
    fn bad_ratios_rejected() {
        let (ids, y) = labels(20, 2);
        assert!(matches!(split(&ids, &y, [0.7, 0.1, 0.1], 1), Err(Error::Config(_))));
        assert!(matches!(split(&ids[..9], &y[..9], DEFAULT_RATIOS, 1), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn disjoint_and_exhaustive(n in 10usize..400, every in 1usize..9, seed in any::<u64>()) {
            let (ids, y) = labels(n, every);
            let s = split(&ids, &y, DEFAULT_RATIOS, seed).unwrap();
            let all: BTreeSet<u64> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            prop_assert_eq!(all.len(), n);
            prop_assert_eq!(s.train.len() + s.validation.len() + s.test.len(), n);
            prop_assert_eq!(s.train.len(), (0.7 * n as f64 + 1e-9).floor() as usize);
            prop_assert_eq!(s.validation.len(), (0.1 * n as f64 + 1e-9).floor() as usize);
        }
    }
}
