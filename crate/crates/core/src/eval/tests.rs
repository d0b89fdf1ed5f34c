use proptest::prelude::*;
use rand::Rng as _;

use super::*;
use crate::rng::seeded;

fn pairwise_auroc(s: &[f64], y: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] && !y[j] {
                den += 1.0;
                if s[i] > s[j] {
                    num += 1.0;
                } else if s[i] == s[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Sum over distinct thresholds t (descending) of (R(t) - R(prev)) * P(t).
fn walk_ap(s: &[f64], y: &[bool]) -> f64 {
    let mut ts: Vec<f64> = s.to_vec();
    ts.sort_by(|a, b| b.total_cmp(a));
    ts.dedup();
    let pos = y.iter().filter(|v| **v).count() as f64;
    let (mut prev_r, mut ap) = (0.0, 0.0);
    for t in ts {
        let tp = s.iter().zip(y).filter(|(v, l)| **v >= t && **l).count() as f64;
        let k = s.iter().filter(|v| **v >= t).count() as f64;
        let r = tp / pos;
        ap += (r - prev_r) * (tp / k);
        prev_r = r;
    }
    ap
}

fn random_case(seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = seeded(seed);
    let n = rng.random_range(2..=200);
    let levels = rng.random_range(2..30);
    let mut s: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
    let mut y: Vec<bool> = s.iter().map(|v| rng.random::<f64>() < 0.2 + 0.6 * v).collect();
    y[0] = true;
    y[1] = false;
    s.swap(0, n - 1);
    (s, y)
}

#[test]
fn ranking_metrics_match_oracles() {
    for seed in 0..100 {
        let (s, y) = random_case(seed);
        assert!((auroc(&s, &y).unwrap() - pairwise_auroc(&s, &y)).abs() < 1e-12);
        assert!((auprc(&s, &y).unwrap() - walk_ap(&s, &y)).abs() < 1e-12);
    }
}

#[test]
fn ranking_edge_cases() {
    let y = [false, false, true, true];
    assert_eq!(auroc(&[0.1, 0.2, 0.3, 0.4], &y).unwrap(), 1.0);
    assert_eq!(auprc(&[0.1, 0.2, 0.3, 0.4], &y).unwrap(), 1.0);
    assert_eq!(auroc(&[0.5; 4], &y).unwrap(), 0.5);
    let y = [false, false, false, true];
    assert_eq!(auprc(&[0.5; 4], &y).unwrap(), 0.25);
    assert!(matches!(auroc(&[0.1, 0.2], &[true, true]), Err(crate::Error::Evaluation(_))));
    assert!(matches!(auprc(&[0.1, 0.2], &[false, false]), Err(crate::Error::Evaluation(_))));
}

#[test]
fn threshold_examples() {
    assert_eq!(tune_threshold(&[0.2, 0.8], &[false, true]).unwrap(), 0.25);
    let s = [0.01, 0.03, 0.02, 0.04, 0.0];
    let y = [true, false, true, false, true];
    assert_eq!(tune_threshold(&s, &y).unwrap(), 0.0);
    assert!(tune_threshold(&[0.2, 0.3], &[true, true]).is_err());
}

#[test]
fn zero_threshold_predicts_everything_positive() {
    let s = [0.1, 0.7, 0.3, 0.9, 0.0];
    let y = [false, true, false, false, true];
    let m = metrics(&confusion(&s, &y, 0.0));
    assert_eq!((m.sensitivity, m.specificity, m.npv), (1.0, 0.0, 0.0));
    assert_eq!(m.ppv, 0.4);
    let c = confusion(&s, &y, 0.95);
    assert_eq!(c.tp + c.fp, 0);
    assert_eq!(metrics(&c).ppv, 0.0);
}

#[test]
fn confusion_matches_loop() {
    let mut rng = seeded(4);
    let s: Vec<f64> = (0..300).map(|_| rng.random()).collect();
    let y: Vec<bool> = (0..300).map(|_| rng.random()).collect();
    let c = confusion(&s, &y, 0.4);
    let mut tp = 0;
    let mut fp = 0;
    for i in 0..300 {
        if s[i] >= 0.4 {
            if y[i] {
                tp += 1
            } else {
                fp += 1
            }
        }
    }
    assert_eq!((c.tp, c.fp, c.n()), (tp, fp, 300));
}

#[test]
fn f1_identity_from_reported_rates() {
    assert!((f1(0.580, 0.638) - 0.608).abs() < 0.0005);
}

#[test]
fn decile_example_and_sizes() {
    let s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
    let ch = CalibrationChannels {
        diagnosis: s.iter().map(|v| *v > 0.5).collect(),
        treatment: vec![false; 100],
        max_iop: vec![None; 100],
        max_cdr: vec![Some(0.3); 100],
    };
    let t = decile_calibration(&s, &ch).unwrap();
    assert_eq!(t.dx_rates(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
    assert_eq!(t.buckets[0].mean_max_iop, None);
    assert_eq!(t.buckets[0].cdr_n, 10);
    let sizes: Vec<usize> = decile_members(&vec![0.0; 103]).unwrap().iter().map(Vec::len).collect();
    assert_eq!(sizes, vec![10, 10, 10, 10, 10, 10, 10, 11, 11, 11]);
    assert!(decile_members(&[0.0; 9]).is_err());
    let csv = t.to_csv();
    assert!(csv.starts_with("bucket_index,mean_pred,n,dx_rate,tx_rate,mean_max_iop,iop_n,mean_max_cdr,cdr_n\n"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn subgroups_match_direct_computation() {
    let (s, y) = random_case(7);
    let groups: Vec<String> = (0..s.len()).map(|i| ["a", "b", "c"][i % 3].to_string()).collect();
    let r = subgroup_eval(&s, &y, &groups).unwrap();
    for (g, m) in &r.evaluated {
        let idx: Vec<usize> = (0..s.len()).filter(|&i| &groups[i] == g).collect();
        let gs: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        let gy: Vec<bool> = idx.iter().map(|&i| y[i]).collect();
        assert_eq!(m.auroc, auroc(&gs, &gy).unwrap());
        assert_eq!(m.auprc, auprc(&gs, &gy).unwrap());
        assert_eq!(m.n, idx.len());
    }
    let mut s2 = s.clone();
    s2.extend_from_slice(&s);
    let mut y2 = y.clone();
    y2.extend_from_slice(&y);
    let g2: Vec<String> = (0..s2.len()).map(|i| if i < s.len() { "x" } else { "y" }.to_string()).collect();
    let r = subgroup_eval(&s2, &y2, &g2).unwrap();
    assert_eq!(r.evaluated["x"], r.evaluated["y"]);
    let r = subgroup_eval(&[0.1, 0.2, 0.3], &[true, false, true], &["p".into(), "p".into(), "q".into()]).unwrap();
    assert_eq!(r.unevaluable.get("q"), Some(&1));
}

#[test]
fn report_serializes() {
    let r = evaluate(&[0.1, 0.9, 0.4], &[false, true, true], 0.5).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    assert_eq!(v["counts"]["fn"], 1);
    assert_eq!(r.to_csv().lines().next().unwrap(), REPORT_CSV_HEADER);
}

fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (3usize..80).prop_flat_map(|n| {
        (proptest::collection::vec(0.0f64..1.0, n), proptest::collection::vec(any::<bool>(), n)).prop_map(|(s, mut y)| {
            y[0] = true;
            y[1] = false;
            (s, y)
        })
    })
}

proptest! {
    #[test]
    fn auroc_invariant_under_monotone_transform((s, y) in scores_and_labels()) {
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() + 1.0).collect();
        prop_assert!((auroc(&s, &y).unwrap() - auroc(&t, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn auroc_complement((s, y) in scores_and_labels()) {
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        prop_assume!(sorted.len() == s.len());
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auroc(&s, &y).unwrap() + auroc(&neg, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tuned_threshold_attains_grid_max((s, y) in scores_and_labels()) {
        let t = tune_threshold(&s, &y).unwrap();
        prop_assert!(threshold_grid().contains(&t));
        let best = threshold_grid().into_iter().map(|g| metrics(&confusion(&s, &y, g)).f1).fold(f64::MIN, f64::max);
        prop_assert_eq!(metrics(&confusion(&s, &y, t)).f1, best);
        for g in threshold_grid().into_iter().filter(|g| *g < t) {
            prop_assert!(metrics(&confusion(&s, &y, g)).f1 < best);
        }
    }

    #[test]
    fn metric_identities(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
        prop_assume!(tp + fp + tn + fn_ > 0);
        let c = ConfusionCounts { tp, fp, tn, fn_ };
        let m = metrics(&c);
        prop_assert_eq!(m.accuracy, (tp + tn) as f64 / c.n() as f64);
        let expect = if m.ppv + m.sensitivity > 0.0 { 2.0 * m.ppv * m.sensitivity / (m.ppv + m.sensitivity) } else { 0.0 };
        prop_assert_eq!(m.f1, expect);
    }

    #[test]
    fn deciles_partition_in_rank_order(s in proptest::collection::vec(0.0f64..1.0, 10..300)) {
        let members = decile_members(&s).unwrap();
        let flat: Vec<usize> = members.concat();
        prop_assert_eq!(flat.len(), s.len());
        for w in flat.windows(2) {
            prop_assert!(s[w[0]] <= s[w[1]]);
        }
        let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut seen = flat.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), s.len());
    }
}

#[test]
fn spearman_basics() {
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 40.0]), Some(1.0));
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
    assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
}
