use super::{check_both_classes, check_lengths};
use crate::error::{Error, Result};

/// Indices sorted by score, ascending, ties kept in input order.
fn ascending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

/// Runs of equal scores in `order`.
fn tie_groups<'a>(scores: &'a [f64], order: &'a [usize]) -> impl Iterator<Item = &'a [usize]> + 'a {
    order.chunk_by(move |&a, &b| scores[a] == scores[b])
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann-Whitney with mid-ranks).
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, neg) = check_both_classes(labels)?;
    let order = ascending(scores);
    let mut rank_sum = 0.0;
    let mut start = 0usize;
    for group in tie_groups(scores, &order) {
        let mid = start as f64 + (group.len() as f64 + 1.0) / 2.0;
        rank_sum += mid * group.iter().filter(|&&i| labels[i]).count() as f64;
        start += group.len();
    }
    let u = rank_sum - (pos as f64) * (pos as f64 + 1.0) / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Average precision: sum over score thresholds of (recall gain x
/// precision). A run of tied scores is a single operating point.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|y| **y).count();
    if pos == 0 {
        return Err(Error::evaluation("average precision needs at least one positive"));
    }
    let mut order = ascending(scores);
    order.reverse();
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    for group in tie_groups(scores, &order) {
        let gp = group.iter().filter(|&&i| labels[i]).count();
        tp += gp;
        seen += group.len();
        ap += gp as f64 * (tp as f64 / seen as f64);
    }
    Ok(ap / pos as f64)
}

/// ROC points `(fpr, tpr)` from (0,0) to (1,1), one per distinct score.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_lengths(scores, labels)?;
    let (pos, neg) = check_both_classes(labels)?;
    let mut order = ascending(scores);
    order.reverse();
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for group in tie_groups(scores, &order) {
        let gp = group.iter().filter(|&&i| labels[i]).count();
        tp += gp;
        fp += group.len() - gp;
        pts.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(pts)
}

/// Precision-recall points `(recall, precision)`, one per distinct score.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_lengths(scores, labels)?;
    let (pos, _) = check_both_classes(labels)?;
    let mut order = ascending(scores);
    order.reverse();
    let mut pts = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    for group in tie_groups(scores, &order) {
        tp += group.iter().filter(|&&i| labels[i]).count();
        seen += group.len();
        pts.push((tp as f64 / pos as f64, tp as f64 / seen as f64));
    }
    Ok(pts)
}

fn midranks(x: &[f64]) -> Vec<f64> {
    let order = ascending(x);
    let mut r = vec![0.0; x.len()];
    let mut start = 0usize;
    for group in tie_groups(x, &order) {
        let mid = start as f64 + (group.len() as f64 + 1.0) / 2.0;
        group.iter().for_each(|&i| r[i] = mid);
        start += group.len();
    }
    r
}

/// Spearman rank correlation (Pearson on mid-ranks). `None` if either side
/// is constant or the lengths differ.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (midranks(a), midranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}
