//! Threshold tuning, confusion metrics, ranking metrics, decile calibration
//! and subgroup metrics.

mod calibration;
mod ranking;

pub use calibration::{decile_calibration, decile_members, CalibrationBucket, CalibrationChannels, CalibrationTable};
pub use ranking::{auprc, auroc, pr_curve, roc_curve, spearman};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thresholds searched by [`tune_threshold`]: 0.00, 0.05, ..., 1.00.
pub fn threshold_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Threshold-dependent metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub ppv: f64,
    pub npv: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub n: usize,
    pub n_positive: usize,
    pub auroc: f64,
    pub auprc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub evaluated: BTreeMap<String, GroupMetrics>,
    /// Groups lacking one of the classes, with their sizes.
    pub unevaluable: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auroc: f64,
    pub auprc: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub ppv: f64,
    pub npv: f64,
    pub f1: f64,
    pub threshold: f64,
    pub counts: ConfusionCounts,
    #[serde(default)]
    pub subgroups: SubgroupReport,
}

pub const REPORT_CSV_HEADER: &str = "auroc,auprc,accuracy,sensitivity,specificity,ppv,npv,f1,threshold";

impl EvalReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.auroc,
            self.auprc,
            self.accuracy,
            self.sensitivity,
            self.specificity,
            self.ppv,
            self.npv,
            self.f1,
            self.threshold
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{REPORT_CSV_HEADER}\n{}\n", self.csv_row())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1(ppv: f64, sensitivity: f64) -> f64 {
    if ppv + sensitivity > 0.0 {
        2.0 * ppv * sensitivity / (ppv + sensitivity)
    } else {
        0.0
    }
}

/// A score at or above `threshold` is a predicted positive.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (s, y) in scores.iter().zip(labels) {
        match (*s >= threshold, *y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// Ratios with a zero denominator are reported as 0.
pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let ppv = ratio(c.tp, c.tp + c.fp);
    Metrics {
        accuracy: ratio(c.tp + c.tn, c.n()),
        sensitivity,
        specificity: ratio(c.tn, c.tn + c.fp),
        ppv,
        npv: ratio(c.tn, c.tn + c.fn_),
        f1: f1(ppv, sensitivity),
    }
}

pub(crate) fn check_both_classes(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|y| **y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::evaluation(format!("need both classes, got {pos} positive / {neg} negative")));
    }
    Ok((pos, neg))
}

pub(crate) fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::evaluation(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::evaluation("non-finite score"));
    }
    Ok(())
}

/// Lowest grid threshold attaining the maximum F1.
pub fn tune_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    check_both_classes(labels)?;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for t in threshold_grid() {
        let f = metrics(&confusion(scores, labels, t)).f1;
        if f > best.0 {
            best = (f, t);
        }
    }
    Ok(best.1)
}

/// Full report at a fixed threshold.
pub fn evaluate(scores: &[f64], labels: &[bool], threshold: f64) -> Result<EvalReport> {
    check_lengths(scores, labels)?;
    let counts = confusion(scores, labels, threshold);
    let m = metrics(&counts);
    Ok(EvalReport {
        auroc: auroc(scores, labels)?,
        auprc: auprc(scores, labels)?,
        accuracy: m.accuracy,
        sensitivity: m.sensitivity,
        specificity: m.specificity,
        ppv: m.ppv,
        npv: m.npv,
        f1: m.f1,
        threshold,
        counts,
        subgroups: SubgroupReport::default(),
    })
}

/// Ranking metrics per group. Groups missing a class are listed as
/// unevaluable rather than failing.
pub fn subgroup_eval(scores: &[f64], labels: &[bool], groups: &[String]) -> Result<SubgroupReport> {
    check_lengths(scores, labels)?;
    if groups.len() != scores.len() {
        return Err(Error::evaluation("group assignment length differs from scores"));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    let mut report = SubgroupReport::default();
    for (g, idx) in members {
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let y: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        let n_positive = y.iter().filter(|v| **v).count();
        if n_positive == 0 || n_positive == y.len() {
            report.unevaluable.insert(g.to_string(), y.len());
            continue;
        }
        report.evaluated.insert(
            g.to_string(),
            GroupMetrics { n: y.len(), n_positive, auroc: auroc(&s, &y)?, auprc: auprc(&s, &y)? },
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
