//! Demographics-only gradient boosted trees with logistic loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{FeatureMatrix, DEMOGRAPHIC_COLUMNS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// Unused: fitting has no subsampling.
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig { n_trees: 100, max_depth: 3, learning_rate: 0.1, min_leaf: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
    Leaf { value: f64 },
}

impl TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.eval(x)
                } else {
                    right.eval(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Rows restricted to demographic columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DemographicData {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DemographicData {
    /// The demographic block of `matrix` for the given rows.
    pub fn from_matrix(matrix: &FeatureMatrix, rows: &[usize]) -> Self {
        let range = matrix.schema.demographic_range();
        DemographicData {
            names: matrix.schema.demographic_columns.clone(),
            rows: rows.iter().map(|&i| matrix.row(i)[range.clone()].to_vec()).collect(),
        }
    }

    fn check(&self) -> Result<()> {
        if let Some(n) = self.names.iter().find(|n| !DEMOGRAPHIC_COLUMNS.contains(&n.as_str())) {
            return Err(Error::Schema(format!("baseline accepts demographic columns only, found `{n}`")));
        }
        if let Some(r) = self.rows.iter().find(|r| r.len() != self.names.len() || r.iter().any(|v| !v.is_finite())) {
            return Err(Error::input(format!("demographic row of length {} is malformed", r.len())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub base_score: f64,
    pub trees: Vec<TreeNode>,
    pub learning_rate: f64,
    pub feature_names: Vec<String>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct Fit<'a> {
    x: &'a [Vec<f64>],
    resid: Vec<f64>,
    hess: Vec<f64>,
    cfg: &'a GbtConfig,
}

impl Fit<'_> {
    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let r: f64 = idx.iter().map(|&i| self.resid[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        // Newton step; the hessian floor keeps pure leaves finite
        let value = (r / h.max(1e-9)).clamp(-10.0, 10.0);
        TreeNode::Leaf { value }
    }

    /// Best variance-reduction split as `(gain, feature, threshold)`.
    fn best_split(&self, idx: &[usize]) -> Option<(f64, usize, f64)> {
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.resid[i]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let n_features = self.x.first().map_or(0, Vec::len);
        let mut order = idx.to_vec();
        for f in 0..n_features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_sum = 0.0;
            for s in 1..n {
                left_sum += self.resid[order[s - 1]];
                let (lo, hi) = (self.x[order[s - 1]][f], self.x[order[s]][f]);
                if lo == hi || s < self.cfg.min_leaf || n - s < self.cfg.min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / s as f64 + right_sum * right_sum / (n - s) as f64 - parent;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, 0.5 * (lo + hi)));
                }
            }
        }
        best
    }

    fn grow(&self, idx: &[usize], depth: usize) -> TreeNode {
        if depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf.max(1) {
            return self.leaf(idx);
        }
        match self.best_split(idx) {
            None => self.leaf(idx),
            Some((_, feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
                TreeNode::Split {
                    feature,
                    threshold,
                    left: Box::new(self.grow(&l, depth + 1)),
                    right: Box::new(self.grow(&r, depth + 1)),
                }
            }
        }
    }
}

pub fn fit_gbdt(data: &DemographicData, labels: &[bool], config: &GbtConfig) -> Result<GbtModel> {
    data.check()?;
    if labels.len() != data.rows.len() {
        return Err(Error::shape("one label per row required"));
    }
    if config.min_leaf == 0 || !(config.learning_rate > 0.0) || config.learning_rate.is_infinite() {
        return Err(Error::config("min_leaf must be >= 1 and learning_rate > 0"));
    }
    let n_pos = labels.iter().filter(|y| **y).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::evaluation("baseline needs both classes"));
    }
    let prev = n_pos as f64 / labels.len() as f64;
    let base_score = (prev / (1.0 - prev)).ln();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let mut margin = vec![base_score; y.len()];
    let all: Vec<usize> = (0..y.len()).collect();
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let p: Vec<f64> = margin.iter().map(|m| sigmoid(*m)).collect();
        let fit = Fit {
            x: &data.rows,
            resid: y.iter().zip(&p).map(|(y, p)| y - p).collect(),
            hess: p.iter().map(|p| p * (1.0 - p)).collect(),
            cfg: config,
        };
        let tree = fit.grow(&all, 0);
        for (m, x) in margin.iter_mut().zip(&data.rows) {
            *m += config.learning_rate * tree.eval(x);
        }
        trees.push(tree);
    }
    Ok(GbtModel { base_score, trees, learning_rate: config.learning_rate, feature_names: data.names.clone() })
}

impl GbtModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    /// Tree structure checks used after deserialization.
    pub fn validate(&self) -> Result<()> {
        fn ok(node: &TreeNode, n: usize) -> bool {
            match node {
                TreeNode::Leaf { value } => value.is_finite(),
                TreeNode::Split { feature, threshold, left, right } => {
                    *feature < n && threshold.is_finite() && ok(left, n) && ok(right, n)
                }
            }
        }
        let n = self.feature_names.len();
        if !self.base_score.is_finite() || !self.learning_rate.is_finite() || !self.trees.iter().all(|t| ok(t, n)) {
            return Err(Error::Format("malformed boosted tree model".into()));
        }
        Ok(())
    }
}

pub fn predict_gbdt(model: &GbtModel, data: &DemographicData) -> Result<Vec<f64>> {
    data.check()?;
    if data.names != model.feature_names {
        return Err(Error::Schema("rows do not match the baseline's demographic columns".into()));
    }
    Ok(data.rows.iter().map(|x| sigmoid(model.margin(x))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auroc;
    use crate::rng::seeded;
    use rand::Rng as _;

    fn demo(rows: Vec<Vec<f64>>) -> DemographicData {
        let k = rows[0].len();
        DemographicData { names: DEMOGRAPHIC_COLUMNS[..k].iter().map(|s| s.to_string()).collect(), rows }
    }

    fn random_data(n: usize, seed: u64) -> (DemographicData, Vec<bool>) {
        let mut rng = seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let male = f64::from(rng.random_bool(0.5) as u8);
                vec![rng.random_range(-2.0..2.0), 1.0 - male, male]
            })
            .collect();
        let labels = rows.iter().map(|r| rng.random::<f64>() < sigmoid(r[0] + 0.5 * r[2] - 1.0)).collect();
        (demo(rows), labels)
    }

    fn logloss(model: &GbtModel, d: &DemographicData, y: &[bool]) -> f64 {
        predict_gbdt(model, d)
            .unwrap()
            .iter()
            .zip(y)
            .map(|(p, y)| if *y { -p.ln() } else { -(1.0 - p).ln() })
            .sum::<f64>()
            / y.len() as f64
    }

    #[test]
    fn no_trees_predicts_prevalence() {
        let (d, y) = random_data(60, 1);
        let m = fit_gbdt(&d, &y, &GbtConfig { n_trees: 0, ..GbtConfig::default() }).unwrap();
        let prev = y.iter().filter(|v| **v).count() as f64 / 60.0;
        for p in predict_gbdt(&m, &d).unwrap() {
            assert!((p - prev).abs() < 1e-12);
        }
    }

    /// Best single split by brute force over all (feature, cut) pairs.
    fn brute_force_split(x: &[Vec<f64>], r: &[f64], min_leaf: usize) -> (usize, f64) {
        let mut best = (f64::MIN, 0, 0.0);
        for f in 0..x[0].len() {
            let mut vals: Vec<f64> = x.iter().map(|row| row[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let (l, rr): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| x[i][f] <= t);
                if l.len() < min_leaf || rr.len() < min_leaf {
                    continue;
                }
                let sum = |ix: &[usize]| ix.iter().map(|&i| r[i]).sum::<f64>();
                let var = |ix: &[usize]| {
                    let m = sum(ix) / ix.len() as f64;
                    ix.iter().map(|&i| (r[i] - m).powi(2)).sum::<f64>()
                };
                let all: Vec<usize> = (0..x.len()).collect();
                let gain = var(&all) - var(&l) - var(&rr);
                if gain > best.0 + 1e-12 {
                    best = (gain, f, t);
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn stump_separates_by_age() {
        let mut rng = seeded(2);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random_range(-2.0..2.0), 0.0]).collect();
        let y: Vec<bool> = rows.iter().map(|r| r[0] > 0.3).collect();
        let d = demo(rows.clone());
        let cfg = GbtConfig { n_trees: 1, max_depth: 1, min_leaf: 1, ..GbtConfig::default() };
        let m = fit_gbdt(&d, &y, &cfg).unwrap();
        assert_eq!(auroc(&predict_gbdt(&m, &d).unwrap(), &y).unwrap(), 1.0);
        let prev = y.iter().filter(|v| **v).count() as f64 / 50.0;
        let r: Vec<f64> = y.iter().map(|&v| f64::from(u8::from(v)) - prev).collect();
        let (f, t) = brute_force_split(&rows, &r, 1);
        match &m.trees[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!((*feature, *threshold), (f, t));
            }
            leaf => panic!("expected a split, got {leaf:?}"),
        }
    }

    #[test]
    fn stump_prediction_by_definition() {
        let (d, y) = random_data(80, 3);
        let m = fit_gbdt(&d, &y, &GbtConfig { n_trees: 1, max_depth: 1, ..GbtConfig::default() }).unwrap();
        let TreeNode::Split { feature, threshold, left, .. } = &m.trees[0] else { panic!("no split") };
        let row = d.rows.iter().find(|r| r[*feature] <= *threshold).unwrap();
        let TreeNode::Leaf { value } = **left else { panic!("depth") };
        let p = predict_gbdt(&m, &demo(vec![row.clone()])).unwrap()[0];
        assert_eq!(p, sigmoid(m.base_score + m.learning_rate * value));
    }

    #[test]
    fn small_steps_descend() {
        for seed in 0..4 {
            let (d, y) = random_data(120, 10 + seed);
            let mut prev = f64::INFINITY;
            for n in 0..15 {
                let cfg = GbtConfig { n_trees: n, learning_rate: 0.01, ..GbtConfig::default() };
                let l = logloss(&fit_gbdt(&d, &y, &cfg).unwrap(), &d, &y);
                assert!(l <= prev + 1e-12);
                prev = l;
            }
        }
    }

    #[test]
    fn deterministic_bounded_and_finite() {
        let (d, y) = random_data(200, 4);
        let a = fit_gbdt(&d, &y, &GbtConfig::default()).unwrap();
        let b = fit_gbdt(&d, &y, &GbtConfig { seed: 77, ..GbtConfig::default() }).unwrap();
        assert_eq!(a, b);
        assert!(a.trees.iter().all(|t| t.depth() <= 3));
        a.validate().unwrap();
        let (d1, y1) = random_data(30, 5);
        let tiny = fit_gbdt(&d1, &y1, &GbtConfig { min_leaf: 1, max_depth: 6, ..GbtConfig::default() }).unwrap();
        tiny.validate().unwrap();
        assert!(predict_gbdt(&tiny, &d1).unwrap().iter().all(|p| *p > 0.0 && *p < 1.0));
    }

    #[test]
    fn rejects_non_demographic_columns() {
        let (mut d, y) = random_data(40, 6);
        d.names[1] = "dx:100003".into();
        assert!(matches!(fit_gbdt(&d, &y, &GbtConfig::default()), Err(Error::Schema(_))));
    }

    #[test]
    fn ignores_non_demographic_columns_of_wider_matrix() {
        use crate::cohort::{generate_cohort, GeneratorConfig};
        use crate::pipeline::{prepare_source, LabeledCohort, PrepConfig};
        let cfg = GeneratorConfig::new(300, 0.2, 8);
        let records: Vec<_> = generate_cohort(&cfg).unwrap().into_iter().map(|g| g.record).collect();
        let labeled = LabeledCohort::new(&records, &cfg.dictionary());
        let (site, _, _) = prepare_source(&labeled, &cfg.dictionary(), &PrepConfig::default()).unwrap();
        let rows: Vec<usize> = (0..site.matrix.n_rows).collect();
        let model = fit_gbdt(&DemographicData::from_matrix(&site.matrix, &rows), &site.labels, &GbtConfig::default()).unwrap();
        let before = predict_gbdt(&model, &DemographicData::from_matrix(&site.matrix, &rows)).unwrap();
        let mut shuffled = site.matrix.clone();
        let j = shuffled.schema.dx_range().start;
        let n = shuffled.n_rows;
        for i in 0..n {
            let v = site.matrix.get(n - 1 - i, j);
            shuffled.set(i, j, v);
        }
        let after = predict_gbdt(&model, &DemographicData::from_matrix(&shuffled, &rows)).unwrap();
        assert_eq!(before, after);
    }
}
