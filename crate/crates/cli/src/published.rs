//! Published reference results, reported next to computed rows and always
//! tagged as such.

pub const TAG: &str = "published";

/// One row of the published per-k table: k, percentage of training data,
/// then auroc, auprc, accuracy, sensitivity, specificity, ppv, npv, f1 and
/// the chosen threshold.
pub struct Row {
    pub k: usize,
    pub fraction: u32,
    pub metrics: [f64; 9],
}

pub const GRA_ROWS: [Row; 12] = [
    Row { k: 0, fraction: 40, metrics: [0.467, 0.141, 0.156, 1.000, 0.000, 0.156, 0.000, 0.271, 0.00] },
    Row { k: 1, fraction: 100, metrics: [0.801, 0.523, 0.809, 0.594, 0.849, 0.422, 0.919, 0.494, 0.60] },
    Row { k: 3, fraction: 40, metrics: [0.806, 0.504, 0.772, 0.692, 0.786, 0.375, 0.932, 0.487, 0.60] },
    Row { k: 6, fraction: 100, metrics: [0.844, 0.611, 0.861, 0.548, 0.919, 0.556, 0.916, 0.552, 0.70] },
    Row { k: 7, fraction: 100, metrics: [0.842, 0.619, 0.847, 0.618, 0.889, 0.508, 0.926, 0.558, 0.70] },
    Row { k: 8, fraction: 80, metrics: [0.850, 0.615, 0.868, 0.539, 0.929, 0.584, 0.916, 0.560, 0.85] },
    Row { k: 9, fraction: 100, metrics: [0.856, 0.642, 0.883, 0.492, 0.955, 0.669, 0.910, 0.567, 0.90] },
    Row { k: 11, fraction: 100, metrics: [0.865, 0.668, 0.871, 0.638, 0.914, 0.580, 0.932, 0.608, 0.80] },
    Row { k: 12, fraction: 100, metrics: [0.865, 0.662, 0.884, 0.577, 0.941, 0.643, 0.923, 0.608, 0.85] },
    Row { k: 15, fraction: 100, metrics: [0.883, 0.692, 0.889, 0.610, 0.941, 0.657, 0.929, 0.632, 0.90] },
    Row { k: 16, fraction: 100, metrics: [0.876, 0.687, 0.883, 0.596, 0.936, 0.632, 0.926, 0.614, 0.80] },
    Row { k: 18, fraction: 100, metrics: [0.876, 0.687, 0.883, 0.596, 0.936, 0.632, 0.926, 0.614, 0.80] },
];

/// Demographics-only boosted trees: AUROC and AUPRC.
pub const BASELINE: (f64, f64) = (0.708, 0.263);
