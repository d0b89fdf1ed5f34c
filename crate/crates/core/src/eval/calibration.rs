use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_BUCKETS: usize = 10;

/// Observed outcomes per patient for the four calibration channels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationChannels {
    pub diagnosis: Vec<bool>,
    pub treatment: Vec<bool>,
    pub max_iop: Vec<Option<f64>>,
    pub max_cdr: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBucket {
    pub bucket_index: usize,
    pub mean_pred: f64,
    pub n: usize,
    pub dx_rate: f64,
    pub tx_rate: f64,
    pub mean_max_iop: Option<f64>,
    pub iop_n: usize,
    pub mean_max_cdr: Option<f64>,
    pub cdr_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub buckets: Vec<CalibrationBucket>,
}

pub const CALIBRATION_CSV_HEADER: &str =
    "bucket_index,mean_pred,n,dx_rate,tx_rate,mean_max_iop,iop_n,mean_max_cdr,cdr_n";

impl CalibrationTable {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = format!("{CALIBRATION_CSV_HEADER}\n");
        for b in &self.buckets {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                b.bucket_index,
                b.mean_pred,
                b.n,
                b.dx_rate,
                b.tx_rate,
                opt(b.mean_max_iop),
                b.iop_n,
                opt(b.mean_max_cdr),
                b.cdr_n
            ));
        }
        out
    }

    pub fn dx_rates(&self) -> Vec<f64> {
        self.buckets.iter().map(|b| b.dx_rate).collect()
    }
}

/// Ten equal-count buckets of patient indices, lowest predicted risk first.
/// The remainder `n mod 10` adds one patient to each of the top buckets.
pub fn decile_members(scores: &[f64]) -> Result<Vec<Vec<usize>>> {
    let n = scores.len();
    if n < N_BUCKETS {
        return Err(Error::evaluation(format!("calibration needs at least {N_BUCKETS} patients, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (base, rem) = (n / N_BUCKETS, n % N_BUCKETS);
    let mut out = Vec::with_capacity(N_BUCKETS);
    let mut start = 0;
    for b in 0..N_BUCKETS {
        let size = base + usize::from(b >= N_BUCKETS - rem);
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(out)
}

fn mean_present(idx: &[usize], values: &[Option<f64>]) -> (Option<f64>, usize) {
    let present: Vec<f64> = idx.iter().filter_map(|&i| values[i]).collect();
    let n = present.len();
    ((n > 0).then(|| present.iter().sum::<f64>() / n as f64), n)
}

fn rate(idx: &[usize], values: &[bool]) -> f64 {
    idx.iter().filter(|&&i| values[i]).count() as f64 / idx.len() as f64
}

pub fn decile_calibration(scores: &[f64], channels: &CalibrationChannels) -> Result<CalibrationTable> {
    let n = scores.len();
    if [channels.diagnosis.len(), channels.treatment.len(), channels.max_iop.len(), channels.max_cdr.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::evaluation("calibration channels differ in length from scores"));
    }
    let buckets = decile_members(scores)?
        .into_iter()
        .enumerate()
        .map(|(bucket_index, idx)| {
            let (mean_max_iop, iop_n) = mean_present(&idx, &channels.max_iop);
            let (mean_max_cdr, cdr_n) = mean_present(&idx, &channels.max_cdr);
            CalibrationBucket {
                bucket_index,
                mean_pred: idx.iter().map(|&i| scores[i]).sum::<f64>() / idx.len() as f64,
                n: idx.len(),
                dx_rate: rate(&idx, &channels.diagnosis),
                tx_rate: rate(&idx, &channels.treatment),
                mean_max_iop,
                iop_n,
                mean_max_cdr,
                cdr_n,
            }
        })
        .collect();
    Ok(CalibrationTable { buckets })
}
