//! On-disk feature matrices: `<stem>.schema.json` (schema, patient ids,
//! shape), `<stem>.f32` (row-major little-endian f32, NaN for missing) and
//! `<stem>.mask` (missing mask as packed bits, row-major, least significant
//! bit first).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    schema: FeatureSchema,
    patient_ids: Vec<u64>,
    n_rows: usize,
    n_cols: usize,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (k, b) in bits.iter().enumerate() {
        if *b {
            out[k / 8] |= 1 << (k % 8);
        }
    }
    out
}

pub fn unpack_bits(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|k| bytes[k / 8] >> (k % 8) & 1 == 1).collect()
}

pub fn save_matrix(stem: &Path, m: &FeatureMatrix) -> Result<()> {
    let header = Header {
        schema: m.schema.clone(),
        patient_ids: m.patient_ids.clone(),
        n_rows: m.n_rows,
        n_cols: m.n_cols,
    };
    fs::write(with_ext(stem, ".schema.json"), serde_json::to_vec_pretty(&header)?)?;
    let mut bytes = Vec::with_capacity(m.data.len() * 4);
    for v in &m.data {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(with_ext(stem, ".f32"), bytes)?;
    fs::write(with_ext(stem, ".mask"), pack_bits(&m.missing_mask))?;
    Ok(())
}

pub fn load_matrix(stem: &Path) -> Result<FeatureMatrix> {
    let header: Header = serde_json::from_slice(&fs::read(with_ext(stem, ".schema.json"))?)?;
    let cells = header.n_rows * header.n_cols;
    let bytes = fs::read(with_ext(stem, ".f32"))?;
    if bytes.len() != cells * 4 {
        return Err(Error::Format(format!(
            "matrix payload has {} bytes, expected {}",
            bytes.len(),
            cells * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let mask_bytes = fs::read(with_ext(stem, ".mask"))?;
    if mask_bytes.len() != cells.div_ceil(8) {
        return Err(Error::Format("missing mask has the wrong length".into()));
    }
    if header.schema.n_columns() != header.n_cols {
        return Err(Error::Format("schema disagrees with column count".into()));
    }
    FeatureMatrix::new(header.schema, header.patient_ids, data, unpack_bits(&mask_bytes, cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{generate_cohort, GeneratorConfig};
    use proptest::prelude::*;

    #[test]
    fn matrix_round_trip() {
        let cfg = GeneratorConfig::new(40, 0.2, 1);
        let records: Vec<_> = generate_cohort(&cfg).unwrap().into_iter().map(|g| g.record).collect();
        let schema = FeatureSchema::from_cohort(&cfg.dictionary(), &records).unwrap();
        let mut m = crate::preprocess::encode(&records, &schema).unwrap();
        // make values f32-exact so the round trip is lossless
        for v in &mut m.data {
            *v = f64::from(*v as f32);
        }
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("features");
        save_matrix(&stem, &m).unwrap();
        let back = load_matrix(&stem).unwrap();
        assert_eq!(back.missing_mask, m.missing_mask);
        for (a, b) in back.data.iter().zip(&m.data) {
            assert!(a == b || (a.is_nan() && b.is_nan()));
        }
        assert_eq!(back.schema, m.schema);
        let raw = std::fs::read(dir.path().join("features.f32")).unwrap();
        assert_eq!(raw.len(), m.n_rows * m.n_cols * 4);
    }

    proptest! {
        #[test]
        fn bit_packing_round_trips(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            prop_assert_eq!(unpack_bits(&pack_bits(&bits), bits.len()), bits);
        }
    }
}
