//! Cohort files: JSONL with one patient per line, plus a JSON concept
//! dictionary sidecar.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConceptDictionary, PatientRecord};
use crate::error::{Error, Result};

pub fn write_cohort<'a>(path: &Path, records: impl IntoIterator<Item = &'a PatientRecord>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cohort(path: &Path) -> Result<Vec<PatientRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut ids = std::collections::BTreeSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PatientRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Format(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        rec.validate()?;
        if !ids.insert(rec.patient_id) {
            return Err(Error::Format(format!(
                "{}: duplicate patient_id {}",
                path.display(),
                rec.patient_id
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_dictionary(path: &Path, dict: &ConceptDictionary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, dict)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_dictionary(path: &Path) -> Result<ConceptDictionary> {
    let dict: ConceptDictionary = serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    // membership sets must agree with the per-concept domains
    let rebuilt = ConceptDictionary::new(dict.concepts.clone())?;
    if rebuilt.glaucoma != dict.glaucoma
        || rebuilt.glaucoma_suspect != dict.glaucoma_suspect
        || rebuilt.glaucoma_treatment != dict.glaucoma_treatment
    {
        return Err(Error::Format(format!(
            "{}: membership sets disagree with concept domains",
            path.display()
        )));
    }
    Ok(rebuilt)
}

/// Ground-truth latent risk of a generated patient. Diagnostics only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub site: String,
    pub patient_id: u64,
    pub latent_risk: f64,
}

pub fn write_truth(path: &Path, rows: &[TruthRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| Error::Format(e.to_string()))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{generate_cohort, GeneratorConfig};

    #[test]
    fn cohort_file_round_trip() {
        let cfg = GeneratorConfig::new(30, 0.2, 4);
        let cohort = generate_cohort(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        write_cohort(&p, cohort.iter().map(|g| &g.record)).unwrap();
        let back = read_cohort(&p).unwrap();
        let orig: Vec<_> = cohort.into_iter().map(|g| g.record).collect();
        assert_eq!(back, orig);

        let text = std::fs::read_to_string(&p).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["patient_id", "age", "sex", "race_ethnicity", "events", "measurements"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        let ev = &first["measurements"][0];
        for key in ["concept_id", "domain", "date", "value"] {
            assert!(ev.get(key).is_some(), "missing {key}");
        }

        let dp = dir.path().join("concepts.json");
        write_dictionary(&dp, &cfg.dictionary()).unwrap();
        assert_eq!(read_dictionary(&dp).unwrap(), cfg.dictionary());
    }
}
