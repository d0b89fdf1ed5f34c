use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::cohort::{ConceptDictionary, ConceptId, Domain, EyeEvalFeatures, PatientRecord};
use crate::error::{Error, Result};

/// Demographic columns in matrix order: numeric age, then one-hot sex and
/// race/ethnicity.
pub const DEMOGRAPHIC_COLUMNS: [&str; 8] = [
    "age",
    "sex_female",
    "sex_male",
    "race_nh_white",
    "race_nh_black",
    "race_nh_asian",
    "race_hispanic",
    "race_other",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuousColumn {
    pub concept_id: ConceptId,
    pub name: String,
}

/// Column layout of a [`FeatureMatrix`]: dx presence, med presence,
/// demographics, continuous measurements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub dx_columns: Vec<ConceptId>,
    pub med_columns: Vec<ConceptId>,
    pub continuous_columns: Vec<ContinuousColumn>,
    pub demographic_columns: Vec<String>,
    pub exclusion_list: Vec<String>,
}

impl FeatureSchema {
    /// Columns for every systemic concept observed in `records`. Eye-exam
    /// concepts and the evaluation feature names go to the exclusion list.
    pub fn from_cohort(dict: &ConceptDictionary, records: &[PatientRecord]) -> Result<Self> {
        let mut dx = BTreeSet::new();
        let mut med = BTreeSet::new();
        let mut cont = BTreeSet::new();
        for r in records {
            for e in &r.events {
                match e.concept.domain {
                    Domain::Diagnosis => {
                        dx.insert(e.concept.id);
                    }
                    Domain::Medication => {
                        med.insert(e.concept.id);
                    }
                    _ => {}
                }
            }
            for m in &r.measurements {
                if matches!(m.concept.domain, Domain::Lab | Domain::Vital) {
                    cont.insert((m.concept.id, m.concept.domain));
                }
            }
        }
        let mut exclusion_list: Vec<String> =
            EyeEvalFeatures::FIELD_NAMES.iter().map(|s| s.to_string()).collect();
        exclusion_list.extend(dict.in_domain(Domain::EyeExam).map(|c| c.name.clone()));
        let continuous_columns = cont
            .into_iter()
            .map(|(id, domain)| {
                let name = dict
                    .get(id, domain)
                    .map(|c| c.name.clone())
                    .ok_or_else(|| Error::ColumnSet(format!("concept {id} missing from dictionary")))?;
                Ok(ContinuousColumn { concept_id: id, name })
            })
            .collect::<Result<Vec<_>>>()?;
        let schema = Self {
            dx_columns: dx.into_iter().collect(),
            med_columns: med.into_iter().collect(),
            continuous_columns,
            demographic_columns: DEMOGRAPHIC_COLUMNS.iter().map(|s| s.to_string()).collect(),
            exclusion_list,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn n_columns(&self) -> usize {
        self.dx_columns.len()
            + self.med_columns.len()
            + self.demographic_columns.len()
            + self.continuous_columns.len()
    }

    pub fn dx_range(&self) -> Range<usize> {
        0..self.dx_columns.len()
    }

    pub fn med_range(&self) -> Range<usize> {
        let s = self.dx_columns.len();
        s..s + self.med_columns.len()
    }

    pub fn demographic_range(&self) -> Range<usize> {
        let s = self.med_range().end;
        s..s + self.demographic_columns.len()
    }

    pub fn continuous_range(&self) -> Range<usize> {
        let s = self.demographic_range().end;
        s..s + self.continuous_columns.len()
    }

    /// Index of the numeric age column.
    pub fn age_column(&self) -> Option<usize> {
        self.demographic_columns
            .iter()
            .position(|c| c == "age")
            .map(|i| self.demographic_range().start + i)
    }

    /// Columns that carry real values: age and the continuous block.
    pub fn scaled_columns(&self) -> Vec<usize> {
        self.age_column().into_iter().chain(self.continuous_range()).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.n_columns());
        out.extend(self.dx_columns.iter().map(|id| format!("dx:{id}")));
        out.extend(self.med_columns.iter().map(|id| format!("med:{id}")));
        out.extend(self.demographic_columns.iter().cloned());
        out.extend(self.continuous_columns.iter().map(|c| c.name.clone()));
        out
    }

    /// Column lists disjoint, names unique, nothing from the exclusion list.
    pub fn validate(&self) -> Result<()> {
        let names = self.column_names();
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{n}`")));
            }
        }
        let dx: BTreeSet<_> = self.dx_columns.iter().collect();
        if self.med_columns.iter().any(|m| dx.contains(m)) {
            return Err(Error::Schema("dx and med column lists overlap".into()));
        }
        if let Some(bad) = names.iter().find(|n| self.exclusion_list.contains(n)) {
            return Err(Error::Schema(format!(
                "evaluation-only feature `{bad}` cannot be a model input"
            )));
        }
        Ok(())
    }
}

/// Encoded patients. Missing cells hold NaN and are flagged in `missing_mask`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    pub patient_ids: Vec<u64>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
    pub missing_mask: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(schema: FeatureSchema, patient_ids: Vec<u64>, data: Vec<f64>, missing_mask: Vec<bool>) -> Result<Self> {
        let n_rows = patient_ids.len();
        let n_cols = schema.n_columns();
        if data.len() != n_rows * n_cols || missing_mask.len() != data.len() {
            return Err(Error::shape(format!(
                "matrix of {n_rows}x{n_cols} needs {} cells, got {} values / {} mask bits",
                n_rows * n_cols,
                data.len(),
                missing_mask.len()
            )));
        }
        Ok(Self {
            schema,
            patient_ids,
            n_rows,
            n_cols,
            data,
            missing_mask,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing_mask[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    /// Row index of each patient id, in the order given.
    pub fn row_indices(&self, ids: &[u64]) -> Result<Vec<usize>> {
        let lookup: std::collections::HashMap<u64, usize> =
            self.patient_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        ids.iter()
            .map(|id| {
                lookup
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::input(format!("patient {id} not in matrix")))
            })
            .collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        let mut mask = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
            mask.extend_from_slice(&self.missing_mask[r * self.n_cols..(r + 1) * self.n_cols]);
        }
        FeatureMatrix {
            schema: self.schema.clone(),
            patient_ids: rows.iter().map(|&r| self.patient_ids[r]).collect(),
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
            missing_mask: mask,
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn has_missing_values(&self) -> bool {
        self.data.iter().any(|v| v.is_nan())
    }
}
