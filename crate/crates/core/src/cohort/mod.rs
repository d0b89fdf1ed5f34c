//! OMOP-like patient records, the glaucoma labelling rule, evaluation-only eye
//! features and the synthetic source/target cohort generator.

mod generate;
pub mod io;
mod label;
mod shift;

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{
    generate_cohort, ConceptLayout, DemographicEffects, GeneratedPatient, GeneratorConfig,
    Marginals, SignalWeights,
};
pub use label::{apply_temporal_cutoff, extract_eval_features, label_glaucoma};
pub use shift::{apply_shift, ShiftConfig};

pub type ConceptId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Diagnosis,
    Medication,
    Lab,
    Vital,
    /// Ophthalmic examination measurements (IOP, CDR). Evaluation only.
    EyeExam,
    GlaucomaDx,
    GlaucomaSuspectDx,
    GlaucomaTreatment,
}

impl Domain {
    /// Domains whose concepts may become model input columns.
    pub fn is_systemic(self) -> bool {
        matches!(
            self,
            Domain::Diagnosis | Domain::Medication | Domain::Lab | Domain::Vital
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConceptCode {
    #[serde(rename = "concept_id")]
    pub id: ConceptId,
    pub domain: Domain,
}

impl ConceptCode {
    pub fn new(id: ConceptId, domain: Domain) -> Self {
        Self { id, domain }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedEvent {
    #[serde(flatten)]
    pub concept: ConceptCode,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEvent {
    #[serde(flatten)]
    pub concept: ConceptCode,
    pub date: NaiveDate,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaceEthnicity {
    NhWhite,
    NhBlack,
    NhAsian,
    Hispanic,
    Other,
}

impl RaceEthnicity {
    pub const ALL: [RaceEthnicity; 5] = [
        RaceEthnicity::NhWhite,
        RaceEthnicity::NhBlack,
        RaceEthnicity::NhAsian,
        RaceEthnicity::Hispanic,
        RaceEthnicity::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RaceEthnicity::NhWhite => "nh_white",
            RaceEthnicity::NhBlack => "nh_black",
            RaceEthnicity::NhAsian => "nh_asian",
            RaceEthnicity::Hispanic => "hispanic",
            RaceEthnicity::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: u64,
    pub age: f64,
    pub sex: Sex,
    pub race_ethnicity: RaceEthnicity,
    pub events: Vec<CodedEvent>,
    pub measurements: Vec<MeasurementEvent>,
}

impl PatientRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.age >= 18.0) {
            return Err(Error::input(format!(
                "patient {}: age {} below 18",
                self.patient_id, self.age
            )));
        }
        for m in &self.measurements {
            if !m.value.is_finite() {
                return Err(Error::input(format!(
                    "patient {}: non-finite measurement for concept {}",
                    self.patient_id, m.concept.id
                )));
            }
        }
        Ok(())
    }
}

/// Glaucoma status; positive exactly when a first diagnosis date exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortLabel {
    first_dx_date: Option<NaiveDate>,
}

impl CohortLabel {
    pub fn negative() -> Self {
        Self { first_dx_date: None }
    }

    pub fn positive(first_dx_date: NaiveDate) -> Self {
        Self {
            first_dx_date: Some(first_dx_date),
        }
    }

    pub fn is_glaucoma(&self) -> bool {
        self.first_dx_date.is_some()
    }

    pub fn first_dx_date(&self) -> Option<NaiveDate> {
        self.first_dx_date
    }
}

/// Eye-examination outcomes. Never part of a model input schema.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EyeEvalFeatures {
    pub max_iop: Option<f64>,
    pub max_cdr: Option<f64>,
    pub any_treatment: bool,
}

impl EyeEvalFeatures {
    /// Names reserved for evaluation-only features.
    pub const FIELD_NAMES: [&'static str; 3] = ["max_iop", "max_cdr", "any_treatment"];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptEntry {
    pub concept_id: ConceptId,
    pub domain: Domain,
    pub name: String,
}

/// Concept vocabulary with domain membership.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConceptDictionary {
    pub concepts: Vec<ConceptEntry>,
    pub glaucoma: BTreeSet<ConceptId>,
    pub glaucoma_suspect: BTreeSet<ConceptId>,
    pub glaucoma_treatment: BTreeSet<ConceptId>,
}

impl ConceptDictionary {
    pub fn new(mut concepts: Vec<ConceptEntry>) -> Result<Self> {
        concepts.sort_by_key(|c| (c.domain, c.concept_id));
        concepts.dedup();
        let set = |d: Domain| -> BTreeSet<ConceptId> {
            concepts
                .iter()
                .filter(|c| c.domain == d)
                .map(|c| c.concept_id)
                .collect()
        };
        let dict = Self {
            glaucoma: set(Domain::GlaucomaDx),
            glaucoma_suspect: set(Domain::GlaucomaSuspectDx),
            glaucoma_treatment: set(Domain::GlaucomaTreatment),
            concepts,
        };
        dict.validate()?;
        Ok(dict)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.concepts {
            if !seen.insert((c.domain, c.concept_id)) {
                return Err(Error::input(format!(
                    "concept {} listed twice in domain {:?}",
                    c.concept_id, c.domain
                )));
            }
        }
        if let Some(id) = self.glaucoma.intersection(&self.glaucoma_suspect).next() {
            return Err(Error::input(format!(
                "concept {id} is both a glaucoma and a glaucoma-suspect code"
            )));
        }
        Ok(())
    }

    pub fn get(&self, id: ConceptId, domain: Domain) -> Option<&ConceptEntry> {
        self.concepts
            .iter()
            .find(|c| c.concept_id == id && c.domain == domain)
    }

    pub fn in_domain(&self, domain: Domain) -> impl Iterator<Item = &ConceptEntry> {
        self.concepts.iter().filter(move |c| c.domain == domain)
    }

    /// Union of two dictionaries (e.g. a source site and its shifted target).
    pub fn merged(&self, other: &ConceptDictionary) -> Result<ConceptDictionary> {
        let mut all = self.concepts.clone();
        all.extend(other.concepts.iter().cloned());
        ConceptDictionary::new(all)
    }
}
