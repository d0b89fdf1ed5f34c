use std::collections::BTreeSet;

use super::{CohortLabel, ConceptId, Domain, EyeEvalFeatures, PatientRecord};

/// Positive when at least two distinct encounter dates carry a glaucoma
/// diagnosis that is not a suspect code. Any glaucoma concept counts toward
/// the two encounters; they need not share a concept.
pub fn label_glaucoma(record: &PatientRecord, suspect_set: &BTreeSet<ConceptId>) -> CohortLabel {
    let dates: BTreeSet<_> = record
        .events
        .iter()
        .filter(|e| e.concept.domain == Domain::GlaucomaDx && !suspect_set.contains(&e.concept.id))
        .map(|e| e.date)
        .collect();
    if dates.len() >= 2 {
        CohortLabel::positive(*dates.iter().next().expect("non-empty"))
    } else {
        CohortLabel::negative()
    }
}

/// Drops everything dated on or after the first diagnosis for positive
/// patients. Negatives are returned unchanged.
pub fn apply_temporal_cutoff(record: &PatientRecord, label: &CohortLabel) -> PatientRecord {
    let mut out = record.clone();
    if let Some(cutoff) = label.first_dx_date() {
        out.events.retain(|e| e.date < cutoff);
        out.measurements.retain(|m| m.date < cutoff);
    }
    out
}

/// Extract evaluation-only eye features. Must run on the uncut record since
/// treatment and eye exams usually follow the diagnosis.
pub fn extract_eval_features(record: &PatientRecord, dict: &super::ConceptDictionary) -> EyeEvalFeatures {
    let max_of = |name: &str| {
        record
            .measurements
            .iter()
            .filter(|m| {
                m.concept.domain == Domain::EyeExam
                    && dict
                        .get(m.concept.id, Domain::EyeExam)
                        .is_some_and(|c| c.name == name)
            })
            .map(|m| m.value)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    };
    EyeEvalFeatures {
        max_iop: max_of(super::generate::IOP_NAME),
        max_cdr: max_of(super::generate::CDR_NAME),
        any_treatment: record
            .events
            .iter()
            .any(|e| e.concept.domain == Domain::GlaucomaTreatment),
    }
}
