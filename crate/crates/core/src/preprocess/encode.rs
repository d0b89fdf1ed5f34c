use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FeatureSchema};
use crate::cohort::{ConceptId, Domain, PatientRecord, RaceEthnicity, Sex};
use crate::error::{Error, Result};

/// How much of a cohort's systemic coding the schema can see.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemaCoverage {
    pub known_events: usize,
    pub dropped_events: usize,
    pub dropped_concepts: BTreeSet<ConceptId>,
}

impl SchemaCoverage {
    /// Fraction of systemic events that map onto a schema column.
    pub fn event_coverage(&self) -> f64 {
        let total = self.known_events + self.dropped_events;
        if total == 0 {
            1.0
        } else {
            self.known_events as f64 / total as f64
        }
    }
}

/// Encode with the schema; any systemic concept outside it is an error.
/// Records must already have the temporal cutoff applied.
pub fn encode(records: &[PatientRecord], schema: &FeatureSchema) -> Result<FeatureMatrix> {
    let (matrix, coverage) = encode_inner(records, schema)?;
    if let Some(id) = coverage.dropped_concepts.iter().next() {
        return Err(Error::ColumnSet(format!(
            "concept {id} occurs in the cohort but has no schema column ({} unknown concepts)",
            coverage.dropped_concepts.len()
        )));
    }
    Ok(matrix)
}

/// Encode a cohort from another site onto `schema`, dropping concepts the
/// schema does not know and reporting coverage.
pub fn encode_mapped(records: &[PatientRecord], schema: &FeatureSchema) -> Result<(FeatureMatrix, SchemaCoverage)> {
    encode_inner(records, schema)
}

fn encode_inner(records: &[PatientRecord], schema: &FeatureSchema) -> Result<(FeatureMatrix, SchemaCoverage)> {
    schema.validate()?;
    let n_cols = schema.n_columns();
    let index = |ids: &mut dyn Iterator<Item = ConceptId>, offset: usize| -> HashMap<ConceptId, usize> {
        ids.enumerate().map(|(i, id)| (id, offset + i)).collect()
    };
    let dx_idx = index(&mut schema.dx_columns.iter().copied(), schema.dx_range().start);
    let med_idx = index(&mut schema.med_columns.iter().copied(), schema.med_range().start);
    let cont_idx = index(
        &mut schema.continuous_columns.iter().map(|c| c.concept_id),
        schema.continuous_range().start,
    );
    let demo: HashMap<&str, usize> = schema
        .demographic_columns
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), schema.demographic_range().start + i))
        .collect();

    let mut data = vec![0.0; records.len() * n_cols];
    let mut mask = vec![false; records.len() * n_cols];
    let mut coverage = SchemaCoverage::default();
    let mut ids = Vec::with_capacity(records.len());

    for (i, r) in records.iter().enumerate() {
        let row = &mut data[i * n_cols..(i + 1) * n_cols];
        ids.push(r.patient_id);
        for e in &r.events {
            let idx = match e.concept.domain {
                Domain::Diagnosis => dx_idx.get(&e.concept.id),
                Domain::Medication => med_idx.get(&e.concept.id),
                _ => continue,
            };
            match idx {
                Some(&j) => {
                    row[j] = 1.0;
                    coverage.known_events += 1;
                }
                None => {
                    coverage.dropped_events += 1;
                    coverage.dropped_concepts.insert(e.concept.id);
                }
            }
        }
        for j in schema.continuous_range() {
            row[j] = f64::NAN;
        }
        // latest measurement wins; equal dates resolve to the later entry
        let mut latest: HashMap<usize, (chrono::NaiveDate, f64)> = HashMap::new();
        for m in &r.measurements {
            if !matches!(m.concept.domain, Domain::Lab | Domain::Vital) {
                continue;
            }
            match cont_idx.get(&m.concept.id) {
                Some(&j) => {
                    coverage.known_events += 1;
                    let slot = latest.entry(j).or_insert((m.date, m.value));
                    if m.date >= slot.0 {
                        *slot = (m.date, m.value);
                    }
                }
                None => {
                    coverage.dropped_events += 1;
                    coverage.dropped_concepts.insert(m.concept.id);
                }
            }
        }
        for (j, (_, v)) in latest {
            row[j] = v;
        }
        let mut set_demo = |name: &str, v: f64| {
            if let Some(&j) = demo.get(name) {
                row[j] = v;
            }
        };
        set_demo("age", r.age);
        set_demo("sex_female", f64::from(u8::from(r.sex == Sex::Female)));
        set_demo("sex_male", f64::from(u8::from(r.sex == Sex::Male)));
        for race in RaceEthnicity::ALL {
            set_demo(&format!("race_{}", race.as_str()), f64::from(u8::from(r.race_ethnicity == race)));
        }
        let mrow = &mut mask[i * n_cols..(i + 1) * n_cols];
        for j in schema.continuous_range() {
            mrow[j] = row[j].is_nan();
        }
    }
    Ok((FeatureMatrix::new(schema.clone(), ids, data, mask)?, coverage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{
        apply_temporal_cutoff, generate_cohort, label_glaucoma, CodedEvent, ConceptCode, GeneratorConfig,
        MeasurementEvent,
    };
    use crate::preprocess::ContinuousColumn;
    use proptest::prelude::*;

    fn schema() -> FeatureSchema {
        FeatureSchema {
            dx_columns: vec![42, 43],
            med_columns: vec![7],
            continuous_columns: vec![ContinuousColumn {
                concept_id: 300,
                name: "glucose".into(),
            }],
            demographic_columns: super::super::DEMOGRAPHIC_COLUMNS.iter().map(|s| s.to_string()).collect(),
            exclusion_list: vec!["max_iop".into()],
        }
    }

    fn patient(id: u64) -> PatientRecord {
        PatientRecord {
            patient_id: id,
            age: 50.0,
            sex: Sex::Male,
            race_ethnicity: RaceEthnicity::Hispanic,
            events: vec![],
            measurements: vec![],
        }
    }

    fn d(s: &str) -> chrono::NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn presence_and_demographics() {
        let mut p = patient(1);
        p.events.push(CodedEvent {
            concept: ConceptCode::new(42, Domain::Diagnosis),
            date: d("2016-01-01"),
        });
        let m = encode(&[p], &schema()).unwrap();
        let names = m.schema.column_names();
        let col = |n: &str| names.iter().position(|c| c == n).unwrap();
        assert_eq!(m.get(0, col("dx:42")), 1.0);
        assert_eq!(m.get(0, col("dx:43")), 0.0);
        assert_eq!(m.get(0, col("age")), 50.0);
        assert_eq!(m.get(0, col("sex_male")), 1.0);
        assert_eq!(m.get(0, col("race_hispanic")), 1.0);
        assert_eq!(m.get(0, col("race_nh_white")), 0.0);
        assert!(m.is_missing(0, col("glucose")));
        assert!(m.get(0, col("glucose")).is_nan());
        assert!(!m.is_missing(0, col("dx:42")));
    }

    #[test]
    fn latest_value_used() {
        let mut p = patient(1);
        for (date, v) in [("2017-05-01", 140.0), ("2015-01-01", 90.0)] {
            p.measurements.push(MeasurementEvent {
                concept: ConceptCode::new(300, Domain::Lab),
                date: d(date),
                value: v,
            });
        }
        let m = encode(&[p], &schema()).unwrap();
        assert_eq!(m.get(0, m.schema.continuous_range().start), 140.0);
    }

    #[test]
    fn latest_value_matches_naive_scan() {
        let cfg = GeneratorConfig::new(150, 0.2, 21);
        let dict = cfg.dictionary();
        let cohort: Vec<_> = generate_cohort(&cfg)
            .unwrap()
            .into_iter()
            .map(|g| {
                let l = label_glaucoma(&g.record, &dict.glaucoma_suspect);
                apply_temporal_cutoff(&g.record, &l)
            })
            .collect();
        let schema = FeatureSchema::from_cohort(&dict, &cohort).unwrap();
        let m = encode(&cohort, &schema).unwrap();
        for (i, r) in cohort.iter().enumerate() {
            for (k, c) in schema.continuous_columns.iter().enumerate() {
                // oracle: sort all readings of the concept by date and take the last
                let mut readings: Vec<_> = r
                    .measurements
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| x.concept.id == c.concept_id)
                    .map(|(pos, x)| (x.date, pos, x.value))
                    .collect();
                readings.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
                let got = m.get(i, schema.continuous_range().start + k);
                match readings.last() {
                    Some(&(_, _, v)) => assert_eq!(got, v),
                    None => assert!(got.is_nan()),
                }
            }
        }
    }

    #[test]
    fn unknown_concept_is_column_set_error() {
        let mut p = patient(1);
        p.events.push(CodedEvent {
            concept: ConceptCode::new(99, Domain::Medication),
            date: d("2016-01-01"),
        });
        assert!(matches!(encode(&[p.clone()], &schema()), Err(Error::ColumnSet(_))));
        let (m, cov) = encode_mapped(&[p], &schema()).unwrap();
        assert_eq!(m.n_rows, 1);
        assert_eq!(cov.dropped_events, 1);
        assert!(cov.dropped_concepts.contains(&99));
        assert_eq!(cov.event_coverage(), 0.0);
    }

    #[test]
    fn eval_features_never_in_schema() {
        let cfg = GeneratorConfig::new(100, 0.2, 2);
        let dict = cfg.dictionary();
        let cohort: Vec<_> = generate_cohort(&cfg).unwrap().into_iter().map(|g| g.record).collect();
        let schema = FeatureSchema::from_cohort(&dict, &cohort).unwrap();
        let names: BTreeSet<_> = schema.column_names().into_iter().collect();
        let excluded: BTreeSet<_> = schema.exclusion_list.iter().cloned().collect();
        assert!(names.is_disjoint(&excluded));
        for f in crate::cohort::EyeEvalFeatures::FIELD_NAMES {
            assert!(excluded.contains(f));
        }
        assert!(excluded.contains("intraocular_pressure"));
        let mut bad = schema.clone();
        bad.continuous_columns.push(ContinuousColumn {
            concept_id: 1,
            name: "max_iop".into(),
        });
        assert!(matches!(bad.validate(), Err(Error::Schema(_))));
    }

    proptest! {
        #[test]
        fn encode_is_permutation_equivariant(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let cfg = GeneratorConfig::new(25, 0.2, seed);
            let dict = cfg.dictionary();
            let cohort: Vec<_> = generate_cohort(&cfg).unwrap().into_iter().map(|g| g.record).collect();
            let schema = FeatureSchema::from_cohort(&dict, &cohort).unwrap();
            let m = encode(&cohort, &schema).unwrap();
            let mut perm: Vec<usize> = (0..cohort.len()).collect();
            perm.shuffle(&mut crate::rng::seeded(seed));
            let permuted: Vec<_> = perm.iter().map(|&i| cohort[i].clone()).collect();
            let mp = encode(&permuted, &schema).unwrap();
            for (new, &old) in perm.iter().enumerate() {
                prop_assert_eq!(mp.patient_ids[new], m.patient_ids[old]);
                for j in 0..m.n_cols {
                    let (a, b) = (mp.get(new, j), m.get(old, j));
                    prop_assert!(a == b || (a.is_nan() && b.is_nan()));
                }
            }
        }
    }
}
