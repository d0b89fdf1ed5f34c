use gra_core::cohort::io::{read_cohort, read_dictionary, write_cohort, write_dictionary};
use gra_core::pipeline::{prepare_mapped, prepare_source, records, LabeledCohort, PrepConfig, SynthConfig};

fn small() -> SynthConfig {
    SynthConfig { n_source: 600, n_target: 400, ..SynthConfig::default() }
}

#[test]
fn jsonl_round_trip_preserves_labels() {
    let sites = small().generate(11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("target.jsonl");
    let concepts = dir.path().join("concepts.json");
    write_cohort(&cohort, sites.target.iter().map(|p| &p.record)).unwrap();
    write_dictionary(&concepts, &sites.dictionary).unwrap();

    let dict = read_dictionary(&concepts).unwrap();
    let back = LabeledCohort::new(&read_cohort(&cohort).unwrap(), &dict);
    let direct = LabeledCohort::new(&records(&sites.target), &sites.dictionary);
    assert_eq!(back, direct);
}

#[test]
fn target_on_source_schema() {
    let sites = small().generate(5).unwrap();
    let prep = PrepConfig { split_seed: 5, ..PrepConfig::default() };
    let src = LabeledCohort::new(&records(&sites.source), &sites.dictionary);
    let tgt = LabeledCohort::new(&records(&sites.target), &sites.dictionary);
    let (_, schema, scaler) = prepare_source(&src, &sites.dictionary, &prep).unwrap();
    let site = prepare_mapped(&tgt, &schema, &scaler, &prep).unwrap();

    assert_eq!(site.matrix.n_cols, schema.n_columns());
    assert_eq!(site.matrix.n_rows, 400);
    assert!(site.matrix.data.iter().all(|v| v.is_finite()));
    assert!(site.coverage.dropped_events > 0, "remapped concepts should fall outside the source schema");

    let mut rows: Vec<usize> =
        site.train_rows.iter().chain(&site.validation_rows).chain(&site.test_rows).copied().collect();
    rows.sort_unstable();
    assert_eq!(rows, (0..400).collect::<Vec<_>>());

    let again = prepare_mapped(&tgt, &schema, &scaler, &prep).unwrap();
    assert_eq!(site, again);
}
