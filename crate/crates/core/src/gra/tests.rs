use std::sync::OnceLock;

use proptest::prelude::*;

use super::*;
use crate::cohort::{generate_cohort, GeneratorConfig};
use crate::nn::TrainConfig;
use crate::pipeline::{prepare_source, LabeledCohort, PrepConfig, PreparedSite};
use crate::preprocess::ContinuousColumn;

fn fixture() -> &'static (PreparedSite, GraModel) {
    static F: OnceLock<(PreparedSite, GraModel)> = OnceLock::new();
    F.get_or_init(|| {
        let cfg = GeneratorConfig::new(500, 0.2, 5);
        let records: Vec<_> = generate_cohort(&cfg).unwrap().into_iter().map(|g| g.record).collect();
        let labeled = LabeledCohort::new(&records, &cfg.dictionary());
        let (site, _, scaler) = prepare_source(&labeled, &cfg.dictionary(), &PrepConfig::default()).unwrap();
        let mut gc = GraConfig::default().with_seed(1);
        gc.autoencoder.epochs = 3;
        gc.cnn.epochs = 2;
        let (model, _) = pretrain_gra(&site.matrix, &site.labels, &site.train_rows, scaler, &gc).unwrap();
        (site, model)
    })
}

fn quick() -> TrainConfig {
    TrainConfig { epochs: 1, batch_size: 16, learning_rate: 1e-3, seed: 9, ..TrainConfig::default() }
}

#[test]
fn cnn_parameter_positions() {
    let pos: Vec<usize> =
        cnn_specs().iter().enumerate().filter(|(_, s)| s.has_params()).map(|(i, _)| i + 1).collect();
    assert_eq!(pos, vec![1, 3, 6, 8, 12, 15, 18]);
    assert_eq!(cnn_specs().len(), CNN_LAYERS);
}

#[test]
fn input_length_is_sum_of_parts() {
    let (site, model) = fixture();
    assert_eq!(model.schema.continuous_columns.len(), 12);
    assert_eq!(model.input_len(), 32 + 32 + 8 + 12);
    let x = model.assemble_row(site.matrix.row(0)).unwrap();
    assert_eq!(x.shape, vec![1, 84]);
}

#[test]
fn med_change_only_moves_med_segment() {
    let (site, model) = fixture();
    let mut a = site.matrix.row(0).to_vec();
    let j = model.schema.med_range().start + 2;
    a[j] = 0.0;
    let mut b = a.clone();
    b[j] = 1.0;
    let (xa, xb) = (model.assemble_row(&a).unwrap(), model.assemble_row(&b).unwrap());
    for (i, (u, v)) in xa.data.iter().zip(&xb.data).enumerate() {
        if !(32..64).contains(&i) {
            assert_eq!(u, v, "position {i}");
        }
    }
    assert_ne!(xa.data[32..64], xb.data[32..64]);
}

#[test]
fn excluded_feature_is_rejected() {
    let (site, model) = fixture();
    let mut m = site.matrix.clone();
    m.schema.continuous_columns[0] = ContinuousColumn { concept_id: 400_001, name: "max_iop".into() };
    assert!(matches!(model.predict(&m), Err(crate::Error::Schema(_))));
    let mut m = site.matrix.clone();
    m.schema.continuous_columns.swap(0, 1);
    assert!(matches!(model.predict(&m), Err(crate::Error::Shape(_))));
}

#[test]
fn predictions_bounded_and_row_wise() {
    let (site, model) = fixture();
    let p = model.predict(&site.matrix).unwrap();
    assert_eq!(p.len(), site.matrix.n_rows);
    assert!(p.iter().all(|v| *v > 0.0 && *v < 1.0));
    let dup = site.matrix.select_rows(&[3, 3, 7]);
    let q = model.predict(&dup).unwrap();
    assert_eq!(q[0], q[1]);
    assert_eq!(q[0], p[3]);
    assert_eq!(q[2], p[7]);
}

#[test]
fn k_zero_returns_identical_model() {
    let (site, model) = fixture();
    for f in DEFAULT_FRACTIONS {
        let out = finetune(model, &site.matrix, &site.labels, 0, f, &quick()).unwrap();
        assert_eq!(&out, model);
    }
}

#[test]
fn full_finetune_moves_every_cnn_layer_but_not_autoencoders() {
    let (site, model) = fixture();
    let out = finetune(model, &site.matrix, &site.labels, 18, 100, &quick()).unwrap();
    for (a, b) in out.cnn.layers.iter().zip(&model.cnn.layers) {
        assert_eq!(a.spec.has_params(), a.params != b.params);
    }
    assert_eq!(out.dx_ae, model.dx_ae);
    assert_eq!(out.med_ae, model.med_ae);
}

#[test]
fn finetune_rejects_bad_arguments() {
    let (site, model) = fixture();
    assert!(matches!(finetune(model, &site.matrix, &site.labels, 19, 100, &quick()), Err(crate::Error::Config(_))));
    assert!(matches!(finetune(model, &site.matrix, &site.labels, 3, 0, &quick()), Err(crate::Error::Config(_))));
    assert!(matches!(finetune(model, &site.matrix, &site.labels, 3, 101, &quick()), Err(crate::Error::Config(_))));
}

#[test]
fn partial_finetune_respects_suffix() {
    let (site, model) = fixture();
    let out = finetune(model, &site.matrix, &site.labels, 4, 60, &quick()).unwrap();
    for (i, (a, b)) in out.cnn.layers.iter().zip(&model.cnn.layers).enumerate() {
        assert_eq!(i >= 14 && a.spec.has_params(), a.params != b.params, "layer {}", i + 1);
    }
}

#[test]
fn grid_shape_and_determinism() {
    let (site, model) = fixture();
    let run = || run_grid(model, site, &[0, 18], &[40, 100], &[1], &quick()).unwrap();
    let a = run();
    assert_eq!(a.len(), 4);
    assert_eq!(
        a.iter().map(|r| (r.k, r.fraction)).collect::<Vec<_>>(),
        vec![(0, 40), (0, 100), (18, 40), (18, 100)]
    );
    assert_eq!(a, run());
    // k = 0 cells see the same model
    assert_eq!(a[0].metrics, a[1].metrics);
    let csv = grid_csv(&a);
    assert_eq!(csv.lines().next().unwrap(), GRID_CSV_HEADER);
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(heatmap_csv(&a).lines().count(), 5);
    assert_eq!(best_per_k(&a).len(), 2);
    assert!(run_grid(model, site, &[], &[20], &[1], &quick()).is_err());
}

#[test]
fn trainable_sets_grow_with_k() {
    let mut stack = fixture().1.cnn.clone();
    let mut prev: Vec<bool> = vec![false; CNN_LAYERS];
    for k in 0..=CNN_LAYERS {
        stack.set_trainable_last_k(k).unwrap();
        let trainable: Vec<bool> = stack.freeze_mask.iter().map(|f| !f).collect();
        assert!(prev.iter().zip(&trainable).all(|(p, t)| !p || *t));
        prev = trainable;
    }
}

proptest! {
    #[test]
    fn subsamples_nest_and_stratify(labels in proptest::collection::vec(any::<bool>(), 1..300), seed in 0u64..50) {
        let mut prev: Vec<usize> = Vec::new();
        let n_pos = labels.iter().filter(|l| **l).count() as f64;
        for f in DEFAULT_FRACTIONS {
            let rows = subsample(&labels, f, seed).unwrap();
            prop_assert_eq!(rows.len(), f as usize * labels.len() / 100);
            prop_assert_eq!(&rows[..prev.len()], &prev[..]);
            let pos = rows.iter().filter(|&&i| labels[i]).count() as f64;
            prop_assert!((pos - n_pos * rows.len() as f64 / labels.len() as f64).abs() <= 1.0);
            prop_assert_eq!(&rows, &subsample(&labels, f, seed).unwrap());
            prev = rows;
        }
    }
}
