//! Glaucoma risk assessment from systemic EHR data.
//!
//! The crate covers the whole modelling pipeline:
//!
//! * [`cohort`]: an OMOP-like patient model, the glaucoma labelling rule, the
//!   temporal cutoff, evaluation-only eye features and a synthetic cohort
//!   generator with controllable dataset shift.
//! * [`preprocess`]: boolean/continuous encoding, train-fitted
//!   standardization, chained-equation imputation and stratified splitting.
//! * [`nn`]: a small explicit-backprop layer stack (dense, 1D convolution,
//!   pooling, dropout) with per-layer freeze masks.
//! * [`gra`]: the two-autoencoder + 1D-CNN risk model, source pretraining,
//!   suffix fine-tuning and the (trainable layers x data fraction) grid.
//! * [`eval`]: threshold tuning, confusion metrics, AUROC/AUPRC, decile
//!   calibration and subgroup metrics.
//! * [`baseline`]: a demographics-only gradient boosted tree classifier.
//! * [`checkpoint`]: the binary model container shared by all model kinds.
//! * [`pipeline`]: cohort-to-matrix glue used by the CLI and the tests.

pub mod baseline;
pub mod checkpoint;
pub mod cohort;
pub mod error;
pub mod eval;
pub mod gra;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod rng;

pub use error::{Error, Result};
