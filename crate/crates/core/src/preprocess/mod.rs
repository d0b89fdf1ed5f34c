//! Cohort to model-ready matrix: encoding, standardization, chained-equation
//! imputation and patient-level splitting.

mod encode;
mod matrix;
mod mice;
pub mod persist;
mod scale;
mod split;

pub use encode::{encode, encode_mapped, SchemaCoverage};
pub use matrix::{ContinuousColumn, FeatureMatrix, FeatureSchema, DEMOGRAPHIC_COLUMNS};
pub use mice::{mice_impute, MiceConfig, MiceOrder, MiceReport};
pub use scale::{apply_standardizer, fit_standardizer, ScalerParams};
pub use split::{split, SplitIndices, DEFAULT_RATIOS};
