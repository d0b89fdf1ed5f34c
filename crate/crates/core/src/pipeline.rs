//! Glue from raw cohorts to model-ready matrices: label, extract eye
//! features, cut at the first diagnosis, encode, standardize, impute, split.

use serde::{Deserialize, Serialize};

use crate::cohort::{
    apply_shift, apply_temporal_cutoff, extract_eval_features, generate_cohort, label_glaucoma, ConceptDictionary,
    EyeEvalFeatures, GeneratedPatient, GeneratorConfig, PatientRecord, ShiftConfig,
};
use crate::error::{Error, Result};
use crate::eval::CalibrationChannels;
use crate::preprocess::{
    apply_standardizer, encode, encode_mapped, fit_standardizer, mice_impute, split, FeatureMatrix, FeatureSchema,
    MiceConfig, MiceReport, ScalerParams, SchemaCoverage, SplitIndices, DEFAULT_RATIOS,
};

/// A cohort after labelling and the temporal cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCohort {
    pub records: Vec<PatientRecord>,
    pub labels: Vec<bool>,
    pub eye: Vec<EyeEvalFeatures>,
}

impl LabeledCohort {
    pub fn new(records: &[PatientRecord], dict: &ConceptDictionary) -> Self {
        let mut out = LabeledCohort { records: Vec::new(), labels: Vec::new(), eye: Vec::new() };
        for r in records {
            let label = label_glaucoma(r, &dict.glaucoma_suspect);
            out.eye.push(extract_eval_features(r, dict));
            out.records.push(apply_temporal_cutoff(r, &label));
            out.labels.push(label.is_glaucoma());
        }
        out
    }

    pub fn prevalence(&self) -> f64 {
        self.labels.iter().filter(|l| **l).count() as f64 / self.labels.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub split_ratios: [f64; 3],
    pub split_seed: u64,
    pub mice: MiceConfig,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig { split_ratios: DEFAULT_RATIOS, split_seed: 0, mice: MiceConfig::default() }
    }
}

/// One site's model-ready data. Row `i` of `matrix` belongs to
/// `labels[i]`, `eye[i]` and `groups[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSite {
    pub matrix: FeatureMatrix,
    pub labels: Vec<bool>,
    pub eye: Vec<EyeEvalFeatures>,
    /// Race/ethnicity group per row.
    pub groups: Vec<String>,
    pub split: SplitIndices,
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub coverage: SchemaCoverage,
    pub mice: MiceReport,
}

impl PreparedSite {
    fn assemble(
        labeled: &LabeledCohort,
        raw: FeatureMatrix,
        scaler: &ScalerParams,
        split: SplitIndices,
        coverage: SchemaCoverage,
        cfg: &PrepConfig,
    ) -> Result<Self> {
        let scaled = apply_standardizer(&raw, scaler)?;
        let (matrix, mice) = mice_impute(&scaled, &cfg.mice)?;
        Ok(PreparedSite {
            train_rows: matrix.row_indices(&split.train)?,
            validation_rows: matrix.row_indices(&split.validation)?,
            test_rows: matrix.row_indices(&split.test)?,
            matrix,
            labels: labeled.labels.clone(),
            eye: labeled.eye.clone(),
            groups: labeled.records.iter().map(|r| r.race_ethnicity.as_str().to_string()).collect(),
            split,
            coverage,
            mice,
        })
    }

    pub fn labels_at(&self, rows: &[usize]) -> Vec<bool> {
        rows.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn groups_at(&self, rows: &[usize]) -> Vec<String> {
        rows.iter().map(|&i| self.groups[i].clone()).collect()
    }

    pub fn channels_at(&self, rows: &[usize]) -> CalibrationChannels {
        CalibrationChannels {
            diagnosis: self.labels_at(rows),
            treatment: rows.iter().map(|&i| self.eye[i].any_treatment).collect(),
            max_iop: rows.iter().map(|&i| self.eye[i].max_iop).collect(),
            max_cdr: rows.iter().map(|&i| self.eye[i].max_cdr).collect(),
        }
    }
}

fn split_labeled(labeled: &LabeledCohort, cfg: &PrepConfig) -> Result<SplitIndices> {
    if labeled.records.is_empty() {
        return Err(Error::input("empty cohort"));
    }
    let ids: Vec<u64> = labeled.records.iter().map(|r| r.patient_id).collect();
    split(&ids, &labeled.labels, cfg.split_ratios, cfg.split_seed)
}

/// Prepare the source site: the schema comes from the concepts observed in
/// the cohort and the standardizer is fitted on its training rows.
pub fn prepare_source(
    labeled: &LabeledCohort,
    dict: &ConceptDictionary,
    cfg: &PrepConfig,
) -> Result<(PreparedSite, FeatureSchema, ScalerParams)> {
    let schema = FeatureSchema::from_cohort(dict, &labeled.records)?;
    let raw = encode(&labeled.records, &schema)?;
    let split = split_labeled(labeled, cfg)?;
    let scaler = fit_standardizer(&raw, &split.train)?;
    let site = PreparedSite::assemble(labeled, raw, &scaler, split, SchemaCoverage::default(), cfg)?;
    Ok((site, schema, scaler))
}

/// Prepare a site onto an existing schema and scaler, dropping concepts the
/// schema does not know.
pub fn prepare_mapped(
    labeled: &LabeledCohort,
    schema: &FeatureSchema,
    scaler: &ScalerParams,
    cfg: &PrepConfig,
) -> Result<PreparedSite> {
    let (raw, coverage) = encode_mapped(&labeled.records, schema)?;
    let split = split_labeled(labeled, cfg)?;
    PreparedSite::assemble(labeled, raw, scaler, split, coverage, cfg)
}

/// A source site and a shifted target site drawn from the standard design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_source: usize,
    pub n_target: usize,
    pub prevalence: f64,
    pub missingness_rate: f64,
    pub shift: ShiftConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_source: 4000,
            n_target: 2000,
            prevalence: 0.15,
            missingness_rate: 0.3,
            shift: ShiftConfig {
                prevalence_drift: 0.0,
                coefficient_noise_sd: 3.0,
                concept_remap_fraction: 0.4,
                marginal_drift_sd: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSites {
    pub source_config: GeneratorConfig,
    pub target_config: GeneratorConfig,
    pub source: Vec<GeneratedPatient>,
    pub target: Vec<GeneratedPatient>,
    /// Dictionary covering both sites, synonyms included.
    pub dictionary: ConceptDictionary,
}

impl SynthConfig {
    /// Source and target generator configs for `seed`. The target draws its
    /// patients and its shift from streams derived from `seed`.
    pub fn generator_configs(&self, seed: u64) -> Result<(GeneratorConfig, GeneratorConfig)> {
        let mut source = GeneratorConfig::new(self.n_source, self.prevalence, seed);
        source.missingness_rate = self.missingness_rate;
        source.validate()?;
        let mut base = source.clone();
        base.n_patients = self.n_target;
        base.seed = crate::rng::mix(seed, 0x7a6);
        let target = apply_shift(&base, &self.shift, crate::rng::mix(seed, 0x5f1))?;
        Ok((source, target))
    }

    pub fn generate(&self, seed: u64) -> Result<SynthSites> {
        let (source_config, target_config) = self.generator_configs(seed)?;
        let dictionary = source_config.dictionary().merged(&target_config.dictionary())?;
        Ok(SynthSites {
            source: generate_cohort(&source_config)?,
            target: generate_cohort(&target_config)?,
            source_config,
            target_config,
            dictionary,
        })
    }
}

pub fn records(patients: &[GeneratedPatient]) -> Vec<PatientRecord> {
    patients.iter().map(|p| p.record.clone()).collect()
}
