//! Run configuration: a TOML file with command-line overrides. The fully
//! resolved configuration is written next to every command's outputs.

use std::path::Path;

use gra_core::baseline::GbtConfig;
use gra_core::gra::{GraConfig, DEFAULT_FRACTIONS, DEFAULT_K_LIST, FINETUNE_LEARNING_RATE};
use gra_core::nn::TrainConfig;
use gra_core::pipeline::{PrepConfig, SynthConfig};
use gra_core::rng::mix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// TOML integers are signed 64-bit.
const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub k: usize,
    pub fraction: u32,
    pub train: TrainConfig,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig { k: 15, fraction: 100, train: TrainConfig { epochs: 20, learning_rate: FINETUNE_LEARNING_RATE, ..TrainConfig::default() } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub k_list: Vec<usize>,
    pub fractions: Vec<u32>,
    /// Fine-tuning seeds; empty means the run seed only.
    pub seeds: Vec<u64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { k_list: DEFAULT_K_LIST.to_vec(), fractions: DEFAULT_FRACTIONS.to_vec(), seeds: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Bucket the whole target cohort instead of its test rows.
    pub full_cohort: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Master seed. Split, model, fine-tuning and baseline seeds are derived
    /// from it when the configuration is resolved.
    pub seed: u64,
    pub threads: Option<usize>,
    pub synth: SynthConfig,
    pub prep: PrepConfig,
    pub model: GraConfig,
    pub finetune: FinetuneConfig,
    pub grid: GridConfig,
    pub baseline: GbtConfig,
    pub calibration: CalibrationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            threads: None,
            synth: SynthConfig::default(),
            prep: PrepConfig::default(),
            model: GraConfig::default(),
            finetune: FinetuneConfig::default(),
            grid: GridConfig::default(),
            baseline: GbtConfig::default(),
            calibration: CalibrationConfig::default(),
        }
    }
}

/// Flags that override the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub k: Option<Vec<usize>>,
    pub fraction: Option<Vec<u32>>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Apply overrides, derive the per-stage seeds and check ranges.
    pub fn resolve(mut self, o: &Overrides) -> CliResult<Self> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        if let Some(k) = &o.k {
            self.grid.k_list = k.clone();
            if let [single] = k.as_slice() {
                self.finetune.k = *single;
            }
        }
        if let Some(f) = &o.fraction {
            self.grid.fractions = f.clone();
            if let [single] = f.as_slice() {
                self.finetune.fraction = *single;
            }
        }
        if self.seed > MAX_SEED {
            return Err(CliError::Config(format!("seed must be at most {MAX_SEED}")));
        }
        let seed = self.seed;
        self.prep.split_seed = seed;
        self.prep.mice.seed = seed;
        self.model = self.model.with_seed(seed);
        self.model.autoencoder.seed &= MAX_SEED;
        self.model.cnn.seed &= MAX_SEED;
        self.finetune.train.seed = mix(seed, 3) & MAX_SEED;
        self.baseline.seed = seed;
        if self.grid.seeds.is_empty() {
            self.grid.seeds = vec![self.finetune.train.seed];
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> CliResult<()> {
        let s = &self.synth;
        if !(s.prevalence > 0.0 && s.prevalence < 1.0) {
            return Err(CliError::Config(format!("prevalence must lie in (0, 1), got {}", s.prevalence)));
        }
        if s.n_source < 10 || s.n_target < 10 {
            return Err(CliError::Config("each site needs at least 10 patients".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        if self.grid.k_list.is_empty() || self.grid.fractions.is_empty() {
            return Err(CliError::Config("--k and --fraction lists must be nonempty".into()));
        }
        if let Some(k) = self.grid.k_list.iter().find(|k| **k > gra_core::gra::CNN_LAYERS) {
            return Err(CliError::Config(format!("k = {k} outside 0..={}", gra_core::gra::CNN_LAYERS)));
        }
        if let Some(f) = self.grid.fractions.iter().find(|f| **f == 0 || **f > 100) {
            return Err(CliError::Config(format!("fraction {f}% outside 1..=100")));
        }
        s.shift.validate()?;
        self.finetune.train.validate()?;
        self.model.cnn.validate()?;
        self.model.autoencoder.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }
}
