use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ConceptId, GeneratorConfig};
use crate::error::{Error, Result};
use crate::rng;

/// Source-to-target dataset shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftConfig {
    /// Added to the target prevalence.
    pub prevalence_drift: f64,
    /// Sd of Gaussian noise added to the nonzero concept and lab risk
    /// coefficients. Demographic effects are not perturbed.
    pub coefficient_noise_sd: f64,
    /// Fraction of diagnosis and medication concepts recoded to synonym ids.
    pub concept_remap_fraction: f64,
    /// Sd of Gaussian drift of concept base log-odds and of lab means (in
    /// units of the lab sd).
    pub marginal_drift_sd: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self::none()
    }
}

impl ShiftConfig {
    pub fn none() -> Self {
        Self {
            prevalence_drift: 0.0,
            coefficient_noise_sd: 0.0,
            concept_remap_fraction: 0.0,
            marginal_drift_sd: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.prevalence_drift,
            self.coefficient_noise_sd,
            self.concept_remap_fraction,
            self.marginal_drift_sd,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.coefficient_noise_sd < 0.0 || self.marginal_drift_sd < 0.0 {
            return Err(Error::config("shift magnitudes must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.concept_remap_fraction) {
            return Err(Error::config(format!(
                "concept_remap_fraction must lie in [0, 1], got {}",
                self.concept_remap_fraction
            )));
        }
        Ok(())
    }
}

/// Number of concepts remapped out of `n`: `floor(f * n)`, with a small
/// tolerance so that products that are integral in exact arithmetic are not
/// lost to rounding (0.3 * 100 = 30.000000000000004 or 29.999...).
fn remap_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Fresh ids for synonyms: above every id in use so they never collide.
fn remap(ids: &mut [ConceptId], fraction: f64, offset: ConceptId, rng: &mut rng::Rng) {
    let k = remap_count(fraction, ids.len());
    let mut chosen: Vec<usize> = sample(rng, ids.len(), k).into_vec();
    chosen.sort_unstable();
    for j in chosen {
        ids[j] += offset;
    }
}

const SYNONYM_OFFSET: ConceptId = 1_000_000;

/// Derive the target-site generator configuration.
pub fn apply_shift(config: &GeneratorConfig, shift: &ShiftConfig, seed: u64) -> Result<GeneratorConfig> {
    shift.validate()?;
    let mut out = config.clone();
    out.target_prevalence = config.target_prevalence + shift.prevalence_drift;
    if !(out.target_prevalence > 0.0 && out.target_prevalence < 1.0) {
        return Err(Error::config(format!(
            "shifted prevalence {} outside (0, 1)",
            out.target_prevalence
        )));
    }

    if shift.coefficient_noise_sd > 0.0 {
        let noise = Normal::new(0.0, shift.coefficient_noise_sd).map_err(|e| Error::config(e.to_string()))?;
        let mut r = rng::substream(seed, 0x5e1, 0);
        let w = &mut out.signal_weights;
        for v in w.dx.iter_mut().chain(w.med.iter_mut()).chain(w.lab.iter_mut()) {
            // one draw per slot keeps the stream aligned across configs
            let d = noise.sample(&mut r);
            if *v != 0.0 {
                *v += d;
            }
        }
    }

    if shift.marginal_drift_sd > 0.0 {
        let noise = Normal::new(0.0, shift.marginal_drift_sd).map_err(|e| Error::config(e.to_string()))?;
        let mut r = rng::substream(seed, 0x5e1, 1);
        let m = &mut out.marginals;
        for v in m.dx_logit.iter_mut().chain(m.med_logit.iter_mut()) {
            *v += noise.sample(&mut r);
        }
        for (mean, sd) in m.lab_mean.iter_mut().zip(&m.lab_sd) {
            *mean += sd * noise.sample(&mut r);
        }
    }

    if shift.concept_remap_fraction > 0.0 {
        let mut r = rng::substream(seed, 0x5e1, 2);
        remap(&mut out.concepts.dx_ids, shift.concept_remap_fraction, SYNONYM_OFFSET, &mut r);
        remap(&mut out.concepts.med_ids, shift.concept_remap_fraction, SYNONYM_OFFSET, &mut r);
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_shift_is_identity() {
        let cfg = GeneratorConfig::new(100, 0.15, 3);
        assert_eq!(apply_shift(&cfg, &ShiftConfig::none(), 99).unwrap(), cfg);
    }

    #[test]
    fn remaps_floor_fraction_of_concepts() {
        let cfg = GeneratorConfig::with_counts(100, 0.15, 100, 40, 12, 3);
        let shift = ShiftConfig {
            concept_remap_fraction: 0.3,
            ..ShiftConfig::none()
        };
        let out = apply_shift(&cfg, &shift, 5).unwrap();
        let changed = |a: &[u64], b: &[u64]| a.iter().zip(b).filter(|(x, y)| x != y).count();
        assert_eq!(changed(&cfg.concepts.dx_ids, &out.concepts.dx_ids), 30);
        assert_eq!(changed(&cfg.concepts.med_ids, &out.concepts.med_ids), 12);
        // weights stay attached to the slot, i.e. transfer to the new id
        assert_eq!(out.signal_weights, cfg.signal_weights);
        let src: std::collections::BTreeSet<_> = cfg.concepts.dx_ids.iter().collect();
        for id in &out.concepts.dx_ids {
            if !src.contains(id) {
                assert!(*id > 1_000_000);
            }
        }
    }

    #[test]
    fn prevalence_drift_is_additive() {
        let cfg = GeneratorConfig::new(100, 0.15, 3);
        let shift = ShiftConfig {
            prevalence_drift: 0.05,
            ..ShiftConfig::none()
        };
        let out = apply_shift(&cfg, &shift, 1).unwrap();
        assert!((out.target_prevalence - 0.20).abs() < 1e-12);
        let bad = ShiftConfig {
            prevalence_drift: 0.9,
            ..ShiftConfig::none()
        };
        assert!(matches!(apply_shift(&cfg, &bad, 1), Err(Error::Config(_))));
    }

    #[test]
    fn shift_is_deterministic_per_seed() {
        let cfg = GeneratorConfig::new(100, 0.15, 3);
        let shift = ShiftConfig {
            prevalence_drift: 0.01,
            coefficient_noise_sd: 0.5,
            concept_remap_fraction: 0.4,
            marginal_drift_sd: 0.3,
        };
        let a = apply_shift(&cfg, &shift, 8).unwrap();
        assert_eq!(a, apply_shift(&cfg, &shift, 8).unwrap());
        assert_ne!(a, apply_shift(&cfg, &shift, 9).unwrap());
    }

    #[test]
    fn negative_magnitudes_rejected() {
        let cfg = GeneratorConfig::new(100, 0.15, 3);
        let shift = ShiftConfig {
            coefficient_noise_sd: -1.0,
            ..ShiftConfig::none()
        };
        assert!(apply_shift(&cfg, &shift, 1).is_err());
        let shift = ShiftConfig {
            concept_remap_fraction: 1.5,
            ..ShiftConfig::none()
        };
        assert!(apply_shift(&cfg, &shift, 1).is_err());
    }
}
