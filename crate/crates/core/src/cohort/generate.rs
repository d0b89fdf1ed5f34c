//! Synthetic cohort generator.
//!
//! Patients are drawn from a latent comorbidity model: a handful of standard
//! normal factors drive the presence of diagnosis and medication concepts and
//! the values of labs/vitals. Glaucoma risk is the sigmoid of a planted linear
//! score over concept presence, standardized lab values and demographics; the
//! intercept is solved so that the expected prevalence matches the target.
//! Eye-exam outcomes (max IOP, max CDR, treatment) are drawn conditional on
//! the latent log-odds and the realized diagnosis.

use chrono::{Duration, NaiveDate};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    CodedEvent, ConceptCode, ConceptDictionary, ConceptEntry, ConceptId, Domain, MeasurementEvent,
    PatientRecord, RaceEthnicity, Sex,
};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub(crate) const IOP_NAME: &str = "intraocular_pressure";
pub(crate) const CDR_NAME: &str = "cup_to_disc_ratio";

const IOP_ID: ConceptId = 400_001;
const CDR_ID: ConceptId = 400_002;
const GLAUCOMA_CODES: [(ConceptId, &str); 5] = [
    (500_001, "primary_open_angle_glaucoma"),
    (500_002, "angle_closure_glaucoma"),
    (500_003, "normal_tension_glaucoma"),
    (500_004, "pseudoexfoliation_glaucoma"),
    (500_005, "pigmentary_glaucoma"),
];
const SUSPECT_CODES: [(ConceptId, &str); 2] = [
    (510_001, "glaucoma_suspect"),
    (510_002, "anatomical_narrow_angle_suspect"),
];
const TREATMENT_CODES: [(ConceptId, &str); 6] = [
    (520_001, "latanoprost"),
    (520_002, "timolol"),
    (520_003, "selective_laser_trabeculoplasty"),
    (520_004, "trabeculectomy"),
    (520_005, "tube_shunt"),
    (520_006, "other_glaucoma_laser"),
];

/// (name, mean, sd, domain) for the first labs/vitals; later slots are generic.
const LAB_TABLE: [(&str, f64, f64, Domain); 12] = [
    ("hba1c", 5.9, 0.9, Domain::Lab),
    ("glucose", 105.0, 25.0, Domain::Lab),
    ("ldl_cholesterol", 110.0, 32.0, Domain::Lab),
    ("hdl_cholesterol", 55.0, 15.0, Domain::Lab),
    ("triglycerides", 140.0, 60.0, Domain::Lab),
    ("creatinine", 1.0, 0.3, Domain::Lab),
    ("hemoglobin", 13.5, 1.5, Domain::Lab),
    ("tsh", 2.1, 1.0, Domain::Lab),
    ("systolic_bp", 128.0, 16.0, Domain::Vital),
    ("diastolic_bp", 77.0, 10.0, Domain::Vital),
    ("bmi", 27.5, 5.5, Domain::Vital),
    ("heart_rate", 72.0, 11.0, Domain::Vital),
];

const N_FACTORS: usize = 6;
const DESIGN_SEED: u64 = 0x6c61_7465_6e74;
const CALIBRATION_SAMPLE: usize = 20_000;
const AGE_CENTER: f64 = 62.0;

/// Race/ethnicity mix of the eye-clinic cohort used as the default source.
const RACE_MIX: [f64; 5] = [0.5013, 0.0352, 0.2624, 0.1165, 0.0846];
const FEMALE_FRACTION: f64 = 0.5814;

fn study_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 11, 1).expect("valid date")
}

fn study_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 31).expect("valid date")
}

/// Concept ids per feature slot. Remapping replaces ids but keeps slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptLayout {
    pub dx_ids: Vec<ConceptId>,
    pub med_ids: Vec<ConceptId>,
    pub lab_ids: Vec<ConceptId>,
    pub lab_names: Vec<String>,
    pub lab_domains: Vec<Domain>,
}

/// Per-concept coefficients of the planted logistic risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalWeights {
    pub dx: Vec<f64>,
    pub med: Vec<f64>,
    /// Per standardized lab/vital value.
    pub lab: Vec<f64>,
}

impl SignalWeights {
    pub fn zeros(n_dx: usize, n_med: usize, n_lab: usize) -> Self {
        Self {
            dx: vec![0.0; n_dx],
            med: vec![0.0; n_med],
            lab: vec![0.0; n_lab],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicEffects {
    /// Log-odds per decade of age.
    pub age_per_decade: f64,
    pub male: f64,
    /// Indexed by [`RaceEthnicity::index`].
    pub race: [f64; 5],
}

impl DemographicEffects {
    pub fn zero() -> Self {
        Self {
            age_per_decade: 0.0,
            male: 0.0,
            race: [0.0; 5],
        }
    }
}

/// Marginal structure of the concept/lab distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub dx_logit: Vec<f64>,
    pub med_logit: Vec<f64>,
    /// Row-major `n_concepts x N_FACTORS` factor loadings.
    pub dx_loadings: Vec<Vec<f64>>,
    pub med_loadings: Vec<Vec<f64>>,
    pub lab_loadings: Vec<Vec<f64>>,
    /// Log-odds per standardized age unit.
    pub dx_age: Vec<f64>,
    pub med_age: Vec<f64>,
    pub lab_mean: Vec<f64>,
    pub lab_sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    pub target_prevalence: f64,
    pub n_dx_concepts: usize,
    pub n_med_concepts: usize,
    pub n_lab_concepts: usize,
    pub signal_weights: SignalWeights,
    pub demographic_effects: DemographicEffects,
    pub missingness_rate: f64,
    pub seed: u64,
    pub concepts: ConceptLayout,
    pub marginals: Marginals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedPatient {
    pub record: PatientRecord,
    pub latent_risk: f64,
}

impl GeneratorConfig {
    pub const DEFAULT_DX: usize = 96;
    pub const DEFAULT_MED: usize = 48;
    pub const DEFAULT_LAB: usize = 12;

    pub fn new(n_patients: usize, target_prevalence: f64, seed: u64) -> Self {
        Self::with_counts(
            n_patients,
            target_prevalence,
            Self::DEFAULT_DX,
            Self::DEFAULT_MED,
            Self::DEFAULT_LAB,
            seed,
        )
    }

    /// Standard design for the given concept counts. The design (marginals,
    /// loadings and planted weights) is fixed; `seed` only drives sampling.
    pub fn with_counts(
        n_patients: usize,
        target_prevalence: f64,
        n_dx: usize,
        n_med: usize,
        n_lab: usize,
        seed: u64,
    ) -> Self {
        let mut rng = rng::seeded(DESIGN_SEED);
        let loadings = |n: usize, rng: &mut Rng| -> Vec<Vec<f64>> {
            (0..n)
                .map(|j| {
                    (0..N_FACTORS)
                        .map(|k| {
                            if k == j % N_FACTORS {
                                rng.random_range(0.9..1.5)
                            } else {
                                0.2 * rng.sample::<f64, _>(StandardNormal)
                            }
                        })
                        .collect()
                })
                .collect()
        };
        let dx_loadings = loadings(n_dx, &mut rng);
        let med_loadings = loadings(n_med, &mut rng);
        let lab_loadings: Vec<Vec<f64>> = (0..n_lab)
            .map(|j| {
                (0..N_FACTORS)
                    .map(|k| if k == j % N_FACTORS { rng.random_range(0.4..0.7) } else { 0.0 })
                    .collect()
            })
            .collect();
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let dx_logit = (0..n_dx).map(|_| logit(rng.random_range(0.04..0.30))).collect();
        let med_logit = (0..n_med).map(|_| logit(rng.random_range(0.04..0.30))).collect();
        let dx_age = (0..n_dx).map(|_| rng.random_range(0.0..0.6)).collect();
        let med_age = (0..n_med).map(|_| rng.random_range(0.0..0.6)).collect();

        let mut weights = SignalWeights::zeros(n_dx, n_med, n_lab);
        for (count, j) in (0..n_dx).step_by(3).take(12).enumerate() {
            let sign = if count % 5 == 4 { -1.0 } else { 1.0 };
            weights.dx[j] = sign * rng.random_range(0.6..1.3);
        }
        for (count, j) in (1..n_med).step_by(3).take(8).enumerate() {
            let sign = if count % 4 == 3 { -1.0 } else { 1.0 };
            weights.med[j] = sign * rng.random_range(0.5..1.1);
        }
        for (j, w) in [0.35, 0.25, -0.2, 0.3].into_iter().enumerate().take(n_lab) {
            weights.lab[j] = w;
        }

        let (mut lab_names, mut lab_mean, mut lab_sd, mut lab_domains) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for j in 0..n_lab {
            let (name, mean, sd, domain) = LAB_TABLE
                .get(j)
                .map(|&(n, m, s, d)| (n.to_string(), m, s, d))
                .unwrap_or_else(|| (format!("lab_{j:03}"), 0.0, 1.0, Domain::Lab));
            lab_names.push(name);
            lab_mean.push(mean);
            lab_sd.push(sd);
            lab_domains.push(domain);
        }

        Self {
            n_patients,
            target_prevalence,
            n_dx_concepts: n_dx,
            n_med_concepts: n_med,
            n_lab_concepts: n_lab,
            signal_weights: weights,
            demographic_effects: DemographicEffects {
                age_per_decade: 0.35,
                male: 0.10,
                race: [0.0, 0.45, 0.30, 0.0, 0.0],
            },
            missingness_rate: 0.3,
            seed,
            concepts: ConceptLayout {
                dx_ids: (0..n_dx as u64).map(|j| 100_000 + j).collect(),
                med_ids: (0..n_med as u64).map(|j| 200_000 + j).collect(),
                lab_ids: (0..n_lab as u64).map(|j| 300_000 + j).collect(),
                lab_names,
                lab_domains,
            },
            marginals: Marginals {
                dx_logit,
                med_logit,
                dx_loadings,
                med_loadings,
                lab_loadings,
                dx_age,
                med_age,
                lab_mean,
                lab_sd,
            },
        }
    }

    /// Same design with the planted risk score removed (weights and
    /// demographic effects zeroed).
    pub fn without_signal(mut self) -> Self {
        self.signal_weights = SignalWeights::zeros(self.n_dx_concepts, self.n_med_concepts, self.n_lab_concepts);
        self.demographic_effects = DemographicEffects::zero();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_prevalence > 0.0 && self.target_prevalence < 1.0) {
            return Err(Error::config(format!(
                "target_prevalence must lie in (0, 1), got {}",
                self.target_prevalence
            )));
        }
        if !(0.0..=0.9).contains(&self.missingness_rate) {
            return Err(Error::config(format!(
                "missingness_rate must lie in [0, 0.9], got {}",
                self.missingness_rate
            )));
        }
        if self.n_patients == 0 {
            return Err(Error::config("n_patients must be positive"));
        }
        if self.n_dx_concepts == 0 || self.n_med_concepts == 0 || self.n_lab_concepts == 0 {
            return Err(Error::config("concept counts must be positive"));
        }
        let (d, m, l) = (self.n_dx_concepts, self.n_med_concepts, self.n_lab_concepts);
        let w = &self.signal_weights;
        let mg = &self.marginals;
        let c = &self.concepts;
        let lens_ok = w.dx.len() == d
            && w.med.len() == m
            && w.lab.len() == l
            && mg.dx_logit.len() == d
            && mg.med_logit.len() == m
            && mg.dx_loadings.len() == d
            && mg.med_loadings.len() == m
            && mg.lab_loadings.len() == l
            && mg.dx_age.len() == d
            && mg.med_age.len() == m
            && mg.lab_mean.len() == l
            && mg.lab_sd.len() == l
            && c.dx_ids.len() == d
            && c.med_ids.len() == m
            && c.lab_ids.len() == l
            && c.lab_names.len() == l
            && c.lab_domains.len() == l;
        if !lens_ok {
            return Err(Error::config("generator vectors disagree with concept counts"));
        }
        let all_finite = w.dx.iter().chain(&w.med).chain(&w.lab).all(|v| v.is_finite())
            && mg.lab_sd.iter().all(|s| *s > 0.0 && s.is_finite());
        if !all_finite {
            return Err(Error::config("non-finite weight or non-positive lab sd"));
        }
        let unique = |ids: &[ConceptId]| {
            let set: std::collections::BTreeSet<_> = ids.iter().collect();
            set.len() == ids.len()
        };
        if !unique(&c.dx_ids) || !unique(&c.med_ids) || !unique(&c.lab_ids) {
            return Err(Error::config("duplicate concept ids within a domain"));
        }
        Ok(())
    }

    /// Concept dictionary of this site.
    pub fn dictionary(&self) -> ConceptDictionary {
        let mut entries = Vec::new();
        let syn = |id: ConceptId, base: ConceptId| {
            if id == base {
                String::new()
            } else {
                format!("_syn{id}")
            }
        };
        for (j, &id) in self.concepts.dx_ids.iter().enumerate() {
            entries.push(ConceptEntry {
                concept_id: id,
                domain: Domain::Diagnosis,
                name: format!("condition_{j:03}{}", syn(id, 100_000 + j as u64)),
            });
        }
        for (j, &id) in self.concepts.med_ids.iter().enumerate() {
            entries.push(ConceptEntry {
                concept_id: id,
                domain: Domain::Medication,
                name: format!("drug_{j:03}{}", syn(id, 200_000 + j as u64)),
            });
        }
        for (j, &id) in self.concepts.lab_ids.iter().enumerate() {
            entries.push(ConceptEntry {
                concept_id: id,
                domain: self.concepts.lab_domains[j],
                name: self.concepts.lab_names[j].clone(),
            });
        }
        entries.push(ConceptEntry {
            concept_id: IOP_ID,
            domain: Domain::EyeExam,
            name: IOP_NAME.into(),
        });
        entries.push(ConceptEntry {
            concept_id: CDR_ID,
            domain: Domain::EyeExam,
            name: CDR_NAME.into(),
        });
        let fixed = [
            (&GLAUCOMA_CODES[..], Domain::GlaucomaDx),
            (&SUSPECT_CODES[..], Domain::GlaucomaSuspectDx),
            (&TREATMENT_CODES[..], Domain::GlaucomaTreatment),
        ];
        for (codes, domain) in fixed {
            for &(id, name) in codes {
                entries.push(ConceptEntry {
                    concept_id: id,
                    domain,
                    name: name.into(),
                });
            }
        }
        ConceptDictionary::new(entries).expect("generated dictionary is consistent")
    }

    /// Sum of absolute dx+med coefficients over all coefficients
    /// (dx, med, lab, demographic).
    pub fn concept_coefficient_share(&self) -> f64 {
        let w = &self.signal_weights;
        let abs = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        let concept = abs(&w.dx) + abs(&w.med);
        let e = &self.demographic_effects;
        let other = abs(&w.lab) + e.age_per_decade.abs() + e.male.abs() + abs(&e.race);
        if concept + other == 0.0 {
            0.0
        } else {
            concept / (concept + other)
        }
    }
}

/// Covariates drawn for one patient before outcome sampling.
struct Covariates {
    age: f64,
    sex: Sex,
    race: RaceEthnicity,
    dx: Vec<bool>,
    med: Vec<bool>,
    /// Standardized lab values.
    lab_z: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn sample_covariates(cfg: &GeneratorConfig, rng: &mut Rng) -> Covariates {
    let age = (62.5 + 18.0 * rng.sample::<f64, _>(StandardNormal)).clamp(18.0, 100.0);
    let sex = if rng.random_bool(FEMALE_FRACTION) { Sex::Female } else { Sex::Male };
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut race = RaceEthnicity::Other;
    for (r, p) in RaceEthnicity::ALL.iter().zip(RACE_MIX) {
        acc += p;
        if u < acc {
            race = *r;
            break;
        }
    }
    let factors: Vec<f64> = (0..N_FACTORS).map(|_| rng.sample(StandardNormal)).collect();
    let age_z = (age - AGE_CENTER) / 18.0;
    let dot = |l: &[f64]| l.iter().zip(&factors).map(|(a, b)| a * b).sum::<f64>();
    let mg = &cfg.marginals;
    let dx = (0..cfg.n_dx_concepts)
        .map(|j| {
            let p = sigmoid(mg.dx_logit[j] + dot(&mg.dx_loadings[j]) + mg.dx_age[j] * age_z);
            rng.random_bool(p)
        })
        .collect();
    let med = (0..cfg.n_med_concepts)
        .map(|j| {
            let p = sigmoid(mg.med_logit[j] + dot(&mg.med_loadings[j]) + mg.med_age[j] * age_z);
            rng.random_bool(p)
        })
        .collect();
    let lab_z = (0..cfg.n_lab_concepts)
        .map(|j| {
            let l = &mg.lab_loadings[j];
            let shared = dot(l);
            let resid = (1.0 - l.iter().map(|v| v * v).sum::<f64>()).max(0.05).sqrt();
            shared + resid * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Covariates {
        age,
        sex,
        race,
        dx,
        med,
        lab_z,
    }
}

fn planted_score(cfg: &GeneratorConfig, c: &Covariates) -> f64 {
    let w = &cfg.signal_weights;
    let e = &cfg.demographic_effects;
    let mut s = 0.0;
    s += c.dx.iter().zip(&w.dx).filter(|(x, _)| **x).map(|(_, w)| w).sum::<f64>();
    s += c.med.iter().zip(&w.med).filter(|(x, _)| **x).map(|(_, w)| w).sum::<f64>();
    s += c.lab_z.iter().zip(&w.lab).map(|(z, w)| z * w).sum::<f64>();
    s += e.age_per_decade * (c.age - AGE_CENTER) / 10.0;
    if c.sex == Sex::Male {
        s += e.male;
    }
    s + e.race[c.race.index()]
}

/// Intercept such that the expected risk over a fixed design sample equals
/// the target prevalence.
fn solve_intercept(cfg: &GeneratorConfig) -> f64 {
    let scores: Vec<f64> = (0..CALIBRATION_SAMPLE)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::substream(DESIGN_SEED, 0xca1, i as u64);
            planted_score(cfg, &sample_covariates(cfg, &mut rng))
        })
        .collect();
    let mean_risk = |b: f64| scores.iter().map(|s| sigmoid(b + s)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_risk(mid) < cfg.target_prevalence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn rand_date(rng: &mut Rng, lo: NaiveDate, hi: NaiveDate) -> NaiveDate {
    let span = (hi - lo).num_days().max(0);
    lo + Duration::days(rng.random_range(0..=span))
}

/// `n` distinct sorted dates in `[lo, hi]` (fewer if the window is short).
fn distinct_dates(rng: &mut Rng, n: usize, lo: NaiveDate, hi: NaiveDate) -> Vec<NaiveDate> {
    let mut dates: Vec<NaiveDate> = (0..n).map(|_| rand_date(rng, lo, hi)).collect();
    dates.sort();
    dates.dedup();
    dates
}

fn push_event(events: &mut Vec<CodedEvent>, id: ConceptId, domain: Domain, date: NaiveDate) {
    events.push(CodedEvent {
        concept: ConceptCode::new(id, domain),
        date,
    })
}

fn pick<T: Copy>(rng: &mut Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

fn sample_patient(cfg: &GeneratorConfig, intercept: f64, index: usize) -> GeneratedPatient {
    let mut rng = rng::substream(cfg.seed, 0x9a7, index as u64);
    let cov = sample_covariates(cfg, &mut rng);
    let logit = intercept + planted_score(cfg, &cov);
    let risk = sigmoid(logit);
    // log-odds above the population base rate; drives the eye outcomes
    let excess = logit - (cfg.target_prevalence / (1.0 - cfg.target_prevalence)).ln();
    let glaucoma = rng.random_bool(risk);

    let (start, end) = (study_start(), study_end());
    let span = (end - start).num_days();
    let first_dx = glaucoma.then(|| start + Duration::days(rng.random_range(730..=span - 90)));
    // systemic history window
    let hist_end = first_dx.map_or(end, |d| d - Duration::days(1));

    let mut events = Vec::new();
    let mut measurements = Vec::new();
    let c = &cfg.concepts;

    for (present, &id) in cov.dx.iter().zip(&c.dx_ids) {
        if *present {
            let n = rng.random_range(1..=3);
            for date in distinct_dates(&mut rng, n, start, hist_end) {
                push_event(&mut events, id, Domain::Diagnosis, date);
            }
        }
    }
    for (present, &id) in cov.med.iter().zip(&c.med_ids) {
        if *present {
            let n = rng.random_range(1..=3);
            for date in distinct_dates(&mut rng, n, start, hist_end) {
                push_event(&mut events, id, Domain::Medication, date);
            }
        }
    }
    let noise = Normal::new(0.0, 0.25).expect("valid sd");
    for j in 0..cfg.n_lab_concepts {
        if rng.random_bool(cfg.missingness_rate) {
            continue;
        }
        let concept = ConceptCode::new(c.lab_ids[j], c.lab_domains[j]);
        let (mean, sd) = (cfg.marginals.lab_mean[j], cfg.marginals.lab_sd[j]);
        let n = rng.random_range(1..=3);
        let dates = distinct_dates(&mut rng, n, start, hist_end);
        let last = dates.len() - 1;
        for (k, date) in dates.into_iter().enumerate() {
            let z = if k == last { cov.lab_z[j] } else { cov.lab_z[j] + noise.sample(&mut rng) };
            measurements.push(MeasurementEvent {
                concept,
                date,
                value: mean + sd * z,
            });
        }
    }

    let window_after = |d: NaiveDate| (d, end);
    if let Some(dx_date) = first_dx {
        // encounters that carry the diagnosis
        let n_enc = rng.random_range(2..=4);
        let later_hi = (dx_date + Duration::days(900)).min(end);
        let mut dates = vec![dx_date];
        while dates.len() < n_enc {
            let d = rand_date(&mut rng, dx_date + Duration::days(1), later_hi);
            if !dates.contains(&d) {
                dates.push(d);
            }
        }
        for d in dates {
            let (id, _) = pick(&mut rng, &GLAUCOMA_CODES);
            push_event(&mut events, id, Domain::GlaucomaDx, d);
        }
        if rng.random_bool(0.3) {
            let (id, _) = pick(&mut rng, &SUSPECT_CODES);
            let d = rand_date(&mut rng, start, hist_end);
            push_event(&mut events, id, Domain::GlaucomaSuspectDx, d);
        }
        if rng.random_bool(0.85) {
            for _ in 0..rng.random_range(1..=2) {
                let (id, _) = pick(&mut rng, &TREATMENT_CODES);
                let (lo, hi) = window_after(dx_date);
                let d = rand_date(&mut rng, lo, hi);
                push_event(&mut events, id, Domain::GlaucomaTreatment, d);
            }
        }
        // post-diagnosis systemic activity; removed by the temporal cutoff
        if rng.random_bool(0.8) {
            for _ in 0..rng.random_range(1..=4) {
                let (lo, hi) = window_after(dx_date);
                let d = rand_date(&mut rng, lo, hi);
                if rng.random_bool(0.5) {
                    push_event(&mut events, pick(&mut rng, &c.dx_ids), Domain::Diagnosis, d);
                } else {
                    push_event(&mut events, pick(&mut rng, &c.med_ids), Domain::Medication, d);
                }
            }
        }
        if rng.random_bool(0.5) {
            let j = rng.random_range(0..cfg.n_lab_concepts);
            let (lo, hi) = window_after(dx_date);
            measurements.push(MeasurementEvent {
                concept: ConceptCode::new(c.lab_ids[j], c.lab_domains[j]),
                date: rand_date(&mut rng, lo, hi),
                value: cfg.marginals.lab_mean[j] + cfg.marginals.lab_sd[j] * (cov.lab_z[j] + 1.0),
            });
        }
    } else {
        if rng.random_bool((0.03 + 0.35 * risk).min(1.0)) {
            let n = rng.random_range(1..=3);
            for d in distinct_dates(&mut rng, n, start, end) {
                let (id, _) = pick(&mut rng, &SUSPECT_CODES);
                push_event(&mut events, id, Domain::GlaucomaSuspectDx, d);
            }
        }
        if rng.random_bool(0.02) {
            // a single coded encounter does not meet the case definition
            let d = rand_date(&mut rng, start, end);
            let (id, _) = pick(&mut rng, &GLAUCOMA_CODES);
            push_event(&mut events, id, Domain::GlaucomaDx, d);
        }
        if rng.random_bool(sigmoid(-2.4 + 0.35 * excess)) {
            let (id, _) = pick(&mut rng, &TREATMENT_CODES);
            let d = rand_date(&mut rng, start, end);
            push_event(&mut events, id, Domain::GlaucomaTreatment, d);
        }
    }

    // eye examination outcomes
    let g = if glaucoma { 1.0 } else { 0.0 };
    let iop_max =
        (18.6 + 0.5 * excess + 3.5 * g + 1.5 * rng.sample::<f64, _>(StandardNormal)).clamp(6.0, 60.0);
    let n_iop = rng.random_range(1..=4);
    for (k, date) in distinct_dates(&mut rng, n_iop, start, end).into_iter().enumerate() {
        let value = if k == 0 {
            iop_max
        } else {
            (iop_max - 2.0 * rng.sample::<f64, _>(StandardNormal).abs()).max(5.0)
        };
        measurements.push(MeasurementEvent {
            concept: ConceptCode::new(IOP_ID, Domain::EyeExam),
            date,
            value,
        });
    }
    if rng.random_bool(0.75) {
        let cdr_max =
            (0.40 + 0.025 * excess + 0.25 * g + 0.06 * rng.sample::<f64, _>(StandardNormal)).clamp(0.05, 0.95);
        let n_cdr = rng.random_range(1..=2);
        for (k, date) in distinct_dates(&mut rng, n_cdr, start, end).into_iter().enumerate() {
            let value = if k == 0 {
                cdr_max
            } else {
                (cdr_max - 0.03 * rng.sample::<f64, _>(StandardNormal).abs()).max(0.0)
            };
            measurements.push(MeasurementEvent {
                concept: ConceptCode::new(CDR_ID, Domain::EyeExam),
                date,
                value,
            });
        }
    }

    events.sort_by_key(|e| (e.date, e.concept));
    measurements.sort_by(|a, b| (a.date, a.concept).cmp(&(b.date, b.concept)));
    GeneratedPatient {
        record: PatientRecord {
            patient_id: index as u64 + 1,
            age: (cov.age * 10.0).round() / 10.0,
            sex: cov.sex,
            race_ethnicity: cov.race,
            events,
            measurements,
        },
        latent_risk: risk,
    }
}

/// Generate `config.n_patients` patients with their latent risks.
/// Deterministic per seed, independent of thread count.
pub fn generate_cohort(config: &GeneratorConfig) -> Result<Vec<GeneratedPatient>> {
    config.validate()?;
    let intercept = solve_intercept(config);
    Ok((0..config.n_patients)
        .into_par_iter()
        .map(|i| sample_patient(config, intercept, i))
        .collect())
}
