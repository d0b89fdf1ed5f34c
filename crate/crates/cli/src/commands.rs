//! One function per subcommand. Inputs are read from the data directory and
//! every artifact lands in the output directory next to the resolved
//! configuration.

use std::fs;
use std::path::{Path, PathBuf};

use gra_core::baseline::{fit_gbdt, predict_gbdt, DemographicData, GbtModel};
use gra_core::checkpoint::{self, Model};
use gra_core::cohort::io::{read_cohort, read_dictionary, read_truth, write_cohort, write_dictionary, write_truth, TruthRow};
use gra_core::cohort::{ConceptDictionary, GeneratedPatient};
use gra_core::eval::{
    auroc, decile_calibration, evaluate, pr_curve, roc_curve, subgroup_eval, tune_threshold, EvalReport,
    REPORT_CSV_HEADER,
};
use gra_core::gra::{
    best_per_k, finetune_inputs, grid_csv, heatmap, heatmap_csv, pretrain_gra, run_grid, GraModel, GridResult,
    PretrainReport, Validation,
};
use gra_core::pipeline::{prepare_mapped, prepare_source, records, LabeledCohort, PreparedSite};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::published;
use crate::svg;

pub const SOURCE: &str = "source.jsonl";
pub const TARGET: &str = "target.jsonl";
pub const CONCEPTS: &str = "concepts.json";
pub const TRUTH: &str = "truth.jsonl";
pub const SOURCE_CKPT: &str = "source.ckpt";
pub const FINETUNED_CKPT: &str = "finetuned.ckpt";
pub const BASELINE_CKPT: &str = "baseline.ckpt";

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub data: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub n_train: usize,
    pub source_test: EvalReport,
    pub training: PretrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneSummary {
    pub k: usize,
    pub fraction: u32,
    pub n_available: usize,
    /// Share of systemic target events that map onto the source schema.
    pub event_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub n_test: usize,
    /// Test AUROC of the generator's latent risk.
    pub latent_risk_auroc: f64,
    pub model_auroc: f64,
}

impl Ctx {
    fn input(&self, name: &str, stage: &'static str) -> CliResult<PathBuf> {
        let p = self.data.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::Missing { path: p, stage })
        }
    }

    /// Checkpoints are looked up in the output directory first, then in the
    /// data directory.
    fn artifact(&self, name: &str, stage: &'static str) -> CliResult<PathBuf> {
        let p = self.out.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            self.input(name, stage)
        }
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        fs::write(self.out.join(name), contents)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, bytes)
    }

    fn echo_config(&self, command: &str) -> CliResult<()> {
        self.write(&format!("config.{command}.toml"), self.cfg.to_toml())
    }

    fn dictionary(&self) -> CliResult<ConceptDictionary> {
        Ok(read_dictionary(&self.input(CONCEPTS, "synth")?)?)
    }

    fn labeled(&self, file: &str) -> CliResult<LabeledCohort> {
        let dict = self.dictionary()?;
        let records = read_cohort(&self.input(file, "synth")?)?;
        Ok(LabeledCohort::new(&records, &dict))
    }

    fn gra_checkpoint(&self, default: &str, stage: &'static str) -> CliResult<GraModel> {
        let path = match &self.checkpoint {
            Some(p) if p.is_file() => p.clone(),
            Some(p) => return Err(CliError::Missing { path: p.clone(), stage }),
            None => self.artifact(default, stage)?,
        };
        match checkpoint::load(&path)? {
            Model::Gra(m) => Ok(m),
            other => Err(gra_core::Error::Format(format!("{} holds a `{}` model, expected `gra`", path.display(), other.kind())).into()),
        }
    }

    /// The target site mapped onto the source model's schema and scaler.
    fn target_site(&self, model: &GraModel) -> CliResult<PreparedSite> {
        let labeled = self.labeled(TARGET)?;
        Ok(prepare_mapped(&labeled, &model.schema, &model.scaler, &self.cfg.prep)?)
    }

    fn oracle(&self, site_name: &str, site: &PreparedSite, scores: &[f64], command: &str) -> CliResult<()> {
        if !self.oracle {
            return Ok(());
        }
        let truth = read_truth(&self.input(TRUTH, "synth")?)?;
        let risk: std::collections::BTreeMap<u64, f64> =
            truth.iter().filter(|t| t.site == site_name).map(|t| (t.patient_id, t.latent_risk)).collect();
        let latent = site
            .test_rows
            .iter()
            .map(|&i| {
                let id = site.matrix.patient_ids[i];
                risk.get(&id).copied().ok_or_else(|| gra_core::Error::Format(format!("{TRUTH} has no row for patient {id}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let labels = site.labels_at(&site.test_rows);
        let summary = OracleSummary {
            n_test: labels.len(),
            latent_risk_auroc: auroc(&latent, &labels)?,
            model_auroc: auroc(scores, &labels)?,
        };
        self.write_json(&format!("oracle.{command}.json"), &summary)
    }
}

fn truth_rows(site: &str, patients: &[GeneratedPatient]) -> Vec<TruthRow> {
    patients
        .iter()
        .map(|p| TruthRow { site: site.to_string(), patient_id: p.record.patient_id, latent_risk: p.latent_risk })
        .collect()
}

/// Threshold from the validation rows, metrics on the test rows.
fn holdout_report(site: &PreparedSite, val_scores: &[f64], test_scores: &[f64]) -> CliResult<EvalReport> {
    let threshold = tune_threshold(val_scores, &site.labels_at(&site.validation_rows))?;
    Ok(evaluate(test_scores, &site.labels_at(&site.test_rows), threshold)?)
}

fn points_csv(header: &str, points: &[(f64, f64)]) -> String {
    let mut out = format!("{header}\n");
    for (x, y) in points {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

pub fn synth(ctx: &Ctx) -> CliResult<()> {
    let sites = ctx.cfg.synth.generate(ctx.cfg.seed)?;
    write_cohort(&ctx.out.join(SOURCE), sites.source.iter().map(|p| &p.record))?;
    write_cohort(&ctx.out.join(TARGET), sites.target.iter().map(|p| &p.record))?;
    write_dictionary(&ctx.out.join(CONCEPTS), &sites.dictionary)?;
    let mut truth = truth_rows("source", &sites.source);
    truth.extend(truth_rows("target", &sites.target));
    write_truth(&ctx.out.join(TRUTH), &truth)?;
    ctx.echo_config("synth")?;
    let prevalence = |p: &[GeneratedPatient]| {
        let l = LabeledCohort::new(&records(p), &sites.dictionary);
        l.prevalence()
    };
    println!(
        "synth: {} source ({:.3} positive), {} target ({:.3} positive)",
        sites.source.len(),
        prevalence(&sites.source),
        sites.target.len(),
        prevalence(&sites.target)
    );
    Ok(())
}

pub fn pretrain(ctx: &Ctx) -> CliResult<()> {
    let labeled = ctx.labeled(SOURCE)?;
    let dict = ctx.dictionary()?;
    let (site, _, scaler) = prepare_source(&labeled, &dict, &ctx.cfg.prep)?;
    let (model, training) = pretrain_gra(&site.matrix, &site.labels, &site.train_rows, scaler, &ctx.cfg.model)?;
    let val = model.predict_rows(&site.matrix, &site.validation_rows)?;
    let test = model.predict_rows(&site.matrix, &site.test_rows)?;
    let source_test = holdout_report(&site, &val, &test)?;
    checkpoint::save(&ctx.out.join(SOURCE_CKPT), &Model::Gra(model))?;
    println!("pretrain: source test AUROC {:.3}", source_test.auroc);
    ctx.write_json("pretrain.json", &PretrainSummary { n_train: site.train_rows.len(), source_test, training })?;
    ctx.oracle("source", &site, &test, "pretrain")?;
    ctx.echo_config("pretrain")
}

pub fn finetune(ctx: &Ctx) -> CliResult<()> {
    let model = ctx.gra_checkpoint(SOURCE_CKPT, "pretrain")?;
    let site = ctx.target_site(&model)?;
    let ft = &ctx.cfg.finetune;
    let inputs = model.assemble(&site.matrix, Some(&site.train_rows))?;
    let val_inputs = model.assemble(&site.matrix, Some(&site.validation_rows))?;
    let val_labels = site.labels_at(&site.validation_rows);
    let tuned = finetune_inputs(
        &model,
        &inputs,
        &site.labels_at(&site.train_rows),
        Some(Validation { inputs: &val_inputs, labels: &val_labels }),
        ft.k,
        ft.fraction,
        &ft.train,
    )?;
    checkpoint::save(&ctx.out.join(FINETUNED_CKPT), &Model::Gra(tuned))?;
    let summary =
        FinetuneSummary { k: ft.k, fraction: ft.fraction, n_available: site.train_rows.len(), event_coverage: site.coverage.event_coverage() };
    ctx.write_json("finetune.json", &summary)?;
    println!("finetune: k = {}, {}% of {} training rows", ft.k, ft.fraction, site.train_rows.len());
    ctx.echo_config("finetune")
}

pub fn grid(ctx: &Ctx) -> CliResult<()> {
    let model = ctx.gra_checkpoint(SOURCE_CKPT, "pretrain")?;
    let site = ctx.target_site(&model)?;
    let g = &ctx.cfg.grid;
    let results = run_grid(&model, &site, &g.k_list, &g.fractions, &g.seeds, &ctx.cfg.finetune.train)?;
    ctx.write("grid.csv", grid_csv(&results))?;
    ctx.write_json("grid.json", &results)?;
    ctx.write("heatmap.csv", heatmap_csv(&results))?;
    let cells = heatmap(&results);
    ctx.write("heatmap.svg", svg::heatmap(&g.k_list, &g.fractions, |k, f| cells.get(&(k, f)).copied()))?;
    let mut best = String::from("k,fraction,auroc\n");
    for (k, f, a) in best_per_k(&results) {
        best.push_str(&format!("{k},{f},{a}\n"));
    }
    ctx.write("best_per_k.csv", best)?;
    println!("grid: {} cells", results.len());
    ctx.echo_config("grid")
}

pub fn eval(ctx: &Ctx) -> CliResult<()> {
    let model = ctx.gra_checkpoint(FINETUNED_CKPT, "finetune")?;
    let site = ctx.target_site(&model)?;
    let val = model.predict_rows(&site.matrix, &site.validation_rows)?;
    let test = model.predict_rows(&site.matrix, &site.test_rows)?;
    let mut report = holdout_report(&site, &val, &test)?;
    let labels = site.labels_at(&site.test_rows);
    report.subgroups = subgroup_eval(&test, &labels, &site.groups_at(&site.test_rows))?;
    ctx.write_json("eval.json", &report)?;
    ctx.write("eval.csv", report.to_csv())?;

    let roc = roc_curve(&test, &labels)?;
    ctx.write("roc.csv", points_csv("fpr,tpr", &roc))?;
    ctx.write("roc.svg", svg::curve("ROC, target test set", "false positive rate", "true positive rate", &roc, true))?;
    let pr = pr_curve(&test, &labels)?;
    ctx.write("pr.csv", points_csv("recall,precision", &pr))?;
    ctx.write("pr.svg", svg::curve("Precision-recall, target test set", "recall", "precision", &pr, false))?;

    let mut groups = String::from("group,n,n_positive,auroc,auprc\n");
    for (g, m) in &report.subgroups.evaluated {
        groups.push_str(&format!("{g},{},{},{},{}\n", m.n, m.n_positive, m.auroc, m.auprc));
    }
    for (g, n) in &report.subgroups.unevaluable {
        groups.push_str(&format!("{g},{n},,,\n"));
    }
    ctx.write("subgroups.csv", groups)?;
    println!("eval: AUROC {:.3}, AUPRC {:.3}, threshold {:.2}", report.auroc, report.auprc, report.threshold);
    ctx.oracle("target", &site, &test, "eval")?;
    ctx.echo_config("eval")
}

pub fn calibrate(ctx: &Ctx) -> CliResult<()> {
    let model = ctx.gra_checkpoint(FINETUNED_CKPT, "finetune")?;
    let site = ctx.target_site(&model)?;
    let rows: Vec<usize> =
        if ctx.cfg.calibration.full_cohort { (0..site.matrix.n_rows).collect() } else { site.test_rows.clone() };
    let scores = model.predict_rows(&site.matrix, &rows)?;
    let table = decile_calibration(&scores, &site.channels_at(&rows))?;
    ctx.write("calibration.csv", table.to_csv())?;
    ctx.write_json("calibration.json", &table)?;
    let x = |b: &gra_core::eval::CalibrationBucket| (b.bucket_index + 1) as f64;
    let series = [
        svg::Series {
            title: "Glaucoma diagnosis",
            ylabel: "rate",
            points: table.buckets.iter().map(|b| (x(b), Some(b.dx_rate))).collect(),
        },
        svg::Series {
            title: "Maximum IOP",
            ylabel: "mmHg",
            points: table.buckets.iter().map(|b| (x(b), b.mean_max_iop)).collect(),
        },
        svg::Series {
            title: "Maximum cup-to-disc ratio",
            ylabel: "CDR",
            points: table.buckets.iter().map(|b| (x(b), b.mean_max_cdr)).collect(),
        },
        svg::Series {
            title: "Glaucoma treatment",
            ylabel: "rate",
            points: table.buckets.iter().map(|b| (x(b), Some(b.tx_rate))).collect(),
        },
    ];
    ctx.write("calibration.svg", svg::panels("decile of predicted risk", &series))?;
    println!("calibrate: {} patients in {} buckets", rows.len(), table.buckets.len());
    ctx.echo_config("calibrate")
}

pub fn baseline(ctx: &Ctx) -> CliResult<()> {
    let labeled = ctx.labeled(TARGET)?;
    let dict = ctx.dictionary()?;
    let (site, _, _) = prepare_source(&labeled, &dict, &ctx.cfg.prep)?;
    let data = |rows: &[usize]| DemographicData::from_matrix(&site.matrix, rows);
    let model: GbtModel = fit_gbdt(&data(&site.train_rows), &site.labels_at(&site.train_rows), &ctx.cfg.baseline)?;
    let val = predict_gbdt(&model, &data(&site.validation_rows))?;
    let test = predict_gbdt(&model, &data(&site.test_rows))?;
    let report = holdout_report(&site, &val, &test)?;
    checkpoint::save(&ctx.out.join(BASELINE_CKPT), &Model::Gbt(model))?;
    ctx.write_json("baseline.json", &report)?;
    ctx.write("baseline.csv", report.to_csv())?;
    println!("baseline: AUROC {:.3}, AUPRC {:.3}", report.auroc, report.auprc);
    ctx.echo_config("baseline")
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| gra_core::Error::Format(format!("{}: {e}", path.display())).into())
}

fn optional(ctx: &Ctx, name: &str) -> Option<PathBuf> {
    [ctx.out.join(name), ctx.data.join(name)].into_iter().find(|p| p.is_file())
}

pub const REPORT_HEADER: &str = "source,model,k,fraction";

fn report_row(source: &str, model: &str, k: Option<usize>, fraction: Option<u32>, metrics: &str) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    format!("{source},{model},{},{},{metrics}\n", opt(k.map(|v| v.to_string())), opt(fraction.map(|v| v.to_string())))
}

pub fn report(ctx: &Ctx) -> CliResult<()> {
    let grid = optional(ctx, "grid.json");
    let eval = optional(ctx, "eval.json");
    let baseline = optional(ctx, "baseline.json");
    if grid.is_none() && eval.is_none() && baseline.is_none() {
        return Err(CliError::Missing { path: ctx.out.join("eval.json"), stage: "eval" });
    }
    let mut out = format!("{REPORT_HEADER},{REPORT_CSV_HEADER}\n");
    for r in &published::GRA_ROWS {
        let m: Vec<String> = r.metrics.iter().map(|v| format!("{v:.3}")).collect();
        out.push_str(&report_row(published::TAG, "gra", Some(r.k), Some(r.fraction), &m.join(",")));
    }
    let (a, p) = published::BASELINE;
    out.push_str(&report_row(published::TAG, "gbt", None, None, &format!("{a:.3},{p:.3},,,,,,,")));

    if let Some(path) = grid {
        let results: Vec<GridResult> = read_json(&path)?;
        for (k, f, _) in best_per_k(&results) {
            let cell: Vec<&GridResult> = results.iter().filter(|r| r.k == k && r.fraction == f).collect();
            if let Some(first) = cell.first() {
                out.push_str(&report_row("computed", "gra-grid", Some(k), Some(f), &first.metrics.csv_row()));
            }
        }
    }
    if let Some(path) = eval {
        let report: EvalReport = read_json(&path)?;
        let meta: Option<FinetuneSummary> = optional(ctx, "finetune.json").map(|p| read_json(&p)).transpose()?;
        out.push_str(&report_row(
            "computed",
            "gra",
            meta.as_ref().map(|m| m.k),
            meta.as_ref().map(|m| m.fraction),
            &report.csv_row(),
        ));
    }
    if let Some(path) = baseline {
        let report: EvalReport = read_json(&path)?;
        out.push_str(&report_row("computed", "gbt", None, None, &report.csv_row()));
    }
    ctx.write("report.csv", out)?;
    println!("report: written to {}", ctx.out.join("report.csv").display());
    ctx.echo_config("report")
}
