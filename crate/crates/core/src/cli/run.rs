use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::manifest::{Experiment, GuideChoice, RunManifest, MANIFEST_FILE};
use super::report::build_report;
use crate::data::{Corpus, Split};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::DivergenceRecord;
use crate::nn::ModelCheckpoint;
use crate::train::{
    classifier_result, evaluate, extract_guides, lambda_sweep, per_instance_adversary, seed_sweep, train_adversary,
    train_base, train_guided_mlp, train_uniform, ExperimentResult, GuideSource, GuidedMlpConfig,
};

pub const STATUS_FILE: &str = "status.json";
pub const RESULT_FILE: &str = "result.json";
pub const RESULTS_DIR: &str = "results";
pub const AGGREGATES_FILE: &str = "aggregates.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Lifecycle marker of a run directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunState {
    /// Written at start; a run left in this state was interrupted.
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub run_id: String,
    pub state: RunState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

/// Machine-readable error, as printed by the binary on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

/// Headline numbers of one result inside a run; compared exactly on replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub name: String,
    pub test_f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tvd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_jsd: Option<f64>,
}

impl AggregateRow {
    fn of(name: impl Into<String>, r: &ExperimentResult) -> Self {
        Self {
            name: name.into(),
            test_f1: r.test_f1,
            mean_tvd: r.mean_tvd,
            mean_jsd: r.mean_jsd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run_id: String,
    pub output_dir: PathBuf,
    pub aggregates: Vec<AggregateRow>,
}

pub fn read_status(dir: &Path) -> Result<RunStatus> {
    io::read_json(&dir.join(STATUS_FILE))
}

/// Executes a manifest and persists its artifacts under `manifest.output_dir`.
///
/// The directory gets a `running` status marker first and `complete` last,
/// so a run cut short stays flagged as invalid.
pub fn run(manifest: &RunManifest) -> Result<RunOutcome> {
    manifest.validate()?;
    let dir = &manifest.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    manifest.save(&dir.join(MANIFEST_FILE))?;
    let mut status = RunStatus {
        run_id: manifest.run_id.clone(),
        state: RunState::Running,
        error: None,
    };
    io::write_json(&dir.join(STATUS_FILE), &status)?;
    match execute(manifest, dir) {
        Ok(aggregates) => {
            io::write_json(&dir.join(AGGREGATES_FILE), &aggregates)?;
            status.state = RunState::Complete;
            io::write_json(&dir.join(STATUS_FILE), &status)?;
            Ok(RunOutcome {
                run_id: manifest.run_id.clone(),
                output_dir: dir.clone(),
                aggregates,
            })
        }
        Err(e) => {
            status.state = RunState::Failed;
            status.error = Some(ErrorReport::from(&e));
            io::write_json(&dir.join(STATUS_FILE), &status)?;
            Err(e)
        }
    }
}

fn save_result(dir: &Path, result: &ExperimentResult) -> Result<()> {
    result.save(&dir.join(RESULT_FILE))?;
    write_records(&dir.join(RECORDS_FILE), &result.records)
}

fn write_records(path: &Path, records: &[DivergenceRecord]) -> Result<()> {
    io::write_jsonl(path, records)
}

fn load_corpus(manifest: &RunManifest) -> Result<Corpus> {
    manifest
        .corpus
        .as_ref()
        .ok_or_else(|| Error::Config("manifest has no corpus".into()))?
        .load()
}

fn execute(manifest: &RunManifest, dir: &Path) -> Result<Vec<AggregateRow>> {
    let started = Instant::now();
    let config_json = serde_json::to_value(&manifest.experiment)?;
    match &manifest.experiment {
        Experiment::Base(cfg) => {
            let corpus = load_corpus(manifest)?;
            let trained = train_base(&corpus, cfg)?;
            trained.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
            let result = classifier_result("base", config_json, &corpus, &trained.checkpoint, None, started)?;
            save_result(dir, &result)?;
            Ok(vec![AggregateRow::of("base", &result)])
        }
        Experiment::Uniform(cfg) => {
            let corpus = load_corpus(manifest)?;
            let base_preds = match &cfg.base {
                Some(p) => Some(evaluate(&ModelCheckpoint::load(p)?, corpus.split(Split::Test))?),
                None => None,
            };
            let trained = train_uniform(&corpus, &cfg.train)?;
            trained.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
            let result = classifier_result("uniform", config_json, &corpus, &trained.checkpoint, base_preds.as_deref(), started)?;
            save_result(dir, &result)?;
            Ok(vec![AggregateRow::of("uniform", &result)])
        }
        Experiment::Seeds(cfg) => {
            let corpus = load_corpus(manifest)?;
            let sweep = seed_sweep(&corpus, &cfg.train, &cfg.seeds)?;
            let mut rows = Vec::new();
            for (seed, ckpt) in sweep.seeds.iter().zip(&sweep.checkpoints) {
                ckpt.save(&dir.join("checkpoints").join(format!("seed-{seed}.json")))?;
            }
            let base_preds = evaluate(&sweep.checkpoints[0], corpus.split(Split::Test))?;
            for (i, (seed, recs)) in sweep.records.iter().enumerate() {
                let ckpt = &sweep.checkpoints[i + 1];
                let mut r = classifier_result("seed", serde_json::json!({ "seed": seed }), &corpus, ckpt, Some(&base_preds), started)?;
                r.records = recs.clone();
                let name = format!("seed-{seed}");
                r.save(&dir.join(RESULTS_DIR).join(format!("{name}.json")))?;
                rows.push(AggregateRow::of(name, &r));
            }
            write_records(&dir.join(RECORDS_FILE), &sweep.all_records())?;
            io::write_json(&dir.join("density.json"), &sweep.summary)?;
            io::write_jsonl(&dir.join("density_cells.jsonl"), &sweep.summary.cells)?;
            io::write_jsonl(&dir.join("density_pooled.jsonl"), &sweep.summary.pooled)?;
            io::write_jsonl(&dir.join("seed_markers.jsonl"), &sweep.per_seed)?;
            io::write_json(&dir.join("seed_marker_mean.json"), &sweep.mean_marker)?;
            Ok(rows)
        }
        Experiment::MlpDiagnostic(cfg) => {
            let corpus = load_corpus(manifest)?;
            let source_ckpt = match &cfg.checkpoint {
                Some(p) => Some(ModelCheckpoint::load(p)?),
                None => None,
            };
            let guides = match cfg.guide {
                GuideChoice::FromCheckpoint => {
                    let ckpt = source_ckpt.as_ref().expect("validated");
                    let set = extract_guides(ckpt, &corpus)?;
                    set.save(&dir.join("guides.jsonl"))?;
                    Some(set)
                }
                _ => None,
            };
            let source = match (&guides, cfg.guide) {
                (Some(set), _) => GuideSource::Set(set),
                (None, GuideChoice::Learn) => GuideSource::Learn,
                _ => GuideSource::Uniform,
            };
            let mlp_cfg = GuidedMlpConfig {
                train: cfg.train.clone(),
                embedding_init: cfg.embedding_init,
            };
            let run = train_guided_mlp(&corpus, source, &mlp_cfg, source_ckpt.as_ref())?;
            run.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
            let mut result = run.result;
            result.config = config_json;
            result.run_id = crate::train::run_id(&result.kind, &result.config, &result.corpus_fingerprint);
            save_result(dir, &result)?;
            Ok(vec![AggregateRow::of(result.kind.clone(), &result)])
        }
        Experiment::Adversary(cfg) => {
            let corpus = load_corpus(manifest)?;
            let base = ModelCheckpoint::load(Path::new(&cfg.parent))?;
            let run = train_adversary(&corpus, &base, cfg)?;
            run.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
            io::write_jsonl(&dir.join("history.jsonl"), &run.history)?;
            save_result(dir, &run.result)?;
            Ok(vec![AggregateRow::of(format!("lambda-{}", cfg.lambda), &run.result)])
        }
        Experiment::LambdaSweep(cfg) => {
            let corpus = load_corpus(manifest)?;
            let base = ModelCheckpoint::load(Path::new(&cfg.adversary.parent))?;
            let sweep = lambda_sweep(&corpus, &base, &cfg.lambdas, &cfg.adversary)?;
            let mut rows = Vec::new();
            let mut all = Vec::new();
            for (i, run) in sweep.runs.iter().enumerate() {
                let name = format!("lambda-{i:02}");
                run.result.save(&dir.join(RESULTS_DIR).join(format!("{name}.json")))?;
                run.checkpoint.save(&dir.join("checkpoints").join(format!("{name}.json")))?;
                rows.push(AggregateRow::of(name, &run.result));
                all.extend(run.result.records.iter().cloned());
            }
            write_records(&dir.join(RECORDS_FILE), &all)?;
            io::write_jsonl(&dir.join("table.jsonl"), &sweep.curve)?;
            io::write_jsonl(&dir.join("tradeoff.jsonl"), &sweep.curve)?;
            io::write_jsonl(&dir.join("class_tradeoff.jsonl"), &sweep.class_curves)?;
            io::write_json(&dir.join("best_divergent.json"), &sweep.best_divergent)?;
            Ok(rows)
        }
        Experiment::InstanceAdversary(cfg) => {
            let corpus = load_corpus(manifest)?;
            let base = ModelCheckpoint::load(&cfg.base)?;
            let run = per_instance_adversary(&base, &corpus, &cfg.search)?;
            save_result(dir, &run.result)?;
            Ok(vec![AggregateRow::of("instance-adversary", &run.result)])
        }
        Experiment::Report(cfg) => {
            let report = build_report(&cfg.runs)?;
            io::write_json(&dir.join("report.json"), &report)?;
            io::write_jsonl(&dir.join("tradeoff.jsonl"), &report.tradeoff)?;
            io::write_jsonl(&dir.join("class_tradeoff.jsonl"), &report.class_tradeoff)?;
            Ok(report
                .runs
                .iter()
                .map(|r| AggregateRow {
                    name: r.run_id.clone(),
                    test_f1: r.test_f1,
                    mean_tvd: r.mean_tvd,
                    mean_jsd: r.mean_jsd,
                })
                .collect())
        }
    }
}

/// Re-runs a persisted manifest into `output_dir` and compares aggregates with the original.
pub fn replay(original_dir: &Path, output_dir: &Path) -> Result<(RunOutcome, bool)> {
    let mut manifest = RunManifest::load(&original_dir.join(MANIFEST_FILE))?;
    let original: Vec<AggregateRow> = io::read_json(&original_dir.join(AGGREGATES_FILE))?;
    manifest.output_dir = output_dir.to_path_buf();
    let outcome = run(&manifest)?;
    let same = outcome.aggregates == original;
    Ok((outcome, same))
}
