use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{Experiment, RunManifest, MANIFEST_FILE};
use super::run::{read_status, RunState, RESULTS_DIR, RESULT_FILE};
use crate::error::{Error, Result};
use crate::io;
use crate::train::{best_divergent, ClassTradeoffPoint, ExperimentResult, SeedMarker, TradeoffPoint, DIVERGENT_JSD_THRESHOLD};

/// One plotted point of the TVD/JSD tradeoff figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    /// `adversary`, `uniform`, `seed`, `seed-mean` or `instance-adversary`.
    pub series: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub mean_jsd: f64,
    pub mean_tvd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_f1: Option<f64>,
}

/// Headline numbers of one summarized result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub kind: String,
    pub source: PathBuf,
    pub test_f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tvd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_jsd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: Vec<RunSummary>,
    /// `(lambda, F1, TVD, JSD)` rows of every adversary found.
    pub adversary_table: Vec<TradeoffPoint>,
    pub best_divergent: Option<TradeoffPoint>,
    pub tradeoff: Vec<TradeoffRow>,
    pub class_tradeoff: Vec<ClassTradeoffPoint>,
}

fn summary(source: &Path, r: &ExperimentResult) -> RunSummary {
    RunSummary {
        run_id: r.run_id.clone(),
        kind: r.kind.clone(),
        source: source.to_path_buf(),
        test_f1: r.test_f1,
        mean_tvd: r.mean_tvd,
        mean_jsd: r.mean_jsd,
    }
}

fn sorted_results(dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = dir.join(RESULTS_DIR);
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Collects finished runs into tables and tradeoff-curve points.
pub fn build_report(run_dirs: &[PathBuf]) -> Result<Report> {
    let mut report = Report {
        runs: Vec::new(),
        adversary_table: Vec::new(),
        best_divergent: None,
        tradeoff: Vec::new(),
        class_tradeoff: Vec::new(),
    };
    for dir in run_dirs {
        let status = read_status(dir)?;
        if status.state != RunState::Complete {
            return Err(Error::InvalidInput(format!("run {} is not complete ({:?})", dir.display(), status.state)));
        }
        let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
        match &manifest.experiment {
            Experiment::LambdaSweep(_) => {
                for path in sorted_results(dir)? {
                    let r = ExperimentResult::load(&path)?;
                    report.runs.push(summary(&path, &r));
                }
                let table: Vec<TradeoffPoint> = io::read_jsonl(&dir.join("table.jsonl"))?.into_iter().map(|(_, p)| p).collect();
                let classes: Vec<ClassTradeoffPoint> =
                    io::read_jsonl(&dir.join("class_tradeoff.jsonl"))?.into_iter().map(|(_, p)| p).collect();
                for p in &table {
                    report.tradeoff.push(TradeoffRow {
                        series: "adversary".into(),
                        lambda: Some(p.lambda),
                        seed: None,
                        mean_jsd: p.mean_jsd,
                        mean_tvd: p.mean_tvd,
                        test_f1: Some(p.test_f1),
                    });
                }
                report.adversary_table.extend(table);
                report.class_tradeoff.extend(classes);
            }
            Experiment::Seeds(_) => {
                for path in sorted_results(dir)? {
                    let r = ExperimentResult::load(&path)?;
                    report.runs.push(summary(&path, &r));
                }
                let markers: Vec<SeedMarker> = io::read_jsonl(&dir.join("seed_markers.jsonl"))?.into_iter().map(|(_, m)| m).collect();
                for m in &markers {
                    report.tradeoff.push(TradeoffRow {
                        series: "seed".into(),
                        lambda: None,
                        seed: Some(m.seed),
                        mean_jsd: m.mean_jsd,
                        mean_tvd: m.mean_tvd,
                        test_f1: None,
                    });
                }
                let mean: SeedMarker = io::read_json(&dir.join("seed_marker_mean.json"))?;
                report.tradeoff.push(TradeoffRow {
                    series: "seed-mean".into(),
                    lambda: None,
                    seed: None,
                    mean_jsd: mean.mean_jsd,
                    mean_tvd: mean.mean_tvd,
                    test_f1: None,
                });
            }
            other => {
                let path = dir.join(RESULT_FILE);
                let r = ExperimentResult::load(&path)?;
                report.runs.push(summary(&path, &r));
                let (Some(mean_tvd), Some(mean_jsd)) = (r.mean_tvd, r.mean_jsd) else {
                    continue;
                };
                let (series, lambda) = match other {
                    Experiment::Adversary(a) => ("adversary", Some(a.lambda)),
                    Experiment::Uniform(_) => ("uniform", None),
                    Experiment::InstanceAdversary(_) => ("instance-adversary", None),
                    _ => continue,
                };
                if let Some(lambda) = lambda {
                    report.adversary_table.push(TradeoffPoint {
                        lambda,
                        mean_jsd,
                        mean_tvd,
                        test_f1: r.test_f1,
                    });
                }
                report.tradeoff.push(TradeoffRow {
                    series: series.into(),
                    lambda,
                    seed: None,
                    mean_jsd,
                    mean_tvd,
                    test_f1: Some(r.test_f1),
                });
            }
        }
    }
    report.best_divergent = best_divergent(&report.adversary_table, DIVERGENT_JSD_THRESHOLD);
    Ok(report)
}
