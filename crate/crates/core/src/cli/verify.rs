use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::MANIFEST_FILE;
use super::run::{read_status, RunState, AGGREGATES_FILE, RECORDS_FILE, RESULTS_DIR, RESULT_FILE};
use crate::error::Result;
use crate::io;
use crate::metrics::{check_distribution, density_summary, DensitySummary, DivergenceRecord, DEFAULT_ATTENTION_BINS};
use crate::train::ExperimentResult;

/// Allowed gap between stored and recomputed aggregates.
pub const AGGREGATE_TOLERANCE: f64 = 1e-9;
/// Allowed excess of JSD over `ln 2`.
pub const JSD_BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyFailure {
    pub file: PathBuf,
    pub check: String,
    pub detail: String,
}

/// Outcome of [`verify_results`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub files_checked: usize,
    pub checks: usize,
    pub failures: Vec<VerifyFailure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn check(&mut self, file: &Path, ok: bool, check: &str, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(VerifyFailure {
                file: file.to_path_buf(),
                check: check.into(),
                detail: detail(),
            });
        }
    }

    fn fail(&mut self, file: &Path, check: &str, detail: String) {
        self.check(file, false, check, || detail);
    }
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= AGGREGATE_TOLERANCE,
        (None, None) => true,
        _ => false,
    }
}

fn check_record(report: &mut VerifyReport, file: &Path, r: &DivergenceRecord) {
    let id = &r.instance_id;
    let unit = |v: f64| (0.0..=1.0).contains(&v);
    report.check(file, unit(r.tvd), "tvd-range", || format!("{id}: tvd {}", r.tvd));
    report.check(
        file,
        r.jsd >= 0.0 && r.jsd <= std::f64::consts::LN_2 + JSD_BOUND_SLACK,
        "jsd-bound",
        || format!("{id}: jsd {} outside [0, ln 2]", r.jsd),
    );
    report.check(file, unit(r.predicted_base) && unit(r.predicted_model), "score-range", || {
        format!("{id}: scores {} / {}", r.predicted_base, r.predicted_model)
    });
    report.check(
        file,
        (r.tvd - (r.predicted_model - r.predicted_base).abs()).abs() <= 1e-12,
        "tvd-consistency",
        || format!("{id}: tvd {} vs |{} - {}|", r.tvd, r.predicted_model, r.predicted_base),
    );
    report.check(file, unit(r.max_attention_base), "max-attention-range", || {
        format!("{id}: max attention {}", r.max_attention_base)
    });
}

fn check_result(report: &mut VerifyReport, file: &Path, result: &ExperimentResult) {
    report.files_checked += 1;
    match result.recompute() {
        Ok(agg) => {
            report.check(file, close(Some(agg.test_f1), Some(result.test_f1)), "f1-aggregate", || {
                format!("stored {} vs recomputed {}", result.test_f1, agg.test_f1)
            });
            report.check(file, agg.f1_undefined == result.f1_undefined, "f1-undefined-flag", || {
                format!("stored {} vs recomputed {}", result.f1_undefined, agg.f1_undefined)
            });
            report.check(file, close(agg.mean_tvd, result.mean_tvd), "tvd-aggregate", || {
                format!("stored {:?} vs recomputed {:?}", result.mean_tvd, agg.mean_tvd)
            });
            report.check(file, close(agg.mean_jsd, result.mean_jsd), "jsd-aggregate", || {
                format!("stored {:?} vs recomputed {:?}", result.mean_jsd, agg.mean_jsd)
            });
        }
        Err(e) => report.fail(file, "recompute", e.to_string()),
    }
    let mut ids = BTreeSet::new();
    for r in &result.records {
        report.check(file, ids.insert(r.instance_id.as_str()), "unique-record-ids", || {
            format!("duplicate record {}", r.instance_id)
        });
        check_record(report, file, r);
    }
    for p in &result.predictions {
        report.check(file, (0.0..=1.0).contains(&p.score), "prediction-range", || {
            format!("{}: score {}", p.instance_id, p.score)
        });
        if let Some(att) = &p.attention {
            let ok = check_distribution(att).is_ok();
            report.check(file, ok, "attention-simplex", || format!("{}: weights off the simplex", p.instance_id));
        }
    }
}

fn load_result(report: &mut VerifyReport, path: &Path) -> Option<ExperimentResult> {
    match ExperimentResult::load(path) {
        Ok(r) => Some(r),
        Err(e) => {
            report.fail(path, "parse", e.to_string());
            None
        }
    }
}

/// Recomputes aggregates and checks invariant bounds for a result file or run directory.
pub fn verify_results(path: &Path) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    if path.is_file() {
        if let Some(r) = load_result(&mut report, path) {
            check_result(&mut report, path, &r);
        }
        return Ok(report);
    }
    if !path.join(MANIFEST_FILE).is_file() {
        report.fail(path, "layout", "neither a result file nor a run directory".into());
        return Ok(report);
    }
    match read_status(path) {
        Ok(status) => report.check(path, status.state == RunState::Complete, "status", || {
            format!("run state is {:?}; outputs are partial", status.state)
        }),
        Err(e) => report.fail(path, "status", e.to_string()),
    }
    let mut files = Vec::new();
    if path.join(RESULT_FILE).is_file() {
        files.push(path.join(RESULT_FILE));
    }
    if let Ok(entries) = std::fs::read_dir(path.join(RESULTS_DIR)) {
        let mut extra: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        extra.sort();
        files.extend(extra);
    }
    for f in &files {
        if let Some(r) = load_result(&mut report, f) {
            check_result(&mut report, f, &r);
        }
    }
    let agg = path.join(AGGREGATES_FILE);
    if let Err(e) = io::read_json::<serde_json::Value>(&agg) {
        report.fail(&agg, "aggregates", e.to_string());
    }
    let records_path = path.join(RECORDS_FILE);
    let records: Option<Vec<DivergenceRecord>> = if records_path.is_file() {
        match io::read_jsonl::<DivergenceRecord>(&records_path) {
            Ok(rows) => {
                report.files_checked += 1;
                let recs: Vec<_> = rows.into_iter().map(|(_, r)| r).collect();
                for r in &recs {
                    check_record(&mut report, &records_path, r);
                }
                Some(recs)
            }
            Err(e) => {
                report.fail(&records_path, "parse", e.to_string());
                None
            }
        }
    } else {
        None
    };
    let density_path = path.join("density.json");
    if density_path.is_file() {
        report.files_checked += 1;
        match (io::read_json::<DensitySummary>(&density_path), records) {
            (Ok(stored), Some(recs)) => match density_summary(&recs, DEFAULT_ATTENTION_BINS) {
                Ok(fresh) => report.check(&density_path, fresh == stored, "density-recompute", || {
                    "density summary differs from recomputation over records".into()
                }),
                Err(e) => report.fail(&density_path, "density-recompute", e.to_string()),
            },
            (Err(e), _) => report.fail(&density_path, "parse", e.to_string()),
            (_, None) => report.fail(&density_path, "density-recompute", "records file missing".into()),
        }
    }
    Ok(report)
}
