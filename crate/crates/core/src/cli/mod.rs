//! Run orchestration behind the `attnbench` binary: manifests, per-run
//! output directories, result verification, reports and attention heatmaps.
//!
//! A run directory holds `manifest.json`, `status.json` (`running` until the
//! run finishes, so interrupted runs stay flagged), `aggregates.json`, and
//! the kind-specific results, records and plot-data files (JSON-lines).

mod heatmap;
mod manifest;
mod report;
mod run;
mod verify;

pub use heatmap::{emit_heatmap, parse_heatmap, Heatmap, HeatmapRow, SCORE_AGREEMENT};
pub use manifest::{
    CorpusRef, Experiment, GuideChoice, InstanceRunConfig, LambdaSweepRunConfig, MlpRunConfig, ReportRunConfig,
    RunManifest, SeedsRunConfig, UniformRunConfig, MANIFEST_FILE,
};
pub use report::{build_report, Report, RunSummary, TradeoffRow};
pub use run::{
    read_status, replay, run, AggregateRow, ErrorReport, RunOutcome, RunState, RunStatus, AGGREGATES_FILE,
    CHECKPOINT_FILE, RECORDS_FILE, RESULTS_DIR, RESULT_FILE, STATUS_FILE,
};
pub use verify::{verify_results, VerifyFailure, VerifyReport, AGGREGATE_TOLERANCE, JSD_BOUND_SLACK};
