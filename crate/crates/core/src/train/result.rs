use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Label;
use crate::error::Result;
use crate::io;
use crate::metrics::{f1_positive, mean_divergence, DivergenceRecord, DEFAULT_THRESHOLD};

/// Output of one model on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePrediction {
    pub instance_id: String,
    pub gold: Label,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<Vec<f64>>,
}

/// Persisted summary of one experiment run.
///
/// `test_f1`, `mean_tvd` and `mean_jsd` are recomputable from `predictions`
/// and `records`; [`ExperimentResult::recompute`] does exactly that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub run_id: String,
    pub kind: String,
    pub config: serde_json::Value,
    pub corpus_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_fingerprint: Option<String>,
    pub test_f1: f64,
    pub f1_undefined: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tvd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_jsd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_epoch: Option<usize>,
    pub wall_clock_secs: f64,
    pub predictions: Vec<InstancePrediction>,
    #[serde(default)]
    pub records: Vec<DivergenceRecord>,
}

/// Aggregates derived from the per-instance rows of a result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub test_f1: f64,
    pub f1_undefined: bool,
    pub mean_tvd: Option<f64>,
    pub mean_jsd: Option<f64>,
}

impl ExperimentResult {
    /// Builds a result with aggregates computed from the rows.
    pub fn from_rows(
        kind: &str,
        config: serde_json::Value,
        corpus_fingerprint: &str,
        predictions: Vec<InstancePrediction>,
        records: Vec<DivergenceRecord>,
    ) -> Result<Self> {
        let run_id = run_id(kind, &config, corpus_fingerprint);
        let agg = aggregates(&predictions, &records)?;
        Ok(Self {
            run_id,
            kind: kind.to_string(),
            config,
            corpus_fingerprint: corpus_fingerprint.to_string(),
            checkpoint_fingerprint: None,
            test_f1: agg.test_f1,
            f1_undefined: agg.f1_undefined,
            mean_tvd: agg.mean_tvd,
            mean_jsd: agg.mean_jsd,
            selected_epoch: None,
            wall_clock_secs: 0.0,
            predictions,
            records,
        })
    }

    pub fn recompute(&self) -> Result<Aggregates> {
        aggregates(&self.predictions, &self.records)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

fn aggregates(predictions: &[InstancePrediction], records: &[DivergenceRecord]) -> Result<Aggregates> {
    let scores: Vec<f64> = predictions.iter().map(|p| p.score).collect();
    let gold: Vec<Label> = predictions.iter().map(|p| p.gold).collect();
    let f1 = f1_positive(&scores, &gold, DEFAULT_THRESHOLD)?;
    let means = mean_divergence(records);
    Ok(Aggregates {
        test_f1: f1.value,
        f1_undefined: f1.undefined,
        mean_tvd: means.map(|m| m.0),
        mean_jsd: means.map(|m| m.1),
    })
}

/// Content-hash id over the experiment kind, config and corpus.
pub fn run_id(kind: &str, config: &serde_json::Value, corpus_fingerprint: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(kind.as_bytes());
    hasher.update([0u8]);
    hasher.update(config.to_string().as_bytes());
    hasher.update([0u8]);
    hasher.update(corpus_fingerprint.as_bytes());
    format!("{kind}-{}", &hex::encode(hasher.finalize())[..16])
}
