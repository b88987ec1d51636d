use serde::{Deserialize, Serialize};

use super::divergence::{binary_tvd, jsd};
use crate::data::Label;
use crate::error::Result;

/// Divergence of one compared model from the base model on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRecord {
    pub instance_id: String,
    /// Prediction TVD over `(y, 1 - y)`.
    pub tvd: f64,
    /// Attention JSD in nats.
    pub jsd: f64,
    pub max_attention_base: f64,
    pub gold_label: Label,
    pub predicted_base: f64,
    pub predicted_model: f64,
}

impl DivergenceRecord {
    /// Builds a record from the two models' outputs on one instance.
    pub fn compare(
        instance_id: impl Into<String>,
        gold_label: Label,
        base: (f64, &[f64]),
        model: (f64, &[f64]),
    ) -> Result<Self> {
        let (base_score, base_attention) = base;
        let (model_score, model_attention) = model;
        Ok(Self {
            instance_id: instance_id.into(),
            tvd: binary_tvd(model_score, base_score),
            jsd: jsd(model_attention, base_attention)?,
            max_attention_base: base_attention.iter().copied().fold(0.0, f64::max),
            gold_label,
            predicted_base: base_score,
            predicted_model: model_score,
        })
    }
}

/// Means of TVD and JSD over a record set; `None` when empty.
pub fn mean_divergence(records: &[DivergenceRecord]) -> Option<(f64, f64)> {
    if records.is_empty() {
        return None;
    }
    let n = records.len() as f64;
    let tvd = records.iter().map(|r| r.tvd).sum::<f64>() / n;
    let jsd = records.iter().map(|r| r.jsd).sum::<f64>() / n;
    Some((tvd, jsd))
}

/// Splits records by gold label into `(negative, positive)`.
pub fn class_split(records: &[DivergenceRecord]) -> (Vec<DivergenceRecord>, Vec<DivergenceRecord>) {
    records
        .iter()
        .cloned()
        .partition(|r| r.gold_label == Label::Negative)
}
