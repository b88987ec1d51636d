use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::DivergenceRecord;
use crate::data::Label;
use crate::error::{Error, Result};

pub const DEFAULT_ATTENTION_BINS: usize = 10;
pub const JSD_HISTOGRAM_BINS: usize = 20;

/// Per-instance maximum JSD grouped by base max-attention bin and gold class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    /// Bin edges over `[0, 1]` for the base model's max attention weight.
    pub attention_edges: Vec<f64>,
    /// Histogram edges over `[0, ln 2]` for max-JSD values.
    pub jsd_edges: Vec<f64>,
    /// One cell per (attention bin, class), negative class first within a bin.
    pub cells: Vec<DensityCell>,
    /// Every input record's own JSD, before taking per-instance maxima.
    pub pooled: Vec<PooledPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCell {
    pub attention_bin: usize,
    pub label: Label,
    pub instance_ids: Vec<String>,
    pub max_jsd: Vec<f64>,
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledPoint {
    pub instance_id: String,
    pub attention_bin: usize,
    pub label: Label,
    pub jsd: f64,
}

impl DensitySummary {
    pub fn instance_count(&self) -> usize {
        self.cells.iter().map(|c| c.max_jsd.len()).sum()
    }

    pub fn cell(&self, attention_bin: usize, label: Label) -> Option<&DensityCell> {
        self.cells
            .iter()
            .find(|c| c.attention_bin == attention_bin && c.label == label)
    }

    /// Mean over instances of the per-instance maximum JSD.
    pub fn mean_max_jsd(&self) -> Option<f64> {
        let n = self.instance_count();
        (n > 0).then(|| self.cells.iter().flat_map(|c| &c.max_jsd).sum::<f64>() / n as f64)
    }
}

/// Equal-width edges over `[0, 1]`.
pub fn equal_width_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| i as f64 / bins as f64).collect()
}

fn bin_of(value: f64, edges: &[f64]) -> usize {
    let last = edges.len() - 2;
    edges[1..]
        .iter()
        .position(|&hi| value < hi)
        .unwrap_or(last)
        .min(last)
}

/// [`density_summary_with_edges`] over `bins` equal-width attention bins.
pub fn density_summary(records: &[DivergenceRecord], bins: usize) -> Result<DensitySummary> {
    if bins == 0 {
        return Err(Error::InvalidInput("density summary needs at least one bin".into()));
    }
    density_summary_with_edges(records, &equal_width_edges(bins))
}

/// Groups instances by the base model's max attention (binned by `edges`) and
/// gold class, keeping for each instance the maximum JSD over all records that
/// share its id. Records from several compared models can be passed together.
pub fn density_summary_with_edges(records: &[DivergenceRecord], edges: &[f64]) -> Result<DensitySummary> {
    let partitions = edges.len() >= 2
        && edges[0] == 0.0
        && edges[edges.len() - 1] == 1.0
        && edges.windows(2).all(|w| w[0] < w[1]);
    if !partitions {
        return Err(Error::InvalidInput(format!("bin edges {edges:?} do not partition [0, 1]")));
    }
    let bins = edges.len() - 1;
    let jsd_edges: Vec<f64> = (0..=JSD_HISTOGRAM_BINS)
        .map(|i| LN_2 * i as f64 / JSD_HISTOGRAM_BINS as f64)
        .collect();

    let mut per_instance: BTreeMap<&str, (f64, Label, f64)> = BTreeMap::new();
    let mut pooled = Vec::with_capacity(records.len());
    for r in records {
        let bin = bin_of(r.max_attention_base, edges);
        pooled.push(PooledPoint {
            instance_id: r.instance_id.clone(),
            attention_bin: bin,
            label: r.gold_label,
            jsd: r.jsd,
        });
        per_instance
            .entry(r.instance_id.as_str())
            .and_modify(|e| e.2 = e.2.max(r.jsd))
            .or_insert((r.max_attention_base, r.gold_label, r.jsd));
    }

    let mut cells: Vec<DensityCell> = (0..bins)
        .flat_map(|b| {
            [Label::Negative, Label::Positive].map(|label| DensityCell {
                attention_bin: b,
                label,
                instance_ids: Vec::new(),
                max_jsd: Vec::new(),
                histogram: vec![0; JSD_HISTOGRAM_BINS],
            })
        })
        .collect();
    for (id, (max_attention, label, max_jsd)) in per_instance {
        let bin = bin_of(max_attention, edges);
        let cell = &mut cells[bin * 2 + usize::from(label == Label::Positive)];
        cell.instance_ids.push(id.to_string());
        cell.max_jsd.push(max_jsd);
        let h = ((max_jsd / LN_2) * JSD_HISTOGRAM_BINS as f64).floor() as usize;
        cell.histogram[h.min(JSD_HISTOGRAM_BINS - 1)] += 1;
    }
    Ok(DensitySummary {
        attention_edges: edges.to_vec(),
        jsd_edges,
        cells,
        pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, max_att: f64, label: Label, jsd: f64) -> DivergenceRecord {
        DivergenceRecord {
            instance_id: id.into(),
            tvd: 0.0,
            jsd,
            max_attention_base: max_att,
            gold_label: label,
            predicted_base: 0.5,
            predicted_model: 0.5,
        }
    }

    #[test]
    fn single_record_occupies_one_cell() {
        let s = density_summary(&[rec("a", 0.35, Label::Positive, 0.2)], 10).unwrap();
        let occupied: Vec<_> = s.cells.iter().filter(|c| !c.max_jsd.is_empty()).collect();
        assert_eq!(occupied.len(), 1);
        assert_eq!(occupied[0].attention_bin, 3);
        assert_eq!(occupied[0].label, Label::Positive);
        assert_eq!(occupied[0].max_jsd, vec![0.2]);
    }

    #[test]
    fn keeps_per_instance_maximum() {
        let recs = [
            rec("a", 1.0, Label::Negative, 0.1),
            rec("a", 1.0, Label::Negative, 0.4),
            rec("b", 0.0, Label::Positive, 0.0),
        ];
        let s = density_summary(&recs, 10).unwrap();
        assert_eq!(s.instance_count(), 2);
        assert_eq!(s.cell(9, Label::Negative).unwrap().max_jsd, vec![0.4]);
        assert_eq!(s.cell(0, Label::Positive).unwrap().max_jsd, vec![0.0]);
        assert_eq!(s.pooled.len(), 3);
    }

    #[test]
    fn edges_must_partition_unit_interval() {
        assert!(density_summary_with_edges(&[], &[0.0, 0.5]).is_err());
        assert!(density_summary_with_edges(&[], &[0.0, 0.6, 0.4, 1.0]).is_err());
        assert!(density_summary(&[], 0).is_err());
    }

    #[test]
    fn histogram_counts_match_values() {
        let recs: Vec<_> = (0..50)
            .map(|i| rec(&i.to_string(), (i % 10) as f64 / 10.0, Label::Negative, LN_2 * i as f64 / 50.0))
            .collect();
        let s = density_summary(&recs, 4).unwrap();
        for c in &s.cells {
            assert_eq!(c.histogram.iter().sum::<usize>(), c.max_jsd.len());
        }
        assert_eq!(s.instance_count(), 50);
    }
}
