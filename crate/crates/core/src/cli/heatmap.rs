use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::data::{Instance, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::check_distribution;
use crate::nn::{predict, ModelCheckpoint};

/// Largest spread of prediction scores across rows still reported as agreeing.
pub const SCORE_AGREEMENT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub label: String,
    pub score: f64,
    pub weights: Vec<f64>,
}

/// Side-by-side attention over one instance, one row per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub instance_id: String,
    pub tokens: Vec<String>,
    pub rows: Vec<HeatmapRow>,
}

impl Heatmap {
    pub fn new(instance_id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            instance_id: instance_id.into(),
            tokens,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, label: impl Into<String>, score: f64, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.tokens.len() {
            return Err(Error::shape("heatmap row", format!("{} weights", self.tokens.len()), weights.len().to_string()));
        }
        check_distribution(&weights)?;
        self.rows.push(HeatmapRow {
            label: label.into(),
            score,
            weights,
        });
        Ok(())
    }

    /// `max - min` of the row scores.
    pub fn score_spread(&self) -> f64 {
        let (lo, hi) = self
            .rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.score), hi.max(r.score)));
        if self.rows.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    pub fn scores_agree(&self) -> bool {
        self.score_spread() <= SCORE_AGREEMENT
    }

    /// Self-contained HTML; every weight and score is embedded at full precision.
    pub fn to_html(&self) -> String {
        let mut out = String::new();
        let _ = write!(
            out,
            "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>attention: {}</title>\n<style>\n\
             .row {{ margin: 6px 0; font-family: monospace; }}\n\
             .label {{ display: inline-block; width: 16em; }}\n\
             .tok {{ padding: 1px 2px; }}\n\
             </style>\n</head>\n<body>\n",
            escape(&self.instance_id)
        );
        let _ = writeln!(
            out,
            "<div class=\"heatmap\" data-instance=\"{}\" data-score-spread=\"{}\" data-scores-agree=\"{}\">",
            escape(&self.instance_id),
            self.score_spread(),
            self.scores_agree()
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "<div class=\"row\" data-label=\"{}\" data-score=\"{}\">",
                escape(&row.label),
                row.score
            );
            let _ = writeln!(out, "<span class=\"label\">{} ({:.6})</span>", escape(&row.label), row.score);
            for (tok, w) in self.tokens.iter().zip(&row.weights) {
                let _ = writeln!(
                    out,
                    "<span class=\"tok\" data-w=\"{w}\" style=\"background: rgba(200, 30, 30, {:.4})\">{}</span>",
                    w.clamp(0.0, 1.0),
                    escape(tok)
                );
            }
            out.push_str("</div>\n");
        }
        out.push_str("</div>\n</body>\n</html>\n");
        out
    }
}

/// One row per checkpoint: each model's own score and attention on `instance`.
pub fn emit_heatmap(checkpoints: &[(&str, &ModelCheckpoint)], vocab: &Vocabulary, instance: &Instance) -> Result<Heatmap> {
    let mut map = Heatmap::new(instance.id.clone(), vocab.decode(&instance.tokens));
    for (label, ckpt) in checkpoints {
        let (score, att) = predict(ckpt, &instance.tokens)?;
        map.push_row(*label, score.value(), att.into())?;
    }
    Ok(map)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn unescape(s: &str) -> String {
    s.replace("&quot;", "\"")
        .replace("&gt;", ">")
        .replace("&lt;", "<")
        .replace("&amp;", "&")
}

fn attr<'a>(tag: &'a str, name: &str) -> Result<&'a str> {
    let key = format!("{name}=\"");
    let start = tag
        .find(&key)
        .ok_or_else(|| Error::InvalidInput(format!("heatmap tag lacks `{name}`")))?
        + key.len();
    let len = tag[start..]
        .find('"')
        .ok_or_else(|| Error::InvalidInput(format!("unterminated `{name}` attribute")))?;
    Ok(&tag[start..start + len])
}

fn number(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::InvalidInput(format!("bad number `{s}` in heatmap")))
}

/// Recovers tokens, scores and weights from [`Heatmap::to_html`] output.
pub fn parse_heatmap(doc: &str) -> Result<Heatmap> {
    let head_at = doc
        .find("<div class=\"heatmap\"")
        .ok_or_else(|| Error::InvalidInput("no heatmap element".into()))?;
    let head_end = head_at + doc[head_at..].find('>').ok_or_else(|| Error::InvalidInput("unterminated tag".into()))?;
    let mut map = Heatmap::new(unescape(attr(&doc[head_at..head_end], "data-instance")?), Vec::new());
    let mut rest = &doc[head_end..];
    while let Some(at) = rest.find("<div class=\"row\"") {
        let row = &rest[at..];
        let tag_end = row.find('>').ok_or_else(|| Error::InvalidInput("unterminated row tag".into()))?;
        let label = unescape(attr(&row[..tag_end], "data-label")?);
        let score = number(attr(&row[..tag_end], "data-score")?)?;
        let body_end = row.find("</div>").ok_or_else(|| Error::InvalidInput("unterminated row".into()))?;
        let mut body = &row[tag_end..body_end];
        let mut tokens = Vec::new();
        let mut weights = Vec::new();
        while let Some(s) = body.find("<span class=\"tok\"") {
            let span = &body[s..];
            let open_end = span.find('>').ok_or_else(|| Error::InvalidInput("unterminated span".into()))?;
            weights.push(number(attr(&span[..open_end], "data-w")?)?);
            let close = span.find("</span>").ok_or_else(|| Error::InvalidInput("unterminated span".into()))?;
            tokens.push(unescape(&span[open_end + 1..close]));
            body = &span[close..];
        }
        if map.rows.is_empty() {
            map.tokens = tokens;
        } else if tokens != map.tokens {
            return Err(Error::InvalidInput(format!("row `{label}` has different tokens")));
        }
        map.push_row(label, score, weights)?;
        rest = &row[body_end..];
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exact_weights_and_odd_tokens() {
        let mut m = Heatmap::new("i<1>", vec!["a&b".into(), "\"q\"".into(), "c".into()]);
        m.push_row("base", 0.123456789012345, vec![0.1, 0.2, 0.7]).unwrap();
        m.push_row("adv <x>", 0.1234, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        let back = parse_heatmap(&m.to_html()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn single_token_single_row() {
        let mut m = Heatmap::new("x", vec!["only".into()]);
        m.push_row("base", 0.5, vec![1.0]).unwrap();
        let back = parse_heatmap(&m.to_html()).unwrap();
        assert_eq!(back.rows.len(), 1);
        assert_eq!(back.rows[0].weights, vec![1.0]);
    }

    #[test]
    fn score_agreement_flag() {
        let mut m = Heatmap::new("x", vec!["a".into(), "b".into()]);
        m.push_row("a", 0.50, vec![0.5, 0.5]).unwrap();
        m.push_row("b", 0.505, vec![0.9, 0.1]).unwrap();
        assert!(m.scores_agree());
        m.push_row("c", 0.52, vec![0.1, 0.9]).unwrap();
        assert!(!m.scores_agree());
        assert!(m.to_html().contains("data-scores-agree=\"false\""));
    }

    #[test]
    fn bad_rows_rejected() {
        let mut m = Heatmap::new("x", vec!["a".into(), "b".into()]);
        assert!(m.push_row("a", 0.5, vec![1.0]).is_err());
        assert!(m.push_row("a", 0.5, vec![0.6, 0.6]).is_err());
    }
}
