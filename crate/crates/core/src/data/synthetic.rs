use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Label};
use crate::error::{Error, Result};

/// Parameters of a keyword-driven synthetic corpus.
///
/// Every instance is a run of background words drawn uniformly from
/// `background_vocab` words. With probability `injection_prob` an instance
/// also receives between one and `max_keywords` keywords of its own class at
/// random positions. Background words carry no label information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub positive_keywords: Vec<String>,
    /// May be empty for detection-style corpora.
    pub negative_keywords: Vec<String>,
    pub background_vocab: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub injection_prob: f64,
    pub max_keywords: usize,
    /// Probability that an instance is negative.
    pub negative_fraction: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl SyntheticSpec {
    /// Balanced two-sided keyword corpus, loosely sentence-sized.
    pub fn sentiment(seed: u64) -> Self {
        Self {
            name: "synthetic-sentiment".into(),
            positive_keywords: words("pos", 6),
            negative_keywords: words("neg", 6),
            background_vocab: 200,
            min_len: 6,
            max_len: 16,
            injection_prob: 0.9,
            max_keywords: 2,
            negative_fraction: 0.5,
            train_size: 800,
            test_size: 300,
            seed,
        }
    }

    /// Negative-skewed corpus in which only a handful of rare positive
    /// keywords mark the positive class.
    pub fn detection(seed: u64) -> Self {
        Self {
            name: "synthetic-detection".into(),
            positive_keywords: words("kw", 4),
            negative_keywords: Vec::new(),
            background_vocab: 300,
            min_len: 30,
            max_len: 50,
            injection_prob: 1.0,
            max_keywords: 1,
            negative_fraction: 0.8,
            train_size: 800,
            test_size: 300,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.positive_keywords.is_empty() {
            return bad("positive keyword set is empty");
        }
        let pos: BTreeSet<_> = self.positive_keywords.iter().collect();
        let neg: BTreeSet<_> = self.negative_keywords.iter().collect();
        if pos.len() != self.positive_keywords.len() || neg.len() != self.negative_keywords.len() {
            return bad("keyword sets contain duplicates");
        }
        if !pos.is_disjoint(&neg) {
            return bad("keyword sets are not disjoint");
        }
        let background: BTreeSet<String> = words("w", self.background_vocab).into_iter().collect();
        if pos.iter().chain(&neg).any(|k| background.contains(*k)) {
            return bad("keywords collide with background words");
        }
        if !(self.injection_prob > 0.0 && self.injection_prob <= 1.0) {
            return bad("injection probability must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.negative_fraction) {
            return bad("negative fraction must lie in [0, 1]");
        }
        if self.background_vocab == 0 || self.min_len == 0 || self.min_len > self.max_len {
            return bad("need background words and 0 < min_len <= max_len");
        }
        if self.max_keywords == 0 || self.max_keywords > self.min_len {
            return bad("max_keywords must lie in [1, min_len]");
        }
        if self.train_size == 0 || self.test_size == 0 {
            return bad("both splits need instances");
        }
        Ok(())
    }

    /// Positive-class F1 of the best label rule in expectation.
    ///
    /// Keyword-bearing instances are unambiguous; keyword-free instances are
    /// all labelled one way, whichever gives the higher F1.
    pub fn bayes_optimal_f1(&self) -> f64 {
        let pi = 1.0 - self.negative_fraction;
        let p = self.injection_prob;
        if pi == 0.0 {
            return 0.0;
        }
        // keyword-free instances predicted negative: TP = pi p, FN = pi (1 - p)
        let none_negative = 2.0 * p / (1.0 + p);
        // keyword-free instances predicted positive: TP = pi, FP = (1 - pi) q
        let q = if self.negative_keywords.is_empty() { 1.0 } else { 1.0 - p };
        let none_positive = 2.0 * pi / (2.0 * pi + (1.0 - pi) * q);
        none_negative.max(none_positive)
    }

    /// Expected mean token count per instance.
    pub fn expected_length(&self) -> f64 {
        (self.min_len + self.max_len) as f64 / 2.0
    }
}

/// Generates a corpus; a pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut make = |split: &str, n: usize| -> Vec<(String, Vec<String>, Label)> {
        (0..n)
            .map(|i| {
                let label = if rng.random::<f64>() < spec.negative_fraction {
                    Label::Negative
                } else {
                    Label::Positive
                };
                let len = rng.random_range(spec.min_len..=spec.max_len);
                let mut tokens: Vec<String> = (0..len)
                    .map(|_| format!("w{}", rng.random_range(0..spec.background_vocab)))
                    .collect();
                let keywords = match label {
                    Label::Positive => &spec.positive_keywords,
                    Label::Negative => &spec.negative_keywords,
                };
                if !keywords.is_empty() && rng.random::<f64>() < spec.injection_prob {
                    let count = rng.random_range(1..=spec.max_keywords);
                    for pos in sample(&mut rng, len, count) {
                        tokens[pos] = keywords[rng.random_range(0..keywords.len())].clone();
                    }
                }
                (format!("{split}-{i:06}"), tokens, label)
            })
            .collect()
    };
    let train = make("train", spec.train_size);
    let test = make("test", spec.test_size);
    Corpus::from_tokenized(spec.name.clone(), train, test)
}
