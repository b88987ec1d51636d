use serde::{Deserialize, Serialize};

use super::{Corpus, Split};

/// Dataset statistics in the layout of a dataset summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub name: String,
    pub vocab_size: usize,
    /// Mean token count over both splits.
    pub avg_length: f64,
    pub train_negative: usize,
    pub train_positive: usize,
    pub test_negative: usize,
    pub test_positive: usize,
    pub dropped_empty: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let total_tokens: usize = corpus.instances().map(|(_, i)| i.tokens.len()).sum();
    let n = corpus.len();
    let (train_negative, train_positive) = corpus.class_counts(Split::Train);
    let (test_negative, test_positive) = corpus.class_counts(Split::Test);
    CorpusStats {
        name: corpus.name.clone(),
        vocab_size: corpus.vocab.len(),
        avg_length: if n == 0 { 0.0 } else { total_tokens as f64 / n as f64 },
        train_negative,
        train_positive,
        test_negative,
        test_positive,
        dropped_empty: corpus.dropped_empty,
    }
}
