//! Corpus ingestion, tokenization, vocabulary, and the synthetic keyword
//! corpora used where real data is unavailable.

mod corpus;
mod loader;
mod stats;
mod synthetic;
mod tokenize;

pub use corpus::{Corpus, Instance, Label, Split, Vocabulary, PAD, PAD_ID, UNK, UNK_ID};
pub use loader::{load_corpus, CorpusFormat, LoadOptions};
pub use stats::{corpus_stats, CorpusStats};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use tokenize::Tokenizer;
