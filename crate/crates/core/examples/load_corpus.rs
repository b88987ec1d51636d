//! Loads a JSON-lines corpus and prints its statistics.
//!
//! Usage: `cargo run --example load_corpus -- path/to/corpus.jsonl`
//! Without an argument a small corpus is written to a temporary file first.
use std::path::PathBuf;

use attnbench::data::{corpus_stats, load_corpus, CorpusFormat, LoadOptions, Split};

fn main() -> attnbench::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("attnbench-example.jsonl");
            let rows = [
                r#"{"id": "a", "text": "A wonderful, moving film.", "label": 1, "split": "train"}"#,
                r#"{"id": "b", "text": "Dull and far too long.", "label": 0, "split": "train"}"#,
                r#"{"id": "c", "text": "Wonderful cast; dull plot!", "label": 1, "split": "test"}"#,
                r#"{"id": "d", "text": "...", "label": 0, "split": "test"}"#,
            ];
            std::fs::write(&p, rows.join("\n")).expect("write example corpus");
            p
        }
    };
    let corpus = load_corpus(&path, CorpusFormat::Jsonl, &LoadOptions::default())?;
    println!("{:#?}", corpus_stats(&corpus));
    for inst in corpus.split(Split::Test) {
        println!("{} {:?} -> {:?}", inst.id, inst.label, corpus.vocab.decode(&inst.tokens));
    }
    Ok(())
}
