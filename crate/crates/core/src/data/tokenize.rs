use serde::{Deserialize, Serialize};

/// How raw text is split into tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tokenizer {
    /// Lowercase; runs of alphanumerics form tokens; every other
    /// non-whitespace character is its own token.
    #[default]
    Standard,
    /// Lowercase and split on whitespace only, for pre-tokenized releases.
    Whitespace,
}

impl Tokenizer {
    pub fn tokenize(self, text: &str) -> Vec<String> {
        match self {
            Tokenizer::Standard => standard(text),
            Tokenizer::Whitespace => text.split_whitespace().map(str::to_lowercase).collect(),
        }
    }
}

fn standard(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}
