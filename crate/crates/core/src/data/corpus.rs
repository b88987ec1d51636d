use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// 1.0 for positive, 0.0 for negative.
    pub fn target(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            0.0
        }
    }

    /// Accepts 0/1, booleans, and `neg`/`pos`/`negative`/`positive` strings.
    pub fn from_json(value: &serde_json::Value) -> Option<Self> {
        use serde_json::Value;
        match value {
            Value::Bool(b) => Some(if *b { Label::Positive } else { Label::Negative }),
            Value::Number(n) => match n.as_f64()? {
                v if v == 0.0 => Some(Label::Negative),
                v if v == 1.0 => Some(Label::Positive),
                _ => None,
            },
            Value::String(s) => Self::parse(s),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "neg" | "negative" | "false" => Some(Label::Negative),
            "1" | "pos" | "positive" | "true" => Some(Label::Positive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One labelled instance as vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub tokens: Vec<usize>,
    pub label: Label,
}

/// Token/id mapping with `<pad>` and `<unk>` reserved at ids 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Builds from token sequences: reserved ids first, then tokens by
    /// descending frequency with ties broken lexicographically.
    pub fn build<'a, I, S>(sequences: I) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for seq in sequences {
            for tok in seq {
                *counts.entry(tok.as_ref()).or_default() += 1;
            }
        }
        let mut by_freq: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, _)| *t != PAD && *t != UNK)
            .collect();
        by_freq.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens = [PAD, UNK]
            .into_iter()
            .chain(by_freq.into_iter().map(|(t, _)| t))
            .map(str::to_string)
            .collect::<Vec<_>>();
        Self::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or [`UNK_ID`] when out of vocabulary.
    pub fn encode_token(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.encode_token(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK).to_string())
            .collect()
    }
}

/// Train/test corpus over a train-built vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub vocab: Vocabulary,
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
    /// Records dropped at load time because they had no tokens.
    #[serde(default)]
    pub dropped_empty: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum CanonicalLine {
    Header {
        name: String,
        vocab: Vec<String>,
        #[serde(default)]
        dropped_empty: usize,
    },
    Instance {
        split: Split,
        id: String,
        tokens: Vec<usize>,
        label: Label,
    },
}

impl Corpus {
    /// Tokenized train/test text, vocabulary built on train only.
    pub fn from_tokenized(
        name: impl Into<String>,
        train: Vec<(String, Vec<String>, Label)>,
        test: Vec<(String, Vec<String>, Label)>,
    ) -> Result<Self> {
        let vocab = Vocabulary::build(train.iter().map(|(_, toks, _)| toks.as_slice()));
        let encode = |rows: Vec<(String, Vec<String>, Label)>| -> Vec<Instance> {
            rows.into_iter()
                .map(|(id, toks, label)| Instance {
                    id,
                    tokens: vocab.encode(&toks),
                    label,
                })
                .collect()
        };
        let corpus = Self {
            name: name.into(),
            train: encode(train),
            test: encode(test),
            vocab,
            dropped_empty: 0,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn split(&self, split: Split) -> &[Instance] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn instances(&self) -> impl Iterator<Item = (Split, &Instance)> {
        self.train
            .iter()
            .map(|i| (Split::Train, i))
            .chain(self.test.iter().map(|i| (Split::Test, i)))
    }

    pub fn find(&self, id: &str) -> Option<&Instance> {
        self.instances().map(|(_, i)| i).find(|i| i.id == id)
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(negative, positive)` counts in a split.
    pub fn class_counts(&self, split: Split) -> (usize, usize) {
        let pos = self.split(split).iter().filter(|i| i.label.is_positive()).count();
        (self.split(split).len() - pos, pos)
    }

    /// Checks id ranges, non-empty sequences and train/test id disjointness.
    pub fn validate(&self) -> Result<()> {
        let vocab = self.vocab.len();
        let mut seen = BTreeSet::new();
        for (split, inst) in self.instances() {
            if inst.tokens.is_empty() {
                return Err(Error::InvalidInput(format!("instance {} has no tokens", inst.id)));
            }
            if let Some(bad) = inst.tokens.iter().find(|&&t| t >= vocab) {
                return Err(Error::InvalidInput(format!(
                    "instance {} has token id {bad} >= vocabulary size {vocab}",
                    inst.id
                )));
            }
            if !seen.insert(inst.id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "instance id {} appears twice (second time in {split:?})",
                    inst.id
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.name.as_bytes());
        for t in &self.vocab.tokens {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        for (split, inst) in self.instances() {
            hasher.update([split as u8, inst.label as u8]);
            hasher.update(inst.id.as_bytes());
            hasher.update([0u8]);
            for t in &inst.tokens {
                hasher.update((*t as u64).to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    /// Writes the canonical JSON-lines form: a header line then one line per instance.
    pub fn write_canonical(&self, path: &Path) -> Result<()> {
        let mut lines = vec![CanonicalLine::Header {
            name: self.name.clone(),
            vocab: self.vocab.tokens.clone(),
            dropped_empty: self.dropped_empty,
        }];
        lines.extend(self.instances().map(|(split, i)| CanonicalLine::Instance {
            split,
            id: i.id.clone(),
            tokens: i.tokens.clone(),
            label: i.label,
        }));
        io::write_jsonl(path, &lines)
    }

    pub fn read_canonical(path: &Path) -> Result<Self> {
        let lines: Vec<(usize, CanonicalLine)> = io::read_jsonl(path)?;
        let mut iter = lines.into_iter();
        let Some((_, CanonicalLine::Header { name, vocab, dropped_empty })) = iter.next() else {
            return Err(Error::Malformed {
                path: path.display().to_string(),
                line: 1,
                message: "expected a header line".into(),
            });
        };
        let mut corpus = Corpus {
            name,
            vocab: Vocabulary::from(vocab),
            train: Vec::new(),
            test: Vec::new(),
            dropped_empty,
        };
        for (line, entry) in iter {
            match entry {
                CanonicalLine::Instance { split, id, tokens, label } => {
                    let inst = Instance { id, tokens, label };
                    match split {
                        Split::Train => corpus.train.push(inst),
                        Split::Test => corpus.test.push(inst),
                    }
                }
                CanonicalLine::Header { .. } => {
                    return Err(Error::Malformed {
                        path: path.display().to_string(),
                        line,
                        message: "second header line".into(),
                    })
                }
            }
        }
        corpus.validate()?;
        Ok(corpus)
    }
}
