use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Corpus, Label, Tokenizer};
use crate::error::{Error, Result};

/// On-disk corpus layouts accepted by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// `{"id", "text", "label"}` per line, either one file with an optional
    /// `"split"` field (default train) or a directory holding `train.jsonl`
    /// and `test.jsonl`. A `"tokens"` array may replace `"text"`.
    Jsonl,
    /// CSV export with `text`, `label` and `exp_split` (or `split`) columns,
    /// as produced by the preprocessing scripts of the original dataset
    /// release. Rows with a `dev` split are skipped.
    ReleaseCsv,
    /// The canonical JSON-lines form written by [`Corpus::write_canonical`].
    Canonical,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "release-csv" => Ok(Self::ReleaseCsv),
            "canonical" => Ok(Self::Canonical),
            other => Err(Error::Config(format!("unknown corpus format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    #[serde(default)]
    pub tokenizer: Tokenizer,
    /// Keep only the first `max_len` tokens of every instance.
    #[serde(default)]
    pub max_len: Option<usize>,
    /// Corpus name; defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
}

type Row = (String, Vec<String>, Label);

#[derive(Default)]
struct Rows {
    train: Vec<Row>,
    test: Vec<Row>,
    dropped_empty: usize,
}

impl Rows {
    fn push(&mut self, split: &str, row: Row, path: &Path, line: usize) -> Result<()> {
        if row.1.is_empty() {
            self.dropped_empty += 1;
            return Ok(());
        }
        match split {
            "train" => self.train.push(row),
            "test" => self.test.push(row),
            "dev" | "validation" | "valid" => {}
            other => {
                return Err(Error::Malformed {
                    path: path.display().to_string(),
                    line,
                    message: format!("unknown split `{other}`"),
                })
            }
        }
        Ok(())
    }
}

/// Loads a corpus, building the vocabulary on the train split only.
pub fn load_corpus(path: &Path, format: CorpusFormat, options: &LoadOptions) -> Result<Corpus> {
    if format == CorpusFormat::Canonical {
        return Corpus::read_canonical(path);
    }
    let mut rows = Rows::default();
    match format {
        CorpusFormat::Jsonl if path.is_dir() => {
            read_jsonl_rows(&path.join("train.jsonl"), Some("train"), options, &mut rows)?;
            read_jsonl_rows(&path.join("test.jsonl"), Some("test"), options, &mut rows)?;
        }
        CorpusFormat::Jsonl => read_jsonl_rows(path, None, options, &mut rows)?,
        CorpusFormat::ReleaseCsv => read_csv_rows(path, options, &mut rows)?,
        CorpusFormat::Canonical => unreachable!(),
    }
    if rows.dropped_empty > 0 {
        log::warn!(
            "{}: dropped {} instance(s) with no tokens",
            path.display(),
            rows.dropped_empty
        );
    }
    let name = options.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into())
    });
    let mut corpus = Corpus::from_tokenized(name, rows.train, rows.test)?;
    corpus.dropped_empty = rows.dropped_empty;
    Ok(corpus)
}

fn truncate(mut tokens: Vec<String>, options: &LoadOptions) -> Vec<String> {
    if let Some(max) = options.max_len {
        tokens.truncate(max);
    }
    tokens
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_jsonl_rows(path: &Path, forced_split: Option<&str>, options: &LoadOptions, rows: &mut Rows) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Value = serde_json::from_str(&line).map_err(|e| malformed(path, line_no, e.to_string()))?;
        let Value::Object(obj) = record else {
            return Err(malformed(path, line_no, "record is not an object"));
        };
        let tokens = match (obj.get("tokens"), obj.get("text")) {
            (Some(Value::Array(items)), _) => items
                .iter()
                .map(|t| t.as_str().map(str::to_lowercase))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| malformed(path, line_no, "`tokens` must be an array of strings"))?,
            (_, Some(Value::String(text))) => options.tokenizer.tokenize(text),
            _ => return Err(malformed(path, line_no, "missing `text` field")),
        };
        let label = obj
            .get("label")
            .and_then(Label::from_json)
            .ok_or_else(|| malformed(path, line_no, "missing or invalid `label` field"))?;
        let split = match forced_split {
            Some(s) => s.to_string(),
            None => match obj.get("split") {
                None => "train".to_string(),
                Some(Value::String(s)) => s.to_ascii_lowercase(),
                Some(_) => return Err(malformed(path, line_no, "`split` must be a string")),
            },
        };
        let id = match obj.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            None => format!("{split}-{line_no}"),
            Some(_) => return Err(malformed(path, line_no, "`id` must be a string or number")),
        };
        rows.push(&split, (id, truncate(tokens, options), label), path, line_no)?;
    }
    Ok(())
}

fn read_csv_rows(path: &Path, options: &LoadOptions, rows: &mut Rows) -> Result<()> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
    let text_col = col(&["text"]).ok_or_else(|| malformed(path, 1, "missing `text` column"))?;
    let label_col = col(&["label"]).ok_or_else(|| malformed(path, 1, "missing `label` column"))?;
    let split_col = col(&["exp_split", "split"]).ok_or_else(|| malformed(path, 1, "missing `exp_split` column"))?;
    let id_col = col(&["id"]);
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line_no = record.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let field = |c: usize| {
            record
                .get(c)
                .ok_or_else(|| malformed(path, line_no, format!("missing column {c}")))
        };
        let label = Label::parse(field(label_col)?)
            .ok_or_else(|| malformed(path, line_no, format!("invalid label `{}`", field(label_col).unwrap_or(""))))?;
        let split = field(split_col)?.trim().to_ascii_lowercase();
        let id = match id_col {
            Some(c) => field(c)?.to_string(),
            None => format!("{split}-{i}"),
        };
        let tokens = options.tokenizer.tokenize(field(text_col)?);
        rows.push(&split, (id, truncate(tokens, options), label), path, line_no)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn two_line_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "tiny.jsonl",
            "{\"id\": 1, \"text\": \"Good movie\", \"label\": 1}\n{\"id\": 2, \"text\": \"bad movie\", \"label\": 0}\n",
        );
        let c = load_corpus(&p, CorpusFormat::Jsonl, &LoadOptions::default()).unwrap();
        assert_eq!(c.len(), 2);
        // good, movie, bad + 2 reserved
        assert_eq!(c.vocab.len(), 5);
    }

    #[test]
    fn malformed_record_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "bad.jsonl",
            "{\"id\": 1, \"text\": \"fine\", \"label\": 1}\n{\"id\": 2, \"label\": 0}\n",
        );
        match load_corpus(&p, CorpusFormat::Jsonl, &LoadOptions::default()) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn empty_text_dropped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "e.jsonl",
            "{\"id\": 1, \"text\": \"fine\", \"label\": 1}\n{\"id\": 2, \"text\": \"   \", \"label\": 0}\n",
        );
        let c = load_corpus(&p, CorpusFormat::Jsonl, &LoadOptions::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.dropped_empty, 1);
    }

    #[test]
    fn release_csv_skips_dev_and_splits() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "sst_dataset.csv",
            ",text,label,exp_split\n0,a good film,1,train\n1,a bad film,0,train\n2,meh,0,dev\n3,good,1,test\n",
        );
        let opts = LoadOptions {
            tokenizer: Tokenizer::Whitespace,
            ..Default::default()
        };
        let c = load_corpus(&p, CorpusFormat::ReleaseCsv, &opts).unwrap();
        assert_eq!(c.train.len(), 2);
        assert_eq!(c.test.len(), 1);
        assert_eq!(c.class_counts(super::super::Split::Train), (1, 1));
    }

    #[test]
    fn jsonl_directory_layout_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train.jsonl", "{\"id\": \"a\", \"text\": \"one two three\", \"label\": \"pos\"}\n");
        write(dir.path(), "test.jsonl", "{\"id\": \"b\", \"tokens\": [\"one\", \"four\"], \"label\": \"neg\"}\n");
        let opts = LoadOptions {
            max_len: Some(2),
            ..Default::default()
        };
        let c = load_corpus(dir.path(), CorpusFormat::Jsonl, &opts).unwrap();
        assert_eq!(c.train[0].tokens.len(), 2);
        assert_eq!(c.test[0].tokens, vec![c.vocab.id("one").unwrap(), crate::data::UNK_ID]);
    }
}
