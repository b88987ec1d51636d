use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, load_corpus, Corpus, CorpusFormat, LoadOptions, SyntheticSpec, Tokenizer};
use crate::error::{Error, Result};
use crate::io;
use crate::nn::EmbeddingInit;
use crate::train::{run_id, AdversaryConfig, PerInstanceSearchConfig, TrainConfig};

/// Where a run's corpus comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum CorpusRef {
    /// A generated keyword corpus (`sentiment` or `detection` preset).
    Synthetic {
        preset: String,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_size: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_size: Option<usize>,
    },
    File {
        path: PathBuf,
        format: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_len: Option<usize>,
    },
}

impl CorpusRef {
    pub fn synthetic(preset: &str, seed: u64) -> Self {
        CorpusRef::Synthetic {
            preset: preset.into(),
            seed,
            train_size: None,
            test_size: None,
        }
    }

    pub fn spec(&self) -> Result<Option<SyntheticSpec>> {
        let CorpusRef::Synthetic {
            preset,
            seed,
            train_size,
            test_size,
        } = self
        else {
            return Ok(None);
        };
        let mut spec = match preset.as_str() {
            "sentiment" => SyntheticSpec::sentiment(*seed),
            "detection" => SyntheticSpec::detection(*seed),
            other => return Err(Error::Config(format!("unknown synthetic preset `{other}`"))),
        };
        if let Some(n) = train_size {
            spec.train_size = *n;
        }
        if let Some(n) = test_size {
            spec.test_size = *n;
        }
        Ok(Some(spec))
    }

    pub fn load(&self) -> Result<Corpus> {
        match self {
            CorpusRef::Synthetic { .. } => generate_synthetic(&self.spec()?.expect("synthetic")),
            CorpusRef::File { path, format, max_len } => {
                let format: CorpusFormat = format.parse()?;
                let options = LoadOptions {
                    tokenizer: Tokenizer::default(),
                    max_len: *max_len,
                    name: None,
                };
                load_corpus(path, format, &options)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformRunConfig {
    #[serde(default)]
    pub train: TrainConfig,
    /// Base checkpoint to compare against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedsRunConfig {
    #[serde(default)]
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
}

/// Guide choice for the MLP diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuideChoice {
    Uniform,
    Learn,
    FromCheckpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRunConfig {
    #[serde(default)]
    pub train: TrainConfig,
    pub guide: GuideChoice,
    /// Checkpoint whose attention supplies the guides (`from-checkpoint`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub embedding_init: EmbeddingInit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepRunConfig {
    pub adversary: AdversaryConfig,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRunConfig {
    pub base: PathBuf,
    #[serde(default)]
    pub search: PerInstanceSearchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRunConfig {
    /// Finished run directories to summarize.
    pub runs: Vec<PathBuf>,
}

/// One experiment with its typed payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "kebab-case")]
pub enum Experiment {
    Base(TrainConfig),
    Uniform(UniformRunConfig),
    Seeds(SeedsRunConfig),
    MlpDiagnostic(MlpRunConfig),
    Adversary(AdversaryConfig),
    LambdaSweep(LambdaSweepRunConfig),
    InstanceAdversary(InstanceRunConfig),
    Report(ReportRunConfig),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Base(_) => "base",
            Experiment::Uniform(_) => "uniform",
            Experiment::Seeds(_) => "seeds",
            Experiment::MlpDiagnostic(_) => "mlp-diagnostic",
            Experiment::Adversary(_) => "adversary",
            Experiment::LambdaSweep(_) => "lambda-sweep",
            Experiment::InstanceAdversary(_) => "instance-adversary",
            Experiment::Report(_) => "report",
        }
    }
}

/// Everything needed to (re)run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusRef>,
    pub output_dir: PathBuf,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    /// Manifest writing to `output_root/<run id>`; the id hashes experiment and corpus.
    pub fn new(experiment: Experiment, corpus: Option<CorpusRef>, output_root: &Path) -> Result<Self> {
        let payload = serde_json::json!({ "experiment": &experiment, "corpus": &corpus });
        let run_id = run_id(experiment.kind(), &payload, "");
        Ok(Self {
            output_dir: output_root.join(&run_id),
            run_id,
            experiment,
            corpus,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid run id `{}`", self.run_id)));
        }
        if self.corpus.is_none() && !matches!(self.experiment, Experiment::Report(_)) {
            return Err(Error::Config(format!("{} runs need a corpus", self.experiment.kind())));
        }
        match &self.experiment {
            Experiment::Base(t) => t.validate(),
            Experiment::Uniform(u) => u.train.validate(),
            Experiment::Seeds(s) => s.train.validate(),
            Experiment::MlpDiagnostic(m) => {
                if m.guide == GuideChoice::FromCheckpoint && m.checkpoint.is_none() {
                    return Err(Error::Config("from-checkpoint guides need a checkpoint path".into()));
                }
                m.train.validate()
            }
            Experiment::Adversary(a) => a.validate(),
            Experiment::LambdaSweep(l) => {
                if l.lambdas.is_empty() {
                    return Err(Error::Config("lambda sweep needs at least one lambda".into()));
                }
                l.adversary.train.validate()
            }
            Experiment::InstanceAdversary(i) => i.search.validate(),
            Experiment::Report(r) => {
                if r.runs.is_empty() {
                    return Err(Error::Config("report needs at least one run directory".into()));
                }
                Ok(())
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = io::read_json(path)?;
        m.validate()?;
        Ok(m)
    }
}
