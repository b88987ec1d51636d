use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::base::{bce_from_logit, fit, mean_of, EpochLog};
use super::{ExperimentResult, GuidedMlpConfig, InstancePrediction};
use crate::data::{Corpus, Split};
use crate::error::{Error, Result};
use crate::io;
use crate::nn::{
    guided_mlp_predict, mlp_forward_graph, predict, AttentionDistribution, Guide, GuideKind, MlpCheckpoint, MlpConfig,
    ModelCheckpoint, Variant,
};

/// Per-instance attention distributions keyed by instance id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GuideSet {
    pub guides: BTreeMap<String, AttentionDistribution>,
}

#[derive(Serialize, Deserialize)]
struct GuideLine {
    instance_id: String,
    weights: AttentionDistribution,
}

impl GuideSet {
    pub fn len(&self) -> usize {
        self.guides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.guides.is_empty()
    }

    pub fn get(&self, instance_id: &str) -> Option<&AttentionDistribution> {
        self.guides.get(instance_id)
    }

    /// One JSON object per line: `{"instance_id": ..., "weights": [...]}`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let lines: Vec<GuideLine> = self
            .guides
            .iter()
            .map(|(id, w)| GuideLine {
                instance_id: id.clone(),
                weights: w.clone(),
            })
            .collect();
        io::write_jsonl(path, &lines)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut guides = BTreeMap::new();
        for (line, g) in io::read_jsonl::<GuideLine>(path)? {
            if guides.insert(g.instance_id.clone(), g.weights).is_some() {
                return Err(Error::Malformed {
                    path: path.display().to_string(),
                    line,
                    message: format!("duplicate guide for `{}`", g.instance_id),
                });
            }
        }
        Ok(Self { guides })
    }
}

/// Attention of `checkpoint` on every instance of both splits.
pub fn extract_guides(checkpoint: &ModelCheckpoint, corpus: &Corpus) -> Result<GuideSet> {
    if checkpoint.variant() == Variant::UniformFrozen {
        return Err(Error::Config("uniform-frozen checkpoints have no attention to extract".into()));
    }
    let mut guides = BTreeMap::new();
    for (_, inst) in corpus.instances() {
        let (_, att) = predict(checkpoint, &inst.tokens)?;
        guides.insert(inst.id.clone(), att);
    }
    Ok(GuideSet { guides })
}

/// Pooling used by the guided MLP.
#[derive(Debug, Clone, Copy)]
pub enum GuideSource<'a> {
    Uniform,
    Learn,
    Set(&'a GuideSet),
}

impl GuideSource<'_> {
    pub fn kind(&self) -> GuideKind {
        match self {
            GuideSource::Uniform => GuideKind::Uniform,
            GuideSource::Learn => GuideKind::Learn,
            GuideSource::Set(_) => GuideKind::Imposed,
        }
    }

    fn guide_for<'g>(&'g self, id: &str) -> Result<Guide<'g>> {
        Ok(match self {
            GuideSource::Uniform => Guide::Uniform,
            GuideSource::Learn => Guide::Learn,
            GuideSource::Set(set) => Guide::Imposed(
                set.get(id)
                    .ok_or_else(|| Error::InvalidInput(format!("no guide for instance `{id}`")))?
                    .weights(),
            ),
        })
    }
}

/// A trained guided MLP and its test evaluation.
#[derive(Debug, Clone)]
pub struct GuidedMlpRun {
    pub checkpoint: MlpCheckpoint,
    pub result: ExperimentResult,
    pub history: Vec<EpochLog>,
}

/// Trains the token-level MLP with the guide imposed in training and testing.
///
/// `init_from` supplies the embedding table when
/// [`crate::nn::EmbeddingInit::FromBase`] is configured.
pub fn train_guided_mlp(
    corpus: &Corpus,
    source: GuideSource,
    config: &GuidedMlpConfig,
    init_from: Option<&ModelCheckpoint>,
) -> Result<GuidedMlpRun> {
    let started = Instant::now();
    config.train.validate()?;
    if let GuideSource::Set(set) = source {
        for (_, inst) in corpus.instances() {
            let g = set
                .get(&inst.id)
                .ok_or_else(|| Error::InvalidInput(format!("no guide for instance `{}`", inst.id)))?;
            if g.len() != inst.tokens.len() {
                return Err(Error::shape(
                    "guide",
                    format!("{} weights for `{}`", inst.tokens.len(), inst.id),
                    g.len().to_string(),
                ));
            }
        }
    }
    let mlp_config = MlpConfig {
        vocab_size: corpus.vocab.len(),
        d_emb: config.train.d_emb,
        d_attn: config.train.d_attn,
        seed: config.train.seed,
        guide: source.kind(),
        embedding_init: config.embedding_init,
    };
    let mut checkpoint = MlpCheckpoint::init(mlp_config, init_from)?;
    let cfg = checkpoint.config.clone();
    let train = corpus.split(Split::Train);
    let history = fit(
        &mut checkpoint.params,
        train.len(),
        &config.train,
        |g, batch| {
            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let inst = &train[i];
                let out = mlp_forward_graph(g, &cfg, &inst.tokens, source.guide_for(&inst.id)?)?;
                losses.push(bce_from_logit(g, out.logit, inst.label.is_positive())?);
            }
            mean_of(g, &losses)
        },
        |_, _| Ok(None),
    )?;

    let mut predictions = Vec::new();
    for inst in corpus.split(Split::Test) {
        let score = guided_mlp_predict(&checkpoint, &inst.tokens, source.guide_for(&inst.id)?)?;
        predictions.push(InstancePrediction {
            instance_id: inst.id.clone(),
            gold: inst.label,
            score: score.value(),
            attention: None,
        });
    }
    let kind = match source.kind() {
        GuideKind::Uniform => "mlp-uniform",
        GuideKind::Learn => "mlp-learn",
        GuideKind::Imposed => "mlp-imposed",
    };
    let mut config_json = serde_json::to_value(config)?;
    if let GuideSource::Set(set) = source {
        let digest: Vec<(&String, &[f64])> = set.guides.iter().map(|(k, v)| (k, v.weights())).collect();
        config_json["guide_digest"] = serde_json::Value::String(crate::io::digest(&serde_json::to_vec(&digest)?));
    }
    let mut result = ExperimentResult::from_rows(kind, config_json, &corpus.fingerprint(), predictions, Vec::new())?;
    result.checkpoint_fingerprint = Some(checkpoint.params.fingerprint());
    result.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(GuidedMlpRun {
        checkpoint,
        result,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::nn::ModelConfig;
    use crate::train::TrainConfig;

    fn corpus() -> Corpus {
        let mut spec = SyntheticSpec::sentiment(5);
        spec.train_size = 30;
        spec.test_size = 10;
        generate_synthetic(&spec).unwrap()
    }

    #[test]
    fn guides_cover_corpus_and_round_trip() {
        let c = corpus();
        let ckpt = ModelCheckpoint::init(ModelConfig::new(c.vocab.len(), 1).with_dims(4, 3, 2)).unwrap();
        let set = extract_guides(&ckpt, &c).unwrap();
        assert_eq!(set.len(), c.len());
        assert_eq!(set, extract_guides(&ckpt, &c).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("guides.jsonl");
        set.save(&p).unwrap();
        assert_eq!(GuideSet::load(&p).unwrap(), set);
    }

    #[test]
    fn missing_guide_rejected() {
        let c = corpus();
        let ckpt = ModelCheckpoint::init(ModelConfig::new(c.vocab.len(), 1).with_dims(4, 3, 2)).unwrap();
        let mut set = extract_guides(&ckpt, &c).unwrap();
        let first = set.guides.keys().next().unwrap().clone();
        set.guides.remove(&first);
        let cfg = GuidedMlpConfig::new(TrainConfig {
            d_emb: 4,
            d_attn: 2,
            epochs: 1,
            ..Default::default()
        });
        assert!(train_guided_mlp(&c, GuideSource::Set(&set), &cfg, None).is_err());
        assert!(train_guided_mlp(&c, GuideSource::Uniform, &cfg, None).is_ok());
    }
}
