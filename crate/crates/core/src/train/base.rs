use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, ExperimentResult, InstancePrediction, TrainConfig};
use crate::autodiff::{Graph, ParamStore, Var};
use crate::data::{Corpus, Instance, Split};
use crate::error::{Error, Result};
use crate::metrics::{density_summary, mean_divergence, DensitySummary, DivergenceRecord, DEFAULT_ATTENTION_BINS};
use crate::nn::{forward_graph, predict, AttentionMode, ModelCheckpoint, Variant};

/// Loss bookkeeping for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// Objective on the test split, when epoch selection tracks it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_objective: Option<f64>,
}

/// A trained classifier and its loss history.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub checkpoint: ModelCheckpoint,
    pub history: Vec<EpochLog>,
}

/// Mean of one-element loss nodes.
pub(crate) fn mean_of(g: &mut Graph, losses: &[Var]) -> Result<Var> {
    let all = g.concat(losses, 0)?;
    let total = g.sum(all)?;
    g.scale(total, 1.0 / losses.len() as f64)
}

/// Binary cross-entropy from a logit: `softplus(z) - y z`.
pub(crate) fn bce_from_logit(g: &mut Graph, logit: Var, positive: bool) -> Result<Var> {
    if positive {
        let neg = g.scale(logit, -1.0)?;
        g.softplus(neg)
    } else {
        g.softplus(logit)
    }
}

/// Mini-batch loop shared by every trainer.
///
/// `batch_loss` records the mean loss of a batch of train-instance indices on
/// a fresh graph; `after_epoch` sees the updated parameters.
pub(crate) fn fit(
    params: &mut ParamStore,
    train_len: usize,
    config: &TrainConfig,
    mut batch_loss: impl FnMut(&mut Graph, &[usize]) -> Result<Var>,
    mut after_epoch: impl FnMut(usize, &ParamStore) -> Result<Option<f64>>,
) -> Result<Vec<EpochLog>> {
    config.validate()?;
    if train_len == 0 {
        return Err(Error::InvalidInput("training split is empty".into()));
    }
    let mut adam = Adam::new(params, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed_5eed));
    let mut order: Vec<usize> = (0..train_len).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let grads = {
                let mut g = Graph::new(params);
                let loss = batch_loss(&mut g, batch)?;
                let value = g.scalar(loss);
                if !value.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite loss at epoch {epoch}")));
                }
                total += value * batch.len() as f64;
                g.backward(loss)?
            };
            adam.step(params, &grads);
        }
        let test_objective = after_epoch(epoch, params)?;
        let log = EpochLog {
            epoch,
            train_loss: total / train_len as f64,
            test_objective,
        };
        log::debug!("epoch {epoch}: train loss {:.6}", log.train_loss);
        history.push(log);
    }
    Ok(history)
}

fn require_both_classes(corpus: &Corpus) -> Result<()> {
    let (neg, pos) = corpus.class_counts(Split::Train);
    if neg == 0 || pos == 0 {
        return Err(Error::InvalidInput(format!(
            "training split needs both classes (negative {neg}, positive {pos})"
        )));
    }
    Ok(())
}

fn train_classifier(corpus: &Corpus, config: &TrainConfig, variant: Variant) -> Result<TrainedModel> {
    config.validate()?;
    require_both_classes(corpus)?;
    let mut model_config = config.model_config(corpus.vocab.len()).with_variant(variant);
    model_config.corpus_fingerprint = Some(corpus.fingerprint());
    let mut checkpoint = ModelCheckpoint::init(model_config)?;
    let train = corpus.split(Split::Train);
    let mode = if variant == Variant::UniformFrozen {
        AttentionMode::Uniform
    } else {
        AttentionMode::Learned
    };
    let cfg = checkpoint.config.clone();
    let history = fit(
        &mut checkpoint.params,
        train.len(),
        config,
        |g, batch| {
            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let inst = &train[i];
                let out = forward_graph(g, &cfg, &inst.tokens, mode)?;
                losses.push(bce_from_logit(g, out.logit, inst.label.is_positive())?);
            }
            mean_of(g, &losses)
        },
        |_, _| Ok(None),
    )?;
    Ok(TrainedModel { checkpoint, history })
}

/// Trains the attention classifier with binary cross-entropy.
pub fn train_base(corpus: &Corpus, config: &TrainConfig) -> Result<TrainedModel> {
    train_classifier(corpus, config, Variant::Base)
}

/// Trains the same architecture with attention fixed to `1/n`.
pub fn train_uniform(corpus: &Corpus, config: &TrainConfig) -> Result<TrainedModel> {
    train_classifier(corpus, config, Variant::UniformFrozen)
}

/// Predictions (and attention) of a classifier over instances.
pub fn evaluate(checkpoint: &ModelCheckpoint, instances: &[Instance]) -> Result<Vec<InstancePrediction>> {
    instances
        .iter()
        .map(|inst| {
            let (score, att) = predict(checkpoint, &inst.tokens)?;
            Ok(InstancePrediction {
                instance_id: inst.id.clone(),
                gold: inst.label,
                score: score.value(),
                attention: Some(att.into()),
            })
        })
        .collect()
}

/// Per-instance divergence of `model` from `base` predictions on the same instances.
pub fn compare_predictions(base: &[InstancePrediction], model: &[InstancePrediction]) -> Result<Vec<DivergenceRecord>> {
    if base.len() != model.len() {
        return Err(Error::InvalidInput(format!(
            "cannot compare {} predictions with {}",
            base.len(),
            model.len()
        )));
    }
    base.iter()
        .zip(model)
        .map(|(b, m)| {
            if b.instance_id != m.instance_id {
                return Err(Error::InvalidInput(format!("instance mismatch: {} vs {}", b.instance_id, m.instance_id)));
            }
            let uniform;
            let ba = match &b.attention {
                Some(a) => a.as_slice(),
                None => return Err(Error::InvalidInput(format!("base prediction {} lacks attention", b.instance_id))),
            };
            let ma = match &m.attention {
                Some(a) => a.as_slice(),
                None => {
                    uniform = vec![1.0 / ba.len() as f64; ba.len()];
                    uniform.as_slice()
                }
            };
            DivergenceRecord::compare(b.instance_id.clone(), b.gold, (b.score, ba), (m.score, ma))
        })
        .collect()
}

/// Test-split result for a trained classifier, compared against `base` when given.
pub fn classifier_result(
    kind: &str,
    config: serde_json::Value,
    corpus: &Corpus,
    checkpoint: &ModelCheckpoint,
    base: Option<&[InstancePrediction]>,
    started: Instant,
) -> Result<ExperimentResult> {
    let predictions = evaluate(checkpoint, corpus.split(Split::Test))?;
    let records = match base {
        Some(b) => compare_predictions(b, &predictions)?,
        None => Vec::new(),
    };
    let mut result = ExperimentResult::from_rows(kind, config, &corpus.fingerprint(), predictions, records)?;
    result.checkpoint_fingerprint = Some(checkpoint.fingerprint());
    result.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(result)
}

/// Mean divergence of one sweep member from the base seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMarker {
    pub seed: u64,
    pub mean_tvd: f64,
    pub mean_jsd: f64,
}

/// Models from several seeds and their attention divergence from the first.
#[derive(Debug, Clone)]
pub struct SeedSweep {
    pub seeds: Vec<u64>,
    pub checkpoints: Vec<ModelCheckpoint>,
    /// Records of each non-base seed against the base seed, test split.
    pub records: Vec<(u64, Vec<DivergenceRecord>)>,
    pub summary: DensitySummary,
    pub per_seed: Vec<SeedMarker>,
    /// Average of `per_seed`.
    pub mean_marker: SeedMarker,
}

impl SeedSweep {
    pub fn all_records(&self) -> Vec<DivergenceRecord> {
        self.records.iter().flat_map(|(_, r)| r.iter().cloned()).collect()
    }
}

/// Trains one base model per seed and compares every model with the first.
pub fn seed_sweep(corpus: &Corpus, config: &TrainConfig, seeds: &[u64]) -> Result<SeedSweep> {
    if seeds.len() < 2 {
        return Err(Error::InvalidInput("a seed sweep needs at least two seeds".into()));
    }
    for (i, s) in seeds.iter().enumerate() {
        if seeds[..i].contains(s) {
            return Err(Error::InvalidInput(format!("duplicate seed {s}")));
        }
    }
    let test = corpus.split(Split::Test);
    let mut checkpoints = Vec::with_capacity(seeds.len());
    let mut base_preds = Vec::new();
    let mut records = Vec::new();
    let mut per_seed = Vec::new();
    for (i, &seed) in seeds.iter().enumerate() {
        log::info!("seed sweep: training seed {seed} ({}/{})", i + 1, seeds.len());
        let trained = train_base(corpus, &config.with_seed(seed))?;
        let preds = evaluate(&trained.checkpoint, test)?;
        if i == 0 {
            base_preds = preds;
        } else {
            let recs = compare_predictions(&base_preds, &preds)?;
            let (mean_tvd, mean_jsd) = mean_divergence(&recs).unwrap_or((0.0, 0.0));
            per_seed.push(SeedMarker { seed, mean_tvd, mean_jsd });
            records.push((seed, recs));
        }
        checkpoints.push(trained.checkpoint);
    }
    let all: Vec<DivergenceRecord> = records.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    let summary = density_summary(&all, DEFAULT_ATTENTION_BINS)?;
    let k = per_seed.len() as f64;
    let mean_marker = SeedMarker {
        seed: seeds[0],
        mean_tvd: per_seed.iter().map(|m| m.mean_tvd).sum::<f64>() / k,
        mean_jsd: per_seed.iter().map(|m| m.mean_jsd).sum::<f64>() / k,
    };
    Ok(SeedSweep {
        seeds: seeds.to_vec(),
        checkpoints,
        records,
        summary,
        per_seed,
        mean_marker,
    })
}
