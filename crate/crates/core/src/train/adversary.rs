use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::base::{classifier_result, evaluate, fit, mean_of, EpochLog};
use super::{AdversaryConfig, ExperimentResult};
use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::data::{Corpus, Label, Split};
use crate::error::{Error, Result};
use crate::metrics::{class_split, mean_divergence, smooth, SMOOTHING};
use crate::nn::{forward_graph, AttentionMode, ModelCheckpoint, ModelConfig, Variant};

/// Runs with mean JSD above this count as attention-divergent when picking the best F1.
pub const DIVERGENT_JSD_THRESHOLD: f64 = 0.4;

/// A trained adversary with its evaluation.
#[derive(Debug, Clone)]
pub struct AdversaryRun {
    pub checkpoint: ModelCheckpoint,
    pub result: ExperimentResult,
    pub history: Vec<EpochLog>,
}

/// Records `TVD(y_a, y_b) - lambda * KL(alpha_a || alpha_b)` for one instance.
///
/// Both attention vectors are smoothed before the KL term. With
/// `lambda == 0` the returned node is the TVD itself.
pub fn adversary_loss(
    g: &mut Graph,
    config: &ModelConfig,
    tokens: &[usize],
    base_score: f64,
    base_attention: &[f64],
    lambda: f64,
) -> Result<Var> {
    if base_attention.len() != tokens.len() {
        return Err(Error::shape("adversary loss", format!("{} weights", tokens.len()), base_attention.len().to_string()));
    }
    let out = forward_graph(g, config, tokens, AttentionMode::Learned)?;
    let target = g.constant(Tensor::scalar(base_score));
    let diff = g.sub(out.score, target)?;
    let tvd = g.abs(diff)?;
    if lambda == 0.0 {
        return Ok(tvd);
    }
    let n = tokens.len() as f64;
    let shifted = g.add_scalar(out.attention, SMOOTHING)?;
    let a = g.scale(shifted, 1.0 / (1.0 + SMOOTHING * n))?;
    let log_a = g.log(a)?;
    let log_b: Vec<f64> = smooth(base_attention).iter().map(|v| v.ln()).collect();
    let log_b = g.constant(Tensor::vector(log_b)?);
    let log_ratio = g.sub(log_a, log_b)?;
    let terms = g.mul(a, log_ratio)?;
    let kl = g.sum(terms)?;
    let penalty = g.scale(kl, -lambda)?;
    g.add(tvd, penalty)
}

struct BaseOutputs {
    scores: Vec<f64>,
    attentions: Vec<Vec<f64>>,
}

fn base_outputs(base: &ModelCheckpoint, corpus: &Corpus, split: Split) -> Result<BaseOutputs> {
    let preds = evaluate(base, corpus.split(split))?;
    Ok(BaseOutputs {
        scores: preds.iter().map(|p| p.score).collect(),
        attentions: preds.into_iter().map(|p| p.attention.unwrap_or_default()).collect(),
    })
}

fn mean_objective(params: &ParamStore, config: &ModelConfig, corpus: &Corpus, base: &BaseOutputs, lambda: f64) -> Result<f64> {
    let test = corpus.split(Split::Test);
    let mut total = 0.0;
    for (i, inst) in test.iter().enumerate() {
        let mut g = Graph::frozen(params);
        let loss = adversary_loss(&mut g, config, &inst.tokens, base.scores[i], &base.attentions[i], lambda)?;
        total += g.scalar(loss);
    }
    Ok(total / test.len().max(1) as f64)
}

/// Trains a full classifier to match `base`'s predictions while moving its attention away.
///
/// Gold labels are not used by the loss; they only enter the reported F1.
pub fn train_adversary(corpus: &Corpus, base: &ModelCheckpoint, config: &AdversaryConfig) -> Result<AdversaryRun> {
    let started = Instant::now();
    config.validate()?;
    if base.variant() != Variant::Base {
        return Err(Error::Config(format!("adversary parent must be a base checkpoint, got {:?}", base.variant())));
    }
    let fingerprint = corpus.fingerprint();
    if let Some(fp) = &base.config.corpus_fingerprint {
        if *fp != fingerprint {
            return Err(Error::Config("base checkpoint was trained on a different corpus".into()));
        }
    }
    if base.config.vocab_size != corpus.vocab.len() {
        return Err(Error::Config("base checkpoint vocabulary does not match the corpus".into()));
    }
    let train_base_out = base_outputs(base, corpus, Split::Train)?;
    let test_base_out = base_outputs(base, corpus, Split::Test)?;

    let mut model_config = ModelConfig {
        seed: config.train.seed,
        variant: Variant::Adversary,
        lambda: Some(config.lambda),
        parent: Some(config.parent.clone()),
        parent_fingerprint: Some(base.fingerprint()),
        corpus_fingerprint: Some(fingerprint),
        ..base.config.clone()
    };
    if !config.warm_start {
        model_config = ModelConfig {
            d_emb: config.train.d_emb,
            d_hid: config.train.d_hid,
            d_attn: config.train.d_attn,
            ..model_config
        };
    }
    let mut checkpoint = ModelCheckpoint::init(model_config)?;
    if config.warm_start {
        checkpoint.params = base.params.clone();
    }

    let cfg = checkpoint.config.clone();
    let train = corpus.split(Split::Train);
    let lambda = config.lambda;
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let history = fit(
        &mut checkpoint.params,
        train.len(),
        &config.train,
        |g, batch| {
            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let (s, a) = (train_base_out.scores[i], &train_base_out.attentions[i]);
                losses.push(adversary_loss(g, &cfg, &train[i].tokens, s, a, lambda)?);
            }
            mean_of(g, &losses)
        },
        |epoch, params| {
            if !config.select_best_epoch {
                return Ok(None);
            }
            let objective = mean_objective(params, &cfg, corpus, &test_base_out, lambda)?;
            if best.as_ref().is_none_or(|b| objective < b.0) {
                best = Some((objective, epoch, params.clone()));
            }
            Ok(Some(objective))
        },
    )?;
    let mut selected_epoch = None;
    if let Some((_, epoch, params)) = best {
        checkpoint.params = params;
        selected_epoch = Some(epoch);
    }

    let base_test = evaluate(base, corpus.split(Split::Test))?;
    let config_json = serde_json::to_value(config)?;
    let mut result = classifier_result("adversary", config_json, corpus, &checkpoint, Some(&base_test), started)?;
    result.selected_epoch = selected_epoch;
    Ok(AdversaryRun {
        checkpoint,
        result,
        history,
    })
}

/// One point of the TVD/JSD tradeoff curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub lambda: f64,
    pub mean_jsd: f64,
    pub mean_tvd: f64,
    pub test_f1: f64,
}

/// Tradeoff point restricted to one gold class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTradeoffPoint {
    pub lambda: f64,
    pub label: Label,
    pub mean_jsd: f64,
    pub mean_tvd: f64,
    pub instances: usize,
}

/// Adversaries over a list of lambdas.
#[derive(Debug, Clone)]
pub struct LambdaSweep {
    pub runs: Vec<AdversaryRun>,
    pub curve: Vec<TradeoffPoint>,
    pub class_curves: Vec<ClassTradeoffPoint>,
    /// Highest-F1 run among those with mean JSD above [`DIVERGENT_JSD_THRESHOLD`].
    pub best_divergent: Option<TradeoffPoint>,
}

pub fn tradeoff_point(lambda: f64, result: &ExperimentResult) -> TradeoffPoint {
    TradeoffPoint {
        lambda,
        mean_jsd: result.mean_jsd.unwrap_or(0.0),
        mean_tvd: result.mean_tvd.unwrap_or(0.0),
        test_f1: result.test_f1,
    }
}

/// Highest F1 among points whose mean JSD exceeds `threshold`.
pub fn best_divergent(points: &[TradeoffPoint], threshold: f64) -> Option<TradeoffPoint> {
    points
        .iter()
        .filter(|p| p.mean_jsd > threshold)
        .fold(None::<&TradeoffPoint>, |best, p| match best {
            Some(b) if b.test_f1 >= p.test_f1 => Some(b),
            _ => Some(p),
        })
        .cloned()
}

/// Trains one adversary per lambda, reusing every other setting of `template`.
pub fn lambda_sweep(corpus: &Corpus, base: &ModelCheckpoint, lambdas: &[f64], template: &AdversaryConfig) -> Result<LambdaSweep> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("lambda sweep needs at least one lambda".into()));
    }
    let mut runs = Vec::with_capacity(lambdas.len());
    let mut curve = Vec::new();
    let mut class_curves = Vec::new();
    for (i, &lambda) in lambdas.iter().enumerate() {
        log::info!("lambda sweep: lambda = {lambda} ({}/{})", i + 1, lambdas.len());
        let config = AdversaryConfig { lambda, ..template.clone() };
        let run = train_adversary(corpus, base, &config)?;
        curve.push(tradeoff_point(lambda, &run.result));
        let (neg, pos) = class_split(&run.result.records);
        for (label, recs) in [(Label::Negative, neg), (Label::Positive, pos)] {
            if let Some((mean_tvd, mean_jsd)) = mean_divergence(&recs) {
                class_curves.push(ClassTradeoffPoint {
                    lambda,
                    label,
                    mean_jsd,
                    mean_tvd,
                    instances: recs.len(),
                });
            }
        }
        runs.push(run);
    }
    let best_divergent = best_divergent(&curve, DIVERGENT_JSD_THRESHOLD);
    Ok(LambdaSweep {
        runs,
        curve,
        class_curves,
        best_divergent,
    })
}
