use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Adam, ExperimentResult, InstancePrediction, PerInstanceSearchConfig};
use crate::autodiff::{Graph, Tensor, Var};
use crate::data::{Corpus, Split};
use crate::error::{Error, Result};
use crate::metrics::{binary_tvd, jsd, DivergenceRecord};
use crate::nn::{encode, predict, AttentionDistribution, ModelCheckpoint, Variant};

/// Label stored with every per-instance search result: the objective is
/// `JSD - c * max(0, TVD - epsilon)` on free attention logits with the model frozen.
pub const SEARCH_METHOD: &str = "penalized-jsd-ascent";

const LOG_FLOOR: f64 = 1e-12;

/// Adversarial attention found for every test instance.
#[derive(Debug, Clone)]
pub struct PerInstanceRun {
    pub result: ExperimentResult,
    pub attentions: Vec<(String, AttentionDistribution)>,
    /// Penalty rounds used per instance.
    pub penalty_rounds: Vec<usize>,
}

/// Score of the frozen head on a graph-resident attention node.
fn head_score(g: &mut Graph, states: Var, attention: Var) -> Result<Var> {
    let context = g.matmul(attention, states)?;
    let w = g.param_named("out.w")?;
    let b = g.param_named("out.b")?;
    let dot = g.matmul(context, w)?;
    let logit = g.add(dot, b)?;
    g.sigmoid(logit)
}

/// `JSD(p || q)` for a graph node `p` and constant `q`.
fn jsd_node(g: &mut Graph, p: Var, q: &[f64]) -> Result<Var> {
    let q_node = g.constant(Tensor::vector(q.to_vec())?);
    let sum = g.add(p, q_node)?;
    let m = g.scale(sum, 0.5)?;
    let m_floor = g.add_scalar(m, LOG_FLOOR)?;
    let log_m = g.log(m_floor)?;
    let p_floor = g.add_scalar(p, LOG_FLOOR)?;
    let log_p = g.log(p_floor)?;
    let d_p = g.sub(log_p, log_m)?;
    let t_p = g.mul(p, d_p)?;
    let log_q: Vec<f64> = q.iter().map(|v| (v + LOG_FLOOR).ln()).collect();
    let log_q = g.constant(Tensor::vector(log_q)?);
    let d_q = g.sub(log_q, log_m)?;
    let t_q = g.mul(q_node, d_q)?;
    let both = g.add(t_p, t_q)?;
    let total = g.sum(both)?;
    g.scale(total, 0.5)
}

struct Found {
    attention: Vec<f64>,
    score: f64,
    rounds: usize,
}

fn search_instance(
    base: &ModelCheckpoint,
    states: &Tensor,
    base_score: f64,
    base_att: &[f64],
    config: &PerInstanceSearchConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Found> {
    let n = base_att.len();
    let mut best = Found {
        attention: base_att.to_vec(),
        score: base_score,
        rounds: 0,
    };
    if n == 1 {
        return Ok(best);
    }
    let mut best_jsd = 0.0;
    for start in 0..config.restarts {
        let sign = match start {
            0 => 1.0,
            1 => -1.0,
            _ => 0.0,
        };
        let mut logits: Vec<f64> = base_att
            .iter()
            .map(|a| sign * (a + LOG_FLOOR).ln() + rng.random_range(-config.init_noise..=config.init_noise))
            .collect();
        let mut penalty = config.initial_penalty;
        let mut adam = Adam::with_sizes(&[n], config.step_size);
        for round in 1..=config.max_penalty_rounds {
            best.rounds = best.rounds.max(round);
            let mut last_tvd = 0.0;
            for _ in 0..=config.steps {
                let mut g = Graph::frozen(&base.params);
                let z = g.variable(Tensor::vector(logits.clone())?);
                let alpha = g.softmax(z, 0)?;
                let h = g.constant(states.clone());
                let score = head_score(&mut g, h, alpha)?;
                let s = g.scalar(score);
                let att = g.value(alpha).values().to_vec();
                last_tvd = binary_tvd(s, base_score);
                if last_tvd <= config.epsilon {
                    let d = jsd(&att, base_att)?;
                    if d > best_jsd {
                        best_jsd = d;
                        best.attention = att;
                        best.score = s;
                    }
                }
                let target = g.constant(Tensor::scalar(base_score));
                let diff = g.sub(score, target)?;
                let tvd = g.abs(diff)?;
                let excess = g.add_scalar(tvd, -config.epsilon)?;
                let violation = g.relu(excess)?;
                let div = jsd_node(&mut g, alpha, base_att)?;
                let neg_div = g.scale(div, -1.0)?;
                let cost = g.scale(violation, penalty)?;
                let loss = g.add(neg_div, cost)?;
                let grads = g.backward(loss)?;
                let grad = grads.variable(z).map(|t| t.values().to_vec()).unwrap_or_else(|| vec![0.0; n]);
                adam.step_slice(&mut logits, &grad);
            }
            if last_tvd <= config.epsilon {
                break;
            }
            penalty *= 2.0;
        }
    }
    Ok(best)
}

/// Searches, per test instance, for attention far from the base model's
/// that keeps the prediction within `epsilon` TVD. Parameters are only read.
pub fn per_instance_adversary(base: &ModelCheckpoint, corpus: &Corpus, config: &PerInstanceSearchConfig) -> Result<PerInstanceRun> {
    let started = Instant::now();
    config.validate()?;
    if base.variant() == Variant::UniformFrozen {
        return Err(Error::Config("per-instance search needs a checkpoint with attention".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let test = corpus.split(Split::Test);
    let mut predictions = Vec::with_capacity(test.len());
    let mut records = Vec::with_capacity(test.len());
    let mut attentions = Vec::with_capacity(test.len());
    let mut penalty_rounds = Vec::with_capacity(test.len());
    for inst in test {
        let (score, att) = predict(base, &inst.tokens)?;
        let states = encode(base, &inst.tokens)?;
        let found = search_instance(base, states.as_tensor(), score.value(), att.weights(), config, &mut rng)?;
        records.push(DivergenceRecord::compare(
            inst.id.clone(),
            inst.label,
            (score.value(), att.weights()),
            (found.score, &found.attention),
        )?);
        predictions.push(InstancePrediction {
            instance_id: inst.id.clone(),
            gold: inst.label,
            score: found.score,
            attention: Some(found.attention.clone()),
        });
        attentions.push((inst.id.clone(), AttentionDistribution::new(found.attention)?));
        penalty_rounds.push(found.rounds);
    }
    let config_json = serde_json::json!({
        "method": SEARCH_METHOD,
        "search": config,
        "base_fingerprint": base.fingerprint(),
    });
    let mut result = ExperimentResult::from_rows("instance-adversary", config_json, &corpus.fingerprint(), predictions, records)?;
    result.checkpoint_fingerprint = Some(base.fingerprint());
    result.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(PerInstanceRun {
        result,
        attentions,
        penalty_rounds,
    })
}

/// Bisects epsilon until the search's mean TVD is within `tolerance` of `target`.
///
/// Returns the closest run found after `max_evals` searches.
pub fn match_mean_tvd(
    base: &ModelCheckpoint,
    corpus: &Corpus,
    config: &PerInstanceSearchConfig,
    target: f64,
    tolerance: f64,
    max_evals: usize,
) -> Result<PerInstanceRun> {
    let (mut lo, mut hi) = (0.0f64, 0.99f64);
    let mut eps = target.clamp(1e-4, hi);
    let mut best: Option<(f64, PerInstanceRun)> = None;
    for _ in 0..max_evals.max(1) {
        let run = per_instance_adversary(base, corpus, &PerInstanceSearchConfig { epsilon: eps, ..config.clone() })?;
        let mean = run.result.mean_tvd.unwrap_or(0.0);
        let gap = (mean - target).abs();
        log::info!("epsilon {eps:.6}: mean TVD {mean:.6} (target {target:.6})");
        let done = gap <= tolerance;
        if best.as_ref().is_none_or(|b| gap < b.0) {
            best = Some((gap, run));
        }
        if done {
            break;
        }
        if mean < target {
            lo = eps;
        } else {
            hi = eps;
        }
        eps = 0.5 * (lo + hi);
        if eps <= 0.0 {
            break;
        }
    }
    Ok(best.expect("at least one evaluation").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Corpus, Label};
    use crate::nn::ModelConfig;

    fn setup() -> (ModelCheckpoint, Corpus) {
        let base = ModelCheckpoint::init(ModelConfig::new(7, 4).with_dims(4, 3, 3)).unwrap();
        let t = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        let corpus = Corpus::from_tokenized(
            "tiny",
            vec![("a".into(), t("x y z"), Label::Positive), ("b".into(), t("y y"), Label::Negative)],
            vec![("c".into(), t("x y z x"), Label::Positive), ("d".into(), t("z"), Label::Negative)],
        )
        .unwrap();
        let base = ModelCheckpoint::init(ModelConfig {
            vocab_size: corpus.vocab.len(),
            ..base.config
        })
        .unwrap();
        (base, corpus)
    }

    #[test]
    fn respects_budget_and_leaves_params_alone() {
        let (base, corpus) = setup();
        let before = base.fingerprint();
        let cfg = PerInstanceSearchConfig {
            epsilon: 0.02,
            steps: 100,
            ..Default::default()
        };
        let run = per_instance_adversary(&base, &corpus, &cfg).unwrap();
        assert_eq!(base.fingerprint(), before);
        assert_eq!(run.result.records.len(), 2);
        for r in &run.result.records {
            assert!(r.tvd <= 0.02 + 1e-12);
        }
        // single-token instance admits only one distribution
        assert_eq!(run.result.records[1].jsd, 0.0);
        assert!(run.result.records[0].jsd > 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let (base, corpus) = setup();
        let cfg = PerInstanceSearchConfig {
            steps: 50,
            ..Default::default()
        };
        let a = per_instance_adversary(&base, &corpus, &cfg).unwrap();
        let b = per_instance_adversary(&base, &corpus, &cfg).unwrap();
        assert_eq!(a.result.records, b.result.records);
    }

    #[test]
    fn graph_jsd_matches_metric() {
        let store = crate::autodiff::ParamStore::new();
        let mut g = Graph::frozen(&store);
        let p = [0.6, 0.3, 0.1];
        let q = [0.2, 0.2, 0.6];
        let pn = g.constant(Tensor::vector(p.to_vec()).unwrap());
        let d = jsd_node(&mut g, pn, &q).unwrap();
        assert!((g.scalar(d) - jsd(&p, &q).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn zero_steps_rejected() {
        let (base, corpus) = setup();
        let cfg = PerInstanceSearchConfig {
            steps: 0,
            ..Default::default()
        };
        assert!(per_instance_adversary(&base, &corpus, &cfg).is_err());
    }
}
