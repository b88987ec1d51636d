use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

use super::checkpoint::{ATTN_B, ATTN_V, ATTN_W, DIRECTIONS, EMBEDDING, OUT_B, OUT_W};
use super::{AttentionDistribution, EncodedSequence, ModelCheckpoint, ModelConfig, PredictionScore, Variant};

/// How the attention layer's weights are obtained during a forward pass.
#[derive(Debug, Clone, Copy)]
pub enum AttentionMode<'a> {
    /// Additive attention computed from the hidden states.
    Learned,
    /// `1/n` on every token.
    Uniform,
    /// A caller-supplied distribution, held constant.
    Override(&'a [f64]),
    /// A distribution already on the graph (e.g. softmax of free logits).
    Node(Var),
}

/// Graph handles produced by [`forward_graph`].
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    /// `[n, 2 * d_hid]`.
    pub states: Var,
    /// `[n]`.
    pub attention: Var,
    /// `[2 * d_hid]`.
    pub context: Var,
    /// `[1]`, pre-sigmoid.
    pub logit: Var,
    /// `[1]`, positive-class probability.
    pub score: Var,
}

pub(crate) fn check_tokens(tokens: &[usize], vocab_size: usize) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput("empty token sequence".into()));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t >= vocab_size) {
        return Err(Error::InvalidInput(format!(
            "token id {bad} outside vocabulary of size {vocab_size} (map unknown tokens to UNK first)"
        )));
    }
    Ok(())
}

fn lstm_direction(g: &mut Graph, dir: &str, x: Var, n: usize, d_hid: usize, reverse: bool) -> Result<Vec<Var>> {
    let w_x = g.param_named(&format!("{dir}.w_x"))?;
    let w_h = g.param_named(&format!("{dir}.w_h"))?;
    let b = g.param_named(&format!("{dir}.b"))?;
    let xw = g.matmul(x, w_x)?;
    let pre_all = g.add(xw, b)?;
    let mut h = g.constant(Tensor::zeros(&[d_hid])?);
    let mut c = g.constant(Tensor::zeros(&[d_hid])?);
    let mut out = vec![h; n];
    let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
    let gate = 4 * d_hid;
    for t in order {
        let xt = g.slice(pre_all, t * gate, gate)?;
        let hw = g.matmul(h, w_h)?;
        let pre = g.add(xt, hw)?;
        let i = g.slice(pre, 0, d_hid)?;
        let f = g.slice(pre, d_hid, d_hid)?;
        let cand = g.slice(pre, 2 * d_hid, d_hid)?;
        let o = g.slice(pre, 3 * d_hid, d_hid)?;
        let i = g.sigmoid(i)?;
        let f = g.sigmoid(f)?;
        let cand = g.tanh(cand)?;
        let o = g.sigmoid(o)?;
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        c = g.add(keep, write)?;
        let squashed = g.tanh(c)?;
        h = g.mul(o, squashed)?;
        out[t] = h;
    }
    Ok(out)
}

/// Records the bidirectional encoder; returns `[n, 2 * d_hid]` states.
pub fn encode_graph(g: &mut Graph, config: &ModelConfig, tokens: &[usize]) -> Result<Var> {
    check_tokens(tokens, config.vocab_size)?;
    let emb = g.param_named(EMBEDDING)?;
    let x = g.index_select(emb, tokens)?;
    let n = tokens.len();
    let fwd = lstm_direction(g, DIRECTIONS[0], x, n, config.d_hid, false)?;
    let bwd = lstm_direction(g, DIRECTIONS[1], x, n, config.d_hid, true)?;
    let fwd = g.stack(&fwd)?;
    let bwd = g.stack(&bwd)?;
    g.concat(&[fwd, bwd], 1)
}

/// Records additive attention `softmax_t(v . tanh(W h_t + b))` over `states`.
pub fn attention_graph(g: &mut Graph, states: Var) -> Result<Var> {
    let w = g.param_named(ATTN_W)?;
    let b = g.param_named(ATTN_B)?;
    let v = g.param_named(ATTN_V)?;
    let proj = g.matmul(states, w)?;
    let proj = g.add(proj, b)?;
    let proj = g.tanh(proj)?;
    let scores = g.matmul(proj, v)?;
    g.softmax(scores, 0)
}

/// Records the full classifier on one instance.
pub fn forward_graph(g: &mut Graph, config: &ModelConfig, tokens: &[usize], mode: AttentionMode) -> Result<ForwardVars> {
    let states = encode_graph(g, config, tokens)?;
    let n = tokens.len();
    let attention = match mode {
        AttentionMode::Learned => {
            if !config.variant.has_attention() {
                return Err(Error::Config("uniform-frozen checkpoints have no attention layer".into()));
            }
            attention_graph(g, states)?
        }
        AttentionMode::Uniform => g.constant(Tensor::full(&[n], 1.0 / n as f64)?),
        AttentionMode::Override(weights) => {
            if weights.len() != n {
                return Err(Error::shape("attention override", format!("{n} weights"), format!("{}", weights.len())));
            }
            AttentionDistribution::new(weights.to_vec())?;
            g.constant(Tensor::vector(weights.to_vec())?)
        }
        AttentionMode::Node(var) => {
            if g.value(var).shape() != [n] {
                return Err(Error::shape("attention node", format!("[{n}]"), format!("{:?}", g.value(var).shape())));
            }
            var
        }
    };
    let context = g.matmul(attention, states)?;
    let w = g.param_named(OUT_W)?;
    let b = g.param_named(OUT_B)?;
    let dot = g.matmul(context, w)?;
    let logit = g.add(dot, b)?;
    let score = g.sigmoid(logit)?;
    Ok(ForwardVars {
        states,
        attention,
        context,
        logit,
        score,
    })
}

/// Runs the bidirectional encoder over `tokens`.
pub fn encode(checkpoint: &ModelCheckpoint, tokens: &[usize]) -> Result<EncodedSequence> {
    let mut g = Graph::frozen(&checkpoint.params);
    let states = encode_graph(&mut g, &checkpoint.config, tokens)?;
    Ok(EncodedSequence::new(g.value(states).clone().with_requires_grad(false)))
}

/// Additive attention over already-encoded states.
pub fn attend(checkpoint: &ModelCheckpoint, hidden: &EncodedSequence) -> Result<AttentionDistribution> {
    if !checkpoint.variant().has_attention() {
        return Err(Error::Config("uniform-frozen checkpoints have no attention layer".into()));
    }
    if hidden.width() != 2 * checkpoint.config.d_hid {
        return Err(Error::shape(
            "attend",
            format!("states of width {}", 2 * checkpoint.config.d_hid),
            format!("{}", hidden.width()),
        ));
    }
    let mut g = Graph::frozen(&checkpoint.params);
    let states = g.constant(hidden.as_tensor().clone());
    let att = attention_graph(&mut g, states)?;
    AttentionDistribution::new(g.value(att).values().to_vec())
}

/// Score and attention of the classifier on one instance.
///
/// Uniform-frozen checkpoints report the uniform distribution they use.
pub fn predict(checkpoint: &ModelCheckpoint, tokens: &[usize]) -> Result<(PredictionScore, AttentionDistribution)> {
    let mode = if checkpoint.variant() == Variant::UniformFrozen {
        AttentionMode::Uniform
    } else {
        AttentionMode::Learned
    };
    predict_with(checkpoint, tokens, mode)
}

/// Score with attention fixed to `1/n`; attention parameters are ignored.
pub fn predict_uniform_frozen(checkpoint: &ModelCheckpoint, tokens: &[usize]) -> Result<PredictionScore> {
    predict_with(checkpoint, tokens, AttentionMode::Uniform).map(|(s, _)| s)
}

/// Score and attention under an explicit attention mode.
pub fn predict_with(
    checkpoint: &ModelCheckpoint,
    tokens: &[usize],
    mode: AttentionMode,
) -> Result<(PredictionScore, AttentionDistribution)> {
    if matches!(mode, AttentionMode::Node(_)) {
        return Err(Error::InvalidInput("graph-node attention needs forward_graph".into()));
    }
    let mut g = Graph::frozen(&checkpoint.params);
    let out = forward_graph(&mut g, &checkpoint.config, tokens, mode)?;
    let score = PredictionScore::new(g.scalar(out.score))?;
    let att = AttentionDistribution::new(g.value(out.attention).values().to_vec())?;
    Ok((score, att))
}
