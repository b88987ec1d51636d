use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::io;

use super::checkpoint::uniform_tensor;
use super::classifier::check_tokens;
use super::{AttentionDistribution, ModelCheckpoint, PredictionScore};

pub const MLP_CHECKPOINT_FORMAT: &str = "attnbench-mlp";

const EMBEDDING: &str = "mlp.embedding";
const HIDDEN_W: &str = "mlp.w";
const HIDDEN_B: &str = "mlp.b";
const ATTN_W: &str = "mlp.attn.w";
const ATTN_B: &str = "mlp.attn.b";
const ATTN_V: &str = "mlp.attn.v";
const OUT_W: &str = "mlp.out.w";
const OUT_B: &str = "mlp.out.b";

/// Where the MLP's embedding table starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingInit {
    /// Random, trained with the MLP.
    #[default]
    Fresh,
    /// Copied from a base classifier, then trained.
    FromBase,
}

/// Which pooling the MLP was built and trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuideKind {
    /// Per-instance weights supplied from outside (e.g. a base model's attention).
    Imposed,
    Uniform,
    /// An attention sub-layer over the token representations.
    Learn,
}

/// Per-instance pooling weights for [`guided_mlp_predict`].
#[derive(Debug, Clone, Copy)]
pub enum Guide<'a> {
    Imposed(&'a [f64]),
    Uniform,
    Learn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub vocab_size: usize,
    /// Embedding width; the token-level hidden layer has the same width.
    pub d_emb: usize,
    /// Projection width of the attention sub-layer (LEARN only).
    pub d_attn: usize,
    pub seed: u64,
    pub guide: GuideKind,
    #[serde(default)]
    pub embedding_init: EmbeddingInit,
}

impl MlpConfig {
    pub fn new(vocab_size: usize, seed: u64, guide: GuideKind) -> Self {
        Self {
            vocab_size,
            d_emb: super::ModelConfig::DEFAULT_D_EMB,
            d_attn: super::ModelConfig::DEFAULT_D_ATTN,
            seed,
            guide,
            embedding_init: EmbeddingInit::Fresh,
        }
    }

    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (v, e, a) = (self.vocab_size, self.d_emb, self.d_attn);
        let mut shapes = vec![(EMBEDDING, vec![v, e]), (HIDDEN_W, vec![e, e]), (HIDDEN_B, vec![e])];
        if self.guide == GuideKind::Learn {
            shapes.extend([(ATTN_W, vec![e, a]), (ATTN_B, vec![a]), (ATTN_V, vec![a])]);
        }
        shapes.extend([(OUT_W, vec![e]), (OUT_B, vec![1])]);
        shapes
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 3 || self.d_emb == 0 || self.d_attn == 0 {
            return Err(Error::Config("MLP dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: MlpConfig,
    pub params: ParamStore,
}

impl MlpCheckpoint {
    /// Fresh parameters; `base` is required when the embedding is copied.
    pub fn init(config: MlpConfig, base: Option<&ModelCheckpoint>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        for (name, shape) in config.param_shapes() {
            let fan_in = match name {
                EMBEDDING => 1,
                ATTN_V => config.d_attn,
                _ => config.d_emb,
            };
            let bound = 1.0 / (fan_in as f64).sqrt();
            params.insert(name, uniform_tensor(&mut rng, &shape, bound))?;
        }
        if config.embedding_init == EmbeddingInit::FromBase {
            let base = base.ok_or_else(|| Error::Config("embedding init from base needs a base checkpoint".into()))?;
            let table = base
                .params
                .by_name(super::checkpoint::EMBEDDING)
                .ok_or_else(|| Error::Config("base checkpoint has no embedding".into()))?;
            if table.shape() != [config.vocab_size, config.d_emb] {
                return Err(Error::shape(
                    "mlp embedding init",
                    format!("[{}, {}]", config.vocab_size, config.d_emb),
                    format!("{:?}", table.shape()),
                ));
            }
            *params.by_name_mut(EMBEDDING).expect("inserted above") = table.clone();
        }
        Ok(Self {
            format: MLP_CHECKPOINT_FORMAT.into(),
            version: super::CHECKPOINT_VERSION,
            config,
            params,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MLP_CHECKPOINT_FORMAT || self.version != super::CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported MLP checkpoint {} v{}", self.format, self.version)));
        }
        self.config.validate()?;
        let expected = self.config.param_shapes();
        if expected.len() != self.params.len() {
            return Err(Error::Config("MLP parameter set does not match its config".into()));
        }
        for (name, shape) in expected {
            match self.params.by_name(name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => return Err(Error::shape("mlp checkpoint", format!("{name} {shape:?}"), format!("{:?}", t.shape()))),
                None => return Err(Error::Config(format!("MLP checkpoint lacks `{name}`"))),
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Self = io::read_json(path)?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}

/// Graph handles produced by [`mlp_forward_graph`].
#[derive(Debug, Clone, Copy)]
pub struct MlpVars {
    pub guide: Var,
    pub logit: Var,
    pub score: Var,
}

/// Records the guided MLP on one instance.
///
/// Token representations are `tanh(A e_t + b)`, pooled by the guide and
/// scored by a sigmoid head. No token sees its neighbours.
pub fn mlp_forward_graph(g: &mut Graph, config: &MlpConfig, tokens: &[usize], guide: Guide) -> Result<MlpVars> {
    check_tokens(tokens, config.vocab_size)?;
    let n = tokens.len();
    let emb = g.param_named(EMBEDDING)?;
    let a = g.param_named(HIDDEN_W)?;
    let b = g.param_named(HIDDEN_B)?;
    let e = g.index_select(emb, tokens)?;
    let r = g.matmul(e, a)?;
    let r = g.add(r, b)?;
    let r = g.tanh(r)?;
    let weights = match guide {
        Guide::Imposed(w) => {
            if w.len() != n {
                return Err(Error::shape("guide", format!("{n} weights"), format!("{}", w.len())));
            }
            AttentionDistribution::new(w.to_vec())?;
            g.constant(Tensor::vector(w.to_vec())?)
        }
        Guide::Uniform => g.constant(Tensor::full(&[n], 1.0 / n as f64)?),
        Guide::Learn => {
            if config.guide != GuideKind::Learn {
                return Err(Error::Config("MLP was not built with an attention sub-layer".into()));
            }
            let w = g.param_named(ATTN_W)?;
            let ab = g.param_named(ATTN_B)?;
            let v = g.param_named(ATTN_V)?;
            let p = g.matmul(r, w)?;
            let p = g.add(p, ab)?;
            let p = g.tanh(p)?;
            let s = g.matmul(p, v)?;
            g.softmax(s, 0)?
        }
    };
    let pooled = g.matmul(weights, r)?;
    let w = g.param_named(OUT_W)?;
    let ob = g.param_named(OUT_B)?;
    let dot = g.matmul(pooled, w)?;
    let logit = g.add(dot, ob)?;
    let score = g.sigmoid(logit)?;
    Ok(MlpVars {
        guide: weights,
        logit,
        score,
    })
}

/// Positive-class probability of the guided MLP.
pub fn guided_mlp_predict(mlp: &MlpCheckpoint, tokens: &[usize], guide: Guide) -> Result<PredictionScore> {
    let mut g = Graph::frozen(&mlp.params);
    let out = mlp_forward_graph(&mut g, &mlp.config, tokens, guide)?;
    PredictionScore::new(g.scalar(out.score))
}
