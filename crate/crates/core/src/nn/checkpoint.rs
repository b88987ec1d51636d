use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::io;

pub const CHECKPOINT_FORMAT: &str = "attnbench-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

pub(crate) const EMBEDDING: &str = "embedding";
pub(crate) const ATTN_W: &str = "attn.w";
pub(crate) const ATTN_B: &str = "attn.b";
pub(crate) const ATTN_V: &str = "attn.v";
pub(crate) const OUT_W: &str = "out.w";
pub(crate) const OUT_B: &str = "out.b";
pub(crate) const DIRECTIONS: [&str; 2] = ["enc.fwd", "enc.bwd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Base,
    UniformFrozen,
    Adversary,
}

impl Variant {
    pub fn has_attention(self) -> bool {
        self != Variant::UniformFrozen
    }
}

/// Dimensions, provenance and variant of a classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_emb: usize,
    pub d_hid: usize,
    pub d_attn: usize,
    pub seed: u64,
    pub variant: Variant,
    /// Adversary tradeoff weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Path (or other reference) of the base checkpoint an adversary imitates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// Fingerprint of the parent checkpoint's parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_fingerprint: Option<String>,
    /// Fingerprint of the corpus the model was trained on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_fingerprint: Option<String>,
}

impl ModelConfig {
    pub const DEFAULT_D_EMB: usize = 128;
    pub const DEFAULT_D_HID: usize = 128;
    pub const DEFAULT_D_ATTN: usize = 64;

    pub fn new(vocab_size: usize, seed: u64) -> Self {
        Self {
            vocab_size,
            d_emb: Self::DEFAULT_D_EMB,
            d_hid: Self::DEFAULT_D_HID,
            d_attn: Self::DEFAULT_D_ATTN,
            seed,
            variant: Variant::Base,
            lambda: None,
            parent: None,
            parent_fingerprint: None,
            corpus_fingerprint: None,
        }
    }

    pub fn with_dims(mut self, d_emb: usize, d_hid: usize, d_attn: usize) -> Self {
        self.d_emb = d_emb;
        self.d_hid = d_hid;
        self.d_attn = d_attn;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Expected `(name, shape)` of every parameter, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (v, e, h, a) = (self.vocab_size, self.d_emb, self.d_hid, self.d_attn);
        let mut shapes = vec![(EMBEDDING.to_string(), vec![v, e])];
        for dir in DIRECTIONS {
            shapes.push((format!("{dir}.w_x"), vec![e, 4 * h]));
            shapes.push((format!("{dir}.w_h"), vec![h, 4 * h]));
            shapes.push((format!("{dir}.b"), vec![4 * h]));
        }
        if self.variant.has_attention() {
            shapes.push((ATTN_W.into(), vec![2 * h, a]));
            shapes.push((ATTN_B.into(), vec![a]));
            shapes.push((ATTN_V.into(), vec![a]));
        }
        shapes.push((OUT_W.into(), vec![2 * h]));
        shapes.push((OUT_B.into(), vec![1]));
        shapes
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 3 || self.d_emb == 0 || self.d_hid == 0 || self.d_attn == 0 {
            return Err(Error::Config(format!(
                "dimensions must be positive (vocab {}, emb {}, hid {}, attn {})",
                self.vocab_size, self.d_emb, self.d_hid, self.d_attn
            )));
        }
        if self.variant == Variant::Adversary && (self.lambda.is_none() || self.parent.is_none()) {
            return Err(Error::Config("adversary checkpoints need lambda and a parent reference".into()));
        }
        if self.lambda.is_some_and(|l| !(l >= 0.0)) {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// A classifier's parameters plus the config that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub params: ParamStore,
}

/// Uniform initialization in `[-bound, bound]`.
pub(crate) fn uniform_tensor(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let values = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), values).expect("positive dims")
}

impl ModelCheckpoint {
    /// Fresh parameters drawn from `config.seed`.
    ///
    /// Every weight is uniform in `±1/sqrt(fan_in)`, with fan-in the input
    /// width of the layer (1 for the embedding lookup, whose input is
    /// one-hot). Forget-gate biases start at 1.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let h = config.d_hid;
        let mut params = ParamStore::new();
        for (name, shape) in config.param_shapes() {
            let fan_in = match name.as_str() {
                EMBEDDING => 1,
                ATTN_V => config.d_attn,
                n if n.ends_with(".w_x") => config.d_emb,
                n if n.ends_with(".w_h") || n.ends_with(".b") && n.starts_with("enc.") => h,
                _ => 2 * h,
            };
            let mut t = uniform_tensor(&mut rng, &shape, 1.0 / (fan_in as f64).sqrt());
            if name.starts_with("enc.") && name.ends_with(".b") {
                t.values_mut()[h..2 * h].fill(1.0);
            }
            params.insert(name, t)?;
        }
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config,
            params,
        })
    }

    /// Checks the parameter set against the config dims and variant.
    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint format {} v{}",
                self.format, self.version
            )));
        }
        self.config.validate()?;
        let expected = self.config.param_shapes();
        if expected.len() != self.params.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} parameters, config implies {}",
                self.params.len(),
                expected.len()
            )));
        }
        for (name, shape) in expected {
            let t = self
                .params
                .by_name(&name)
                .ok_or_else(|| Error::Config(format!("checkpoint lacks parameter `{name}`")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::shape("checkpoint", format!("{name} {shape:?}"), format!("{:?}", t.shape())));
            }
            if !t.is_finite() {
                return Err(Error::Config(format!("parameter `{name}` has non-finite values")));
            }
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn fingerprint(&self) -> String {
        self.params.fingerprint()
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
