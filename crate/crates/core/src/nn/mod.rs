//! The attention classifier (bidirectional LSTM encoder, additive attention,
//! sigmoid head), its uniform-frozen variant, and the guided token-level MLP.
//!
//! Checkpoints are plain JSON: a config record plus a list of named,
//! shaped, flat parameter arrays. Parameter names:
//!
//! | name | shape |
//! |---|---|
//! | `embedding` | `[vocab, d_emb]` |
//! | `enc.fwd.w_x`, `enc.bwd.w_x` | `[d_emb, 4 d_hid]` (gate order i, f, g, o) |
//! | `enc.fwd.w_h`, `enc.bwd.w_h` | `[d_hid, 4 d_hid]` |
//! | `enc.fwd.b`, `enc.bwd.b` | `[4 d_hid]` |
//! | `attn.w` / `attn.b` / `attn.v` | `[2 d_hid, d_attn]` / `[d_attn]` / `[d_attn]` |
//! | `out.w` / `out.b` | `[2 d_hid]` / `[1]` |
//!
//! Uniform-frozen checkpoints omit the `attn.*` entries.

mod checkpoint;
mod classifier;
mod mlp;
mod types;

pub use checkpoint::{ModelCheckpoint, ModelConfig, Variant, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use classifier::{
    attend, attention_graph, encode, encode_graph, forward_graph, predict, predict_uniform_frozen, predict_with,
    AttentionMode, ForwardVars,
};
pub use mlp::{
    guided_mlp_predict, mlp_forward_graph, EmbeddingInit, Guide, GuideKind, MlpCheckpoint, MlpConfig, MlpVars,
    MLP_CHECKPOINT_FORMAT,
};
pub use types::{AttentionDistribution, EncodedSequence, PredictionScore};
