//! Test bench for asking whether the attention weights of a recurrent text
//! classifier explain its predictions.
//!
//! The crate trains bidirectional-LSTM classifiers with additive attention
//! and runs four diagnostics against them:
//!
//! - a uniform-frozen attention baseline ([`train::train_uniform`]),
//! - a random-seed variance calibration ([`train::seed_sweep`]),
//! - a non-contextual MLP guided by imposed attention weights
//!   ([`train::train_guided_mlp`]),
//! - a model-consistent adversary trained to match the base model's
//!   predictions while moving its attention away ([`train::train_adversary`]),
//!   compared with unconstrained per-instance search
//!   ([`train::per_instance_adversary`]).
//!
//! Everything runs on the small reverse-mode engine in [`autodiff`]. The
//! [`cli`] module holds the run orchestration used by the `attnbench`
//! binary; `examples/` has one runnable program per capability.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
mod io;
pub mod metrics;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
