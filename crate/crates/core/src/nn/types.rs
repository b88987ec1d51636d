use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::metrics::check_distribution;

/// Attention weights over the tokens of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AttentionDistribution(Vec<f64>);

impl AttentionDistribution {
    /// Validates non-negativity and `sum = 1 ± 1e-6`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_distribution(&weights)?;
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("uniform over zero tokens".into()));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn argmax(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &w)| if w > best.1 { (i, w) } else { best })
            .0
    }
}

impl TryFrom<Vec<f64>> for AttentionDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AttentionDistribution> for Vec<f64> {
    fn from(a: AttentionDistribution) -> Self {
        a.0
    }
}

impl AsRef<[f64]> for AttentionDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Probability of the positive class.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionScore(f64);

impl PredictionScore {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("prediction score {p} outside [0, 1]")));
        }
        Ok(Self(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Per-token bidirectional hidden states, `[tokens, 2 * d_hid]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    states: Tensor,
}

impl EncodedSequence {
    pub(crate) fn new(states: Tensor) -> Self {
        debug_assert_eq!(states.rank(), 2);
        Self { states }
    }

    pub fn len(&self) -> usize {
        self.states.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.states.shape()[1]
    }

    pub fn state(&self, t: usize) -> &[f64] {
        self.states.row(t)
    }

    /// Forward-direction half of the state at `t`.
    pub fn forward_half(&self, t: usize) -> &[f64] {
        &self.state(t)[..self.width() / 2]
    }

    /// Backward-direction half of the state at `t`.
    pub fn backward_half(&self, t: usize) -> &[f64] {
        &self.state(t)[self.width() / 2..]
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.states
    }
}
