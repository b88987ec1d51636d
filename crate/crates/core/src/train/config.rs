use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{EmbeddingInit, ModelConfig};

/// Optimizer, schedule and model dims shared by every training protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub d_emb: usize,
    pub d_hid: usize,
    pub d_attn: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d_emb: ModelConfig::DEFAULT_D_EMB,
            d_hid: ModelConfig::DEFAULT_D_HID,
            d_attn: ModelConfig::DEFAULT_D_ATTN,
            epochs: 40,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_emb == 0 || self.d_hid == 0 || self.d_attn == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig::new(vocab_size, self.seed).with_dims(self.d_emb, self.d_hid, self.d_attn)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Settings for training a model-consistent adversary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub lambda: f64,
    /// Reference to the base checkpoint (usually its file path).
    pub parent: String,
    #[serde(default)]
    pub train: TrainConfig,
    /// Keep the epoch with the lowest adversarial objective on the test split.
    #[serde(default)]
    pub select_best_epoch: bool,
    /// Start from a copy of the base parameters instead of fresh ones.
    #[serde(default)]
    pub warm_start: bool,
}

impl AdversaryConfig {
    pub fn new(lambda: f64, parent: impl Into<String>, train: TrainConfig) -> Self {
        Self {
            lambda,
            parent: parent.into(),
            train,
            select_best_epoch: false,
            warm_start: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} must be a finite value >= 0", self.lambda)));
        }
        self.train.validate()
    }
}

/// Settings for per-instance attention search with frozen parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerInstanceSearchConfig {
    /// TVD budget.
    pub epsilon: f64,
    /// Gradient-ascent steps per penalty round.
    pub steps: usize,
    /// Adam step size on the attention logits.
    pub step_size: f64,
    /// Starting penalty weight; doubled after every round that ends infeasible.
    pub initial_penalty: f64,
    pub max_penalty_rounds: usize,
    /// Half-width of the uniform noise added to the initial logits.
    pub init_noise: f64,
    /// Independent starts per instance: the first from the base logits, the
    /// second from their negation, any further ones from pure noise.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PerInstanceSearchConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            steps: 500,
            step_size: 0.1,
            initial_penalty: 1.0,
            max_penalty_rounds: 8,
            init_noise: 0.5,
            restarts: 2,
            seed: 0,
        }
    }
}

impl PerInstanceSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon {} must lie in (0, 1)", self.epsilon)));
        }
        if self.steps == 0 {
            return Err(Error::Config("step count must be positive".into()));
        }
        if !(self.step_size > 0.0) || !(self.initial_penalty > 0.0) || self.max_penalty_rounds == 0 {
            return Err(Error::Config("step size, penalty and penalty rounds must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("at least one start is needed".into()));
        }
        if !(self.init_noise >= 0.0) {
            return Err(Error::Config("init noise must be >= 0".into()));
        }
        Ok(())
    }
}

/// Settings for training the guided MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidedMlpConfig {
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub embedding_init: EmbeddingInit,
}

impl GuidedMlpConfig {
    pub fn new(train: TrainConfig) -> Self {
        Self {
            train,
            embedding_init: EmbeddingInit::Fresh,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = TrainConfig::default();
        assert_eq!((c.d_emb, c.d_hid, c.d_attn), (128, 128, 64));
        assert_eq!((c.epochs, c.batch_size, c.learning_rate), (40, 32, 1e-3));
        c.validate().unwrap();
        assert_eq!(PerInstanceSearchConfig::default().steps, 500);
    }

    #[test]
    fn negative_lambda_rejected() {
        assert!(AdversaryConfig::new(-0.1, "b", TrainConfig::default()).validate().is_err());
        assert!(AdversaryConfig::new(0.0, "b", TrainConfig::default()).validate().is_ok());
    }

    #[test]
    fn epsilon_and_steps_checked() {
        let mut c = PerInstanceSearchConfig::default();
        c.epsilon = 1.0;
        assert!(c.validate().is_err());
        c.epsilon = 0.5;
        c.steps = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.batch_size, 32);
    }
}
