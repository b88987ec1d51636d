//! Training and search protocols: base and uniform-frozen classifiers, seed
//! sweeps, model-consistent adversaries and lambda sweeps, per-instance
//! attention search, and the guided MLP.
//!
//! Every protocol is a pure function of its corpus, config and seed.

mod adversary;
mod base;
mod config;
mod guided;
mod instance;
mod optim;
mod result;

pub use adversary::{
    adversary_loss, best_divergent, lambda_sweep, tradeoff_point, train_adversary, AdversaryRun, ClassTradeoffPoint,
    LambdaSweep, TradeoffPoint, DIVERGENT_JSD_THRESHOLD,
};
pub use base::{
    classifier_result, compare_predictions, evaluate, seed_sweep, train_base, train_uniform, EpochLog, SeedMarker,
    SeedSweep, TrainedModel,
};
pub use config::{AdversaryConfig, GuidedMlpConfig, PerInstanceSearchConfig, TrainConfig};
pub use guided::{extract_guides, train_guided_mlp, GuideSet, GuideSource, GuidedMlpRun};
pub use instance::{match_mean_tvd, per_instance_adversary, PerInstanceRun, SEARCH_METHOD};
pub use optim::Adam;
pub use result::{run_id, Aggregates, ExperimentResult, InstancePrediction};
