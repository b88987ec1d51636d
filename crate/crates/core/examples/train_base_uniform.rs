//! Base classifier vs. the same architecture with attention frozen to uniform.
//!
//! On long keyword-detection documents attention is what finds the keyword,
//! so the uniform variant falls well behind.
use std::time::Instant;

use attnbench::data::{corpus_stats, generate_synthetic, SyntheticSpec};
use attnbench::train::{classifier_result, evaluate, train_base, train_uniform, TrainConfig};

fn main() -> attnbench::Result<()> {
    let mut spec = SyntheticSpec::detection(1);
    spec.min_len = 80;
    spec.max_len = 120;
    let corpus = generate_synthetic(&spec)?;
    println!("{:?}", corpus_stats(&corpus));
    let config = TrainConfig {
        d_emb: 16,
        d_hid: 16,
        d_attn: 16,
        epochs: 10,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };

    let started = Instant::now();
    let base = train_base(&corpus, &config)?;
    for log in &base.history {
        println!("epoch {} loss {:.4}", log.epoch, log.train_loss);
    }
    let base_result = classifier_result("base", serde_json::to_value(&config)?, &corpus, &base.checkpoint, None, started)?;

    let started = Instant::now();
    let uniform = train_uniform(&corpus, &config)?;
    let base_preds = evaluate(&base.checkpoint, corpus.split(attnbench::data::Split::Test))?;
    let uniform_result = classifier_result(
        "uniform",
        serde_json::to_value(&config)?,
        &corpus,
        &uniform.checkpoint,
        Some(&base_preds),
        started,
    )?;

    println!("base    F1 {:.4}", base_result.test_f1);
    println!(
        "uniform F1 {:.4}  (mean JSD from base {:.4})",
        uniform_result.test_f1,
        uniform_result.mean_jsd.unwrap_or(f64::NAN)
    );
    Ok(())
}
