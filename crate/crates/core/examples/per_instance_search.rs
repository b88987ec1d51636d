//! Per-instance adversarial attention: free logits, frozen model.
use attnbench::data::{generate_synthetic, SyntheticSpec};
use attnbench::train::{per_instance_adversary, train_base, PerInstanceSearchConfig, TrainConfig};

fn main() -> attnbench::Result<()> {
    let corpus = generate_synthetic(&SyntheticSpec::sentiment(1))?;
    let config = TrainConfig {
        d_emb: 16,
        d_hid: 16,
        d_attn: 16,
        epochs: 8,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let base = train_base(&corpus, &config)?.checkpoint;
    for epsilon in [0.01, 0.05, 0.2] {
        let search = PerInstanceSearchConfig {
            epsilon,
            ..PerInstanceSearchConfig::default()
        };
        let run = per_instance_adversary(&base, &corpus, &search)?;
        let rounds = run.penalty_rounds.iter().max().copied().unwrap_or(0);
        println!(
            "epsilon {epsilon:<5}: mean TVD {:.4}, mean JSD {:.4}, up to {rounds} penalty rounds",
            run.result.mean_tvd.unwrap_or(0.0),
            run.result.mean_jsd.unwrap_or(0.0),
        );
    }
    Ok(())
}
