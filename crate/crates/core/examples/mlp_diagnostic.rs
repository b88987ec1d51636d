//! A context-free MLP pooled by different attention guides.
use attnbench::data::{generate_synthetic, SyntheticSpec};
use attnbench::train::{extract_guides, train_adversary, train_base, train_guided_mlp, AdversaryConfig, GuideSource, GuidedMlpConfig, TrainConfig};

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
    let adversary = train_adversary(&corpus, &base, &AdversaryConfig::new(0.001, "base", config.clone()))?.checkpoint;
    let base_guides = extract_guides(&base, &corpus)?;
    let adv_guides = extract_guides(&adversary, &corpus)?;

    let mlp = GuidedMlpConfig::new(config);
    for (name, source) in [
        ("uniform", GuideSource::Uniform),
        ("learned", GuideSource::Learn),
        ("base guides", GuideSource::Set(&base_guides)),
        ("adversary guides", GuideSource::Set(&adv_guides)),
    ] {
        let run = train_guided_mlp(&corpus, source, &mlp, None)?;
        println!("{name:>16}: F1 {:.4}", run.result.test_f1);
    }
    Ok(())
}
