//! Side-by-side attention maps for one instance, written as HTML.
use attnbench::cli::emit_heatmap;
use attnbench::data::{generate_synthetic, Split, SyntheticSpec};
use attnbench::train::{per_instance_adversary, train_adversary, train_base, AdversaryConfig, PerInstanceSearchConfig, TrainConfig};

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
    let adversary = train_adversary(&corpus, &base, &AdversaryConfig::new(0.01, "base", config))?;
    let search = per_instance_adversary(&base, &corpus, &PerInstanceSearchConfig { epsilon: 0.01, ..Default::default() })?;

    let instance = &corpus.split(Split::Test)[0];
    let mut map = emit_heatmap(&[("base", &base), ("adversary", &adversary.checkpoint)], &corpus.vocab, instance)?;
    let found = search.result.predictions.iter().find(|p| p.instance_id == instance.id).expect("searched");
    map.push_row("per-instance adversary", found.score, found.attention.clone().unwrap_or_default())?;

    let path = std::env::temp_dir().join("attnbench-heatmap.html");
    std::fs::write(&path, map.to_html()).expect("write heatmap");
    for row in &map.rows {
        println!("{:>24} score {:.4} weights {:.2?}", row.label, row.score, row.weights);
    }
    println!("score spread {:.4}, written to {}", map.score_spread(), path.display());
    Ok(())
}
