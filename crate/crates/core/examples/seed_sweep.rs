//! How much attention moves when only the initialization seed changes.
use attnbench::data::{generate_synthetic, Label, SyntheticSpec};
use attnbench::train::{seed_sweep, TrainConfig};

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
    let sweep = seed_sweep(&corpus, &config, &[1, 2, 3, 4])?;
    for m in &sweep.per_seed {
        println!("seed {}: mean TVD {:.4}, mean JSD {:.4}", m.seed, m.mean_tvd, m.mean_jsd);
    }
    println!("mean per-instance max JSD {:.4}", sweep.summary.mean_max_jsd().unwrap_or(0.0));

    println!("\nbase max-attention bin | class | instances | mean max JSD");
    for cell in sweep.summary.cells.iter().filter(|c| !c.max_jsd.is_empty()) {
        let lo = sweep.summary.attention_edges[cell.attention_bin];
        let hi = sweep.summary.attention_edges[cell.attention_bin + 1];
        let mean = cell.max_jsd.iter().sum::<f64>() / cell.max_jsd.len() as f64;
        let class = if cell.label == Label::Positive { "pos" } else { "neg" };
        println!("[{lo:.1}, {hi:.1}) | {class} | {:>4} | {mean:.4}", cell.max_jsd.len());
    }
    Ok(())
}
