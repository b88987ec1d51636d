//! Adversaries that imitate a base model's predictions while pushing their
//! attention away from it, over a range of lambdas.
use attnbench::data::{generate_synthetic, SyntheticSpec};
use attnbench::train::{lambda_sweep, train_base, AdversaryConfig, TrainConfig};

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
    let template = AdversaryConfig::new(0.0, "base", config);
    let sweep = lambda_sweep(&corpus, &base, &[0.0, 0.001, 0.01, 0.1], &template)?;

    println!("lambda   | F1     | TVD    | JSD");
    for p in &sweep.curve {
        println!("{:<8} | {:.4} | {:.4} | {:.4}", p.lambda, p.test_f1, p.mean_tvd, p.mean_jsd);
    }
    for c in &sweep.class_curves {
        println!("lambda {} {:?}: TVD {:.4} JSD {:.4} over {}", c.lambda, c.label, c.mean_tvd, c.mean_jsd, c.instances);
    }
    match &sweep.best_divergent {
        Some(p) => println!("best F1 with JSD > 0.4: {:.4} at lambda {}", p.test_f1, p.lambda),
        None => println!("no run exceeded JSD 0.4"),
    }
    Ok(())
}
