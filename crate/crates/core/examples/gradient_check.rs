//! Reverse-mode gradients of the classifier loss against finite differences.
use attnbench::autodiff::gradient_check;
use attnbench::nn::{forward_graph, AttentionMode, ModelCheckpoint, ModelConfig};

fn main() -> attnbench::Result<()> {
    let config = ModelConfig::new(30, 7).with_dims(6, 5, 4);
    let model = ModelCheckpoint::init(config.clone())?;
    let tokens = [4, 17, 9, 22, 4];

    let report = gradient_check(
        |g| {
            let out = forward_graph(g, &config, &tokens, AttentionMode::Learned)?;
            // BCE for a positive gold label
            let z = g.scale(out.logit, -1.0)?;
            g.softplus(z)
        },
        &model.params,
        1e-6,
        1e-4,
    )?;
    println!(
        "{} elements checked, max relative error {:.3e} (worst at {:?}), passed: {}",
        report.checked,
        report.max_rel_error,
        report.worst,
        report.passed()
    );
    Ok(())
}
