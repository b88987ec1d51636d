//! Persisted manifests: run, verify, replay and summarize.
use serde_json::json;

use attnbench::cli::{build_report, replay, run, verify_results, CorpusRef, Experiment, RunManifest};

fn main() -> attnbench::Result<()> {
    let root = std::env::temp_dir().join("attnbench-runs");
    let corpus = CorpusRef::Synthetic {
        preset: "sentiment".into(),
        seed: 2,
        train_size: Some(300),
        test_size: Some(100),
    };
    let train = json!({ "d_emb": 8, "d_hid": 8, "d_attn": 8, "epochs": 4, "learning_rate": 0.01 });

    let base: Experiment = serde_json::from_value(json!({ "kind": "base", "config": train }))?;
    let base_run = run(&RunManifest::new(base, Some(corpus.clone()), &root)?)?;
    let checkpoint = base_run.output_dir.join("checkpoint.json");

    let sweep: Experiment = serde_json::from_value(json!({
        "kind": "lambda-sweep",
        "config": {
            "adversary": { "lambda": 0.0, "parent": checkpoint, "train": train },
            "lambdas": [0.0, 0.01, 0.1],
        },
    }))?;
    let sweep_run = run(&RunManifest::new(sweep, Some(corpus), &root)?)?;

    for dir in [&base_run.output_dir, &sweep_run.output_dir] {
        let v = verify_results(dir)?;
        println!("{}: {} checks, passed {}", dir.display(), v.checks, v.passed());
    }

    let (again, same) = replay(&sweep_run.output_dir, &root.join("replayed"))?;
    println!("replayed into {}: identical aggregates {same}", again.output_dir.display());

    let report = build_report(&[sweep_run.output_dir.clone()])?;
    for row in &report.tradeoff {
        println!("{:?}", row);
    }
    Ok(())
}
