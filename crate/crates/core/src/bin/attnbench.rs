use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use attnbench::cli::{
    emit_heatmap, replay, run, verify_results, CorpusRef, ErrorReport, Experiment, GuideChoice, RunManifest, RESULT_FILE,
};
use attnbench::nn::ModelCheckpoint;
use attnbench::train::ExperimentResult;
use attnbench::{Error, Result};

#[derive(Parser)]
#[command(name = "attnbench", version, about = "Attention-explanation diagnostics for BiLSTM text classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the base attention classifier.
    TrainBase(Common),
    /// Train the uniform-frozen variant.
    TrainUniform {
        #[command(flatten)]
        common: Common,
        /// Base checkpoint to compare attention and predictions against.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Train one base model per seed and compare attention with the first.
    SeedSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
    },
    /// Train the guided token-level MLP.
    MlpDiagnostic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        guide: GuideArg,
        /// Checkpoint supplying guides (and optionally the embedding).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Initialize the MLP embedding from the checkpoint.
        #[arg(long)]
        embedding_from_checkpoint: bool,
    },
    /// Train a model-consistent adversary against a base checkpoint.
    TrainAdversary {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        base: PathBuf,
        #[command(flatten)]
        adv: AdversaryFlags,
    },
    /// Train one adversary per lambda.
    LambdaSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long)]
        base: PathBuf,
        #[command(flatten)]
        adv: AdversaryFlags,
    },
    /// Per-instance attention search with frozen parameters.
    InstanceAdversary {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
    },
    /// Render side-by-side attention maps for one instance.
    Heatmap {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// `label=path` pairs, one row each.
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<String>,
        #[arg(long)]
        instance_id: String,
        /// Instance-adversary run directory to add as a row.
        #[arg(long)]
        instance_adversary: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Summarize finished runs into tables and tradeoff-curve data.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long, env = "ATTNBENCH_OUT", default_value = "runs")]
        out: PathBuf,
    },
    /// Recompute aggregates and check bounds of result files or run directories.
    Verify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Execute a persisted manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Write outputs here instead of the manifest's directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Re-run a finished run directory and compare aggregates exactly.
    Replay {
        run_dir: PathBuf,
        #[arg(long)]
        into: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GuideArg {
    Uniform,
    Learn,
    FromCheckpoint,
}

#[derive(Args, Clone)]
struct CorpusArgs {
    /// Corpus file or directory.
    #[arg(long, conflicts_with = "synthetic")]
    corpus: Option<PathBuf>,
    /// `jsonl`, `release-csv` or `canonical`.
    #[arg(long, default_value = "jsonl")]
    format: String,
    #[arg(long)]
    max_len: Option<usize>,
    /// Generated corpus preset: `sentiment` or `detection`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, default_value_t = 0)]
    synthetic_seed: u64,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
}

impl CorpusArgs {
    fn corpus_ref(&self) -> Result<CorpusRef> {
        match (&self.corpus, &self.synthetic) {
            (Some(path), None) => Ok(CorpusRef::File {
                path: path.clone(),
                format: self.format.clone(),
                max_len: self.max_len,
            }),
            (None, Some(preset)) => Ok(CorpusRef::Synthetic {
                preset: preset.clone(),
                seed: self.synthetic_seed,
                train_size: self.train_size,
                test_size: self.test_size,
            }),
            _ => Err(Error::Config("give exactly one of --corpus or --synthetic".into())),
        }
    }
}

#[derive(Args, Clone)]
struct Common {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// JSON file with the experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; each run writes to `<out>/<run id>`.
    #[arg(long, env = "ATTNBENCH_OUT", default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d_emb: Option<usize>,
    #[arg(long)]
    d_hid: Option<usize>,
    #[arg(long)]
    d_attn: Option<usize>,
}

#[derive(Args, Clone)]
struct AdversaryFlags {
    /// Keep the epoch with the lowest test-split objective.
    #[arg(long)]
    select_best_epoch: bool,
    /// Start from the base parameters instead of fresh ones.
    #[arg(long)]
    warm_start: bool,
}

impl Common {
    fn file_config(&self) -> Result<Value> {
        match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                Ok(serde_json::from_str(&text)?)
            }
            None => Ok(json!({})),
        }
    }

    /// Applies training flags at `path` inside `config`, creating objects as needed.
    fn apply_train(&self, config: &mut Value, path: &[&str]) {
        let mut node = config;
        for key in path {
            node = object(node).entry(*key).or_insert_with(|| json!({}));
        }
        let obj = object(node);
        let mut set = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                obj.insert(k.into(), v);
            }
        };
        set("epochs", self.epochs.map(Value::from));
        set("batch_size", self.batch_size.map(Value::from));
        set("learning_rate", self.learning_rate.map(Value::from));
        set("seed", self.seed.map(Value::from));
        set("d_emb", self.d_emb.map(Value::from));
        set("d_hid", self.d_hid.map(Value::from));
        set("d_attn", self.d_attn.map(Value::from));
    }
}

fn object(v: &mut Value) -> &mut serde_json::Map<String, Value> {
    if !v.is_object() {
        *v = json!({});
    }
    v.as_object_mut().expect("object")
}

fn set(config: &mut Value, key: &str, value: Value) {
    object(config).insert(key.into(), value);
}

fn experiment(kind: &str, config: Value) -> Result<Experiment> {
    Ok(serde_json::from_value(json!({ "kind": kind, "config": config }))?)
}

fn manifest_for(common: &Common, kind: &str, config: Value) -> Result<RunManifest> {
    let exp = experiment(kind, config)?;
    let m = RunManifest::new(exp, Some(common.corpus.corpus_ref()?), &common.out)?;
    m.validate()?;
    Ok(m)
}

fn path_value(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

fn adversary_config(common: &Common, mut config: Value, base: &Path, lambda: Option<f64>, adv: &AdversaryFlags, at: &[&str]) -> Value {
    let mut node = &mut config;
    for key in at {
        node = object(node).entry(*key).or_insert_with(|| json!({}));
    }
    set(node, "parent", path_value(base));
    if let Some(l) = lambda {
        set(node, "lambda", Value::from(l));
    } else if !object(node).contains_key("lambda") {
        set(node, "lambda", Value::from(0.0));
    }
    if adv.select_best_epoch {
        set(node, "select_best_epoch", Value::Bool(true));
    }
    if adv.warm_start {
        set(node, "warm_start", Value::Bool(true));
    }
    let mut train_path = at.to_vec();
    train_path.push("train");
    common.apply_train(&mut config, &train_path);
    config
}

fn execute(cli: Cli) -> Result<Value> {
    let outcome = match cli.command {
        Command::TrainBase(common) => {
            let mut config = common.file_config()?;
            common.apply_train(&mut config, &[]);
            run(&manifest_for(&common, "base", config)?)?
        }
        Command::TrainUniform { common, base } => {
            let mut config = common.file_config()?;
            common.apply_train(&mut config, &["train"]);
            if let Some(b) = base {
                set(&mut config, "base", path_value(&b));
            }
            run(&manifest_for(&common, "uniform", config)?)?
        }
        Command::SeedSweep { common, seeds } => {
            let mut config = common.file_config()?;
            common.apply_train(&mut config, &["train"]);
            set(&mut config, "seeds", json!(seeds));
            run(&manifest_for(&common, "seeds", config)?)?
        }
        Command::MlpDiagnostic {
            common,
            guide,
            checkpoint,
            embedding_from_checkpoint,
        } => {
            let mut config = common.file_config()?;
            common.apply_train(&mut config, &["train"]);
            let guide = match guide {
                GuideArg::Uniform => GuideChoice::Uniform,
                GuideArg::Learn => GuideChoice::Learn,
                GuideArg::FromCheckpoint => GuideChoice::FromCheckpoint,
            };
            set(&mut config, "guide", serde_json::to_value(guide)?);
            if let Some(c) = checkpoint {
                set(&mut config, "checkpoint", path_value(&c));
            }
            if embedding_from_checkpoint {
                set(&mut config, "embedding_init", json!("from-base"));
            }
            run(&manifest_for(&common, "mlp-diagnostic", config)?)?
        }
        Command::TrainAdversary { common, lambda, base, adv } => {
            let config = adversary_config(&common, common.file_config()?, &base, Some(lambda), &adv, &[]);
            run(&manifest_for(&common, "adversary", config)?)?
        }
        Command::LambdaSweep { common, lambdas, base, adv } => {
            let mut config = adversary_config(&common, common.file_config()?, &base, None, &adv, &["adversary"]);
            set(&mut config, "lambdas", json!(lambdas));
            run(&manifest_for(&common, "lambda-sweep", config)?)?
        }
        Command::InstanceAdversary {
            common,
            epsilon,
            base,
            steps,
            step_size,
        } => {
            let mut config = common.file_config()?;
            set(&mut config, "base", path_value(&base));
            let search = object(&mut config).entry("search").or_insert_with(|| json!({}));
            set(search, "epsilon", Value::from(epsilon));
            if let Some(s) = steps {
                set(search, "steps", Value::from(s));
            }
            if let Some(s) = step_size {
                set(search, "step_size", Value::from(s));
            }
            if let Some(s) = common.seed {
                set(search, "seed", Value::from(s));
            }
            run(&manifest_for(&common, "instance-adversary", config)?)?
        }
        Command::Heatmap {
            corpus,
            checkpoints,
            instance_id,
            instance_adversary,
            output,
        } => {
            let corpus_data = corpus.corpus_ref()?.load()?;
            let instance = corpus_data
                .find(&instance_id)
                .ok_or_else(|| Error::InvalidInput(format!("no instance `{instance_id}` in corpus")))?;
            let mut loaded = Vec::new();
            for spec in &checkpoints {
                let (label, path) = spec
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("checkpoint `{spec}` is not label=path")))?;
                loaded.push((label.to_string(), ModelCheckpoint::load(Path::new(path))?));
            }
            let refs: Vec<(&str, &ModelCheckpoint)> = loaded.iter().map(|(l, c)| (l.as_str(), c)).collect();
            let mut map = emit_heatmap(&refs, &corpus_data.vocab, instance)?;
            if let Some(dir) = instance_adversary {
                let result = ExperimentResult::load(&dir.join(RESULT_FILE))?;
                let pred = result
                    .predictions
                    .iter()
                    .find(|p| p.instance_id == instance_id)
                    .ok_or_else(|| Error::InvalidInput(format!("instance `{instance_id}` not in {}", dir.display())))?;
                let weights = pred.attention.clone().unwrap_or_default();
                map.push_row("per-instance adversary", pred.score, weights)?;
            }
            std::fs::write(&output, map.to_html()).map_err(|e| Error::Config(format!("{}: {e}", output.display())))?;
            if !map.scores_agree() {
                log::warn!("prediction scores differ by {:.6} across rows", map.score_spread());
            }
            return Ok(json!({
                "output": output.display().to_string(),
                "rows": map.rows.len(),
                "score_spread": map.score_spread(),
                "scores_agree": map.scores_agree(),
            }));
        }
        Command::Report { runs, out } => {
            let exp = experiment("report", json!({ "runs": runs }))?;
            run(&RunManifest::new(exp, None, &out)?)?
        }
        Command::Verify { paths } => {
            let mut reports = Vec::new();
            let mut ok = true;
            for p in &paths {
                let rep = verify_results(p)?;
                ok &= rep.passed();
                reports.push(json!({ "path": p.display().to_string(), "report": rep }));
            }
            let out = json!({ "passed": ok, "reports": reports });
            if !ok {
                println!("{}", serde_json::to_string_pretty(&out)?);
                return Err(Error::InvalidInput("verification failed".into()));
            }
            return Ok(out);
        }
        Command::Run { manifest, output_dir } => {
            let mut m = RunManifest::load(&manifest)?;
            if let Some(d) = output_dir {
                m.output_dir = d;
            }
            run(&m)?
        }
        Command::Replay { run_dir, into } => {
            let (outcome, same) = replay(&run_dir, &into)?;
            let out = json!({
                "run_id": outcome.run_id,
                "output_dir": outcome.output_dir.display().to_string(),
                "identical_aggregates": same,
            });
            if !same {
                println!("{}", serde_json::to_string_pretty(&out)?);
                return Err(Error::InvalidInput("replayed aggregates differ".into()));
            }
            return Ok(out);
        }
    };
    Ok(json!({
        "run_id": outcome.run_id,
        "output_dir": outcome.output_dir.display().to_string(),
        "aggregates": outcome.aggregates,
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = json!({ "error": ErrorReport::from(&e) });
            eprintln!("{}", serde_json::to_string(&report).expect("json"));
            match e {
                Error::Config(_) | Error::Json(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
