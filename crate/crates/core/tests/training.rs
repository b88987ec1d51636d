use std::sync::OnceLock;

use attnbench::autodiff::Graph;
use attnbench::data::{generate_synthetic, Corpus, Split, SyntheticSpec};
use attnbench::metrics::{f1_positive, mean_divergence, DEFAULT_THRESHOLD};
use attnbench::nn::{predict, ModelCheckpoint};
use attnbench::train::{
    adversary_loss, compare_predictions, evaluate, extract_guides, lambda_sweep, per_instance_adversary, seed_sweep,
    train_adversary, train_base, train_guided_mlp, AdversaryConfig, GuideSource, GuidedMlpConfig,
    PerInstanceSearchConfig, TrainConfig,
};

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        d_emb: 16,
        d_hid: 16,
        d_attn: 16,
        epochs,
        batch_size: 32,
        learning_rate: 1e-2,
        seed: 1,
    }
}

fn sentiment() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| generate_synthetic(&SyntheticSpec::sentiment(1)).unwrap())
}

fn sentiment_base() -> &'static ModelCheckpoint {
    static BASE: OnceLock<ModelCheckpoint> = OnceLock::new();
    BASE.get_or_init(|| train_base(sentiment(), &small_config(8)).unwrap().checkpoint)
}

#[test]
fn separable_corpus_is_learned_within_five_epochs() {
    let corpus = generate_synthetic(&SyntheticSpec::detection(3)).unwrap();
    let model = train_base(&corpus, &small_config(5)).unwrap();
    let train = corpus.split(Split::Train);
    let preds = evaluate(&model.checkpoint, train).unwrap();
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let gold: Vec<_> = train.iter().map(|i| i.label).collect();
    let f1 = f1_positive(&scores, &gold, DEFAULT_THRESHOLD).unwrap();
    assert!(f1.value > 0.95, "train F1 {}", f1.value);
}

#[test]
fn identical_runs_have_zero_divergence() {
    let corpus = sentiment();
    let config = TrainConfig { epochs: 1, ..small_config(1) };
    let a = train_base(corpus, &config).unwrap();
    let b = train_base(corpus, &config).unwrap();
    assert_eq!(a.checkpoint.fingerprint(), b.checkpoint.fingerprint());
    let test = corpus.split(Split::Test);
    let records = compare_predictions(&evaluate(&a.checkpoint, test).unwrap(), &evaluate(&b.checkpoint, test).unwrap()).unwrap();
    assert!(records.iter().all(|r| r.jsd == 0.0 && r.tvd == 0.0));
}

#[test]
fn lambda_zero_loss_is_mean_tvd() {
    let base = sentiment_base();
    let mut config = base.config.clone();
    config.seed = 99;
    let adversary = ModelCheckpoint::init(config).unwrap();
    let batch = &sentiment().split(Split::Train)[..16];
    let mut g = Graph::frozen(&adversary.params);
    let mut total = 0.0;
    let mut expected = 0.0;
    for inst in batch {
        let (bs, ba) = predict(base, &inst.tokens).unwrap();
        let loss = adversary_loss(&mut g, &adversary.config, &inst.tokens, bs.value(), ba.weights(), 0.0).unwrap();
        total += g.scalar(loss);
        let (s, _) = predict(&adversary, &inst.tokens).unwrap();
        expected += (s.value() - bs.value()).abs();
    }
    let n = batch.len() as f64;
    assert!((total / n - expected / n).abs() < 1e-12);
}

#[test]
fn imitation_diverges_less_than_reseeding() {
    let corpus = sentiment();
    let sweep = seed_sweep(corpus, &small_config(8), &[1, 2, 3, 4]).unwrap();
    assert_eq!(sweep.checkpoints[0].fingerprint(), sentiment_base().fingerprint());
    let config = AdversaryConfig::new(0.0, "base", small_config(20));
    let run = train_adversary(corpus, sentiment_base(), &config).unwrap();
    let adv_jsd = run.result.mean_jsd.unwrap();
    eprintln!("lambda=0 adversary JSD {adv_jsd:.4}, seed-sweep JSD {:.4}", sweep.mean_marker.mean_jsd);
    assert!(adv_jsd < sweep.mean_marker.mean_jsd);
}

#[test]
fn lambda_sweep_endpoints_ordered_and_records_consistent() {
    let corpus = sentiment();
    let template = AdversaryConfig::new(0.0, "base", small_config(8));
    let sweep = lambda_sweep(corpus, sentiment_base(), &[0.0, 1.0], &template).unwrap();
    assert!(sweep.curve[1].mean_jsd > sweep.curve[0].mean_jsd, "{:?}", sweep.curve);
    for run in &sweep.runs {
        let (tvd, jsd) = mean_divergence(&run.result.records).unwrap();
        assert!((run.result.mean_tvd.unwrap() - tvd).abs() < 1e-9);
        assert!((run.result.mean_jsd.unwrap() - jsd).abs() < 1e-9);
    }
    assert_eq!(sweep.class_curves.len(), 4);
}

#[test]
fn single_lambda_sweep_matches_direct_run() {
    let corpus = sentiment();
    let config = AdversaryConfig::new(0.01, "base", small_config(2));
    let sweep = lambda_sweep(corpus, sentiment_base(), &[0.01], &config).unwrap();
    let direct = train_adversary(corpus, sentiment_base(), &config).unwrap();
    assert_eq!(sweep.curve.len(), 1);
    assert_eq!(sweep.runs[0].checkpoint.fingerprint(), direct.checkpoint.fingerprint());
    assert_eq!(sweep.curve[0].mean_jsd, direct.result.mean_jsd.unwrap());
}

#[test]
fn adversary_rejects_non_base_parent_and_negative_lambda() {
    let corpus = sentiment();
    let bad = AdversaryConfig::new(-0.1, "base", small_config(1));
    assert!(train_adversary(corpus, sentiment_base(), &bad).is_err());
    let adv = train_adversary(corpus, sentiment_base(), &AdversaryConfig::new(0.0, "base", small_config(1))).unwrap();
    assert!(train_adversary(corpus, &adv.checkpoint, &AdversaryConfig::new(0.0, "adv", small_config(1))).is_err());
}

#[test]
fn unconstrained_search_nears_the_bound_without_touching_parameters() {
    let base = sentiment_base();
    let before = base.fingerprint();
    let config = PerInstanceSearchConfig {
        epsilon: 0.99,
        ..Default::default()
    };
    let run = per_instance_adversary(base, sentiment(), &config).unwrap();
    assert_eq!(base.fingerprint(), before);
    let multi: Vec<f64> = run
        .result
        .records
        .iter()
        .zip(sentiment().split(Split::Test))
        .filter(|(_, inst)| inst.tokens.len() > 1)
        .map(|(r, _)| r.jsd)
        .collect();
    let mean = multi.iter().sum::<f64>() / multi.len() as f64;
    eprintln!("unconstrained per-instance JSD {mean:.4}");
    assert!(mean > 0.6);
    assert!(run.result.records.iter().all(|r| r.tvd <= 0.99));
}

#[test]
fn guides_cover_every_instance_and_are_deterministic() {
    let corpus = sentiment();
    let a = extract_guides(sentiment_base(), corpus).unwrap();
    let b = extract_guides(&sentiment_base().clone(), corpus).unwrap();
    assert_eq!(a.len(), corpus.len());
    assert_eq!(a, b);
    for (_, inst) in corpus.instances() {
        let w = a.get(&inst.id).unwrap().weights();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn base_guides_do_not_hurt_the_mlp() {
    let corpus = sentiment();
    let guides = extract_guides(sentiment_base(), corpus).unwrap();
    let config = GuidedMlpConfig::new(small_config(8));
    let guided = train_guided_mlp(corpus, GuideSource::Set(&guides), &config, None).unwrap();
    let uniform = train_guided_mlp(corpus, GuideSource::Uniform, &config, None).unwrap();
    eprintln!("mlp F1: base-guided {:.4}, uniform {:.4}", guided.result.test_f1, uniform.result.test_f1);
    assert!(guided.result.test_f1 >= uniform.result.test_f1 - 0.01);
}
