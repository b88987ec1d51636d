use attnbench::autodiff::{gradient_check, Graph, ParamStore, Tensor, Var};
use attnbench::data::Label;
use attnbench::metrics::{binary_tvd, density_summary, jsd, kl, tvd, DivergenceRecord};
use attnbench::nn::{
    encode, guided_mlp_predict, predict, predict_uniform_frozen, predict_with, AttentionMode, Guide, GuideKind,
    MlpCheckpoint, MlpConfig, ModelCheckpoint, ModelConfig, Variant,
};
use proptest::prelude::*;

const LN2: f64 = std::f64::consts::LN_2;

fn simplex(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..=max_len).prop_map(|raw| {
        let mut v: Vec<f64> = raw.into_iter().map(|x| if x < 0.1 { 0.0 } else { x }).collect();
        if v.iter().all(|&x| x == 0.0) {
            v[0] = 1.0;
        }
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

fn simplex_pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|n| {
        let one = prop::collection::vec(0.0f64..1.0, n).prop_map(|raw| {
            let mut v: Vec<f64> = raw.into_iter().map(|x| if x < 0.1 { 0.0 } else { x }).collect();
            if v.iter().all(|&x| x == 0.0) {
                v[0] = 1.0;
            }
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect::<Vec<f64>>()
        });
        (one.clone(), one)
    })
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn brute_jsd(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..p.len() {
        let m = 0.5 * (p[i] + q[i]);
        total += 0.5 * (xlogy(p[i], p[i] / m) + xlogy(q[i], q[i] / m));
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tvd_and_jsd_symmetric_nonnegative((p, q) in simplex_pair(10)) {
        let a = tvd(&p, &q).unwrap();
        let b = tvd(&q, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-12 && a >= 0.0 && a <= 1.0 + 1e-12);
        let a = jsd(&p, &q).unwrap();
        let b = jsd(&q, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-12 && a >= 0.0);
        prop_assert!(a <= LN2 + 1e-9);
    }

    #[test]
    fn divergences_vanish_on_equal_inputs(p in simplex(10)) {
        prop_assert!(tvd(&p, &p).unwrap().abs() < 1e-9);
        prop_assert!(jsd(&p, &p).unwrap().abs() < 1e-9);
    }

    #[test]
    fn divergences_positive_on_distinct_inputs((p, q) in simplex_pair(10)) {
        let gap: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        prop_assume!(gap > 1e-6);
        prop_assert!(tvd(&p, &q).unwrap() > 0.0);
        prop_assert!(jsd(&p, &q).unwrap() > 0.0);
    }

    #[test]
    fn jsd_matches_brute_force((p, q) in simplex_pair(10)) {
        prop_assert!((jsd(&p, &q).unwrap() - brute_jsd(&p, &q)).abs() < 1e-9);
        let half_l1: f64 = 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
        prop_assert!((tvd(&p, &q).unwrap() - half_l1).abs() < 1e-12);
    }

    #[test]
    fn binary_tvd_is_absolute_difference(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
        prop_assert_eq!(binary_tvd(p, q), (p - q).abs());
        prop_assert!((tvd(&[p, 1.0 - p], &[q, 1.0 - q]).unwrap() - (p - q).abs()).abs() < 1e-12);
    }

    #[test]
    fn kl_nonnegative_on_full_support(raw in prop::collection::vec((0.05f64..1.0, 0.05f64..1.0), 1..10)) {
        let sp: f64 = raw.iter().map(|r| r.0).sum();
        let sq: f64 = raw.iter().map(|r| r.1).sum();
        let p: Vec<f64> = raw.iter().map(|r| r.0 / sp).collect();
        let q: Vec<f64> = raw.iter().map(|r| r.1 / sq).collect();
        let brute: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
        let got = kl(&p, &q).unwrap();
        prop_assert!((got - brute).abs() < 1e-9);
        prop_assert!(got >= -1e-12);
    }

    #[test]
    fn density_conserves_instances(rows in prop::collection::vec((0.0f64..=1.0, 0.0f64..=LN2, any::<bool>()), 0..60), bins in 1usize..12) {
        let records: Vec<DivergenceRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(max_att, j, pos))| DivergenceRecord {
                instance_id: format!("i{i}"),
                tvd: 0.0,
                jsd: j,
                max_attention_base: max_att,
                gold_label: if pos { Label::Positive } else { Label::Negative },
                predicted_base: 0.5,
                predicted_model: 0.5,
            })
            .collect();
        let summary = density_summary(&records, bins).unwrap();
        prop_assert_eq!(summary.instance_count(), records.len());
    }
}

fn random_store(seed: u64, shapes: &[(&str, Vec<usize>)], lo: f64, hi: f64) -> ParamStore {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for (name, shape) in shapes {
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        store.insert(*name, Tensor::new(shape.clone(), values).unwrap()).unwrap();
    }
    store
}

/// Weighted sum of an op's output so every output element carries a distinct gradient.
fn weighted_sum(g: &mut Graph, out: Var, seed: u64) -> attnbench::Result<Var> {
    let n = g.value(out).numel();
    let shape = g.value(out).shape().to_vec();
    let w: Vec<f64> = (0..n).map(|i| 0.3 + ((i as u64 * 7 + seed) % 11) as f64 * 0.17).collect();
    let w = g.constant(Tensor::new(shape, w)?);
    let prod = g.mul(out, w)?;
    g.sum(prod)
}

fn check(f: impl Fn(&mut Graph<'_>) -> attnbench::Result<Var>, store: &ParamStore) {
    let report = gradient_check(f, store, 1e-6, 1e-4).unwrap();
    assert!(report.passed(), "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unary_primitive_gradients(seed in 0u64..1000) {
        let store = random_store(seed, &[("x", vec![2, 3])], -2.0, 2.0);
        let pos = random_store(seed, &[("x", vec![2, 3])], 0.2, 3.0);
        check(|g| { let x = g.param_named("x")?; let y = g.tanh(x)?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let x = g.param_named("x")?; let y = g.sigmoid(x)?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let x = g.param_named("x")?; let y = g.exp(x)?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let x = g.param_named("x")?; let y = g.softplus(x)?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let x = g.param_named("x")?; let y = g.log(x)?; weighted_sum(g, y, seed) }, &pos);
        check(|g| { let x = g.param_named("x")?; let y = g.scale(x, -1.7)?; let y = g.add_scalar(y, 0.4)?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let x = g.param_named("x")?; let y = g.max(x)?; weighted_sum(g, y, seed) }, &store);
    }

    #[test]
    fn binary_primitive_gradients(seed in 0u64..1000) {
        let store = random_store(seed, &[("a", vec![2, 3]), ("b", vec![3, 4]), ("c", vec![2, 3]), ("v", vec![3])], -1.5, 1.5);
        check(|g| { let a = g.param_named("a")?; let b = g.param_named("b")?; let y = g.matmul(a, b)?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let a = g.param_named("a")?; let v = g.param_named("v")?; let y = g.matmul(a, v)?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let v = g.param_named("v")?; let b = g.param_named("b")?; let y = g.matmul(v, b)?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let a = g.param_named("a")?; let c = g.param_named("c")?; let y = g.add(a, c)?; let z = g.mul(y, c)?; let w = g.sub(z, a)?; weighted_sum(g, w, seed) }, &store);
        check(|g| { let a = g.param_named("a")?; let v = g.param_named("v")?; let y = g.add(a, v)?; weighted_sum(g, y, seed) }, &store);
    }

    #[test]
    fn structural_primitive_gradients(seed in 0u64..1000) {
        let store = random_store(seed, &[("t", vec![5, 3]), ("u", vec![4]), ("v", vec![4])], -1.5, 1.5);
        check(|g| { let t = g.param_named("t")?; let y = g.index_select(t, &[4, 0, 4, 2])?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let u = g.param_named("u")?; let v = g.param_named("v")?; let y = g.concat(&[u, v], 0)?; let y = g.tanh(y)?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let u = g.param_named("u")?; let v = g.param_named("v")?; let y = g.stack(&[u, v, u])?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let t = g.param_named("t")?; let y = g.slice(t, 4, 7)?; weighted_sum(g, y, seed) }, &store);
        check(|g| { let u = g.param_named("u")?; let y = g.softmax(u, 0)?; weighted_sum(g, y, seed) }, &store);
    }

    #[test]
    fn softmax_is_a_distribution(values in prop::collection::vec(-50.0f64..50.0, 1..30)) {
        let store = ParamStore::new();
        let mut g = Graph::frozen(&store);
        let x = g.constant(Tensor::vector(values).unwrap());
        let y = g.softmax(x, 0).unwrap();
        let out = g.value(y).values();
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn repeated_backward_gives_identical_gradients(seed in 0u64..1000) {
        let store = random_store(seed, &[("a", vec![3, 2]), ("v", vec![2])], -1.0, 1.0);
        let mut g = Graph::new(&store);
        let a = g.param_named("a").unwrap();
        let v = g.param_named("v").unwrap();
        let y = g.matmul(a, v).unwrap();
        let y = g.tanh(y).unwrap();
        let loss = g.sum(y).unwrap();
        let first = g.backward(loss).unwrap();
        let second = g.backward(loss).unwrap();
        for id in store.ids() {
            prop_assert_eq!(first.param(id).values(), second.param(id).values());
        }
    }
}

fn tokens_strategy(vocab: usize, max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2..vocab, 1..=max_len)
}

fn small_classifier(seed: u64, variant: Variant) -> ModelCheckpoint {
    ModelCheckpoint::init(ModelConfig::new(12, seed).with_dims(4, 3, 3).with_variant(variant)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn classifier_loss_gradient_matches_finite_differences(seed in 0u64..500, tokens in tokens_strategy(12, 5), positive in any::<bool>()) {
        let ckpt = small_classifier(seed, Variant::Base);
        let config = ckpt.config.clone();
        let report = gradient_check(
            |g| {
                let out = attnbench::nn::forward_graph(g, &config, &tokens, AttentionMode::Learned)?;
                let z = if positive { g.scale(out.logit, -1.0)? } else { out.logit };
                g.softplus(z)
            },
            &ckpt.params,
            1e-6,
            1e-4,
        )
        .unwrap();
        prop_assert!(report.passed(), "{:?}", report);
    }

    #[test]
    fn attention_is_on_the_simplex(seed in 0u64..500, tokens in tokens_strategy(12, 20)) {
        let ckpt = small_classifier(seed, Variant::Base);
        let (score, att) = predict(&ckpt, &tokens).unwrap();
        prop_assert_eq!(att.len(), tokens.len());
        prop_assert!((att.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(att.weights().iter().all(|&w| (0.0..=1.0).contains(&w)));
        prop_assert!((0.0..=1.0).contains(&score.value()));
    }

    #[test]
    fn uniform_frozen_equals_uniform_override(seed in 0u64..500, tokens in tokens_strategy(12, 15)) {
        let ckpt = small_classifier(seed, Variant::UniformFrozen);
        let n = tokens.len();
        let uniform = vec![1.0 / n as f64; n];
        let a = predict_uniform_frozen(&ckpt, &tokens).unwrap().value();
        let (b, _) = predict_with(&ckpt, &tokens, AttentionMode::Override(&uniform)).unwrap();
        prop_assert!((a - b.value()).abs() < 1e-12);
    }

    #[test]
    fn prediction_is_deterministic(seed in 0u64..500, tokens in tokens_strategy(12, 15)) {
        let a = predict(&small_classifier(seed, Variant::Base), &tokens).unwrap();
        let b = predict(&small_classifier(seed, Variant::Base), &tokens).unwrap();
        prop_assert_eq!(a.0.value().to_bits(), b.0.value().to_bits());
        prop_assert_eq!(a.1.weights(), b.1.weights());
    }

    #[test]
    fn tied_directions_mirror_under_reversal(seed in 0u64..500, tokens in tokens_strategy(12, 10)) {
        let mut ckpt = small_classifier(seed, Variant::Base);
        for part in ["w_x", "w_h", "b"] {
            let fwd = ckpt.params.by_name(&format!("enc.fwd.{part}")).unwrap().clone();
            *ckpt.params.by_name_mut(&format!("enc.bwd.{part}")).unwrap() = fwd;
        }
        let reversed: Vec<usize> = tokens.iter().rev().copied().collect();
        let a = encode(&ckpt, &tokens).unwrap();
        let b = encode(&ckpt, &reversed).unwrap();
        let n = tokens.len();
        for t in 0..n {
            for (x, y) in a.forward_half(t).iter().zip(b.backward_half(n - 1 - t)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            for (x, y) in a.backward_half(t).iter().zip(b.forward_half(n - 1 - t)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn guided_mlp_is_permutation_covariant(
        seed in 0u64..500,
        (tokens, guide, perm) in (1usize..12).prop_flat_map(|n| (
            prop::collection::vec(2usize..12, n),
            prop::collection::vec(0.01f64..1.0, n),
            Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
        )),
    ) {
        let mut cfg = MlpConfig::new(12, seed, GuideKind::Imposed);
        cfg.d_emb = 5;
        let mlp = MlpCheckpoint::init(cfg, None).unwrap();
        let s: f64 = guide.iter().sum();
        let guide: Vec<f64> = guide.iter().map(|g| g / s).collect();
        let pt: Vec<usize> = perm.iter().map(|&i| tokens[i]).collect();
        let pg: Vec<f64> = perm.iter().map(|&i| guide[i]).collect();
        let a = guided_mlp_predict(&mlp, &tokens, Guide::Imposed(&guide)).unwrap().value();
        let b = guided_mlp_predict(&mlp, &pt, Guide::Imposed(&pg)).unwrap().value();
        prop_assert!((a - b).abs() < 1e-9);
    }
}
