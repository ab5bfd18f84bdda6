use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwda_core::nn::*;
use uwda_core::{Error, Graph, Tensor};

fn random_batch(seed: u64, shape: [usize; 4]) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
}

fn small_translator(seed: u64) -> Translator {
    Translator::new(TranslatorConfig { width: 8, growth: 4, seed })
}

fn small_enhancer(seed: u64) -> Enhancer {
    Enhancer::new(EnhancerConfig { width: 8, growth: 4, seed })
}

#[test]
fn translator_and_enhancer_preserve_shape() {
    let t = small_translator(0);
    let e = small_enhancer(0);
    for side in [32, 64, 128, 256] {
        let x = random_batch(side as u64, [1, 3, side, side]);
        let y = t.eval(&x).unwrap();
        assert_eq!(y.shape(), x.shape());
        assert!(y.max_abs() <= 1.0);
        let (z, f) = e.eval(&x).unwrap();
        assert_eq!(z.shape(), x.shape());
        assert!(z.max_abs() <= 1.0);
        assert_eq!(f.shape(), e.encoder_shape(1, side, side));
    }
}

#[test]
fn non_square_inputs_keep_their_shape() {
    let x = random_batch(3, [2, 3, 24, 40]);
    assert_eq!(small_translator(1).eval(&x).unwrap().shape(), [2, 3, 24, 40]);
    assert_eq!(small_enhancer(1).eval(&x).unwrap().0.shape(), [2, 3, 24, 40]);
}

#[test]
fn forward_passes_are_finite_across_seeds() {
    for seed in 0..100u64 {
        let x = random_batch(1000 + seed, [1, 3, 16, 16]);
        assert!(small_translator(seed).eval(&x).unwrap().all_finite(), "translator seed {}", seed);
        let (y, f) = small_enhancer(seed).eval(&x).unwrap();
        assert!(y.all_finite() && f.all_finite(), "enhancer seed {}", seed);
        let c = PatchCritic::new(CriticConfig::image(8, seed));
        assert!(c.eval(&x).unwrap().all_finite(), "critic seed {}", seed);
        let b = RankBackbone::new(BackboneConfig { width: 4, seed });
        assert!(b.eval(&x).unwrap().iter().all(|v| v.is_finite()), "backbone seed {}", seed);
    }
}

#[test]
fn eval_is_deterministic() {
    let x = random_batch(9, [2, 3, 32, 32]);
    let t = small_translator(5);
    let a = t.eval(&x).unwrap();
    let b = small_translator(5).eval(&x).unwrap();
    assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn too_small_inputs_are_rejected() {
    let x = random_batch(0, [1, 3, 4, 4]);
    assert!(matches!(small_translator(0).eval(&x), Err(Error::ShapeMismatch(_))));
    let x = random_batch(0, [1, 3, 18, 18]);
    assert!(matches!(small_enhancer(0).eval(&x), Err(Error::ShapeMismatch(_))));
}

#[test]
fn every_enhancer_group_receives_gradient() {
    let e = small_enhancer(3);
    let x = random_batch(4, [2, 3, 16, 16]);
    let mut g = Graph::new();
    let p = e.params().bind(&mut g, true);
    let xv = g.constant(x);
    let (y, _) = e.forward(&mut g, &p, xv).unwrap();
    let sq = g.square(y);
    let loss = g.sum(sq);
    let grads = g.grad_values(loss, &p);
    for group in e.groups() {
        let norm: f64 = e
            .params()
            .names()
            .iter()
            .zip(&grads)
            .filter(|(n, _)| n.split('.').next() == Some(group))
            .map(|(_, t)| t.data().iter().map(|v| v * v).sum::<f64>())
            .sum();
        assert!(norm > 0.0, "group {} has zero gradient", group);
    }
}

#[test]
fn critic_map_sizes_follow_stride_plan() {
    let cfg = CriticConfig::image(4, 0);
    assert_eq!(cfg.map_side(256), 32);
    assert_eq!(cfg.map_side(64), 8);
    assert_eq!(cfg.receptive_field(), 38);
    let c = PatchCritic::new(cfg);
    let m = c.eval(&random_batch(1, [1, 3, 256, 256])).unwrap();
    assert_eq!(m.shape(), [1, 1, 32, 32]);

    let fc = PatchCritic::new(CriticConfig::feature(32, 8, 0));
    let m = fc.eval(&random_batch(1, [2, 32, 16, 16])).unwrap();
    assert_eq!(m.shape(), [2, 1, 8, 8]);
}

#[test]
fn critic_rejects_wrong_variant() {
    let fc = PatchCritic::new(CriticConfig::feature(32, 8, 0));
    let err = fc.eval(&random_batch(1, [1, 3, 64, 64])).unwrap_err();
    assert!(matches!(err, Error::WrongCriticVariant { .. }));
    let ic = PatchCritic::new(CriticConfig::image(8, 0));
    assert!(matches!(ic.eval(&random_batch(1, [1, 32, 16, 16])), Err(Error::WrongCriticVariant { .. })));
}

#[test]
fn scaling_final_critic_layer_scales_output() {
    let mut c = PatchCritic::new(CriticConfig::image(8, 2));
    let x = random_batch(5, [2, 3, 32, 32]);
    let before = c.eval(&x).unwrap();
    let i = c.final_weight_index();
    for v in c.params_mut().tensors_mut()[i].data_mut() {
        *v *= 2.0;
    }
    let after = c.eval(&x).unwrap();
    for (a, b) in before.data().iter().zip(after.data()) {
        assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn mean_score_is_mean_of_patch_map() {
    let c = PatchCritic::new(CriticConfig::image(8, 3));
    let x = random_batch(6, [3, 3, 32, 32]);
    let map = c.eval(&x).unwrap();
    let mut g = Graph::new();
    let p = Critic::params(&c).bind(&mut g, false);
    let xv = g.constant(x);
    let s = c.mean_score(&mut g, &p, xv).unwrap();
    assert!((g.value(s).item() - map.mean()).abs() < 1e-12);
    let per = c.sample_scores(&mut g, &p, xv).unwrap();
    let [_, _, h, w] = map.shape();
    for n in 0..3 {
        let direct: f64 = map.data()[n * h * w..(n + 1) * h * w].iter().sum::<f64>() / (h * w) as f64;
        assert!((g.value(per).data()[n] - direct).abs() < 1e-12);
    }
}

#[test]
fn feature_taps_halve_and_are_deterministic() {
    let f = FeatureExtractor::default();
    let x = random_batch(7, [1, 3, 64, 64]);
    let taps = f.extract(&x).unwrap();
    assert_eq!(taps.len(), 5);
    for (k, t) in taps.iter().enumerate() {
        assert_eq!(t.shape()[2], 64 >> k);
        assert_eq!(t.shape()[3], 64 >> k);
    }
    assert_eq!(taps, f.extract(&x).unwrap());
    let other = f.extract(&random_batch(8, [1, 3, 64, 64])).unwrap();
    assert!(taps.iter().zip(&other).any(|(a, b)| a != b));
    assert_eq!(TAP_WEIGHTS, [1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0]);
}

#[test]
fn feature_weights_can_be_replaced() {
    let mut f = FeatureExtractor::default();
    let other = FeatureExtractor::new(FeatureExtractorConfig { seed: 99, ..Default::default() });
    f.load_weights(other.params()).unwrap();
    assert!(f.params().bit_eq(other.params()));
    let bad = FeatureExtractor::new(FeatureExtractorConfig { widths: [4, 4, 4, 4, 4], seed: 1 });
    assert!(f.load_weights(bad.params()).is_err());
}

#[test]
fn backbone_siamese_matches_single_calls() {
    let b = RankBackbone::new(BackboneConfig { width: 4, seed: 11 });
    let xa = random_batch(1, [1, 3, 32, 32]);
    let xb = random_batch(2, [1, 3, 32, 32]);
    let sa = b.eval(&xa).unwrap()[0];
    let sb = b.eval(&xb).unwrap()[0];
    let mut g = Graph::new();
    let p = b.params().bind(&mut g, false);
    let a = g.constant(xa.clone());
    let bb = g.constant(xb);
    let (pa, pb) = b.forward_pair(&mut g, &p, a, bb).unwrap();
    assert_eq!(g.value(pa).item().to_bits(), sa.to_bits());
    assert_eq!(g.value(pb).item().to_bits(), sb.to_bits());
    assert_eq!(b.eval(&xa).unwrap()[0].to_bits(), sa.to_bits());

    let taps = b.eval_taps(&xa).unwrap();
    let sides: Vec<usize> = taps.iter().map(|t| t.shape()[2]).collect();
    assert_eq!(sides, vec![16, 8, 4, 2]);
}

#[test]
fn scorer_head_parameters_all_matter() {
    let b = RankBackbone::new(BackboneConfig { width: 4, seed: 12 });
    let s = Scorer::from_backbone(&b, 4, 13);
    let x = random_batch(3, [2, 3, 32, 32]);
    let mut g = Graph::new();
    let p = s.params().bind(&mut g, true);
    let xv = g.constant(x);
    let y = s.forward(&mut g, &p, xv).unwrap();
    let total = g.sum(y);
    let grads = g.grad_values(total, &p);
    for (name, gr) in s.params().names().iter().zip(&grads) {
        if name.starts_with("head.") {
            assert!(gr.max_abs() > 0.0, "{} has no effect on the score", name);
        }
    }
    // trunk tensors are copied from the backbone
    let n = s.params().names().iter().filter(|n| !n.starts_with("head.")).count();
    assert_eq!(&s.params().tensors()[..n], &b.params().tensors()[..n]);
}
