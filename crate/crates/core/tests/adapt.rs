use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uwda_core::adapt::*;
use uwda_core::image::{normalize, NormImage, UnitImage};
use uwda_core::losses::LossWeights;
use uwda_core::nn::{FeatureExtractor, Module};
use uwda_core::pipeline::{enhance_batch, mean_quality, FnImageModel, FnQualityModel, Identity, ImageModel};
use uwda_core::synth::{classify_tone, procedural_scene, ToneClass};
use uwda_core::Error;

const SIDE: usize = 16;

fn images(n: usize, seed: u64) -> Vec<UnitImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| procedural_scene(SIDE, SIDE, &mut rng)).collect()
}

fn tint(img: &UnitImage, rgb: [f64; 3]) -> UnitImage {
    UnitImage::from_fn(SIDE, SIDE, |i, j| {
        let p = img.pixel(i, j);
        [0.3 * p[0] + 0.7 * rgb[0], 0.3 * p[1] + 0.7 * rgb[1], 0.3 * p[2] + 0.7 * rgb[2]]
    })
}

const BLUE: [f64; 3] = [0.05, 0.35, 0.7];
const GREEN: [f64; 3] = [0.1, 0.6, 0.3];

fn synth_pairs(n: usize, seed: u64) -> Vec<TonedPair> {
    images(n, seed)
        .iter()
        .enumerate()
        .map(|(i, clean)| {
            let raw = tint(clean, if i % 2 == 0 { BLUE } else { GREEN });
            TonedPair { tone: classify_tone(&raw), raw: normalize(&raw), reference: normalize(clean) }
        })
        .collect()
}

fn real_set(n: usize, seed: u64, tints: &[[f64; 3]]) -> Vec<TonedImage> {
    images(n, seed)
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let x = tint(img, tints[i % tints.len()]);
            TonedImage { tone: classify_tone(&x), image: normalize(&x) }
        })
        .collect()
}

fn tiny_nets() -> NetConfig {
    NetConfig::with_width(4)
}

fn short(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, decay_epochs: 0, seed: 3, ..TrainConfig::default() }
}

fn no_hook() -> impl FnMut(usize, &AdaptNets) -> uwda_core::Result<()> {
    |_, _| Ok(())
}

#[test]
fn fixture_tints_give_two_tones() {
    let pairs = synth_pairs(8, 0);
    assert_eq!(pairs[0].tone, ToneClass::Blue);
    assert_eq!(pairs[1].tone, ToneClass::Green);
}

#[test]
fn lr_schedule_breakpoints() {
    let cfg = TrainConfig { epochs: 20, decay_epochs: 10, ..TrainConfig::default() };
    assert_eq!(cfg.total_epochs(), 30);
    assert_eq!(cfg.lr_factor(0), 1.0);
    assert_eq!(cfg.lr_factor(19), 1.0);
    assert_eq!(cfg.lr_factor(20), 1.0);
    assert_eq!(cfg.lr_factor(25), 0.5);
    assert_eq!(cfg.lr_factor(29), 0.1);
    assert_eq!(cfg.lr_factor(30), 0.0);
    assert_eq!(cfg.lr_factor(100), 0.0);
    let full = TrainConfig::full_scale();
    assert_eq!((full.epochs, full.decay_epochs), (200, 100));
    assert_eq!(full.lr_factor(250), 0.5);
    assert_eq!((full.lr_gen, full.lr_critic, full.betas, full.batch), (1e-4, 2e-4, (0.5, 0.999), 4));
    let flat = TrainConfig { epochs: 5, decay_epochs: 0, ..TrainConfig::default() };
    assert_eq!(flat.lr_factor(4), 1.0);
    assert_eq!(flat.lr_factor(5), 1.0);
    assert_eq!(flat.lr_factor(6), 0.0);
}

#[test]
fn config_validation() {
    assert!(TrainConfig { lr_gen: -1.0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { batch: 0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { n_critic: 0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { betas: (1.0, 0.9), ..TrainConfig::default() }.validate().is_err());
    TrainConfig::default().validate().unwrap();
}

#[test]
fn easy_count_examples() {
    assert_eq!(easy_count(10, 0.4), 4);
    assert_eq!(easy_count(10, 0.999), 10);
    assert_eq!(easy_count(30, 0.1), 3);
    assert_eq!(easy_count(7, 0.5), 4);
    assert_eq!(easy_count(1, 0.1), 1);
}

#[test]
fn easy_count_matches_integer_ceiling() {
    for n in 1..=50usize {
        for k in 1..=9usize {
            let lambda = k as f64 / 10.0;
            assert_eq!(easy_count(n, lambda), (k * n).div_ceil(10), "n={} lambda={}", n, lambda);
        }
    }
}

#[test]
fn equal_scores_split_by_input_order() {
    let s = split_scores(&[5.0; 10], 0.4).unwrap();
    assert_eq!(s.easy, vec![0, 1, 2, 3]);
    assert_eq!(s.hard, vec![4, 5, 6, 7, 8, 9]);
    assert_eq!(s.threshold, 5.0);
}

#[test]
fn split_rejects_bad_input() {
    assert!(matches!(split_scores(&[], 0.4), Err(Error::EmptyDataset(_))));
    for bad in [0.0, 1.0, -0.2, f64::NAN] {
        assert!(split_scores(&[1.0, 2.0], bad).is_err(), "{}", bad);
    }
    assert!(split_scores(&[1.0, f64::NAN], 0.5).is_err());
}

fn brightness(img: &UnitImage) -> f64 {
    100.0 * img.data().iter().sum::<f64>() / img.data().len() as f64
}

#[test]
fn split_easy_hard_uses_enhanced_outputs() {
    let real: Vec<NormImage> = images(10, 5).iter().map(normalize).collect();
    let scorer = FnQualityModel(brightness);
    let darken = FnImageModel(|x: &NormImage| NormImage::new(x.buf().map(|v| 0.5 * v - 0.5)).unwrap());
    let split = split_easy_hard(&real, &scorer, &darken, 0.4).unwrap();
    assert_eq!((split.easy.len(), split.hard.len()), (4, 6));
    assert_eq!(split.lambda, 0.4);
    let enhanced = darken.enhance(&real).unwrap();
    for e in &split.easy {
        assert_eq!(e.pseudo, enhanced[e.index]);
        assert_eq!(e.raw, real[e.index]);
        assert!(e.score >= split.threshold);
    }
    for h in &split.hard {
        assert!(h.score <= split.threshold);
    }
    assert_eq!(split.easy.last().unwrap().score, split.threshold);
    assert!(matches!(split_easy_hard(&[], &scorer, &Identity, 0.4), Err(Error::EmptyDataset(_))));
}

proptest! {
    #[test]
    fn split_partition_properties(scores in prop::collection::vec(0.0..100.0f64, 1..60), l1 in 0.01..0.99f64, l2 in 0.01..0.99f64) {
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let a = split_scores(&scores, lo).unwrap();
        let b = split_scores(&scores, hi).unwrap();
        for s in [&a, &b] {
            let mut all: Vec<usize> = s.easy.iter().chain(&s.hard).copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..scores.len()).collect::<Vec<_>>());
            let min_easy = s.easy.iter().map(|&i| scores[i]).fold(f64::INFINITY, f64::min);
            let max_hard = s.hard.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min_easy >= s.threshold && s.threshold >= max_hard);
        }
        prop_assert_eq!(a.easy.len(), easy_count(scores.len(), lo));
        // growing lambda never demotes an easy sample
        prop_assert!(a.easy.iter().all(|i| b.easy.contains(i)));
    }

    #[test]
    fn ties_keep_input_order(n in 1..40usize, lambda in 0.01..0.99f64) {
        let s = split_scores(&vec![1.0; n], lambda).unwrap();
        prop_assert_eq!(s.easy, (0..easy_count(n, lambda)).collect::<Vec<_>>());
    }
}

#[test]
fn tone_batches_are_single_tone_and_cover_the_source() {
    let src = [ToneClass::Blue, ToneClass::Green, ToneClass::Blue, ToneClass::Blue, ToneClass::Green, ToneClass::BlueGreen];
    let tgt = [ToneClass::Green, ToneClass::Blue, ToneClass::Blue];
    let (shared, excluded) = shared_tones(&src, &tgt);
    assert_eq!(shared, vec![ToneClass::Blue, ToneClass::Green]);
    assert_eq!(excluded, vec![ToneClass::BlueGreen]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let batches = tone_batches(&src, &tgt, &shared, 2, &mut rng);
        let mut seen: Vec<usize> = Vec::new();
        for b in &batches {
            let t = b.tone.unwrap();
            assert_eq!(b.source.len(), b.target.len());
            assert!(b.source.iter().all(|&i| src[i] == t));
            assert!(b.target.iter().all(|&i| tgt[i] == t));
            seen.extend(&b.source);
        }
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }
}

#[test]
fn inter_smoke_run_logs_finite_components() {
    let synth = synth_pairs(16, 1);
    let real = real_set(16, 2, &[BLUE, GREEN]);
    let mut nets = AdaptNets::new(&tiny_nets());
    let phi = FeatureExtractor::default();
    let mut epochs_seen = Vec::new();
    let log = train_inter(&synth, &real, &mut nets, &phi, &LossWeights::default(), &short(2), &mut |e, _| {
        epochs_seen.push(e);
        Ok(())
    })
    .unwrap();
    assert_eq!(epochs_seen, vec![0, 1]);
    assert_eq!(log.steps.len(), 2 * 4);
    assert!(log.all_finite());
    assert!(log.steps.iter().all(|s| s.tone.is_some_and(|t| !log.excluded.contains(&t))));
}

#[test]
fn inter_is_deterministic() {
    let synth = synth_pairs(8, 1);
    let real = real_set(8, 2, &[BLUE, GREEN]);
    let phi = FeatureExtractor::default();
    let run = || {
        let mut nets = AdaptNets::new(&tiny_nets());
        let log = train_inter(&synth, &real, &mut nets, &phi, &LossWeights::default(), &short(2), &mut no_hook()).unwrap();
        (log, nets.enhancer.params().clone())
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert!(pa.bit_eq(&pb));
}

#[test]
fn zero_learning_rates_are_a_no_op() {
    let synth = synth_pairs(8, 1);
    let real = real_set(8, 2, &[BLUE, GREEN]);
    let phi = FeatureExtractor::default();
    let before = AdaptNets::new(&tiny_nets());
    let mut nets = before.clone();
    let cfg = TrainConfig { lr_gen: 0.0, lr_critic: 0.0, ..short(1) };
    train_inter(&synth, &real, &mut nets, &phi, &LossWeights::default(), &cfg, &mut no_hook()).unwrap();
    for (a, b) in before.param_sets().iter().zip(nets.param_sets()) {
        assert!(a.bit_eq(b));
    }
}

#[test]
fn optimizers_only_touch_their_own_networks() {
    let synth = synth_pairs(8, 1);
    let real = real_set(8, 2, &[BLUE, GREEN]);
    let phi = FeatureExtractor::default();
    let before = AdaptNets::new(&tiny_nets());
    let w = LossWeights::default();

    let mut nets = before.clone();
    train_inter(&synth, &real, &mut nets, &phi, &w, &TrainConfig { lr_critic: 0.0, ..short(1) }, &mut no_hook()).unwrap();
    let [t0, e0, ci0, cf0] = before.param_sets();
    let [t1, e1, ci1, cf1] = nets.param_sets();
    assert!(!t0.bit_eq(t1) && !e0.bit_eq(e1));
    assert!(ci0.bit_eq(ci1) && cf0.bit_eq(cf1));

    let mut nets = before.clone();
    train_inter(&synth, &real, &mut nets, &phi, &w, &TrainConfig { lr_gen: 0.0, ..short(1) }, &mut no_hook()).unwrap();
    let [t1, e1, ci1, cf1] = nets.param_sets();
    assert!(t0.bit_eq(t1) && e0.bit_eq(e1));
    assert!(!ci0.bit_eq(ci1) && !cf0.bit_eq(cf1));
}

#[test]
fn one_sided_tone_is_excluded() {
    let synth = synth_pairs(8, 1);
    let real = real_set(6, 2, &[BLUE]);
    let phi = FeatureExtractor::default();
    let mut nets = AdaptNets::new(&tiny_nets());
    let log = train_inter(&synth, &real, &mut nets, &phi, &LossWeights::default(), &short(1), &mut no_hook()).unwrap();
    assert_eq!(log.excluded, vec![ToneClass::Green]);
    assert!(log.steps.iter().all(|s| s.tone == Some(ToneClass::Blue)));

    let green_only = real_set(4, 2, &[GREEN]);
    let blue_pairs: Vec<TonedPair> = synth.into_iter().filter(|p| p.tone == ToneClass::Blue).collect();
    let err = train_inter(&blue_pairs, &green_only, &mut nets, &phi, &LossWeights::default(), &short(1), &mut no_hook());
    assert!(matches!(err, Err(Error::EmptyDataset(_))));
    assert!(matches!(
        train_inter(&[], &green_only, &mut nets, &phi, &LossWeights::default(), &short(1), &mut no_hook()),
        Err(Error::EmptyDataset(_))
    ));
}

fn windowed_means(v: &[f64], w: usize) -> Vec<f64> {
    v.chunks(w).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

#[test]
fn overfit_probe_drives_task_loss_down() {
    let synth = synth_pairs(4, 9);
    let real = real_set(4, 10, &[BLUE, GREEN]);
    let phi = FeatureExtractor::default();
    let mut nets = AdaptNets::new(&NetConfig::with_width(8));
    let w = LossWeights { lambda1: 0.0, lambda4: 0.0, ..LossWeights::default() };
    let cfg = TrainConfig { lr_gen: 3e-3, epochs: 200, decay_epochs: 200, ..short(0) };
    let log = train_inter(&synth, &real, &mut nets, &phi, &w, &cfg, &mut no_hook()).unwrap();
    let task = log.task();
    let windows = windowed_means(&task, 40);
    assert!(windows.windows(2).all(|p| p[1] < p[0]), "{:?}", windows);
    assert!(*task.last().unwrap() < 0.1 * task[0], "{} -> {}", task[0], task.last().unwrap());
}

fn stub_split(n: usize, lambda: f64) -> SplitResult {
    let real: Vec<NormImage> = images(n, 21).iter().map(normalize).collect();
    split_easy_hard(&real, &FnQualityModel(brightness), &Identity, lambda).unwrap()
}

#[test]
fn intra_warm_start_copies_the_inter_enhancer() {
    let inter = AdaptNets::new(&tiny_nets()).enhancer;
    let mut other = tiny_nets();
    other.enhancer.seed = 99;
    let split = stub_split(8, 0.5);
    let phi = FeatureExtractor::default();
    let x = uwda_core::image::to_tensor(&[&split.easy[0].raw]).unwrap();

    let (nets, log) =
        train_intra(&split, &inter, &other, &phi, &LossWeights::default(), &short(0), &mut no_hook()).unwrap();
    assert!(log.steps.is_empty());
    let (a, fa) = nets.enhancer.eval(&x).unwrap();
    let (b, fb) = inter.eval(&x).unwrap();
    assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    assert!(fa.data().iter().zip(fb.data()).all(|(p, q)| p.to_bits() == q.to_bits()));

    let cold = TrainConfig { warm_start: false, ..short(0) };
    let (nets, _) = train_intra(&split, &inter, &other, &phi, &LossWeights::default(), &cold, &mut no_hook()).unwrap();
    assert!(!nets.enhancer.params().bit_eq(inter.params()));
}

#[test]
fn intra_smoke_and_no_op() {
    let inter = AdaptNets::new(&tiny_nets()).enhancer;
    let split = stub_split(8, 0.5);
    let phi = FeatureExtractor::default();
    let (_, log) = train_intra(&split, &inter, &tiny_nets(), &phi, &LossWeights::default(), &short(2), &mut no_hook()).unwrap();
    assert_eq!(log.steps.len(), 2);
    assert!(log.all_finite());
    assert!(log.steps.iter().all(|s| s.tone.is_none()));

    let frozen = TrainConfig { lr_gen: 0.0, lr_critic: 0.0, ..short(1) };
    let (nets, _) = train_intra(&split, &inter, &tiny_nets(), &phi, &LossWeights::default(), &frozen, &mut no_hook()).unwrap();
    let fresh = AdaptNets::for_intra(&tiny_nets(), &inter, true).unwrap();
    for (a, b) in fresh.param_sets().iter().zip(nets.param_sets()) {
        assert!(a.bit_eq(b));
    }
}

#[test]
fn intra_rejects_empty_sides() {
    let inter = AdaptNets::new(&tiny_nets()).enhancer;
    let phi = FeatureExtractor::default();
    let split = stub_split(10, 0.999);
    assert!(split.hard.is_empty());
    let err = train_intra(&split, &inter, &tiny_nets(), &phi, &LossWeights::default(), &short(1), &mut no_hook()).unwrap_err();
    assert!(matches!(err, Error::EmptySplit { side: "hard", .. }));
    assert!(err.to_string().contains("0.999"), "{}", err);
}

#[test]
fn baseline_trains_and_respects_zero_lr() {
    let synth = synth_pairs(8, 1);
    let phi = FeatureExtractor::default();
    let mut e = AdaptNets::new(&tiny_nets()).enhancer;
    let before = e.params().clone();
    let cfg = TrainConfig { lr_gen: 0.0, ..short(1) };
    let h = train_baseline(&synth, &mut e, &phi, &LossWeights::default(), &cfg).unwrap();
    assert_eq!(h.len(), 2);
    assert!(e.params().bit_eq(&before));
    let h = train_baseline(&synth, &mut e, &phi, &LossWeights::default(), &TrainConfig { lr_gen: 1e-3, ..short(5) }).unwrap();
    assert!(h.iter().all(|v| v.is_finite()));
    assert!(h[h.len() - 1] < h[0]);
}

fn sweep_fixture() -> (Vec<NormImage>, Vec<NormImage>, uwda_core::nn::Enhancer) {
    let train: Vec<NormImage> = images(8, 31).iter().map(normalize).collect();
    let heldout: Vec<NormImage> = images(4, 32).iter().map(normalize).collect();
    (train, heldout, AdaptNets::new(&tiny_nets()).enhancer)
}

#[test]
fn degenerate_sweep_equals_single_run() {
    let (train, heldout, inter) = sweep_fixture();
    let phi = FeatureExtractor::default();
    let scorer = FnQualityModel(brightness);
    let setup = SweepSetup {
        train_real: &train,
        heldout: &heldout,
        inter: &inter,
        scorer: &scorer,
        phi: &phi,
        nets: tiny_nets(),
        weights: LossWeights::default(),
        train: short(1),
    };
    let rows = sweep_lambda(&[0.4], &setup);
    assert_eq!(rows.len(), 1);

    let split = split_easy_hard(&train, &scorer, &inter, 0.4).unwrap();
    let (intra, _) =
        train_intra(&split, &inter, &tiny_nets(), &phi, &LossWeights::default(), &short(1), &mut no_hook()).unwrap();
    let routed = enhance_batch(&heldout, &inter, Some(&intra.enhancer), &scorer, split.threshold).unwrap();
    let outs: Vec<UnitImage> = routed.into_iter().map(|r| r.image).collect();
    let mean = mean_quality(&scorer, &outs).unwrap();
    assert_eq!(rows[0].mean_ruiqa, Some(mean));
    assert_eq!(rows[0].threshold, Some(split.threshold));
}

#[test]
fn sweep_continues_past_failing_cells() {
    let (train, heldout, inter) = sweep_fixture();
    let phi = FeatureExtractor::default();
    let scorer = FnQualityModel(brightness);
    let setup = SweepSetup {
        train_real: &train,
        heldout: &heldout,
        inter: &inter,
        scorer: &scorer,
        phi: &phi,
        nets: tiny_nets(),
        weights: LossWeights::default(),
        train: short(1),
    };
    let rows = sweep_lambda(&[0.4, 1.5, 0.999, 0.6], &setup);
    assert_eq!(rows.len(), 4);
    assert!(rows[0].mean_ruiqa.unwrap().is_finite());
    assert!(rows[1].error.is_some() && rows[1].mean_ruiqa.is_none());
    assert!(rows[2].error.as_deref().unwrap().contains("hard"));
    assert!(rows[3].mean_ruiqa.unwrap().is_finite());
}
