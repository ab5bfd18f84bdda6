//! Rank-based quality assessment: pair construction, Siamese margin-ranking
//! pretraining, multi-scale fine-tuning against MOS and score prediction.
//!
//! Also holds the desk-scale MOS fixture (graded degradations scored by
//! simulated raters) and the classification pretraining used as the
//! "unrelated task" baseline.

use alloc::format;
use alloc::vec::Vec;

use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::image::{normalize, to_tensor, NormImage, UnitImage};
use crate::metrics::{aggregate_mos, MosRecord};
use crate::nn::{Adam, BackboneConfig, Module, ParamBuilder, ParamSet, RankBackbone, Scorer};
use crate::synth::{procedural_scene, WaterTable, WaterType};
use crate::tensor::Tensor;

/// Indices into the record/image list; `label` is `+1` when `a` has the higher MOS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankPair {
    pub a: usize,
    pub b: usize,
    pub label: i8,
}

/// Predicted quality on the MOS scale, clamped to `[1, 100]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct QualityScore(f64);

impl QualityScore {
    pub const MIN: f64 = 1.0;
    pub const MAX: f64 = 100.0;

    pub fn new(raw: f64) -> Self {
        // NaN maps to the floor rather than propagating
        Self(if raw.is_nan() { Self::MIN } else { raw.clamp(Self::MIN, Self::MAX) })
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Samples up to `per_image_pairs` partners for every record. Pairs are
/// unordered and never repeated; `a` is the lower record index. Tied MOS
/// values are never paired.
pub fn make_rank_pairs(records: &[MosRecord], per_image_pairs: usize, seed: u64) -> Result<Vec<RankPair>> {
    let groups = alloc::vec![0; records.len()];
    make_rank_pairs_grouped(records, &groups, per_image_pairs, seed)
}

/// [`make_rank_pairs`] restricted to partners with the same group id (for
/// example, renditions of the same scene).
pub fn make_rank_pairs_grouped(records: &[MosRecord], groups: &[usize], per_image_pairs: usize, seed: u64) -> Result<Vec<RankPair>> {
    if records.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 MOS records, got {}", records.len())));
    }
    if groups.len() != records.len() {
        return Err(Error::ShapeMismatch(format!("{} group ids for {} records", groups.len(), records.len())));
    }
    let mos: Vec<f64> = records.iter().map(|r| r.mos).collect();
    if mos.iter().all(|m| *m == mos[0]) {
        return Err(Error::InvalidArgument("all MOS values are equal; no rank pair exists".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = alloc::collections::BTreeSet::new();
    let mut pairs = Vec::new();
    for i in 0..records.len() {
        let mut cand: Vec<usize> =
            (0..records.len()).filter(|&j| j != i && groups[j] == groups[i] && mos[j] != mos[i]).collect();
        cand.shuffle(&mut rng);
        let mut taken = 0;
        for j in cand {
            if taken == per_image_pairs {
                break;
            }
            let (a, b) = (i.min(j), i.max(j));
            if used.insert((a, b)) {
                let label = if mos[a] > mos[b] { 1 } else { -1 };
                pairs.push(RankPair { a, b, label });
                taken += 1;
            }
        }
    }
    Ok(pairs)
}

/// `max(0, -label (score_a - score_b) + margin)`.
pub fn margin_rank_loss(score_a: f64, score_b: f64, label: f64, margin: f64) -> f64 {
    (-label * (score_a - score_b) + margin).max(0.0)
}

/// Batch mean of [`margin_rank_loss`] on the tape. `labels` holds one `±1` per sample.
pub fn margin_rank_loss_var(g: &mut Graph, sa: Var, sb: Var, labels: &[f64], margin: f64) -> Result<Var> {
    let shape = g.shape(sa);
    if shape != g.shape(sb) || shape[0] != labels.len() {
        return Err(Error::ShapeMismatch(format!("scores {:?} / {:?} with {} labels", shape, g.shape(sb), labels.len())));
    }
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be >= 0, got {}", margin)));
    }
    let d = g.sub(sa, sb);
    let neg = Tensor::from_vec(shape, labels.iter().map(|l| -l).collect());
    let h = g.mul_const(d, neg);
    let h = g.add_const(h, margin);
    let h = g.relu(h);
    Ok(g.mean(h))
}

/// Optimizer settings shared by the three quality-model trainers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub betas: (f64, f64),
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { epochs: 10, batch: 8, lr: 1e-3, betas: (0.9, 0.999), seed: 0 }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::InvalidArgument("batch must be >= 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankConfig {
    pub fit: FitConfig,
    pub margin: f64,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self { fit: FitConfig::default(), margin: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub fit: FitConfig,
    /// Width of each per-tap quality vector.
    pub quality_dim: usize,
    pub head_seed: u64,
    /// Learning-rate multiplier of the trunk relative to the head.
    pub trunk_lr_scale: f64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self { fit: FitConfig { epochs: 30, ..FitConfig::default() }, quality_dim: 8, head_seed: 0x4ead, trunk_lr_scale: 0.1 }
    }
}

/// Mean loss of every optimizer step, in order.
pub type History = Vec<f64>;

/// Applies one Adam step unless the loss or a gradient is non-finite, in
/// which case the parameters are left untouched and the step is reported.
pub(crate) fn guarded_step(params: &mut ParamSet, adam: &mut Adam, grads: &[Tensor], loss: f64, lr: f64, step: usize) -> Result<()> {
    guarded_step_scaled(params, adam, grads, loss, lr, step, |_| 1.0)
}

pub(crate) fn guarded_step_scaled(
    params: &mut ParamSet,
    adam: &mut Adam,
    grads: &[Tensor],
    loss: f64,
    lr: f64,
    step: usize,
    scale: impl Fn(usize) -> f64,
) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Diverged { step, reason: format!("loss is {}", loss) });
    }
    if let Some((name, _)) = params.names().iter().zip(grads).find(|(_, g)| !g.all_finite()) {
        return Err(Error::Diverged { step, reason: format!("non-finite gradient for {}", name) });
    }
    adam.step_scaled(params, grads, lr, scale);
    Ok(())
}

fn batches<R: Rng>(n: usize, batch: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch).map(|c| c.to_vec()).collect()
}

fn stack(images: &[NormImage], idx: impl Iterator<Item = usize>) -> Result<Tensor> {
    let refs: Vec<&NormImage> = idx.map(|i| &images[i]).collect();
    to_tensor(&refs)
}

/// Siamese pretraining with the margin-ranking loss. Each epoch visits every
/// pair once in a shuffled order. On divergence the backbone keeps the
/// parameters of the last good step and the error is returned.
pub fn train_ranker(backbone: &mut RankBackbone, pairs: &[RankPair], images: &[NormImage], cfg: &RankConfig) -> Result<History> {
    cfg.fit.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("rank pairs".into()));
    }
    if let Some(p) = pairs.iter().find(|p| p.a >= images.len() || p.b >= images.len() || p.a == p.b) {
        return Err(Error::InvalidArgument(format!("pair {:?} does not index {} images", p, images.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.fit.seed);
    let mut adam = Adam::new(backbone.params(), cfg.fit.betas);
    let mut history = Vec::new();
    for epoch in 0..cfg.fit.epochs {
        for chunk in batches(pairs.len(), cfg.fit.batch, &mut rng) {
            let xa = stack(images, chunk.iter().map(|&k| pairs[k].a))?;
            let xb = stack(images, chunk.iter().map(|&k| pairs[k].b))?;
            let labels: Vec<f64> = chunk.iter().map(|&k| pairs[k].label as f64).collect();
            let mut g = Graph::new();
            let p = backbone.params().bind(&mut g, true);
            let (a, b) = (g.constant(xa), g.constant(xb));
            let (sa, sb) = backbone.forward_pair(&mut g, &p, a, b)?;
            let loss = margin_rank_loss_var(&mut g, sa, sb, &labels, cfg.margin)?;
            let lv = g.value(loss).item();
            let grads = g.grad_values(loss, &p);
            guarded_step(backbone.params_mut(), &mut adam, &grads, lv, cfg.fit.lr, history.len())?;
            history.push(lv);
        }
        debug!("ranker epoch {} loss {:.4}", epoch, history.last().copied().unwrap_or(f64::NAN));
    }
    Ok(history)
}

/// Fits `scorer` to `mos` with the mean absolute error on the raw head output.
/// Trunk tensors learn at `trunk_lr_scale` times the head rate.
pub fn fit_scorer(scorer: &mut Scorer, images: &[NormImage], mos: &[f64], cfg: &FitConfig, trunk_lr_scale: f64) -> Result<History> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::EmptyDataset("MOS data".into()));
    }
    if images.len() != mos.len() {
        return Err(Error::ShapeMismatch(format!("{} images with {} MOS values", images.len(), mos.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(scorer.params(), cfg.betas);
    let mut history = Vec::new();
    for epoch in 0..cfg.epochs {
        for chunk in batches(images.len(), cfg.batch, &mut rng) {
            let x = stack(images, chunk.iter().copied())?;
            let n = chunk.len();
            let target = Tensor::from_vec([n, 1, 1, 1], chunk.iter().map(|&i| mos[i]).collect());
            let mut g = Graph::new();
            let p = scorer.params().bind(&mut g, true);
            let xv = g.constant(x);
            let y = scorer.forward(&mut g, &p, xv)?;
            let t = g.constant(target);
            let loss = crate::losses::l1_mean(&mut g, y, t)?;
            let lv = g.value(loss).item();
            let grads = g.grad_values(loss, &p);
            let trunk = scorer.trunk_len();
            let scale = |i: usize| if i < trunk { trunk_lr_scale } else { 1.0 };
            guarded_step_scaled(scorer.params_mut(), &mut adam, &grads, lv, cfg.lr, history.len(), scale)?;
            history.push(lv);
        }
        debug!("finetune epoch {} l1 {:.4}", epoch, history.last().copied().unwrap_or(f64::NAN));
    }
    Ok(history)
}

/// Drops the ranking head of `backbone`, attaches the multi-scale head and
/// fine-tunes everything against MOS.
pub fn finetune_scorer(backbone: &RankBackbone, images: &[NormImage], mos: &[f64], cfg: &FinetuneConfig) -> Result<(Scorer, History)> {
    let mut scorer = Scorer::from_backbone(backbone, cfg.quality_dim, cfg.head_seed);
    let history = fit_scorer(&mut scorer, images, mos, &cfg.fit, cfg.trunk_lr_scale)?;
    Ok((scorer, history))
}

/// Clamped scores for a batch of images of one size.
pub fn predict_batch(scorer: &Scorer, images: &[UnitImage]) -> Result<Vec<QualityScore>> {
    if images.is_empty() {
        return Ok(Vec::new());
    }
    let norm: Vec<NormImage> = images.iter().map(normalize).collect();
    let x = stack(&norm, 0..norm.len())?;
    Ok(scorer.eval_raw(&x)?.into_iter().map(QualityScore::new).collect())
}

/// Clamped score of one image. `None` stands for a scorer that was never
/// trained or loaded.
pub fn predict(scorer: Option<&Scorer>, img: &UnitImage) -> Result<QualityScore> {
    let scorer = scorer.ok_or_else(|| Error::MissingModel("quality scorer".into()))?;
    Ok(predict_batch(scorer, core::slice::from_ref(img))?[0])
}

/// Supervised classification on top of the trunk (mean squared error against
/// one-hot targets through a throwaway linear head). Used to build the
/// "pretrained on an unrelated task" baseline.
pub fn pretrain_classifier(backbone: &mut RankBackbone, images: &[NormImage], labels: &[usize], classes: usize, cfg: &FitConfig) -> Result<History> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::EmptyDataset("classification data".into()));
    }
    if images.len() != labels.len() || labels.iter().any(|&l| l >= classes) {
        return Err(Error::InvalidArgument("labels must match images and lie below the class count".into()));
    }
    let last = backbone.config().stage_widths()[3];
    let mut hb = ParamBuilder::new(cfg.seed ^ 0xc1a5);
    let head = hb.linear("cls", last, classes, true, 1.0);
    let mut head_params = hb.finish();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(backbone.params(), cfg.betas);
    let mut head_adam = Adam::new(&head_params, cfg.betas);
    let mut history = Vec::new();
    for _ in 0..cfg.epochs {
        for chunk in batches(images.len(), cfg.batch, &mut rng) {
            let x = stack(images, chunk.iter().copied())?;
            let n = chunk.len();
            let mut onehot = alloc::vec![0.0; n * classes];
            for (k, &i) in chunk.iter().enumerate() {
                onehot[k * classes + labels[i]] = 1.0;
            }
            let mut g = Graph::new();
            let p = backbone.params().bind(&mut g, true);
            let ph = head_params.bind(&mut g, true);
            let xv = g.constant(x);
            let (_, taps) = backbone.forward(&mut g, &p, xv)?;
            let gap = g.spatial_mean(taps[3]);
            let logits = head.apply(&mut g, &ph, gap);
            let t = g.constant(Tensor::from_vec([n, classes, 1, 1], onehot));
            let d = g.sub(logits, t);
            let sq = g.square(d);
            let loss = g.mean(sq);
            let lv = g.value(loss).item();
            let mut wrt = p.clone();
            wrt.extend_from_slice(&ph);
            let mut grads = g.grad_values(loss, &wrt);
            let head_grads = grads.split_off(p.len());
            guarded_step(backbone.params_mut(), &mut adam, &grads, lv, cfg.lr, history.len())?;
            head_adam.step(&mut head_params, &head_grads, cfg.lr);
            history.push(lv);
        }
    }
    Ok(history)
}

/// Four-way rotation-prediction fixture on clean procedural scenes: label `k`
/// means the scene was rotated by `k` quarter turns.
pub fn rotation_fixture(count: usize, side: usize, seed: u64) -> (Vec<UnitImage>, Vec<usize>) {
    use crate::image::Augment;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ops = [Augment::None, Augment::Rot90, Augment::Rot180, Augment::Rot270];
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let scene = procedural_scene(side, side, &mut rng);
        let k = rng.random_range(0..4);
        images.push(scene.augment(ops[k]));
        labels.push(k);
    }
    (images, labels)
}

/// Strength of each degradation, all in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub haze: f64,
    pub cast: f64,
    pub blur: f64,
    pub noise: f64,
}

impl Degradation {
    pub fn strength(&self) -> f64 {
        (self.haze + self.cast + self.blur + self.noise) / 4.0
    }
}

/// Ground-truth quality on the 1..5 rating scale: `5 - 4 s`.
pub fn true_quality(d: &Degradation) -> f64 {
    5.0 - 4.0 * d.strength()
}

fn blur_pass(img: &UnitImage) -> UnitImage {
    let (h, w) = img.dims();
    UnitImage::from_fn(h, w, |i, j| {
        let mut acc = [0.0; 3];
        let mut n = 0.0;
        for y in i.saturating_sub(1)..(i + 2).min(h) {
            for x in j.saturating_sub(1)..(j + 2).min(w) {
                let p = img.pixel(y, x);
                for c in 0..3 {
                    acc[c] += p[c];
                }
                n += 1.0;
            }
        }
        acc.map(|v| v / n)
    })
}

/// Blur (up to 3 box passes), then a blue or green color cast, then haze
/// toward a water background light, then Gaussian noise; quantized to 8 bits.
pub fn degrade<R: Rng + ?Sized>(clean: &UnitImage, d: &Degradation, rng: &mut R) -> UnitImage {
    let mut img = clean.clone();
    for _ in 0..libm::round(3.0 * d.blur) as usize {
        img = blur_pass(&img);
    }
    let gains = if rng.random_bool(0.5) { [0.35, 0.85, 1.0] } else { [0.35, 1.0, 0.6] };
    let table = WaterTable::default();
    let bg = table.get(WaterType::ALL[rng.random_range(0..9)]).background;
    let haze = 0.85 * d.haze;
    let sigma = 0.06 * d.noise;
    let normal = Normal::new(0.0, sigma.max(1e-12)).expect("positive sigma");
    let (h, w) = img.dims();
    let noise: Vec<f64> = (0..h * w * 3).map(|_| if sigma > 0.0 { normal.sample(rng) } else { 0.0 }).collect();
    UnitImage::from_fn(h, w, |i, j| {
        let p = img.pixel(i, j);
        let o = (i * w + j) * 3;
        let mut out = [0.0; 3];
        for c in 0..3 {
            let v = p[c] * (1.0 - d.cast * (1.0 - gains[c]));
            out[c] = v * (1.0 - haze) + bg[c] * haze + noise[o + c];
        }
        out
    })
    .quantize8()
}

/// Scales contrast around the mean luminance and saturation around each
/// pixel's gray level.
pub fn restyle(img: &UnitImage, contrast: f64, saturation: f64) -> UnitImage {
    let n = (img.height() * img.width()) as f64;
    let mean = img.pixels().map(|p| (p[0] + p[1] + p[2]) / 3.0).sum::<f64>() / n;
    let (h, w) = img.dims();
    UnitImage::from_fn(h, w, |i, j| {
        let p = img.pixel(i, j);
        let gray = (p[0] + p[1] + p[2]) / 3.0;
        p.map(|v| {
            let v = gray + saturation * (v - gray);
            mean + contrast * (v - mean)
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MosFixtureConfig {
    /// Number of clean scenes (groups).
    pub scenes: usize,
    /// Degraded renditions per scene, at stratified strengths.
    pub levels: usize,
    pub side: usize,
    pub raters: usize,
    /// Per-rating noise on the 1..5 scale.
    pub rater_noise: f64,
    /// Spread of the per-rater bias.
    pub rater_bias: f64,
    /// Lowest native contrast / saturation factor of a clean scene (1 keeps
    /// every scene as generated). Dull clean scenes keep global statistics
    /// from giving quality away.
    pub min_vividness: f64,
    pub seed: u64,
}

impl Default for MosFixtureConfig {
    fn default() -> Self {
        Self { scenes: 80, levels: 6, side: 32, raters: 12, rater_noise: 0.3, rater_bias: 0.15, min_vividness: 0.3, seed: 0 }
    }
}

/// Graded degradations of clean scenes with simulated opinion scores.
#[derive(Clone, Debug, PartialEq)]
pub struct MosFixture {
    pub images: Vec<UnitImage>,
    pub records: Vec<MosRecord>,
    pub degradations: Vec<Degradation>,
    /// Scene index of every image.
    pub groups: Vec<usize>,
}

impl MosFixture {
    pub fn generate(cfg: &MosFixtureConfig) -> Result<Self> {
        if cfg.scenes == 0 || cfg.levels == 0 {
            return Err(Error::InvalidArgument("fixture needs at least one scene and one level".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let bias_dist = Normal::new(0.0, cfg.rater_bias.max(1e-12)).map_err(|e| Error::InvalidArgument(format!("{}", e)))?;
        let noise_dist = Normal::new(0.0, cfg.rater_noise.max(1e-12)).map_err(|e| Error::InvalidArgument(format!("{}", e)))?;
        let bias: Vec<f64> = (0..cfg.raters).map(|_| bias_dist.sample(&mut rng)).collect();
        let mut fx = MosFixture { images: Vec::new(), records: Vec::new(), degradations: Vec::new(), groups: Vec::new() };
        for s in 0..cfg.scenes {
            let scene = procedural_scene(cfg.side, cfg.side, &mut rng);
            let lo = cfg.min_vividness.clamp(0.0, 1.0);
            let contrast = if lo < 1.0 { rng.random_range(lo..=1.0) } else { 1.0 };
            let saturation = if lo < 1.0 { rng.random_range(lo..=1.0) } else { 1.0 };
            let clean = restyle(&scene, contrast, saturation);
            for k in 0..cfg.levels {
                let target = (k as f64 + rng.random::<f64>()) / cfg.levels as f64;
                let mut comp = || (target + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0);
                let d = Degradation { haze: comp(), cast: comp(), blur: comp(), noise: comp() };
                let img = degrade(&clean, &d, &mut rng);
                let q = true_quality(&d);
                let raw: Vec<f64> = bias.iter().map(|b| (q + b + noise_dist.sample(&mut rng)).clamp(1.0, 5.0)).collect();
                fx.records.push(aggregate_mos(format!("mos_{:03}_{}", s, k), &raw)?);
                fx.images.push(img);
                fx.degradations.push(d);
                fx.groups.push(s);
            }
        }
        Ok(fx)
    }

    pub fn mos(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mos).collect()
    }

    /// Image indices whose scene index is below / at-or-above `train_scenes`.
    pub fn split(&self, train_scenes: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.images.len()).partition(|&i| self.groups[i] < train_scenes)
    }

    /// Sub-fixture with the given image indices, in that order.
    pub fn subset(&self, idx: &[usize]) -> MosFixture {
        MosFixture {
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            degradations: idx.iter().map(|&i| self.degradations[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
        }
    }

    pub fn normalized(&self) -> Vec<NormImage> {
        self.images.iter().map(normalize).collect()
    }
}

/// Which initialization the scorer trunk starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IqaVariant {
    /// Random initialization.
    Uiqa,
    /// Pretrained on the rotation-classification fixture.
    Puiqa,
    /// Pretrained by pairwise ranking on the MOS training split.
    Ruiqa,
}

impl IqaVariant {
    pub const ALL: [IqaVariant; 3] = [IqaVariant::Uiqa, IqaVariant::Puiqa, IqaVariant::Ruiqa];

    pub fn name(self) -> &'static str {
        match self {
            IqaVariant::Uiqa => "UIQA",
            IqaVariant::Puiqa => "PUIQA",
            IqaVariant::Ruiqa => "RUIQA",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }
}

/// Everything needed to train one scorer variant end to end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerRecipe {
    pub backbone: BackboneConfig,
    pub per_image_pairs: usize,
    pub rank: RankConfig,
    pub classify: FitConfig,
    pub classify_images: usize,
    pub finetune: FinetuneConfig,
}

impl Default for ScorerRecipe {
    fn default() -> Self {
        Self {
            backbone: BackboneConfig::default(),
            per_image_pairs: 4,
            rank: RankConfig { fit: FitConfig { epochs: 6, ..FitConfig::default() }, margin: 1.0 },
            classify: FitConfig { epochs: 6, ..FitConfig::default() },
            classify_images: 360,
            finetune: FinetuneConfig::default(),
        }
    }
}

/// Builds the trunk for `variant` (pretraining when the variant calls for
/// it) and fine-tunes a scorer on `mos_data`. Rank pairs are drawn within
/// scenes of `rank_data`, which may cover more images than carry MOS labels.
pub fn train_scorer(variant: IqaVariant, rank_data: &MosFixture, mos_data: &MosFixture, recipe: &ScorerRecipe) -> Result<Scorer> {
    let mut backbone = RankBackbone::new(recipe.backbone.clone());
    match variant {
        IqaVariant::Uiqa => {}
        IqaVariant::Ruiqa => {
            let pairs = make_rank_pairs_grouped(&rank_data.records, &rank_data.groups, recipe.per_image_pairs, recipe.rank.fit.seed)?;
            train_ranker(&mut backbone, &pairs, &rank_data.normalized(), &recipe.rank)?;
        }
        IqaVariant::Puiqa => {
            let side = mos_data.images.first().map(|i| i.height()).unwrap_or(32);
            let (imgs, labels) = rotation_fixture(recipe.classify_images, side, recipe.classify.seed ^ 0x7074);
            let norm: Vec<NormImage> = imgs.iter().map(normalize).collect();
            pretrain_classifier(&mut backbone, &norm, &labels, 4, &recipe.classify)?;
        }
    }
    let (scorer, _) = finetune_scorer(&backbone, &mos_data.normalized(), &mos_data.mos(), &recipe.finetune)?;
    Ok(scorer)
}

/// SROCC and PLCC of a scorer against held-out MOS.
pub fn evaluate_scorer(scorer: &Scorer, test: &MosFixture) -> Result<(f64, f64)> {
    let pred: Vec<f64> = predict_batch(scorer, &test.images)?.into_iter().map(QualityScore::value).collect();
    let mos = test.mos();
    Ok((crate::metrics::srocc(&pred, &mos)?, crate::metrics::plcc(&pred, &mos)?))
}

/// Desk protocol for comparing scorer initializations: scenes below
/// `rank_scenes` provide rank pairs, the first `labelled_scenes` of those
/// also provide MOS labels for fine-tuning, and the rest are held out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IqaProtocol {
    pub fixture: MosFixtureConfig,
    pub rank_scenes: usize,
    pub labelled_scenes: usize,
    pub recipe: ScorerRecipe,
}

impl Default for IqaProtocol {
    fn default() -> Self {
        Self { fixture: MosFixtureConfig::default(), rank_scenes: 60, labelled_scenes: 6, recipe: ScorerRecipe::default() }
    }
}

/// Held-out result of one variant at one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqaResult {
    pub variant: IqaVariant,
    pub seed: u64,
    pub srocc: f64,
    pub plcc: f64,
}

impl IqaProtocol {
    /// The protocol with every seed (fixture, trunk init, pair sampling,
    /// batch order) derived from `seed`.
    pub fn seeded(&self, seed: u64) -> Self {
        let mut p = self.clone();
        p.fixture.seed = seed;
        p.recipe.backbone.seed = seed;
        p.recipe.rank.fit.seed = seed;
        p.recipe.classify.seed = seed;
        p.recipe.finetune.fit.seed = seed;
        p
    }

    /// `(rank data, labelled data, held-out data)`.
    pub fn data(&self) -> Result<(MosFixture, MosFixture, MosFixture)> {
        if self.labelled_scenes == 0 || self.labelled_scenes > self.rank_scenes || self.rank_scenes >= self.fixture.scenes {
            return Err(Error::InvalidArgument(format!(
                "need 0 < labelled ({}) <= rank ({}) < total ({}) scenes",
                self.labelled_scenes, self.rank_scenes, self.fixture.scenes
            )));
        }
        let fx = MosFixture::generate(&self.fixture)?;
        let (train, test) = fx.split(self.rank_scenes);
        let (labelled, _) = fx.split(self.labelled_scenes);
        Ok((fx.subset(&train), fx.subset(&labelled), fx.subset(&test)))
    }

    pub fn run(&self, variant: IqaVariant, seed: u64) -> Result<IqaResult> {
        let p = self.seeded(seed);
        let (rank, labelled, test) = p.data()?;
        let scorer = train_scorer(variant, &rank, &labelled, &p.recipe)?;
        let (srocc, plcc) = evaluate_scorer(&scorer, &test)?;
        Ok(IqaResult { variant, seed, srocc, plcc })
    }
}
