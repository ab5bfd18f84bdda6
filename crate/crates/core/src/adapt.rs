//! The two adaptation phases, the easy/hard splitter and the lambda sweep.
//!
//! Both phases share one step: a translator maps source images toward the
//! target domain, the enhancer restores the translated image, an image
//! critic compares translated and target images and a feature critic compares
//! the enhancer's bottleneck features of both. The inter phase uses synthetic
//! pairs as source and real images as target; the intra phase uses easy real
//! images (with pseudo labels) as source and hard real images as target.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::image::{to_tensor, NormImage};
use crate::losses::{
    combine, content_loss, critic_loss, generator_adv_loss, inter_lambdas, intra_lambdas, task_loss, Components,
    LossWeights,
};
use crate::nn::{
    Adam, CriticConfig, Enhancer, EnhancerConfig, FeatureExtractor, Module, ParamSet, PatchCritic, Translator,
    TranslatorConfig,
};
use crate::pipeline::{enhance_batch, mean_quality, ImageModel, QualityModel};
use crate::synth::ToneClass;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Translator and enhancer rate.
    pub lr_gen: f64,
    /// Critic rate.
    pub lr_critic: f64,
    pub betas: (f64, f64),
    pub batch: usize,
    /// Epochs at the full rate.
    pub epochs: usize,
    /// Further epochs over which the rate falls linearly to zero.
    pub decay_epochs: usize,
    pub seed: u64,
    /// Critic updates per generator update.
    pub n_critic: usize,
    /// Start the intra enhancer from the inter enhancer's weights.
    pub warm_start: bool,
}

impl Default for TrainConfig {
    /// Desk-scale schedule: 20 epochs plus 10 decay epochs.
    fn default() -> Self {
        Self {
            lr_gen: 1e-4,
            lr_critic: 2e-4,
            betas: (0.5, 0.999),
            batch: 4,
            epochs: 20,
            decay_epochs: 10,
            seed: 0,
            n_critic: 1,
            warm_start: true,
        }
    }
}

impl TrainConfig {
    /// Full-resolution schedule of record: 200 epochs plus 100 decay epochs.
    pub fn full_scale() -> Self {
        Self { epochs: 200, decay_epochs: 100, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lr_gen", self.lr_gen), ("lr_critic", self.lr_critic)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{} must be finite and >= 0, got {}", name, v)));
            }
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::InvalidArgument(format!("betas must lie in [0, 1), got {:?}", self.betas)));
        }
        if self.batch == 0 || self.n_critic == 0 {
            return Err(Error::InvalidArgument("batch and n_critic must be >= 1".into()));
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs + self.decay_epochs
    }

    /// Rate multiplier at the start of `epoch`: 1 up to `epochs`, then
    /// linear down to 0 at `epochs + decay_epochs`.
    pub fn lr_factor(&self, epoch: usize) -> f64 {
        if epoch <= self.epochs {
            1.0
        } else if epoch >= self.total_epochs() {
            0.0
        } else {
            (self.total_epochs() - epoch) as f64 / self.decay_epochs as f64
        }
    }
}

/// Architecture of one adaptation phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub translator: TranslatorConfig,
    pub enhancer: EnhancerConfig,
    pub critic_width: usize,
    pub critic_seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            translator: TranslatorConfig::default(),
            enhancer: EnhancerConfig::default(),
            critic_width: 16,
            critic_seed: 2,
        }
    }
}

impl NetConfig {
    /// All four networks at base width `width` (growth `width / 2`).
    pub fn with_width(width: usize) -> Self {
        let growth = (width / 2).max(1);
        let d = Self::default();
        Self {
            translator: TranslatorConfig { width, growth, ..d.translator },
            enhancer: EnhancerConfig { width, growth, ..d.enhancer },
            critic_width: width,
            critic_seed: d.critic_seed,
        }
    }

    pub fn image_critic(&self) -> CriticConfig {
        CriticConfig::image(self.critic_width, self.critic_seed)
    }

    pub fn feature_critic(&self) -> CriticConfig {
        CriticConfig::feature(4 * self.enhancer.width, self.critic_width, self.critic_seed + 1)
    }
}

/// Translator, enhancer and the two critics of one phase.
#[derive(Clone, Debug)]
pub struct AdaptNets {
    pub translator: Translator,
    pub enhancer: Enhancer,
    pub critic_img: PatchCritic,
    pub critic_feat: PatchCritic,
}

impl AdaptNets {
    pub fn new(cfg: &NetConfig) -> Self {
        Self {
            translator: Translator::new(cfg.translator.clone()),
            enhancer: Enhancer::new(cfg.enhancer.clone()),
            critic_img: PatchCritic::new(cfg.image_critic()),
            critic_feat: PatchCritic::new(cfg.feature_critic()),
        }
    }

    /// Fresh intra-phase networks. With `warm_start` the enhancer starts from
    /// `inter`'s weights, which must share `cfg.enhancer`'s architecture.
    pub fn for_intra(cfg: &NetConfig, inter: &Enhancer, warm_start: bool) -> Result<Self> {
        let mut nets = Self::new(cfg);
        if warm_start {
            if inter.config().width != cfg.enhancer.width || inter.config().growth != cfg.enhancer.growth {
                return Err(Error::ShapeMismatch(format!(
                    "cannot warm start a {:?} enhancer from a {:?} one",
                    cfg.enhancer,
                    inter.config()
                )));
            }
            nets.enhancer.params_mut().load_from(inter.params())?;
        }
        Ok(nets)
    }

    /// Parameter sets in the order translator, enhancer, image critic, feature critic.
    pub fn param_sets(&self) -> [&ParamSet; 4] {
        [self.translator.params(), self.enhancer.params(), self.critic_img.params(), self.critic_feat.params()]
    }
}

/// A synthetic raw/reference pair tagged with the raw image's tone.
#[derive(Clone, Debug, PartialEq)]
pub struct TonedPair {
    pub raw: NormImage,
    pub reference: NormImage,
    pub tone: ToneClass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TonedImage {
    pub image: NormImage,
    pub tone: ToneClass,
}

/// Indices of one step: source samples and target samples of the same tone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToneBatch {
    pub tone: Option<ToneClass>,
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

/// Tone classes present on both sides, and those present on one side only.
pub fn shared_tones(source: &[ToneClass], target: &[ToneClass]) -> (Vec<ToneClass>, Vec<ToneClass>) {
    let mut shared = Vec::new();
    let mut excluded = Vec::new();
    for t in ToneClass::ALL {
        match (source.contains(&t), target.contains(&t)) {
            (true, true) => shared.push(t),
            (false, false) => {}
            _ => excluded.push(t),
        }
    }
    (shared, excluded)
}

/// One epoch of tone-matched batches: every source image of a shared tone is
/// visited once; each batch is paired with as many target images of the same
/// tone, drawn without replacement until that tone's pool is exhausted.
pub fn tone_batches<R: Rng + ?Sized>(
    source: &[ToneClass],
    target: &[ToneClass],
    tones: &[ToneClass],
    batch: usize,
    rng: &mut R,
) -> Vec<ToneBatch> {
    let mut out = Vec::new();
    for &t in tones {
        let mut src: Vec<usize> = (0..source.len()).filter(|&i| source[i] == t).collect();
        let tgt: Vec<usize> = (0..target.len()).filter(|&i| target[i] == t).collect();
        if src.is_empty() || tgt.is_empty() {
            continue;
        }
        src.shuffle(rng);
        let mut pool = TargetPool::new(tgt);
        for chunk in src.chunks(batch) {
            let target = pool.take(chunk.len(), rng);
            out.push(ToneBatch { tone: Some(t), source: chunk.to_vec(), target });
        }
    }
    out.shuffle(rng);
    out
}

/// Batches for an untagged source/target pair of sets.
fn plain_batches<R: Rng + ?Sized>(n_source: usize, n_target: usize, batch: usize, rng: &mut R) -> Vec<ToneBatch> {
    let mut src: Vec<usize> = (0..n_source).collect();
    src.shuffle(rng);
    let mut pool = TargetPool::new((0..n_target).collect());
    src.chunks(batch)
        .map(|chunk| ToneBatch { tone: None, source: chunk.to_vec(), target: pool.take(chunk.len(), rng) })
        .collect()
}

struct TargetPool {
    items: Vec<usize>,
    order: Vec<usize>,
}

impl TargetPool {
    fn new(items: Vec<usize>) -> Self {
        Self { items, order: Vec::new() }
    }

    fn take<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n)
            .map(|_| {
                if self.order.is_empty() {
                    self.order = self.items.clone();
                    self.order.shuffle(rng);
                }
                self.order.pop().expect("non-empty pool")
            })
            .collect()
    }
}

/// Everything logged for one generator step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub epoch: usize,
    pub tone: Option<ToneClass>,
    pub lr_factor: f64,
    /// Unweighted generator-side terms.
    pub components: Components<f64>,
    /// Weighted generator objective.
    pub total: f64,
    /// Critic objectives of the last critic update of this step.
    pub critic_img: f64,
    pub critic_feat: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepLog>,
    /// Tone classes dropped because only one side had them.
    pub excluded: Vec<ToneClass>,
}

impl TrainLog {
    pub fn totals(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.total).collect()
    }

    pub fn task(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.components.task).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.steps.iter().all(|s| {
            let c = s.components;
            [c.adv_img, c.content, c.task, c.adv_feat, s.total, s.critic_img, s.critic_feat].iter().all(|v| v.is_finite())
        })
    }
}

/// Called after every epoch with the zero-based epoch index.
pub type EpochHook<'a> = &'a mut dyn FnMut(usize, &AdaptNets) -> Result<()>;

struct Optimizers {
    translator: Adam,
    enhancer: Adam,
    critic_img: Adam,
    critic_feat: Adam,
}

impl Optimizers {
    fn new(nets: &AdaptNets, betas: (f64, f64)) -> Self {
        Self {
            translator: Adam::new(nets.translator.params(), betas),
            enhancer: Adam::new(nets.enhancer.params(), betas),
            critic_img: Adam::new(nets.critic_img.params(), betas),
            critic_feat: Adam::new(nets.critic_feat.params(), betas),
        }
    }
}

#[derive(Clone, Copy)]
struct PhaseWeights {
    lambdas: [f64; 4],
    pixel: f64,
    perceptual: f64,
    lambda_img: f64,
    lambda_feat: f64,
    taps: [f64; 5],
}

fn ensure_finite(step: usize, loss: f64, sets: &[(&ParamSet, &[Tensor])]) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Diverged { step, reason: format!("loss is {}", loss) });
    }
    for (ps, grads) in sets {
        if let Some((name, _)) = ps.names().iter().zip(grads.iter()).find(|(_, g)| !g.all_finite()) {
            return Err(Error::Diverged { step, reason: format!("non-finite gradient for {}", name) });
        }
    }
    Ok(())
}

fn stack<'a>(images: impl Iterator<Item = &'a NormImage>) -> Result<Tensor> {
    let refs: Vec<&NormImage> = images.collect();
    to_tensor(&refs)
}

struct StepData {
    xs: Tensor,
    ys: Tensor,
    xt: Tensor,
}

/// One generator update followed by `n_critic` critic updates on the
/// detached outputs of that generator forward pass.
#[allow(clippy::too_many_arguments)]
fn adapt_step(
    nets: &mut AdaptNets,
    opt: &mut Optimizers,
    phi: &FeatureExtractor,
    data: StepData,
    w: PhaseWeights,
    cfg: &TrainConfig,
    factor: f64,
    step: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Components<f64>, f64, f64, f64)> {
    let mut g = Graph::new();
    let pt = nets.translator.params().bind(&mut g, true);
    let pe = nets.enhancer.params().bind(&mut g, true);
    let pci = Module::params(&nets.critic_img).bind(&mut g, false);
    let pcf = Module::params(&nets.critic_feat).bind(&mut g, false);
    let pphi = phi.bind(&mut g);
    let xs = g.constant(data.xs);
    let ys = g.constant(data.ys);
    let xt = g.constant(data.xt);

    let x_trans = nets.translator.forward(&mut g, &pt, xs)?;
    let (y_hat, f_trans) = nets.enhancer.forward(&mut g, &pe, x_trans)?;
    let f_target = nets.enhancer.encode(&mut g, &pe, xt)?;

    let adv_img = generator_adv_loss(&mut g, &nets.critic_img, &pci, x_trans)?;
    let taps_s = phi.taps(&mut g, &pphi, xs)?;
    let taps_st = phi.taps(&mut g, &pphi, x_trans)?;
    let content = content_loss(&mut g, &taps_s, &taps_st, &w.taps)?;
    let taps_y = phi.taps(&mut g, &pphi, ys)?;
    let taps_yh = phi.taps(&mut g, &pphi, y_hat)?;
    let task = task_loss(&mut g, ys, y_hat, &taps_y, &taps_yh, w.pixel, w.perceptual)?;
    let adv_feat = generator_adv_loss(&mut g, &nets.critic_feat, &pcf, f_trans)?;
    let comps = Components { adv_img, content, task, adv_feat };
    let total = combine(&mut g, &comps, w.lambdas)?;
    let total_v = g.value(total).item();
    let values = comps.map(|v: Var| g.value(v).item());

    let wrt: Vec<Var> = pt.iter().chain(pe.iter()).copied().collect();
    let mut grads = g.grad_values(total, &wrt);
    let ge = grads.split_off(pt.len());
    ensure_finite(step, total_v, &[(nets.translator.params(), &grads), (nets.enhancer.params(), &ge)])?;
    let fake_img = g.value(x_trans).clone();
    let real_img = g.value(xt).clone();
    let fake_feat = g.value(f_trans).clone();
    let real_feat = g.value(f_target).clone();
    drop(g);
    opt.translator.step(nets.translator.params_mut(), &grads, cfg.lr_gen * factor);
    opt.enhancer.step(nets.enhancer.params_mut(), &ge, cfg.lr_gen * factor);

    let lr_d = cfg.lr_critic * factor;
    let mut d_img = 0.0;
    let mut d_feat = 0.0;
    for _ in 0..cfg.n_critic {
        d_img = critic_step(&mut nets.critic_img, &mut opt.critic_img, &fake_img, &real_img, w.lambda_img, lr_d, step, rng)?;
        d_feat =
            critic_step(&mut nets.critic_feat, &mut opt.critic_feat, &fake_feat, &real_feat, w.lambda_feat, lr_d, step, rng)?;
    }
    Ok((values, total_v, d_img, d_feat))
}

#[allow(clippy::too_many_arguments)]
fn critic_step(
    critic: &mut PatchCritic,
    adam: &mut Adam,
    fake: &Tensor,
    real: &Tensor,
    lambda: f64,
    lr: f64,
    step: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut g = Graph::new();
    let p = Module::params(critic).bind(&mut g, true);
    let f = g.constant(fake.clone());
    let r = g.constant(real.clone());
    let loss = critic_loss(&mut g, &*critic, &p, f, r, lambda, rng)?;
    let lv = g.value(loss).item();
    let grads = g.grad_values(loss, &p);
    ensure_finite(step, lv, &[(Module::params(critic), &grads)])?;
    adam.step(critic.params_mut(), &grads, lr);
    Ok(lv)
}

struct PhaseData<'a> {
    source: Vec<&'a NormImage>,
    labels: Vec<&'a NormImage>,
    target: Vec<&'a NormImage>,
}

fn run_phase(
    nets: &mut AdaptNets,
    phi: &FeatureExtractor,
    data: &PhaseData<'_>,
    plan: &mut dyn FnMut(&mut ChaCha8Rng) -> Vec<ToneBatch>,
    w: PhaseWeights,
    cfg: &TrainConfig,
    on_epoch: EpochHook<'_>,
    what: &str,
) -> Result<Vec<StepLog>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizers::new(nets, cfg.betas);
    let mut steps = Vec::new();
    for epoch in 0..cfg.total_epochs() {
        let factor = cfg.lr_factor(epoch);
        for b in plan(&mut rng) {
            let sd = StepData {
                xs: stack(b.source.iter().map(|&i| data.source[i]))?,
                ys: stack(b.source.iter().map(|&i| data.labels[i]))?,
                xt: stack(b.target.iter().map(|&i| data.target[i]))?,
            };
            let (components, total, critic_img, critic_feat) =
                adapt_step(nets, &mut opt, phi, sd, w, cfg, factor, steps.len(), &mut rng)?;
            steps.push(StepLog { epoch, tone: b.tone, lr_factor: factor, components, total, critic_img, critic_feat });
        }
        if let Some(s) = steps.last() {
            debug!("{} epoch {} total {:.4} task {:.4} d_img {:.4}", what, epoch, s.total, s.components.task, s.critic_img);
        }
        on_epoch(epoch, nets)?;
    }
    Ok(steps)
}

/// Inter-domain dual alignment on synthetic pairs and real images.
///
/// Each step draws a synthetic batch and a real batch of the same tone class.
/// Tone classes that only one side has are excluded with a warning.
pub fn train_inter(
    synth: &[TonedPair],
    real: &[TonedImage],
    nets: &mut AdaptNets,
    phi: &FeatureExtractor,
    weights: &LossWeights,
    cfg: &TrainConfig,
    on_epoch: EpochHook<'_>,
) -> Result<TrainLog> {
    cfg.validate()?;
    weights.validate()?;
    if synth.is_empty() || real.is_empty() {
        return Err(Error::EmptyDataset("inter training needs synthetic pairs and real images".into()));
    }
    let src_tones: Vec<ToneClass> = synth.iter().map(|p| p.tone).collect();
    let tgt_tones: Vec<ToneClass> = real.iter().map(|r| r.tone).collect();
    let (tones, excluded) = shared_tones(&src_tones, &tgt_tones);
    for t in &excluded {
        warn!("tone class {} appears on one side only; excluded from inter training", t.name());
    }
    if tones.is_empty() {
        return Err(Error::EmptyDataset("no tone class shared by synthetic and real images".into()));
    }
    let data = PhaseData {
        source: synth.iter().map(|p| &p.raw).collect(),
        labels: synth.iter().map(|p| &p.reference).collect(),
        target: real.iter().map(|r| &r.image).collect(),
    };
    let mut plan = |rng: &mut ChaCha8Rng| {
        let batches = tone_batches(&src_tones, &tgt_tones, &tones, cfg.batch, rng);
        debug_assert!(batches.iter().all(|b| {
            b.source.iter().all(|&i| Some(src_tones[i]) == b.tone) && b.target.iter().all(|&i| Some(tgt_tones[i]) == b.tone)
        }));
        batches
    };
    let w = PhaseWeights {
        lambdas: inter_lambdas(weights),
        pixel: weights.a,
        perceptual: weights.b,
        lambda_img: weights.lambda_img,
        lambda_feat: weights.lambda_feat,
        taps: weights.tap_weights,
    };
    let steps = run_phase(nets, phi, &data, &mut plan, w, cfg, on_epoch, "inter")?;
    Ok(TrainLog { steps, excluded })
}

/// Intra-domain easy/hard adaptation. The networks are built from `net_cfg`;
/// with `cfg.warm_start` the enhancer starts as a copy of `inter`.
pub fn train_intra(
    split: &SplitResult,
    inter: &Enhancer,
    net_cfg: &NetConfig,
    phi: &FeatureExtractor,
    weights: &LossWeights,
    cfg: &TrainConfig,
    on_epoch: EpochHook<'_>,
) -> Result<(AdaptNets, TrainLog)> {
    cfg.validate()?;
    weights.validate()?;
    if split.easy.is_empty() {
        return Err(Error::EmptySplit { lambda: split.lambda, side: "easy" });
    }
    if split.hard.is_empty() {
        return Err(Error::EmptySplit { lambda: split.lambda, side: "hard" });
    }
    let mut nets = AdaptNets::for_intra(net_cfg, inter, cfg.warm_start)?;
    let data = PhaseData {
        source: split.easy.iter().map(|e| &e.raw).collect(),
        labels: split.easy.iter().map(|e| &e.pseudo).collect(),
        target: split.hard.iter().map(|h| &h.raw).collect(),
    };
    let (ne, nh) = (split.easy.len(), split.hard.len());
    let mut plan = |rng: &mut ChaCha8Rng| plain_batches(ne, nh, cfg.batch, rng);
    let w = PhaseWeights {
        lambdas: intra_lambdas(weights),
        pixel: weights.c,
        perceptual: weights.d,
        lambda_img: weights.lambda_img,
        lambda_feat: weights.lambda_feat,
        taps: weights.tap_weights,
    };
    let steps = run_phase(&mut nets, phi, &data, &mut plan, w, cfg, on_epoch, "intra")?;
    Ok((nets, TrainLog { steps, excluded: Vec::new() }))
}

/// The baseline: the enhancer alone, trained on synthetic pairs with the
/// task loss only (no translation, no critics).
pub fn train_baseline(
    synth: &[TonedPair],
    enhancer: &mut Enhancer,
    phi: &FeatureExtractor,
    weights: &LossWeights,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    weights.validate()?;
    if synth.is_empty() {
        return Err(Error::EmptyDataset("baseline training needs synthetic pairs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(enhancer.params(), cfg.betas);
    let mut history = Vec::new();
    for epoch in 0..cfg.total_epochs() {
        let lr = cfg.lr_gen * cfg.lr_factor(epoch);
        for b in plain_batches(synth.len(), 1, cfg.batch, &mut rng) {
            let mut g = Graph::new();
            let pe = enhancer.params().bind(&mut g, true);
            let pphi = phi.bind(&mut g);
            let x = g.constant(stack(b.source.iter().map(|&i| &synth[i].raw))?);
            let y = g.constant(stack(b.source.iter().map(|&i| &synth[i].reference))?);
            let (y_hat, _) = enhancer.forward(&mut g, &pe, x)?;
            let ty = phi.taps(&mut g, &pphi, y)?;
            let tyh = phi.taps(&mut g, &pphi, y_hat)?;
            let loss = task_loss(&mut g, y, y_hat, &ty, &tyh, weights.a, weights.b)?;
            let lv = g.value(loss).item();
            let grads = g.grad_values(loss, &pe);
            ensure_finite(history.len(), lv, &[(enhancer.params(), &grads)])?;
            adam.step(enhancer.params_mut(), &grads, lr);
            history.push(lv);
        }
        debug!("baseline epoch {} task {:.4}", epoch, history.last().copied().unwrap_or(f64::NAN));
    }
    Ok(history)
}

/// `ceil(lambda * n)`, with products within rounding noise of an integer
/// taken as that integer (so `0.1 * 30` gives 3, not 4).
pub fn easy_count(n: usize, lambda: f64) -> usize {
    let x = lambda * n as f64;
    let r = libm::round(x);
    let k = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) { r } else { libm::ceil(x) };
    (k as usize).min(n)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("lambda must lie in (0, 1), got {}", lambda)));
    }
    Ok(())
}

/// Index-level split of a score list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    /// Easy indices, best score first.
    pub easy: Vec<usize>,
    /// Hard indices, best score first.
    pub hard: Vec<usize>,
    /// Score of the last easy sample.
    pub threshold: f64,
}

/// Ranks `scores` in descending order (equal scores keep input order) and
/// takes the first `ceil(lambda * n)` as easy.
pub fn split_scores(scores: &[f64], lambda: f64) -> Result<SplitIndices> {
    check_lambda(lambda)?;
    if scores.is_empty() {
        return Err(Error::EmptyDataset("no real images to split".into()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("quality score of image {}", i)));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let k = easy_count(scores.len(), lambda);
    let hard = order.split_off(k);
    let threshold = scores[*order.last().expect("k >= 1")];
    Ok(SplitIndices { easy: order, hard, threshold })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EasySample {
    pub index: usize,
    pub raw: NormImage,
    /// The inter enhancer's output for `raw`.
    pub pseudo: NormImage,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardSample {
    pub index: usize,
    pub raw: NormImage,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitResult {
    pub easy: Vec<EasySample>,
    pub hard: Vec<HardSample>,
    pub threshold: f64,
    pub lambda: f64,
}

/// Scores every enhanced real image and splits the set at ratio `lambda`.
pub fn split_easy_hard(
    real: &[NormImage],
    scorer: &dyn QualityModel,
    enhancer: &dyn ImageModel,
    lambda: f64,
) -> Result<SplitResult> {
    check_lambda(lambda)?;
    if real.is_empty() {
        return Err(Error::EmptyDataset("no real images to split".into()));
    }
    let enhanced = enhancer.enhance(real)?;
    let units: Vec<_> = enhanced.iter().map(crate::image::denormalize).collect();
    let scores = scorer.score(&units)?;
    let idx = split_scores(&scores, lambda)?;
    let easy = idx
        .easy
        .iter()
        .map(|&i| EasySample { index: i, raw: real[i].clone(), pseudo: enhanced[i].clone(), score: scores[i] })
        .collect();
    let hard = idx.hard.iter().map(|&i| HardSample { index: i, raw: real[i].clone(), score: scores[i] }).collect();
    Ok(SplitResult { easy, hard, threshold: idx.threshold, lambda })
}

/// Inputs shared by every cell of a lambda sweep.
pub struct SweepSetup<'a> {
    /// Real images that are split into easy and hard.
    pub train_real: &'a [NormImage],
    /// Held-out real images the routed pipeline is scored on.
    pub heldout: &'a [NormImage],
    pub inter: &'a Enhancer,
    pub scorer: &'a dyn QualityModel,
    pub phi: &'a FeatureExtractor,
    pub nets: NetConfig,
    pub weights: LossWeights,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mean_ruiqa: Option<f64>,
    pub threshold: Option<f64>,
    pub error: Option<String>,
}

/// One sweep cell: split, train the intra phase, then the mean quality of
/// the routed pipeline's outputs on the held-out set.
pub fn sweep_cell(lambda: f64, s: &SweepSetup<'_>) -> Result<(f64, f64)> {
    let split = split_easy_hard(s.train_real, s.scorer, s.inter, lambda)?;
    let (intra, _) = train_intra(&split, s.inter, &s.nets, s.phi, &s.weights, &s.train, &mut |_, _| Ok(()))?;
    let routed = enhance_batch(s.heldout, s.inter, Some(&intra.enhancer), s.scorer, split.threshold)?;
    let outputs: Vec<_> = routed.into_iter().map(|r| r.image).collect();
    Ok((mean_quality(s.scorer, &outputs)?, split.threshold))
}

/// Runs [`sweep_cell`] for every value; a failing cell is recorded and the
/// sweep continues.
pub fn sweep_lambda(values: &[f64], s: &SweepSetup<'_>) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&lambda| match sweep_cell(lambda, s) {
            Ok((m, t)) => SweepRow { lambda, mean_ruiqa: Some(m), threshold: Some(t), error: None },
            Err(e) => {
                warn!("lambda {} failed: {}", lambda, e);
                SweepRow { lambda, mean_ruiqa: None, threshold: None, error: Some(e.to_string()) }
            }
        })
        .collect()
}
