//! Score-routed inference, the ablation runner, checkpoints and run
//! configuration.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapt::{
    split_easy_hard, train_baseline, train_inter, train_intra, AdaptNets, NetConfig, SplitResult, TonedImage,
    TonedPair, TrainConfig, TrainLog,
};
use crate::error::{Error, Result};
use crate::image::{denormalize, normalize, to_tensor, NormImage, UnitImage};
use crate::losses::LossWeights;
use crate::metrics::{evaluate, MetricKind, MetricReport};
use crate::nn::{
    BackboneConfig, CriticConfig, Enhancer, EnhancerConfig, FeatureExtractor, FeatureExtractorConfig, Module,
    ParamSet, PatchCritic, RankBackbone, Scorer, Translator, TranslatorConfig,
};
use crate::ruiqa::{predict_batch, IqaVariant};
use crate::synth::{build_dataset, generate_real, procedural_scene, DatasetConfig, RealDomainConfig, Split};
use crate::tensor::Tensor;

/// Images per forward pass during inference.
const EVAL_CHUNK: usize = 8;

/// An image-to-image model in normalized space.
pub trait ImageModel {
    fn enhance(&self, x: &[NormImage]) -> Result<Vec<NormImage>>;
}

/// A no-reference quality model on the MOS scale.
pub trait QualityModel {
    fn score(&self, images: &[UnitImage]) -> Result<Vec<f64>>;
}

impl ImageModel for Enhancer {
    fn enhance(&self, x: &[NormImage]) -> Result<Vec<NormImage>> {
        let mut out = Vec::with_capacity(x.len());
        for chunk in x.chunks(EVAL_CHUNK) {
            let refs: Vec<&NormImage> = chunk.iter().collect();
            let (y, _) = self.eval(&to_tensor(&refs)?)?;
            for n in 0..chunk.len() {
                out.push(NormImage::from_tensor(&y, n)?);
            }
        }
        Ok(out)
    }
}

impl QualityModel for Scorer {
    fn score(&self, images: &[UnitImage]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(EVAL_CHUNK) {
            out.extend(predict_batch(self, chunk)?.into_iter().map(|s| s.value()));
        }
        Ok(out)
    }
}

/// Identity model; the enhancement stand-in for routing tests.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl ImageModel for Identity {
    fn enhance(&self, x: &[NormImage]) -> Result<Vec<NormImage>> {
        Ok(x.to_vec())
    }
}

/// Wraps a per-image closure as an [`ImageModel`].
pub struct FnImageModel<F>(pub F);

impl<F: Fn(&NormImage) -> NormImage> ImageModel for FnImageModel<F> {
    fn enhance(&self, x: &[NormImage]) -> Result<Vec<NormImage>> {
        Ok(x.iter().map(&self.0).collect())
    }
}

/// Wraps a per-image closure as a [`QualityModel`].
pub struct FnQualityModel<F>(pub F);

impl<F: Fn(&UnitImage) -> f64> QualityModel for FnQualityModel<F> {
    fn score(&self, images: &[UnitImage]) -> Result<Vec<f64>> {
        Ok(images.iter().map(&self.0).collect())
    }
}

pub fn mean_quality(scorer: &dyn QualityModel, images: &[UnitImage]) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::EmptyDataset("no images to score".into()));
    }
    let s = scorer.score(images)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Inter,
    Intra,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Inter => "inter",
            Route::Intra => "intra",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Routed {
    pub image: UnitImage,
    pub route: Route,
    /// Quality of the inter output, which decided the route.
    pub score: f64,
}

/// Enhances with the inter model; outputs scoring below `threshold` are
/// replaced by the intra model's result.
pub fn enhance(
    img: &NormImage,
    inter: &dyn ImageModel,
    intra: Option<&dyn ImageModel>,
    scorer: &dyn QualityModel,
    threshold: f64,
) -> Result<Routed> {
    let mut out = enhance_batch(core::slice::from_ref(img), inter, intra, scorer, threshold)?;
    Ok(out.pop().expect("one image in, one out"))
}

/// Batch form of [`enhance`]. Fails before producing anything if an image
/// needs the intra model and none is given.
pub fn enhance_batch(
    images: &[NormImage],
    inter: &dyn ImageModel,
    intra: Option<&dyn ImageModel>,
    scorer: &dyn QualityModel,
    threshold: f64,
) -> Result<Vec<Routed>> {
    if threshold.is_nan() {
        return Err(Error::InvalidArgument("routing threshold is NaN".into()));
    }
    let y: Vec<UnitImage> = inter.enhance(images)?.iter().map(denormalize).collect();
    let scores = scorer.score(&y)?;
    let hard: Vec<usize> = (0..images.len()).filter(|&i| !(scores[i] >= threshold)).collect();
    let mut intra_out = Vec::new();
    if !hard.is_empty() {
        let Some(model) = intra else {
            return Err(Error::MissingModel(format!(
                "{} image(s) score below threshold {} but no intra model is loaded",
                hard.len(),
                threshold
            )));
        };
        let xs: Vec<NormImage> = hard.iter().map(|&i| images[i].clone()).collect();
        intra_out = model.enhance(&xs)?;
    }
    let mut intra_iter = intra_out.iter();
    Ok(y.into_iter()
        .zip(scores)
        .map(|(image, score)| {
            if score >= threshold {
                Routed { image, route: Route::Inter, score }
            } else {
                let out = intra_iter.next().expect("one intra output per hard image");
                Routed { image: denormalize(out), route: Route::Intra, score }
            }
        })
        .collect())
}

/// Enhancement ablation variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Enhancer trained on synthetic pairs only.
    #[serde(rename = "BL")]
    Bl,
    /// Inter-phase enhancer.
    #[serde(rename = "BL+ITE")]
    BlIte,
    /// Routed inter/intra pipeline.
    #[serde(rename = "BL+ITE+ITA")]
    BlIteIta,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Bl, Variant::BlIte, Variant::BlIteIta];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Bl => "BL",
            Variant::BlIte => "BL+ITE",
            Variant::BlIteIta => "BL+ITE+ITA",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }
}

/// Any ablation the runner knows: an enhancement variant or a quality
/// scorer variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationSpec {
    Enhancement(Variant),
    Iqa(IqaVariant),
}

impl AblationSpec {
    pub fn name(self) -> &'static str {
        match self {
            AblationSpec::Enhancement(v) => v.name(),
            AblationSpec::Iqa(v) => v.name(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::parse(s)
            .map(AblationSpec::Enhancement)
            .or_else(|| IqaVariant::parse(s).map(AblationSpec::Iqa))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ablation variant `{}`", s)))
    }
}

/// Trained models available to [`run_ablation`].
pub struct AblationModels<'a> {
    pub baseline: Option<&'a dyn ImageModel>,
    pub inter: Option<&'a dyn ImageModel>,
    pub intra: Option<&'a dyn ImageModel>,
    pub scorer: &'a dyn QualityModel,
    /// Routing threshold, from the persisted split.
    pub threshold: Option<f64>,
}

/// Test sets of an ablation run.
pub struct AblationData<'a> {
    /// Held-out real images `(id, raw)`.
    pub real: &'a [(String, NormImage)],
    /// Synthetic test pairs `(id, raw, reference)`.
    pub synthetic: &'a [(String, NormImage, UnitImage)],
}

pub const REAL_METRICS: [MetricKind; 3] = [MetricKind::Ruiqa, MetricKind::Uciqe, MetricKind::Uiqm];
pub const SYNTHETIC_METRICS: [MetricKind; 2] = [MetricKind::Psnr, MetricKind::Ssim];

/// One variant's results. Every variant fills the same fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub variant: Variant,
    /// Threshold used for routing (routed variant only).
    pub threshold: Option<f64>,
    /// Route per real image (routed variant only).
    pub routes: Option<Vec<Route>>,
    /// [`REAL_METRICS`] on the held-out real set.
    pub real: MetricReport,
    /// [`SYNTHETIC_METRICS`] on the synthetic test set, when one is given.
    pub synthetic: Option<MetricReport>,
}

impl AblationReport {
    pub fn mean(&self, kind: MetricKind) -> Option<f64> {
        let col = self.real.column(kind)?;
        Some(col.iter().sum::<f64>() / col.len() as f64)
    }
}

fn run_variant(
    variant: Variant,
    m: &AblationModels<'_>,
    images: &[NormImage],
) -> Result<(Vec<UnitImage>, Option<Vec<Route>>)> {
    let missing = |what: &str| Error::MissingModel(format!("variant {} needs the {} model", variant.name(), what));
    match variant {
        Variant::Bl => {
            let bl = m.baseline.ok_or_else(|| missing("baseline"))?;
            Ok((bl.enhance(images)?.iter().map(denormalize).collect(), None))
        }
        Variant::BlIte => {
            let inter = m.inter.ok_or_else(|| missing("inter"))?;
            Ok((inter.enhance(images)?.iter().map(denormalize).collect(), None))
        }
        Variant::BlIteIta => {
            let inter = m.inter.ok_or_else(|| missing("inter"))?;
            let intra = m.intra.ok_or_else(|| missing("intra"))?;
            let threshold = m.threshold.ok_or_else(|| missing("split threshold of the"))?;
            let routed = enhance_batch(images, inter, Some(intra), m.scorer, threshold)?;
            let routes = routed.iter().map(|r| r.route).collect();
            Ok((routed.into_iter().map(|r| r.image).collect(), Some(routes)))
        }
    }
}

/// Evaluates one enhancement variant on the held-out real set (and on the
/// synthetic test set when it is non-empty).
pub fn run_ablation(variant: Variant, models: &AblationModels<'_>, data: &AblationData<'_>) -> Result<AblationReport> {
    if data.real.is_empty() {
        return Err(Error::EmptyDataset("ablation needs held-out real images".into()));
    }
    let raw: Vec<NormImage> = data.real.iter().map(|(_, x)| x.clone()).collect();
    let (outputs, routes) = run_variant(variant, models, &raw)?;
    let preds: Vec<(String, UnitImage)> = data.real.iter().map(|(id, _)| id.clone()).zip(outputs).collect();
    let scorer = models.scorer;
    let ruiqa = |img: &UnitImage| -> Result<f64> { Ok(scorer.score(core::slice::from_ref(img))?[0]) };
    let real = evaluate(&preds, None, &REAL_METRICS, Some(&ruiqa))?;
    let synthetic = if data.synthetic.is_empty() {
        None
    } else {
        let raw: Vec<NormImage> = data.synthetic.iter().map(|(_, x, _)| x.clone()).collect();
        let refs: Vec<UnitImage> = data.synthetic.iter().map(|(_, _, y)| y.clone()).collect();
        let (outputs, _) = run_variant(variant, models, &raw)?;
        let preds: Vec<(String, UnitImage)> = data.synthetic.iter().map(|(id, _, _)| id.clone()).zip(outputs).collect();
        Some(evaluate(&preds, Some(&refs), &SYNTHETIC_METRICS, None)?)
    };
    let threshold = if variant == Variant::BlIteIta { models.threshold } else { None };
    Ok(AblationReport { variant, threshold, routes, real, synthetic })
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Architecture record stored with every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Architecture {
    Translator(TranslatorConfig),
    Enhancer(EnhancerConfig),
    Critic(CriticConfig),
    FeatureExtractor(FeatureExtractorConfig),
    RankBackbone(BackboneConfig),
    Scorer { backbone: BackboneConfig, quality_dim: usize },
}

impl Architecture {
    pub fn kind(&self) -> &'static str {
        match self {
            Architecture::Translator(_) => "translator",
            Architecture::Enhancer(_) => "enhancer",
            Architecture::Critic(_) => "critic",
            Architecture::FeatureExtractor(_) => "feature-extractor",
            Architecture::RankBackbone(_) => "rank-backbone",
            Architecture::Scorer { .. } => "scorer",
        }
    }
}

/// A model that can be rebuilt from its [`Architecture`].
pub trait Checkpointable: Module + Sized {
    fn architecture(&self) -> Architecture;
    fn build(arch: &Architecture) -> Result<Self>;
}

fn wrong_kind(expected: &str, got: &Architecture) -> Error {
    Error::Checkpoint(format!("expected a {} checkpoint, found {}", expected, got.kind()))
}

impl Checkpointable for Translator {
    fn architecture(&self) -> Architecture {
        Architecture::Translator(self.config().clone())
    }
    fn build(arch: &Architecture) -> Result<Self> {
        match arch {
            Architecture::Translator(c) => Ok(Translator::new(c.clone())),
            other => Err(wrong_kind("translator", other)),
        }
    }
}

impl Checkpointable for Enhancer {
    fn architecture(&self) -> Architecture {
        Architecture::Enhancer(self.config().clone())
    }
    fn build(arch: &Architecture) -> Result<Self> {
        match arch {
            Architecture::Enhancer(c) => Ok(Enhancer::new(c.clone())),
            other => Err(wrong_kind("enhancer", other)),
        }
    }
}

impl Checkpointable for PatchCritic {
    fn architecture(&self) -> Architecture {
        Architecture::Critic(self.config().clone())
    }
    fn build(arch: &Architecture) -> Result<Self> {
        match arch {
            Architecture::Critic(c) => Ok(PatchCritic::new(c.clone())),
            other => Err(wrong_kind("critic", other)),
        }
    }
}

impl Checkpointable for FeatureExtractor {
    fn architecture(&self) -> Architecture {
        Architecture::FeatureExtractor(self.config().clone())
    }
    fn build(arch: &Architecture) -> Result<Self> {
        match arch {
            Architecture::FeatureExtractor(c) => Ok(FeatureExtractor::new(c.clone())),
            other => Err(wrong_kind("feature-extractor", other)),
        }
    }
}

impl Checkpointable for RankBackbone {
    fn architecture(&self) -> Architecture {
        Architecture::RankBackbone(self.config().clone())
    }
    fn build(arch: &Architecture) -> Result<Self> {
        match arch {
            Architecture::RankBackbone(c) => Ok(RankBackbone::new(c.clone())),
            other => Err(wrong_kind("rank-backbone", other)),
        }
    }
}

impl Checkpointable for Scorer {
    fn architecture(&self) -> Architecture {
        Architecture::Scorer { backbone: self.backbone_config().clone(), quality_dim: self.quality_dim() }
    }
    fn build(arch: &Architecture) -> Result<Self> {
        match arch {
            Architecture::Scorer { backbone, quality_dim } => {
                Ok(Scorer::from_backbone(&RankBackbone::new(backbone.clone()), *quality_dim, 0))
            }
            other => Err(wrong_kind("scorer", other)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 4],
}

/// Run metadata recorded next to the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: Option<usize>,
    pub lambda: Option<f64>,
    pub threshold: Option<f64>,
    pub weights: Option<LossWeights>,
}

/// The structured-text half of a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub architecture: Architecture,
    pub meta: CheckpointMeta,
    pub tensors: Vec<TensorEntry>,
    /// Blob length in bytes.
    pub blob_len: usize,
    pub crc32: u32,
}

/// Manifest plus a blob of little-endian f64 values, tensor after tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub blob: Vec<u8>,
}

impl Checkpoint {
    pub fn save<M: Checkpointable>(model: &M, meta: CheckpointMeta) -> Self {
        let params = model.params();
        let mut blob = Vec::with_capacity(params.scalar_count() * 8);
        for t in params.tensors() {
            for v in t.data() {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        let tensors = params
            .names()
            .iter()
            .zip(params.tensors())
            .map(|(n, t)| TensorEntry { name: n.clone(), shape: t.shape() })
            .collect();
        let manifest = CheckpointManifest {
            version: CHECKPOINT_VERSION,
            architecture: model.architecture(),
            meta,
            tensors,
            blob_len: blob.len(),
            crc32: crc32fast::hash(&blob),
        };
        Self { manifest, blob }
    }

    /// Rebuilds the model; fails on a version, architecture, layout or
    /// checksum mismatch.
    pub fn load<M: Checkpointable>(&self) -> Result<M> {
        let m = &self.manifest;
        if m.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version {} is not supported (expected {})",
                m.version, CHECKPOINT_VERSION
            )));
        }
        if self.blob.len() != m.blob_len {
            return Err(Error::Checkpoint(format!("blob is {} bytes, manifest says {}", self.blob.len(), m.blob_len)));
        }
        if crc32fast::hash(&self.blob) != m.crc32 {
            return Err(Error::Checkpoint("blob checksum mismatch".into()));
        }
        let mut model = M::build(&m.architecture)?;
        let template = model.params();
        if template.len() != m.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "{} architecture has {} tensors, checkpoint has {}",
                m.architecture.kind(),
                template.len(),
                m.tensors.len()
            )));
        }
        let mut loaded = ParamSet::new();
        let mut off = 0;
        for ((entry, name), t) in m.tensors.iter().zip(template.names()).zip(template.tensors()) {
            if &entry.name != name || entry.shape != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match architecture tensor {} {:?}",
                    entry.name,
                    entry.shape,
                    name,
                    t.shape()
                )));
            }
            let len = t.len() * 8;
            let bytes = self
                .blob
                .get(off..off + len)
                .ok_or_else(|| Error::Checkpoint(format!("blob ends inside tensor {}", entry.name)))?;
            let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            loaded.push(entry.name.clone(), Tensor::from_vec(entry.shape, data));
            off += len;
        }
        if off != self.blob.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes in blob", self.blob.len() - off)));
        }
        model.params_mut().load_from(&loaded)?;
        Ok(model)
    }

    /// Like [`Checkpoint::load`], and also requires the stored architecture
    /// to equal `expected`.
    pub fn load_expecting<M: Checkpointable>(&self, expected: &Architecture) -> Result<M> {
        if &self.manifest.architecture != expected {
            return Err(Error::Checkpoint(format!(
                "architecture mismatch: checkpoint holds {:?}, expected {:?}",
                self.manifest.architecture, expected
            )));
        }
        self.load()
    }
}

/// Every input of a pipeline run. Paths are plain strings; the companion
/// crate checks that they exist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub synth_dir: String,
    pub real_dir: String,
    pub heldout_dir: String,
    pub checkpoint_dir: String,
    pub out_dir: String,
    /// Split manifest holding the routing threshold.
    pub split_manifest: String,
    pub lambda: f64,
    pub metrics: Vec<MetricKind>,
    pub seed: u64,
    pub nets: NetConfig,
    pub weights: LossWeights,
    pub inter: TrainConfig,
    pub intra: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            synth_dir: "data/synth".into(),
            real_dir: "data/real".into(),
            heldout_dir: "data/heldout".into(),
            checkpoint_dir: "checkpoints".into(),
            out_dir: "out".into(),
            split_manifest: "checkpoints/split.json".into(),
            lambda: 0.4,
            metrics: REAL_METRICS.to_vec(),
            seed: 0,
            nets: NetConfig::default(),
            weights: LossWeights::default(),
            inter: TrainConfig::default(),
            intra: TrainConfig { epochs: 10, decay_epochs: 5, ..TrainConfig::default() },
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidArgument(format!("lambda must lie in (0, 1), got {}", self.lambda)));
        }
        self.weights.validate()?;
        self.inter.validate()?;
        self.intra.validate()
    }
}

/// The whole two-phase experiment on generated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskConfig {
    pub side: usize,
    /// Procedural scenes behind the synthetic pairs.
    pub scenes: usize,
    pub per_type: usize,
    pub real_train: usize,
    pub real_heldout: usize,
    pub lambda: f64,
    pub nets: NetConfig,
    pub weights: LossWeights,
    pub inter: TrainConfig,
    pub intra: TrainConfig,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self {
            side: 64,
            scenes: 24,
            per_type: 8,
            real_train: 48,
            real_heldout: 24,
            lambda: 0.4,
            nets: NetConfig::with_width(8),
            weights: LossWeights::default(),
            inter: TrainConfig::default(),
            intra: TrainConfig { epochs: 10, decay_epochs: 5, ..TrainConfig::default() },
        }
    }
}

/// Models and reports of one desk run.
pub struct DeskOutcome {
    pub baseline: Enhancer,
    pub inter: AdaptNets,
    pub intra: AdaptNets,
    pub split: SplitResult,
    pub baseline_log: Vec<f64>,
    pub inter_log: TrainLog,
    pub intra_log: TrainLog,
    /// One report per [`Variant`], in [`Variant::ALL`] order.
    pub reports: Vec<AblationReport>,
}

fn with_seed(cfg: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..cfg.clone() }
}

fn reseed_nets(cfg: &NetConfig, seed: u64) -> NetConfig {
    let mut c = cfg.clone();
    c.translator.seed = cfg.translator.seed.wrapping_add(seed.wrapping_mul(0x1000));
    c.enhancer.seed = cfg.enhancer.seed.wrapping_add(seed.wrapping_mul(0x1000));
    c.critic_seed = cfg.critic_seed.wrapping_add(seed.wrapping_mul(0x1000));
    c
}

/// Generates data, trains the baseline, the inter phase and the intra phase,
/// and evaluates all three variants with `scorer`.
pub fn run_desk(cfg: &DeskConfig, scorer: &dyn QualityModel, seed: u64) -> Result<DeskOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xde5c);
    let scenes: Vec<UnitImage> = (0..cfg.scenes).map(|_| procedural_scene(cfg.side, cfg.side, &mut rng)).collect();
    let ds = build_dataset(
        &scenes,
        &DatasetConfig { per_type: cfg.per_type, side: cfg.side, seed, ..DatasetConfig::default() },
    )?;
    let to_pairs = |split: Split| -> Vec<TonedPair> {
        ds.pairs(split)
            .into_iter()
            .map(|(x, y, tone)| TonedPair { raw: normalize(x), reference: normalize(y), tone })
            .collect()
    };
    let synth_train = to_pairs(Split::Train);
    let synth_test: Vec<(String, NormImage, UnitImage)> = ds
        .pairs(Split::Test)
        .into_iter()
        .enumerate()
        .map(|(i, (x, y, _))| (format!("synth_{:04}", i), normalize(x), y.clone()))
        .collect();
    let real = generate_real(&RealDomainConfig {
        count: cfg.real_train + cfg.real_heldout,
        side: cfg.side,
        seed: seed.wrapping_add(1),
        ..RealDomainConfig::default()
    })?;
    let (train_real, heldout) = real.split_at(cfg.real_train);
    let toned: Vec<TonedImage> =
        train_real.iter().map(|s| TonedImage { image: normalize(&s.image), tone: s.tone }).collect();
    let heldout: Vec<(String, NormImage)> = heldout.iter().map(|s| (s.id.clone(), normalize(&s.image))).collect();

    let phi = FeatureExtractor::default();
    let nets_cfg = reseed_nets(&cfg.nets, seed);
    let mut baseline = Enhancer::new(nets_cfg.enhancer.clone());
    let baseline_log = train_baseline(&synth_train, &mut baseline, &phi, &cfg.weights, &with_seed(&cfg.inter, seed))?;
    info!("seed {}: baseline trained ({} steps)", seed, baseline_log.len());

    let mut inter = AdaptNets::new(&nets_cfg);
    let inter_log =
        train_inter(&synth_train, &toned, &mut inter, &phi, &cfg.weights, &with_seed(&cfg.inter, seed), &mut |_, _| Ok(()))?;
    info!("seed {}: inter phase trained ({} steps)", seed, inter_log.steps.len());

    let train_images: Vec<NormImage> = toned.iter().map(|t| t.image.clone()).collect();
    let split = split_easy_hard(&train_images, scorer, &inter.enhancer, cfg.lambda)?;
    let mut intra_nets = nets_cfg.clone();
    intra_nets.translator.seed = intra_nets.translator.seed.wrapping_add(7);
    intra_nets.critic_seed = intra_nets.critic_seed.wrapping_add(7);
    let (intra, intra_log) = train_intra(
        &split,
        &inter.enhancer,
        &intra_nets,
        &phi,
        &cfg.weights,
        &with_seed(&cfg.intra, seed.wrapping_add(2)),
        &mut |_, _| Ok(()),
    )?;
    info!("seed {}: intra phase trained ({} steps), threshold {:.3}", seed, intra_log.steps.len(), split.threshold);

    let models = AblationModels {
        baseline: Some(&baseline),
        inter: Some(&inter.enhancer),
        intra: Some(&intra.enhancer),
        scorer,
        threshold: Some(split.threshold),
    };
    let data = AblationData { real: &heldout, synthetic: &synth_test };
    let reports = Variant::ALL.iter().map(|&v| run_ablation(v, &models, &data)).collect::<Result<Vec<_>>>()?;
    Ok(DeskOutcome { baseline, inter, intra, split, baseline_log, inter_log, intra_log, reports })
}

impl core::fmt::Display for AblationReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{:<12}", self.variant.name())?;
        for (k, m) in self.real.metrics.iter().zip(self.real.aggregate()) {
            write!(f, " {}={:.4}", k.name(), m)?;
        }
        if let Some(s) = &self.synthetic {
            for (k, m) in s.metrics.iter().zip(s.aggregate()) {
                write!(f, " {}={:.4}", k.name(), m)?;
            }
        }
        if let Some(t) = self.threshold {
            write!(f, " threshold={:.4}", t)?;
        }
        Ok(())
    }
}
