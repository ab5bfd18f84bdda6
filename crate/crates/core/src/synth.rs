//! Synthetic underwater data from the per-channel exponential formation model,
//! tone classification and dataset manifests.
//!
//! `I_c = J_c t_c + B_c (1 - t_c)` with `t_c = exp(-beta_c d)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{rgb_to_lab, ImageBuf, UnitImage, MIN_SIDE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WaterType {
    I,
    IA,
    IB,
    II,
    III,
    C1,
    C3,
    C5,
    C7,
}

impl WaterType {
    pub const ALL: [WaterType; 9] = [
        WaterType::I,
        WaterType::IA,
        WaterType::IB,
        WaterType::II,
        WaterType::III,
        WaterType::C1,
        WaterType::C3,
        WaterType::C5,
        WaterType::C7,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            WaterType::I => "I",
            WaterType::IA => "IA",
            WaterType::IB => "IB",
            WaterType::II => "II",
            WaterType::III => "III",
            WaterType::C1 => "1C",
            WaterType::C3 => "3C",
            WaterType::C5 => "5C",
            WaterType::C7 => "7C",
        }
    }

    pub fn is_open_ocean(self) -> bool {
        self.index() < 5
    }
}

/// Attenuation (1/m, RGB order) and background light of one water type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub beta: [f64; 3],
    pub background: [f64; 3],
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.iter().all(|b| b.is_finite() && *b > 0.0) {
            return Err(Error::InvalidArgument(format!("attenuation must be positive, got {:?}", self.beta)));
        }
        if !self.background.iter().all(|b| (0.0..=1.0).contains(b)) {
            return Err(Error::InvalidArgument(format!("background light outside [0, 1]: {:?}", self.background)));
        }
        Ok(())
    }
}

/// Editable per-type parameter table. The defaults are hand-tuned to give the
/// intended tones; they are not measured coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaterTable {
    pub params: [SynthParams; 9],
}

impl Default for WaterTable {
    fn default() -> Self {
        let p = |beta, background| SynthParams { beta, background };
        Self {
            params: [
                p([0.60, 0.20, 0.12], [0.03, 0.28, 0.58]),
                p([0.62, 0.21, 0.14], [0.03, 0.30, 0.58]),
                p([0.64, 0.22, 0.16], [0.04, 0.32, 0.56]),
                p([0.66, 0.24, 0.20], [0.04, 0.34, 0.56]),
                p([0.70, 0.26, 0.26], [0.05, 0.36, 0.55]),
                p([0.70, 0.24, 0.36], [0.06, 0.42, 0.42]),
                p([0.74, 0.26, 0.46], [0.08, 0.46, 0.34]),
                p([0.80, 0.28, 0.60], [0.10, 0.48, 0.26]),
                p([0.88, 0.32, 0.80], [0.12, 0.48, 0.18]),
            ],
        }
    }
}

impl WaterTable {
    pub fn get(&self, wt: WaterType) -> &SynthParams {
        &self.params[wt.index()]
    }

    /// Checks every entry, including red attenuation >= blue for open-ocean types.
    pub fn validate(&self) -> Result<()> {
        for wt in WaterType::ALL {
            let p = self.get(wt);
            p.validate()?;
            if wt.is_open_ocean() && p.beta[0] < p.beta[2] {
                return Err(Error::InvalidArgument(format!(
                    "open-ocean type {} needs red attenuation >= blue, got {:?}",
                    wt.name(),
                    p.beta
                )));
            }
        }
        Ok(())
    }
}

/// Per-pixel scene distance in meters, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!("{}x{} depth map with {} values", height, width, data.len())));
        }
        if let Some(d) = data.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::InvalidArgument(format!("depth must be finite and >= 0, got {}", d)));
        }
        Ok(Self { height, width, data })
    }

    pub fn constant(height: usize, width: usize, d: f64) -> Result<Self> {
        Self::new(height, width, alloc::vec![d; height * width])
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSample {
    radiance: UnitImage,
    depth: DepthMap,
}

impl SceneSample {
    pub fn new(radiance: UnitImage, depth: DepthMap) -> Result<Self> {
        if radiance.dims() != depth.dims() {
            return Err(Error::ShapeMismatch(format!(
                "radiance {:?} vs depth {:?}",
                radiance.dims(),
                depth.dims()
            )));
        }
        Ok(Self { radiance, depth })
    }

    pub fn radiance(&self) -> &UnitImage {
        &self.radiance
    }

    pub fn depth(&self) -> &DepthMap {
        &self.depth
    }
}

/// Applies the formation model pixel by pixel.
pub fn synthesize(scene: &SceneSample, p: &SynthParams) -> Result<UnitImage> {
    p.validate()?;
    let (h, w) = scene.radiance.dims();
    let j = scene.radiance.data();
    let d = scene.depth.data();
    let mut out = Vec::with_capacity(j.len());
    for (px, &dist) in j.chunks_exact(3).zip(d) {
        for c in 0..3 {
            let t = libm::exp(-p.beta[c] * dist);
            let (j, b) = (px[c], p.background[c]);
            // written as b + (j - b) t so rounding stays monotone in t; the
            // clamp removes ulp overshoot past the endpoints
            out.push(if t == 1.0 { j } else { (b + (j - b) * t).clamp(j.min(b), j.max(b)) });
        }
    }
    UnitImage::new(ImageBuf::new(h, w, out)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToneClass {
    Blue,
    Green,
    BlueGreen,
}

impl ToneClass {
    pub const ALL: [ToneClass; 3] = [ToneClass::Blue, ToneClass::Green, ToneClass::BlueGreen];

    pub fn name(self) -> &'static str {
        match self {
            ToneClass::Blue => "blue",
            ToneClass::Green => "green",
            ToneClass::BlueGreen => "blue-green",
        }
    }
}

/// Cut points on the spatial mean of CIELab b.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToneThresholds {
    pub low: f64,
    pub high: f64,
}

/// Anchor set the default thresholds were calibrated on: this many scenes per
/// water type, at this side, from this seed, with the default table and depths.
pub const ANCHOR_COUNT: usize = 200;
pub const ANCHOR_SIDE: usize = 32;
pub const ANCHOR_SEED: u64 = 0x70e;

impl Default for ToneThresholds {
    /// Frozen output of [`calibrate_thresholds`] on the default anchors.
    fn default() -> Self {
        Self { low: -10.0, high: 13.0 }
    }
}

pub fn classify_tone(img: &UnitImage) -> ToneClass {
    classify_tone_with(img, ToneThresholds::default())
}

pub fn classify_tone_with(img: &UnitImage, t: ToneThresholds) -> ToneClass {
    classify_mean_b(rgb_to_lab(img).mean_b(), t)
}

pub fn classify_mean_b(mean_b: f64, t: ToneThresholds) -> ToneClass {
    if mean_b < t.low {
        ToneClass::Blue
    } else if mean_b > t.high {
        ToneClass::Green
    } else {
        ToneClass::BlueGreen
    }
}

/// Range of the procedural depth maps, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRange {
    /// Nearest point is drawn from `near`.
    pub near: (f64, f64),
    /// Extra distance from the nearest to the farthest point.
    pub span: (f64, f64),
}

impl Default for DepthRange {
    fn default() -> Self {
        Self { near: (3.0, 6.0), span: (3.0, 10.0) }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h - libm::floor(h)) * 6.0;
    let f = h6 - libm::floor(h6);
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match h6 as usize {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn random_color<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    hsv(rng.random(), rng.random_range(0.25..0.9), rng.random_range(0.35..1.0))
}

enum Shape {
    Ellipse { ci: f64, cj: f64, ri: f64, rj: f64 },
    Rect { i0: f64, j0: f64, i1: f64, j1: f64 },
}

impl Shape {
    fn contains(&self, i: f64, j: f64) -> bool {
        match *self {
            Shape::Ellipse { ci, cj, ri, rj } => {
                let (a, b) = ((i - ci) / ri, (j - cj) / rj);
                a * a + b * b <= 1.0
            }
            Shape::Rect { i0, j0, i1, j1 } => i >= i0 && i <= i1 && j >= j0 && j <= j1,
        }
    }
}

/// A colorful clean scene: a two-color gradient backdrop with textured
/// ellipses and rectangles on top. Coordinates are relative, so the same rng
/// stream gives the same layout at any size.
pub fn procedural_scene<R: Rng + ?Sized>(height: usize, width: usize, rng: &mut R) -> UnitImage {
    let top = random_color(rng);
    let bottom = random_color(rng);
    let n = rng.random_range(3..7);
    let layers: Vec<(Shape, [f64; 3], f64, f64)> = (0..n)
        .map(|_| {
            let shape = if rng.random_bool(0.5) {
                Shape::Ellipse {
                    ci: rng.random(),
                    cj: rng.random(),
                    ri: rng.random_range(0.08..0.35),
                    rj: rng.random_range(0.08..0.35),
                }
            } else {
                let (i0, j0) = (rng.random_range(0.0..0.8), rng.random_range(0.0..0.8));
                Shape::Rect { i0, j0, i1: i0 + rng.random_range(0.1..0.45), j1: j0 + rng.random_range(0.1..0.45) }
            };
            let stripes = if rng.random_bool(0.5) { rng.random_range(4.0..20.0) } else { 0.0 };
            (shape, random_color(rng), stripes, rng.random::<f64>() * core::f64::consts::TAU)
        })
        .collect();
    UnitImage::from_fn(height, width, |i, j| {
        let (y, x) = ((i as f64 + 0.5) / height as f64, (j as f64 + 0.5) / width as f64);
        let mut px = [0.0; 3];
        for c in 0..3 {
            px[c] = top[c] * (1.0 - y) + bottom[c] * y;
        }
        for (shape, color, stripes, angle) in &layers {
            if shape.contains(y, x) {
                let shade = if *stripes > 0.0 {
                    let u = y * libm::cos(*angle) + x * libm::sin(*angle);
                    0.8 + 0.2 * libm::sin(core::f64::consts::TAU * stripes * u)
                } else {
                    1.0
                };
                px = color.map(|v| v * shade);
            }
        }
        px
    })
}

/// Linear ramp (random direction) or radial bowl between a near and a far distance.
pub fn procedural_depth<R: Rng + ?Sized>(height: usize, width: usize, range: DepthRange, rng: &mut R) -> DepthMap {
    let near = uniform(rng, range.near).max(0.0);
    let far = near + uniform(rng, range.span).max(0.0);
    let ramp = rng.random_bool(0.5);
    let angle = rng.random::<f64>() * core::f64::consts::TAU;
    let (ci, cj) = (rng.random_range(0.3..0.7), rng.random_range(0.3..0.7));
    let (ca, sa) = (libm::cos(angle), libm::sin(angle));
    let mut raw = Vec::with_capacity(height * width);
    for i in 0..height {
        for j in 0..width {
            let (y, x) = ((i as f64 + 0.5) / height as f64, (j as f64 + 0.5) / width as f64);
            raw.push(if ramp {
                (y - 0.5) * ca + (x - 0.5) * sa
            } else {
                let (a, b) = (y - ci, x - cj);
                a * a + b * b
            });
        }
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = if hi > lo { 1.0 / (hi - lo) } else { 0.0 };
    // bowls are deepest at the rim, ramps run along the drawn direction
    let data = raw.iter().map(|v| near + (far - near) * (v - lo) * scale).collect();
    DepthMap { height, width, data }
}

/// A clean scene together with a procedural depth map.
pub fn procedural_sample<R: Rng + ?Sized>(height: usize, width: usize, range: DepthRange, rng: &mut R) -> SceneSample {
    let radiance = procedural_scene(height, width, rng);
    let depth = procedural_depth(height, width, range, rng);
    SceneSample { radiance, depth }
}

/// Mean-b statistics of synthetic anchors and the thresholds derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// Largest mean b over open-ocean anchors.
    pub blue_max: f64,
    /// Smallest mean b over strong-coastal anchors.
    pub green_min: f64,
    pub thresholds: ToneThresholds,
}

/// `per_type` procedural scenes, each synthesized under every water type and
/// quantized to 8 bits. Returned scene-major.
pub fn anchors(table: &WaterTable, range: DepthRange, per_type: usize, side: usize, seed: u64) -> Result<Vec<(WaterType, UnitImage)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_type * 9);
    for _ in 0..per_type {
        let scene = procedural_sample(side, side, range, &mut rng);
        for wt in WaterType::ALL {
            out.push((wt, synthesize(&scene, table.get(wt))?.quantize8()));
        }
    }
    Ok(out)
}

/// The anchor set behind [`ToneThresholds::default`].
pub fn default_anchors() -> Result<Vec<(WaterType, UnitImage)>> {
    anchors(&WaterTable::default(), DepthRange::default(), ANCHOR_COUNT, ANCHOR_SIDE, ANCHOR_SEED)
}

/// Places `low` above every open-ocean anchor and `high` below every
/// strong-coastal (5C, 7C) anchor, both rounded to whole b units with at
/// least half a unit of slack. Fails when the two anchor sets overlap.
pub fn calibrate_thresholds(anchors: &[(WaterType, UnitImage)]) -> Result<Calibration> {
    let mut blue_max = f64::NEG_INFINITY;
    let mut green_min = f64::INFINITY;
    for (wt, img) in anchors {
        let b = rgb_to_lab(img).mean_b();
        if wt.is_open_ocean() {
            blue_max = blue_max.max(b);
        } else if matches!(wt, WaterType::C5 | WaterType::C7) {
            green_min = green_min.min(b);
        }
    }
    if !(blue_max < green_min) {
        return Err(Error::InvalidArgument(format!(
            "anchor sets overlap: open-ocean max b {} >= coastal min b {}",
            blue_max, green_min
        )));
    }
    let low = libm::ceil(blue_max + 0.5);
    let high = libm::floor(green_min - 0.5).max(low);
    Ok(Calibration { blue_max, green_min, thresholds: ToneThresholds { low, high } })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    SyntheticPair,
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One manifest line. For pairs `path` is the degraded image and `reference`
/// the clean one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub water_type: Option<WaterType>,
    pub tone: ToneClass,
    pub split: Split,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    /// Unique paths (including references) and pair records carrying both images.
    pub fn validate(&self) -> Result<()> {
        let mut paths: Vec<&str> = Vec::new();
        for r in &self.records {
            match (r.role, &r.reference) {
                (Role::SyntheticPair, None) => {
                    return Err(Error::InvalidArgument(format!("pair record {} has no reference", r.path)))
                }
                (Role::Real, Some(_)) => {
                    return Err(Error::InvalidArgument(format!("real record {} has a reference", r.path)))
                }
                _ => {}
            }
            paths.push(&r.path);
            if let Some(p) = &r.reference {
                paths.push(p);
            }
        }
        let n = paths.len();
        paths.sort_unstable();
        paths.dedup();
        if paths.len() != n {
            return Err(Error::InvalidArgument("duplicate paths in manifest".into()));
        }
        Ok(())
    }

    pub fn select(&self, role: Role, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.role == role && r.split == split)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub per_type: usize,
    /// Fraction of each type that goes to training.
    pub train_fraction: f64,
    pub side: usize,
    pub seed: u64,
    pub depth: DepthRange,
    pub table: WaterTable,
    pub thresholds: ToneThresholds,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            per_type: 10,
            train_fraction: 0.8,
            side: 64,
            seed: 0,
            depth: DepthRange::default(),
            table: WaterTable::default(),
            thresholds: ToneThresholds::default(),
        }
    }
}

/// A built dataset: the manifest plus every image it names, in manifest order.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub manifest: DatasetManifest,
    pub images: Vec<(String, UnitImage)>,
}

impl SynthDataset {
    pub fn image(&self, path: &str) -> Option<&UnitImage> {
        self.images.iter().find(|(p, _)| p == path).map(|(_, img)| img)
    }

    /// `(degraded, clean, tone)` for every pair in `split`.
    pub fn pairs(&self, split: Split) -> Vec<(&UnitImage, &UnitImage, ToneClass)> {
        self.manifest
            .select(Role::SyntheticPair, split)
            .filter_map(|r| {
                let x = self.image(&r.path)?;
                let y = self.image(r.reference.as_deref()?)?;
                Some((x, y, r.tone))
            })
            .collect()
    }
}

/// Builds `per_type` pairs for every water type. Scene `k` of a type is
/// `scenes[(k + type offset) % len]`, resized to `side` and given a fresh
/// procedural depth map. Images are quantized to 8 bits before the tone is
/// computed, so the recorded tone matches a stored PNG.
pub fn build_dataset(scenes: &[UnitImage], cfg: &DatasetConfig) -> Result<SynthDataset> {
    if scenes.is_empty() {
        return Err(Error::EmptyDataset("scene pool".into()));
    }
    if cfg.per_type == 0 {
        return Err(Error::InvalidArgument("per_type must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.train_fraction) {
        return Err(Error::InvalidArgument(format!("train fraction {} outside [0, 1]", cfg.train_fraction)));
    }
    if cfg.side < MIN_SIDE {
        return Err(Error::InvalidArgument(format!("side {} below {}", cfg.side, MIN_SIDE)));
    }
    cfg.table.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let resized: Vec<UnitImage> = scenes
        .iter()
        .map(|s| if s.dims() == (cfg.side, cfg.side) { Ok(s.clone()) } else { crate::image::resize(s, cfg.side, cfg.side) })
        .collect::<Result<_>>()?;
    let n_train = libm::round(cfg.train_fraction * cfg.per_type as f64) as usize;
    let mut manifest = DatasetManifest::default();
    let mut images = Vec::new();
    for wt in WaterType::ALL {
        let mut order: Vec<usize> = (0..cfg.per_type).collect();
        order.shuffle(&mut rng);
        let offset = rng.random_range(0..resized.len());
        for (k, &slot) in order.iter().enumerate() {
            let split = if slot < n_train { Split::Train } else { Split::Test };
            let clean = resized[(k + offset) % resized.len()].clone();
            let depth = procedural_depth(cfg.side, cfg.side, cfg.depth, &mut rng);
            let scene = SceneSample::new(clean.clone(), depth)?;
            let raw = synthesize(&scene, cfg.table.get(wt))?.quantize8();
            let clean = clean.quantize8();
            let tone = classify_tone_with(&raw, cfg.thresholds);
            let stem = format!("synth/{}/{}_{:04}", split.name(), wt.name(), k);
            let (path, reference) = (format!("{}_raw.png", stem), format!("{}_ref.png", stem));
            manifest.records.push(ManifestRecord {
                path: path.clone(),
                reference: Some(reference.clone()),
                role: Role::SyntheticPair,
                water_type: Some(wt),
                tone,
                split,
            });
            images.push((path, raw));
            images.push((reference, clean));
        }
    }
    Ok(SynthDataset { manifest, images })
}

/// Settings for the stand-in real domain. Real images come from the same
/// formation model but with effects the synthetic pairs never show: jittered
/// attenuation and background, uneven artificial lighting, blur and sensor
/// noise. That gap is what the translator has to learn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RealDomainConfig {
    pub count: usize,
    pub side: usize,
    pub seed: u64,
    pub depth: DepthRange,
    pub table: WaterTable,
    /// Multiplicative attenuation jitter range.
    pub beta_scale: (f64, f64),
    /// Additive background jitter, per channel.
    pub background_jitter: f64,
    /// Strength range of the off-center light falloff.
    pub vignette: (f64, f64),
    /// Probability of a 3x3 box blur.
    pub blur_prob: f64,
    /// Sensor noise standard deviation range.
    pub noise: (f64, f64),
    pub thresholds: ToneThresholds,
}

impl Default for RealDomainConfig {
    fn default() -> Self {
        Self {
            count: 64,
            side: 64,
            seed: 1,
            depth: DepthRange { near: (1.0, 6.0), span: (2.0, 14.0) },
            table: WaterTable::default(),
            beta_scale: (0.7, 1.5),
            background_jitter: 0.06,
            vignette: (0.0, 0.6),
            blur_prob: 0.5,
            noise: (0.005, 0.03),
            thresholds: ToneThresholds::default(),
        }
    }
}

/// A stand-in real underwater image. `clean` is kept for diagnostics only;
/// no training path reads it.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSample {
    pub id: String,
    pub image: UnitImage,
    pub clean: UnitImage,
    pub water_type: WaterType,
    pub tone: ToneClass,
}

fn box_blur(img: &UnitImage) -> UnitImage {
    let (h, w) = img.dims();
    UnitImage::from_fn(h, w, |i, j| {
        let mut acc = [0.0; 3];
        let mut n = 0.0;
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let (y, x) = (i as i64 + di, j as i64 + dj);
                if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                    let p = img.pixel(y as usize, x as usize);
                    for c in 0..3 {
                        acc[c] += p[c];
                    }
                    n += 1.0;
                }
            }
        }
        acc.map(|v| v / n)
    })
}

pub fn generate_real(cfg: &RealDomainConfig) -> Result<Vec<RealSample>> {
    if cfg.side < MIN_SIDE {
        return Err(Error::InvalidArgument(format!("side {} below {}", cfg.side, MIN_SIDE)));
    }
    cfg.table.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    for k in 0..cfg.count {
        let wt = WaterType::ALL[rng.random_range(0..9)];
        let base = cfg.table.get(wt);
        let s = uniform(&mut rng, cfg.beta_scale);
        let mut p = SynthParams { beta: base.beta.map(|b| b * s), background: base.background };
        for c in 0..3 {
            let j = rng.random_range(-1.0..=1.0) * cfg.background_jitter;
            p.background[c] = (p.background[c] + j).clamp(0.0, 1.0);
        }
        let clean = procedural_scene(cfg.side, cfg.side, &mut rng);
        let depth = procedural_depth(cfg.side, cfg.side, cfg.depth, &mut rng);

        let strength = uniform(&mut rng, cfg.vignette);
        let (li, lj) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let n = cfg.side as f64;
        let lit = UnitImage::from_fn(cfg.side, cfg.side, |i, j| {
            let (a, b) = ((i as f64 + 0.5) / n - li, (j as f64 + 0.5) / n - lj);
            let gain = 1.0 - strength * (a * a + b * b).min(1.0);
            clean.pixel(i, j).map(|v| v * gain)
        });
        let mut img = synthesize(&SceneSample::new(lit, depth)?, &p)?;
        if rng.random_bool(cfg.blur_prob.clamp(0.0, 1.0)) {
            img = box_blur(&img);
        }
        let sigma = uniform(&mut rng, cfg.noise);
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(format!("noise: {}", e)))?;
            let noisy: Vec<f64> = img.data().iter().map(|v| v + normal.sample(&mut rng)).collect();
            img = UnitImage::from_fn(cfg.side, cfg.side, |i, j| {
                let o = (i * cfg.side + j) * 3;
                [noisy[o], noisy[o + 1], noisy[o + 2]]
            });
        }
        let image = img.quantize8();
        let tone = classify_tone_with(&image, cfg.thresholds);
        out.push(RealSample { id: format!("real_{:04}", k), image, clean: clean.quantize8(), water_type: wt, tone });
    }
    Ok(out)
}
