//! No-reference underwater indices, full-reference fidelity measures,
//! correlation coefficients and subjective-score aggregation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{rgb_to_lab, UnitImage};

/// UCIQE weights for chroma spread, luminance contrast and mean saturation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UciqeConfig {
    pub weights: [f64; 3],
    /// Percentiles bounding the luminance contrast term.
    pub contrast_percentiles: (f64, f64),
}

impl Default for UciqeConfig {
    fn default() -> Self {
        Self { weights: [0.4680, 0.2745, 0.2576], contrast_percentiles: (1.0, 99.0) }
    }
}

/// UIQM weights for colorfulness, sharpness and contrast plus the block and
/// trimming parameters of its components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UiqmConfig {
    pub weights: [f64; 3],
    /// Side of the EME / AMEE blocks, in pixels.
    pub block: usize,
    /// Fractions trimmed from the low and high ends in the colorfulness means.
    pub trim: (f64, f64),
    /// Per-channel weights of the sharpness term (R, G, B).
    pub channel_weights: [f64; 3],
}

impl Default for UiqmConfig {
    fn default() -> Self {
        Self { weights: [0.0282, 0.2953, 3.5753], block: 8, trim: (0.1, 0.1), channel_weights: [0.299, 0.587, 0.114] }
    }
}

/// SSIM window and stabilising constants (dynamic range 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03 }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_pop(v: &[f64]) -> f64 {
    let m = mean(v);
    libm::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64)
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 100]`.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn sort(v: &mut [f64]) {
    v.sort_by(f64::total_cmp);
}

pub fn uciqe(img: &UnitImage) -> f64 {
    uciqe_with(img, &UciqeConfig::default())
}

/// `c1 std(chroma) + c2 contrast(L) + c3 mean(saturation)` on CIELab, with
/// chroma and lightness scaled by 1/100 and saturation `C / sqrt(C^2 + L^2)`.
pub fn uciqe_with(img: &UnitImage, cfg: &UciqeConfig) -> f64 {
    let lab = rgb_to_lab(img);
    let chroma: Vec<f64> = lab.a.iter().zip(&lab.b).map(|(a, b)| libm::hypot(*a, *b)).collect();
    let sat: Vec<f64> = chroma
        .iter()
        .zip(&lab.l)
        .map(|(&c, &l)| {
            let d = libm::hypot(c, l);
            if d > 0.0 {
                c / d
            } else {
                0.0
            }
        })
        .collect();
    let scaled: Vec<f64> = chroma.iter().map(|c| c / 100.0).collect();
    let mut l: Vec<f64> = lab.l.iter().map(|v| v / 100.0).collect();
    sort(&mut l);
    let (lo, hi) = cfg.contrast_percentiles;
    let con = percentile_sorted(&l, hi) - percentile_sorted(&l, lo);
    let [c1, c2, c3] = cfg.weights;
    c1 * std_pop(&scaled) + c2 * con + c3 * mean(&sat)
}

/// Mean after dropping `ceil(lo K)` smallest and `floor(hi K)` largest values.
fn trimmed_mean(v: &[f64], trim: (f64, f64)) -> f64 {
    let mut s = v.to_vec();
    sort(&mut s);
    let k = s.len();
    let tl = libm::ceil(trim.0 * k as f64) as usize;
    let tr = libm::floor(trim.1 * k as f64) as usize;
    if tl + tr >= k {
        return mean(&s);
    }
    mean(&s[tl..k - tr])
}

fn uicm(img: &UnitImage, cfg: &UiqmConfig) -> f64 {
    let (mut rg, mut yb) = (Vec::new(), Vec::new());
    for [r, g, b] in img.pixels() {
        let (r, g, b) = (255.0 * r, 255.0 * g, 255.0 * b);
        rg.push(r - g);
        yb.push(0.5 * (r + g) - b);
    }
    let mu_rg = trimmed_mean(&rg, cfg.trim);
    let mu_yb = trimmed_mean(&yb, cfg.trim);
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    let s2 = var(&rg, mu_rg) + var(&yb, mu_yb);
    -0.0268 * libm::sqrt(mu_rg * mu_rg + mu_yb * mu_yb) + 0.1586 * libm::sqrt(s2)
}

/// Block boundaries along an axis of length `n`, symmetric under reversal.
/// An odd length never gets an even block count, which would need a
/// fractional middle edge.
fn block_edges(n: usize, block: usize) -> Vec<usize> {
    let mut k = (n / block.max(1)).max(1);
    if k % 2 == 0 && n % 2 == 1 {
        k += 1;
    }
    (0..=k).map(|j| if 2 * j <= k { j * n / k } else { n - (k - j) * n / k }).collect()
}

/// Sobel gradient magnitude with edge replication.
fn sobel_magnitude(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let at = |i: isize, j: isize| {
        let i = i.clamp(0, h as isize - 1) as usize;
        let j = j.clamp(0, w as isize - 1) as usize;
        plane[i * w + j]
    };
    let mut out = vec![0.0; h * w];
    for i in 0..h as isize {
        for j in 0..w as isize {
            let gi = (at(i + 1, j - 1) + 2.0 * at(i + 1, j) + at(i + 1, j + 1))
                - (at(i - 1, j - 1) + 2.0 * at(i - 1, j) + at(i - 1, j + 1));
            let gj = (at(i - 1, j + 1) + 2.0 * at(i, j + 1) + at(i + 1, j + 1))
                - (at(i - 1, j - 1) + 2.0 * at(i, j - 1) + at(i + 1, j - 1));
            out[i as usize * w + j as usize] = libm::hypot(gi, gj);
        }
    }
    out
}

/// `2 / (k1 k2) sum ln(max / min)` over blocks; blocks with a zero extreme add 0.
fn eme(plane: &[f64], h: usize, w: usize, block: usize) -> f64 {
    let re = block_edges(h, block);
    let ce = block_edges(w, block);
    let (k1, k2) = (re.len() - 1, ce.len() - 1);
    let mut acc = 0.0;
    for bi in 0..k1 {
        for bj in 0..k2 {
            let (mut mx, mut mn) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in re[bi]..re[bi + 1] {
                for &v in &plane[i * w + ce[bj]..i * w + ce[bj + 1]] {
                    mx = mx.max(v);
                    mn = mn.min(v);
                }
            }
            if mn > 0.0 && mx > 0.0 {
                acc += libm::log(mx / mn);
            }
        }
    }
    2.0 / (k1 * k2) as f64 * acc
}

fn uism(img: &UnitImage, cfg: &UiqmConfig) -> f64 {
    let (h, w) = img.dims();
    let mut total = 0.0;
    for c in 0..3 {
        let plane: Vec<f64> = img.buf().channel(c).iter().map(|v| 255.0 * v).collect();
        let mut mag = sobel_magnitude(&plane, h, w);
        let peak = mag.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            mag.iter_mut().for_each(|m| *m *= 255.0 / peak);
        }
        let edge: Vec<f64> = mag.iter().zip(&plane).map(|(m, p)| m * p).collect();
        total += cfg.channel_weights[c] * eme(&edge, h, w, cfg.block);
    }
    total
}

/// `-1 / (k1 k2) sum r ln r` with `r = (max - min) / (max + min)` per block,
/// extremes taken over all three channels; degenerate blocks add 0.
fn uiconm(img: &UnitImage, cfg: &UiqmConfig) -> f64 {
    let (h, w) = img.dims();
    let re = block_edges(h, cfg.block);
    let ce = block_edges(w, cfg.block);
    let (k1, k2) = (re.len() - 1, ce.len() - 1);
    let mut acc = 0.0;
    for bi in 0..k1 {
        for bj in 0..k2 {
            let (mut mx, mut mn) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in re[bi]..re[bi + 1] {
                for j in ce[bj]..ce[bj + 1] {
                    for v in img.pixel(i, j) {
                        mx = mx.max(255.0 * v);
                        mn = mn.min(255.0 * v);
                    }
                }
            }
            let (top, bot) = (mx - mn, mx + mn);
            if top > 0.0 && bot > 0.0 {
                let r = top / bot;
                acc += r * libm::log(r);
            }
        }
    }
    -acc / (k1 * k2) as f64
}

pub fn uiqm(img: &UnitImage) -> f64 {
    uiqm_with(img, &UiqmConfig::default())
}

/// `c1 UICM + c2 UISM + c3 UIConM` on the 0..255 scale.
pub fn uiqm_with(img: &UnitImage, cfg: &UiqmConfig) -> f64 {
    let [c1, c2, c3] = cfg.weights;
    c1 * uicm(img, cfg) + c2 * uism(img, cfg) + c3 * uiconm(img, cfg)
}

/// The three UIQM components `(UICM, UISM, UIConM)`.
pub fn uiqm_components(img: &UnitImage, cfg: &UiqmConfig) -> [f64; 3] {
    [uicm(img, cfg), uism(img, cfg), uiconm(img, cfg)]
}

fn same_dims(a: &UnitImage, b: &UnitImage) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// Mean per-pixel angle between RGB vectors, in degrees. Pixels where either
/// vector is zero are skipped; if none remain the result is 0.
pub fn angular_error(img: &UnitImage, reference: &UnitImage) -> Result<f64> {
    same_dims(img, reference)?;
    let (mut acc, mut count) = (0.0, 0usize);
    for (p, q) in img.pixels().zip(reference.pixels()) {
        let np = p.iter().map(|v| v * v).sum::<f64>();
        let nq = q.iter().map(|v| v * v).sum::<f64>();
        if np == 0.0 || nq == 0.0 {
            continue;
        }
        let dot = p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
        let cross = [p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2], p[0] * q[1] - p[1] * q[0]];
        let cn = libm::sqrt(cross.iter().map(|v| v * v).sum::<f64>());
        acc += libm::atan2(cn, dot);
        count += 1;
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok((acc / count as f64).to_degrees())
}

/// Peak signal-to-noise ratio with peak 1; identical images give `+inf`.
pub fn psnr(a: &UnitImage, b: &UnitImage) -> Result<f64> {
    same_dims(a, b)?;
    let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(1.0 / mse))
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut w = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (di, dj) = (i as f64 - c, j as f64 - c);
            w.push(libm::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma)));
        }
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

pub fn ssim(a: &UnitImage, b: &UnitImage) -> Result<f64> {
    ssim_with(a, b, &SsimConfig::default())
}

/// Gaussian-windowed SSIM over valid window positions, averaged over the
/// map and then over channels. Images smaller than the window use the
/// largest odd window that fits.
pub fn ssim_with(a: &UnitImage, b: &UnitImage, cfg: &SsimConfig) -> Result<f64> {
    same_dims(a, b)?;
    let (h, w) = a.dims();
    let mut size = cfg.window.min(h).min(w);
    if size % 2 == 0 {
        size -= 1;
    }
    let win = gaussian_window(size, cfg.sigma);
    let c1 = (cfg.k1 * 1.0) * (cfg.k1 * 1.0);
    let c2 = (cfg.k2 * 1.0) * (cfg.k2 * 1.0);
    let (ho, wo) = (h - size + 1, w - size + 1);
    let mut total = 0.0;
    for c in 0..3 {
        let x = a.buf().channel(c);
        let y = b.buf().channel(c);
        let mut acc = 0.0;
        for i in 0..ho {
            for j in 0..wo {
                let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for di in 0..size {
                    for dj in 0..size {
                        let g = win[di * size + dj];
                        let p = x[(i + di) * w + j + dj];
                        let q = y[(i + di) * w + j + dj];
                        mx += g * p;
                        my += g * q;
                        xx += g * p * p;
                        yy += g * q * q;
                        xy += g * p * q;
                    }
                }
                let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
                acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
        total += acc / (ho * wo) as f64;
    }
    Ok(total / 3.0)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value".into()));
    }
    Ok(())
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Pearson linear correlation.
pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(x, y)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn srocc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Aggregated subjective score of one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MosRecord {
    pub image_id: String,
    /// Per-rater scores on the 1..5 scale.
    pub raw_scores: Vec<f64>,
    /// Which raw scores survived outlier screening.
    pub retained: Vec<bool>,
    /// Mean opinion score on the 1..100 scale.
    pub mos: f64,
    /// True when screening removed everything and the unfiltered mean was used.
    pub fallback: bool,
}

/// Relative slack on the 2-sigma cut so that a score sitting exactly on the
/// boundary is screened despite rounding.
const SCREEN_TOL: f64 = 1e-9;

/// Screens scores at `|x - mean| >= 2 sigma` (population sigma, one pass),
/// averages the rest and maps `[1, 5]` linearly onto `[1, 100]`.
pub fn aggregate_mos(image_id: impl Into<String>, raw: &[f64]) -> Result<MosRecord> {
    if raw.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 raters, got {}", raw.len())));
    }
    if let Some(v) = raw.iter().find(|v| !(1.0..=5.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("raw score {} outside [1, 5]", v)));
    }
    let m = mean(raw);
    let sd = std_pop(raw);
    let retained: Vec<bool> = raw
        .iter()
        .map(|x| sd == 0.0 || libm::fabs(x - m) < 2.0 * sd * (1.0 - SCREEN_TOL))
        .collect();
    let kept: Vec<f64> = raw.iter().zip(&retained).filter(|(_, k)| **k).map(|(x, _)| *x).collect();
    let (m5, fallback) = if kept.is_empty() { (m, true) } else { (mean(&kept), false) };
    let mos = (1.0 + (m5 - 1.0) * 99.0 / 4.0).clamp(1.0, 100.0);
    Ok(MosRecord { image_id: image_id.into(), raw_scores: raw.to_vec(), retained, mos, fallback })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Uciqe,
    Uiqm,
    Ruiqa,
    Psnr,
    Ssim,
    Angular,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] =
        [MetricKind::Uciqe, MetricKind::Uiqm, MetricKind::Ruiqa, MetricKind::Psnr, MetricKind::Ssim, MetricKind::Angular];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Uciqe => "uciqe",
            MetricKind::Uiqm => "uiqm",
            MetricKind::Ruiqa => "ruiqa",
            MetricKind::Psnr => "psnr",
            MetricKind::Ssim => "ssim",
            MetricKind::Angular => "angular",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{}`", s)))
    }

    pub fn needs_reference(self) -> bool {
        matches!(self, MetricKind::Psnr | MetricKind::Ssim | MetricKind::Angular)
    }
}

/// Per-image metric values plus their arithmetic means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: Vec<MetricKind>,
    pub image_ids: Vec<String>,
    /// `values[i][m]` is metric `metrics[m]` on image `i`.
    pub values: Vec<Vec<f64>>,
}

impl MetricReport {
    pub fn aggregate(&self) -> Vec<f64> {
        (0..self.metrics.len())
            .map(|m| self.values.iter().map(|row| row[m]).sum::<f64>() / self.values.len() as f64)
            .collect()
    }

    pub fn column(&self, kind: MetricKind) -> Option<Vec<f64>> {
        let m = self.metrics.iter().position(|k| *k == kind)?;
        Some(self.values.iter().map(|row| row[m]).collect())
    }
}

/// Evaluates `metrics` on every prediction. Full-reference metrics need
/// `references` (aligned with `preds`); `ruiqa` needs a scorer callback.
pub fn evaluate(
    preds: &[(String, UnitImage)],
    references: Option<&[UnitImage]>,
    metrics: &[MetricKind],
    ruiqa: Option<&dyn Fn(&UnitImage) -> Result<f64>>,
) -> Result<MetricReport> {
    if preds.is_empty() {
        return Err(Error::EmptyDataset("no images to evaluate".into()));
    }
    if let Some(r) = references {
        if r.len() != preds.len() {
            return Err(Error::InvalidArgument(format!("{} predictions but {} references", preds.len(), r.len())));
        }
    }
    let mut values = Vec::with_capacity(preds.len());
    for (i, (_, img)) in preds.iter().enumerate() {
        let mut row = Vec::with_capacity(metrics.len());
        for &m in metrics {
            let reference = || {
                references
                    .map(|r| &r[i])
                    .ok_or_else(|| Error::InvalidArgument(format!("metric `{}` needs reference images", m.name())))
            };
            row.push(match m {
                MetricKind::Uciqe => uciqe(img),
                MetricKind::Uiqm => uiqm(img),
                MetricKind::Ruiqa => match ruiqa {
                    Some(f) => f(img)?,
                    None => return Err(Error::MissingModel("ruiqa metric needs a quality scorer".into())),
                },
                MetricKind::Psnr => psnr(img, reference()?)?,
                MetricKind::Ssim => ssim(img, reference()?)?,
                MetricKind::Angular => angular_error(img, reference()?)?,
            });
        }
        values.push(row);
    }
    Ok(MetricReport {
        metrics: metrics.to_vec(),
        image_ids: preds.iter().map(|(id, _)| id.clone()).collect(),
        values,
    })
}
