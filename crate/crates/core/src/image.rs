//! Image containers, color-space math, range normalization and augmentation.
//!
//! Pixels are stored interleaved (`H x W x 3`, row-major). [`UnitImage`]
//! holds values in `[0, 1]` and is what metrics and file IO see;
//! [`NormImage`] holds values in `[-1, 1]` and is what networks consume.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Smallest side length accepted by the networks and the dataset builder.
pub const MIN_SIDE: usize = 8;

/// Raw three-channel image buffer with no range constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuf {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageBuf {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!("non-positive size {}x{}", height, width)));
        }
        if data.len() != height * width * 3 {
            return Err(Error::InvalidImage(format!(
                "expected {} values for {}x{}x3, got {}",
                height * width * 3,
                height,
                width,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidImage("non-finite pixel value".into()));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for i in 0..height {
            for j in 0..width {
                data.extend_from_slice(&f(i, j));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, i: usize, j: usize) -> [f64; 3] {
        let o = (i * self.width + j) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Single channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    fn permuted(&self, out_h: usize, out_w: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> Self {
        Self::from_fn(out_h, out_w, |i, j| {
            let (si, sj) = src(i, j);
            self.pixel(si, sj)
        })
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn rot90(&self) -> Self {
        let (h, w) = self.dims();
        self.permuted(w, h, |i, j| (j, w - 1 - i))
    }

    pub fn rot180(&self) -> Self {
        let (h, w) = self.dims();
        self.permuted(h, w, |i, j| (h - 1 - i, w - 1 - j))
    }

    pub fn rot270(&self) -> Self {
        let (h, w) = self.dims();
        self.permuted(w, h, |i, j| (h - 1 - j, i))
    }

    pub fn hflip(&self) -> Self {
        let (h, w) = self.dims();
        self.permuted(h, w, |i, j| (i, w - 1 - j))
    }

    pub fn vflip(&self) -> Self {
        let (h, w) = self.dims();
        self.permuted(h, w, |i, j| (h - 1 - i, j))
    }
}

/// Image with every channel value in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitImage(ImageBuf);

/// Image with every channel value in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormImage(ImageBuf);

macro_rules! ranged_image {
    ($ty:ident, $lo:expr, $hi:expr) => {
        impl $ty {
            pub fn new(buf: ImageBuf) -> Result<Self> {
                if let Some(v) = buf.data.iter().find(|v| !(**v >= $lo && **v <= $hi)) {
                    return Err(Error::InvalidImage(format!(
                        "{} value {} outside [{}, {}]",
                        stringify!($ty),
                        v,
                        $lo,
                        $hi
                    )));
                }
                Ok(Self(buf))
            }

            /// Builds from a pixel function, clamping into range.
            pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
                let buf = ImageBuf::from_fn(height, width, |i, j| f(i, j).map(|v| v.clamp($lo, $hi)));
                Self(buf)
            }

            pub fn constant(height: usize, width: usize, rgb: [f64; 3]) -> Self {
                Self::from_fn(height, width, |_, _| rgb)
            }

            pub fn buf(&self) -> &ImageBuf {
                &self.0
            }

            pub fn into_buf(self) -> ImageBuf {
                self.0
            }

            pub fn height(&self) -> usize {
                self.0.height
            }

            pub fn width(&self) -> usize {
                self.0.width
            }

            pub fn dims(&self) -> (usize, usize) {
                self.0.dims()
            }

            pub fn data(&self) -> &[f64] {
                &self.0.data
            }

            pub fn pixel(&self, i: usize, j: usize) -> [f64; 3] {
                self.0.pixel(i, j)
            }

            pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
                self.0.pixels()
            }

            pub fn augment(&self, op: Augment) -> Self {
                Self(op.apply(&self.0))
            }
        }
    };
}

ranged_image!(UnitImage, 0.0, 1.0);
ranged_image!(NormImage, -1.0, 1.0);

impl UnitImage {
    /// Rounds every value to the nearest multiple of 1/255, matching 8-bit storage.
    pub fn quantize8(&self) -> Self {
        Self(self.0.map(|v| libm::round(v * 255.0) / 255.0))
    }
}

impl NormImage {
    /// Sample `n` of an `[N, 3, H, W]` tensor, clamped into `[-1, 1]`.
    pub fn from_tensor(t: &Tensor, n: usize) -> Result<Self> {
        let [_, c, h, w] = t.shape();
        if c != 3 {
            return Err(Error::ShapeMismatch(format!("expected 3 channels, got {}", c)));
        }
        let plane = h * w;
        let base = n * 3 * plane;
        let d = t.data();
        let buf = ImageBuf::new(
            h,
            w,
            (0..plane).flat_map(|p| (0..3).map(move |ch| (p, ch))).map(|(p, ch)| d[base + ch * plane + p]).collect(),
        )?;
        Ok(Self(buf.map(|v| v.clamp(-1.0, 1.0))))
    }
}

/// Stacks images into an `[N, 3, H, W]` tensor. All images must share a size.
pub fn to_tensor(images: &[&NormImage]) -> Result<Tensor> {
    let Some(first) = images.first() else {
        return Err(Error::InvalidArgument("empty image batch".into()));
    };
    let (h, w) = first.dims();
    let plane = h * w;
    let mut data = Vec::with_capacity(images.len() * 3 * plane);
    for img in images {
        if img.dims() != (h, w) {
            return Err(Error::ShapeMismatch(format!("batch mixes {:?} and {:?}", (h, w), img.dims())));
        }
        for ch in 0..3 {
            data.extend(img.data().iter().skip(ch).step_by(3));
        }
    }
    Ok(Tensor::from_vec([images.len(), 3, h, w], data))
}

/// Affine map `x -> 2x - 1`.
pub fn normalize(img: &UnitImage) -> NormImage {
    NormImage(img.0.map(|v| 2.0 * v - 1.0))
}

/// Affine map `x -> (x + 1) / 2`, clamped to `[0, 1]`.
pub fn denormalize(img: &NormImage) -> UnitImage {
    UnitImage(img.0.map(|v| ((v + 1.0) * 0.5).clamp(0.0, 1.0)))
}

/// Lossless geometric augmentations used during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Augment {
    None,
    Rot90,
    Rot180,
    Rot270,
    HFlip,
}

impl Augment {
    pub const ALL: [Augment; 5] = [Augment::None, Augment::Rot90, Augment::Rot180, Augment::Rot270, Augment::HFlip];

    pub fn apply(self, img: &ImageBuf) -> ImageBuf {
        match self {
            Augment::None => img.clone(),
            Augment::Rot90 => img.rot90(),
            Augment::Rot180 => img.rot180(),
            Augment::Rot270 => img.rot270(),
            Augment::HFlip => img.hflip(),
        }
    }
}

/// Bilinear resampling with half-pixel centres (`align_corners = false`):
/// output pixel `i` samples source coordinate `(i + 0.5) * in / out - 0.5`,
/// clamped to the border.
pub fn resize(img: &UnitImage, height: usize, width: usize) -> Result<UnitImage> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!("resize target {}x{} must be positive", height, width)));
    }
    let (h, w) = img.dims();
    if (h, w) == (height, width) {
        return Ok(img.clone());
    }
    let axis = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        (0..out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * inp as f64 / out as f64 - 0.5).clamp(0.0, (inp - 1) as f64);
                let lo = libm::floor(s) as usize;
                let hi = (lo + 1).min(inp - 1);
                (lo, hi, s - lo as f64)
            })
            .collect()
    };
    let rows = axis(height, h);
    let cols = axis(width, w);
    Ok(UnitImage::from_fn(height, width, |i, j| {
        let (r0, r1, fr) = rows[i];
        let (c0, c1, fc) = cols[j];
        let (a, b, c, d) = (img.pixel(r0, c0), img.pixel(r0, c1), img.pixel(r1, c0), img.pixel(r1, c1));
        core::array::from_fn(|k| {
            let top = a[k] * (1.0 - fc) + b[k] * fc;
            let bot = c[k] * (1.0 - fc) + d[k] * fc;
            top * (1.0 - fr) + bot * fr
        })
    }))
}

/// CIE L*a*b* planes.
#[derive(Clone, Debug, PartialEq)]
pub struct LabImage {
    pub height: usize,
    pub width: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LabImage {
    pub fn mean_b(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.b.len() as f64
    }
}

// sRGB primaries, D65.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

fn srgb_decode(v: f64) -> f64 {
    if v <= 0.040_45 {
        v / 12.92
    } else {
        libm::pow((v + 0.055) / 1.055, 2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        libm::cbrt(t)
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one sRGB pixel in `[0, 1]` to L*a*b*. The white point is the
/// image of RGB white under the matrix, so neutral pixels map to `a = b = 0`.
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_decode);
    let xyz: [f64; 3] = core::array::from_fn(|r| (0..3).map(|c| RGB_TO_XYZ[r][c] * lin[c]).sum());
    let white: [f64; 3] = core::array::from_fn(|r| RGB_TO_XYZ[r].iter().sum());
    let f: [f64; 3] = core::array::from_fn(|k| lab_f(xyz[k] / white[k]));
    [116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

pub fn rgb_to_lab(img: &UnitImage) -> LabImage {
    let n = img.height() * img.width();
    let (mut l, mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for p in img.pixels() {
        let lab = srgb_to_lab(p);
        l.push(lab[0]);
        a.push(lab[1]);
        b.push(lab[2]);
    }
    LabImage { height: img.height(), width: img.width(), l, a, b }
}
