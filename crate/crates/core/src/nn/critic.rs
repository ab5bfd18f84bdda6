use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Conv, Module, ParamBuilder, ParamSet, LEAK};
use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A Wasserstein critic mapping a batch to a per-sample patch score map.
pub trait Critic {
    fn params(&self) -> &ParamSet;

    /// Real-valued `[n, 1, h', w']` score map (no output squashing).
    fn score_map(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var>;

    /// Whether the score map can be differentiated twice through the tape.
    fn twice_differentiable(&self) -> bool {
        true
    }

    /// Per-sample critic value: the mean of the patch map, shape `[n, 1, 1, 1]`.
    fn sample_scores(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        let m = self.score_map(g, p, x)?;
        let [n, c, h, w] = g.shape(m);
        let r = g.reduce(m, [n, 1, 1, 1]);
        Ok(g.scale(r, 1.0 / (c * h * w) as f64))
    }

    /// Batch critic value: the mean over every patch of every sample.
    fn mean_score(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        let m = self.score_map(g, p, x)?;
        Ok(g.mean(m))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticKind {
    /// Consumes RGB images.
    Image,
    /// Consumes enhancer encoder features.
    Feature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub kind: CriticKind,
    pub in_channels: usize,
    pub width: usize,
    /// Number of 4x4 stride-2 layers; each halves the map size.
    pub downsamples: usize,
    pub seed: u64,
}

impl CriticConfig {
    /// Three stride-2 stages: a 256x256 image gives a 32x32 patch map and a
    /// 64x64 image an 8x8 one. Receptive field of one patch: 38x38 pixels.
    pub fn image(width: usize, seed: u64) -> Self {
        Self { kind: CriticKind::Image, in_channels: 3, width, downsamples: 3, seed }
    }

    /// One stride-2 stage over encoder features of `channels` channels.
    pub fn feature(channels: usize, width: usize, seed: u64) -> Self {
        Self { kind: CriticKind::Feature, in_channels: channels, width, downsamples: 1, seed }
    }

    /// Patch map size for an input of side `side`.
    pub fn map_side(&self, side: usize) -> usize {
        (0..self.downsamples).fold(side, |s, _| s / 2)
    }

    /// Receptive field (in input pixels) of one patch score.
    pub fn receptive_field(&self) -> usize {
        // final 3x3 stride-1 layer, then each 4x4 stride-2 layer walking back.
        let mut rf = 3;
        for _ in 0..self.downsamples {
            rf = (rf - 1) * 2 + 4;
        }
        rf
    }
}

/// PatchGAN-style critic: `downsamples` x (4x4 stride-2 conv + LeakyReLU),
/// then a bias-free 3x3 conv to one channel. No normalisation layers.
#[derive(Clone, Debug)]
pub struct PatchCritic {
    config: CriticConfig,
    params: ParamSet,
    layers: Vec<Conv>,
    last: Conv,
}

impl PatchCritic {
    pub fn new(config: CriticConfig) -> Self {
        let mut b = ParamBuilder::new(config.seed);
        let mut cin = config.in_channels;
        let mut layers = Vec::new();
        for i in 0..config.downsamples {
            let cout = config.width << i.min(3);
            layers.push(b.conv(&format!("down{}", i), cin, cout, 4, 2, 1, true, 1.0));
            cin = cout;
        }
        let last = b.conv("score", cin, 1, 3, 1, 1, false, 1.0);
        Self { config, params: b.finish(), layers, last }
    }

    pub fn config(&self) -> &CriticConfig {
        &self.config
    }

    /// Index of the final layer's weight tensor.
    pub fn final_weight_index(&self) -> usize {
        self.last.weight_index()
    }

    /// Inference patch map for a batch.
    pub fn eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let m = self.score_map(&mut g, &p, xv)?;
        Ok(g.value(m).clone())
    }
}

impl Critic for PatchCritic {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn score_map(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        let [_, c, h, w] = g.shape(x);
        if c != self.config.in_channels {
            let (expected, got) = match self.config.kind {
                CriticKind::Image => ("image", format!("{}-channel input", c)),
                CriticKind::Feature => ("feature-map", format!("{}-channel input", c)),
            };
            return Err(Error::WrongCriticVariant { expected, got });
        }
        let min = 1usize << self.config.downsamples;
        if h < min || w < min {
            return Err(Error::ShapeMismatch(format!("critic input {}x{} smaller than {}", h, w, min)));
        }
        let mut cur = x;
        for l in &self.layers {
            let y = l.apply(g, p, cur);
            cur = g.leaky_relu(y, LEAK);
        }
        Ok(self.last.apply(g, p, cur))
    }
}

impl Module for PatchCritic {
    fn params(&self) -> &ParamSet {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}

/// Critic whose score is the same constant for every input.
#[derive(Clone, Debug, Default)]
pub struct ConstantCritic {
    pub value: f64,
    params: ParamSet,
}

impl ConstantCritic {
    pub fn new(value: f64) -> Self {
        Self { value, params: ParamSet::new() }
    }
}

impl Critic for ConstantCritic {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn score_map(&self, g: &mut Graph, _p: &[Var], x: Var) -> Result<Var> {
        let n = g.shape(x)[0];
        Ok(g.constant(Tensor::full([n, 1, 1, 1], self.value)))
    }
}

/// `f(x) = <w, x>` per sample, with `w` a trainable `[1, c, h, w]` tensor.
#[derive(Clone, Debug)]
pub struct LinearCritic {
    params: ParamSet,
}

impl LinearCritic {
    pub fn new(w: Tensor) -> Self {
        let mut params = ParamSet::new();
        params.push("w", w);
        Self { params }
    }
}

impl Critic for LinearCritic {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn score_map(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        let s = g.shape(x);
        if g.shape(p[0])[1..] != s[1..] {
            return Err(Error::ShapeMismatch(format!("linear critic {:?} vs input {:?}", g.shape(p[0]), s)));
        }
        let w = g.broadcast(p[0], s);
        let prod = g.mul(w, x);
        Ok(g.reduce(prod, [s[0], 1, 1, 1]))
    }
}

/// Value-only critic backed by a plain function. It records its output as a
/// constant, so it cannot take part in gradient-based objectives.
pub struct FnCritic {
    f: Box<dyn Fn(&Tensor) -> Tensor>,
    params: ParamSet,
}

impl FnCritic {
    pub fn new(f: impl Fn(&Tensor) -> Tensor + 'static) -> Self {
        Self { f: Box::new(f), params: ParamSet::new() }
    }
}

impl Critic for FnCritic {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn score_map(&self, g: &mut Graph, _p: &[Var], x: Var) -> Result<Var> {
        let v = (self.f)(g.value(x));
        Ok(g.constant(v))
    }

    fn twice_differentiable(&self) -> bool {
        false
    }
}
