//! Parametric function blocks: translators, enhancers, patch critics, frozen
//! feature extractors and the rank backbone, plus the shared parameter store
//! and Adam optimizer.

mod backbone;
mod critic;
mod enhancer;
mod features;
mod translator;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub use backbone::{BackboneConfig, RankBackbone, Scorer, ScorerHead, TAP_NAMES};
pub use critic::{ConstantCritic, Critic, CriticConfig, CriticKind, FnCritic, LinearCritic, PatchCritic};
pub use enhancer::{Enhancer, EnhancerConfig};
pub use features::{FeatureExtractor, FeatureExtractorConfig, TAP_WEIGHTS};
pub use translator::{Translator, TranslatorConfig};

pub(crate) const LEAK: f64 = 0.2;

/// Named, ordered parameter tensors of one model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        self.names.push(name.into());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every tensor on `g`, as trainable inputs or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| if trainable { g.input(t.clone()) } else { g.constant(t.clone()) })
            .collect()
    }

    /// Replaces the tensors with `other`'s after checking names and shapes agree.
    pub fn load_from(&mut self, other: &ParamSet) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Checkpoint(format!(
                "architecture mismatch: expected {} parameter tensors, found {}",
                self.len(),
                other.len()
            )));
        }
        for (i, (name, t)) in other.names.iter().zip(&other.tensors).enumerate() {
            if *name != self.names[i] || t.shape() != self.tensors[i].shape() {
                return Err(Error::Checkpoint(format!(
                    "architecture mismatch at `{}`: expected {:?} {:?}, found `{}` {:?}",
                    self.names[i],
                    self.names[i],
                    self.tensors[i].shape(),
                    name,
                    t.shape()
                )));
            }
        }
        self.tensors.clone_from(&other.tensors);
        Ok(())
    }

    /// True when every value matches bit for bit.
    pub fn bit_eq(&self, other: &ParamSet) -> bool {
        self.names == other.names
            && self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| {
                a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

/// Anything owning a [`ParamSet`].
pub trait Module {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
}

/// Convolution layer descriptor; its weights live in the owning [`ParamSet`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct Conv {
    w: usize,
    b: Option<usize>,
    stride: usize,
    pad: usize,
}

impl Conv {
    pub fn apply(&self, g: &mut Graph, p: &[Var], x: Var) -> Var {
        let y = g.conv2d(x, p[self.w], self.stride, self.pad);
        match self.b {
            Some(b) => {
                let s = g.shape(y);
                let bb = g.broadcast(p[b], s);
                g.add(y, bb)
            }
            None => y,
        }
    }

    pub fn weight_index(&self) -> usize {
        self.w
    }
}

/// Creates parameters with He-normal initialisation from a seeded stream.
pub(crate) struct ParamBuilder {
    set: ParamSet,
    rng: ChaCha8Rng,
}

impl ParamBuilder {
    pub fn new(seed: u64) -> Self {
        Self::extend(ParamSet::new(), seed)
    }

    /// Appends new parameters after the ones already in `set`.
    pub fn extend(set: ParamSet, seed: u64) -> Self {
        Self { set, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn normal(&mut self, shape: Shape, std: f64) -> Tensor {
        let dist = Normal::new(0.0, std).expect("positive std");
        let n = crate::tensor::numel(shape);
        Tensor::from_vec(shape, (0..n).map(|_| dist.sample(&mut self.rng)).collect())
    }

    /// `k x k` convolution; `gain` scales the He standard deviation.
    #[allow(clippy::too_many_arguments)]
    pub fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, stride: usize, pad: usize, bias: bool, gain: f64) -> Conv {
        let fan_in = (cin * k * k) as f64;
        let std = gain * libm::sqrt(2.0 / ((1.0 + LEAK * LEAK) * fan_in));
        let w = self.normal([cout, cin, k, k], std);
        let w = self.set.push(format!("{}.weight", name), w);
        let b = bias.then(|| self.set.push(format!("{}.bias", name), Tensor::zeros([1, cout, 1, 1])));
        Conv { w, b, stride, pad }
    }

    /// Fully connected layer on `[n, cin, 1, 1]` vectors.
    pub fn linear(&mut self, name: &str, cin: usize, cout: usize, bias: bool, gain: f64) -> Conv {
        self.conv(name, cin, cout, 1, 1, 0, bias, gain)
    }

    pub fn finish(self) -> ParamSet {
        self.set
    }
}

/// Channel-concatenating block: two growth convolutions and a 1x1 fusion
/// back to the input width, added to the input.
#[derive(Clone, Debug)]
pub(crate) struct DenseBlock {
    c1: Conv,
    c2: Conv,
    fuse: Conv,
}

impl DenseBlock {
    pub fn new(b: &mut ParamBuilder, name: &str, width: usize, growth: usize) -> Self {
        Self {
            c1: b.conv(&format!("{}.conv1", name), width, growth, 3, 1, 1, true, 1.0),
            c2: b.conv(&format!("{}.conv2", name), width + growth, growth, 3, 1, 1, true, 1.0),
            fuse: b.conv(&format!("{}.fuse", name), width + 2 * growth, width, 1, 1, 0, true, 0.5),
        }
    }

    pub fn apply(&self, g: &mut Graph, p: &[Var], x: Var) -> Var {
        let a = self.c1.apply(g, p, x);
        let a = g.leaky_relu(a, LEAK);
        let cat = g.concat_channels(&[x, a]);
        let b = self.c2.apply(g, p, cat);
        let b = g.leaky_relu(b, LEAK);
        let cat = g.concat_channels(&[x, a, b]);
        let f = self.fuse.apply(g, p, cat);
        g.add(x, f)
    }
}

/// Instance normalisation without affine parameters.
pub(crate) fn instance_norm(g: &mut Graph, x: Var) -> Var {
    let s = g.shape(x);
    let mu = g.spatial_mean(x);
    let mu = g.broadcast(mu, s);
    let xc = g.sub(x, mu);
    let sq = g.square(xc);
    let var = g.spatial_mean(sq);
    let var = g.add_const(var, 1e-5);
    let sd = g.sqrt(var);
    let inv = g.recip(sd);
    let inv = g.broadcast(inv, s);
    g.mul(xc, inv)
}

pub(crate) fn check_image_input(t: &Tensor, multiple: usize, what: &str) -> Result<()> {
    let [n, c, h, w] = t.shape();
    if n == 0 || c != 3 {
        return Err(Error::ShapeMismatch(format!("{} expects [n, 3, h, w], got {:?}", what, t.shape())));
    }
    if h < crate::image::MIN_SIDE || w < crate::image::MIN_SIDE {
        return Err(Error::ShapeMismatch(format!(
            "{} needs at least {}x{} input, got {}x{}",
            what,
            crate::image::MIN_SIDE,
            crate::image::MIN_SIDE,
            h,
            w
        )));
    }
    if h % multiple != 0 || w % multiple != 0 {
        return Err(Error::ShapeMismatch(format!("{} needs sides divisible by {}, got {}x{}", what, multiple, h, w)));
    }
    Ok(())
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

impl Adam {
    pub fn new(params: &ParamSet, betas: (f64, f64)) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self { beta1: betas.0, beta2: betas.1, eps: 1e-8, m: zeros.clone(), v: zeros, t: 0 }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor], lr: f64) {
        self.step_scaled(params, grads, lr, |_| 1.0)
    }

    /// Like [`Adam::step`] with the rate of tensor `i` multiplied by `scale(i)`.
    pub fn step_scaled(&mut self, params: &mut ParamSet, grads: &[Tensor], lr: f64, scale: impl Fn(usize) -> f64) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter tensor");
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for (i, p) in params.tensors_mut().iter_mut().enumerate() {
            let lr = lr * scale(i);
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                *w -= lr * mh / (libm::sqrt(vh) + self.eps);
            }
        }
    }
}
