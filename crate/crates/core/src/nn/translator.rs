use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_image_input, instance_norm, Conv, DenseBlock, Module, ParamBuilder, ParamSet};
use crate::autograd::{Graph, Var};
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslatorConfig {
    pub width: usize,
    pub growth: usize,
    pub seed: u64,
}

impl Default for TranslatorConfig {
    fn default() -> Self {
        Self { width: 16, growth: 8, seed: 0 }
    }
}

/// Full-resolution image-to-image translator.
///
/// `Conv1` (3x3 conv, instance norm, ReLU), three residual dense blocks, and
/// a fusion 3x3 conv over the concatenated block outputs followed by Tanh.
/// There is no down-sampling anywhere, so output size equals input size.
#[derive(Clone, Debug)]
pub struct Translator {
    config: TranslatorConfig,
    params: ParamSet,
    head: Conv,
    blocks: Vec<DenseBlock>,
    fusion: Conv,
}

impl Translator {
    pub fn new(config: TranslatorConfig) -> Self {
        let mut b = ParamBuilder::new(config.seed);
        let c = config.width;
        let head = b.conv("conv1", 3, c, 3, 1, 1, true, 1.0);
        let blocks = (0..3).map(|i| DenseBlock::new(&mut b, &format!("rdb{}", i + 2), c, config.growth)).collect();
        let fusion = b.conv("fusion", 3 * c, 3, 3, 1, 1, true, 0.5);
        Self { config, params: b.finish(), head, blocks, fusion }
    }

    pub fn config(&self) -> &TranslatorConfig {
        &self.config
    }

    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        check_image_input(g.value(x), 1, "translator")?;
        let h = self.head.apply(g, p, x);
        let h = instance_norm(g, h);
        let mut cur = g.relu(h);
        let mut outs = Vec::with_capacity(3);
        for blk in &self.blocks {
            cur = blk.apply(g, p, cur);
            outs.push(cur);
        }
        let cat = g.concat_channels(&outs);
        let y = self.fusion.apply(g, p, cat);
        Ok(g.tanh(y))
    }

    /// Inference on a `[n, 3, h, w]` batch.
    pub fn eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let y = self.forward(&mut g, &p, xv)?;
        Ok(g.value(y).clone())
    }
}

impl Module for Translator {
    fn params(&self) -> &ParamSet {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}
