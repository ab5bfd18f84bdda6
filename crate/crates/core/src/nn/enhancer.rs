use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_image_input, Conv, DenseBlock, Module, ParamBuilder, ParamSet, LEAK};
use crate::autograd::{Graph, Var};
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnhancerConfig {
    pub width: usize,
    pub growth: usize,
    pub seed: u64,
}

impl Default for EnhancerConfig {
    fn default() -> Self {
        Self { width: 16, growth: 8, seed: 1 }
    }
}

/// U-shaped encoder-decoder with a dense block at every level.
///
/// Levels run at full, half and quarter resolution with widths `C`, `2C`
/// and `4C`. The quarter-resolution bottleneck is the encoder output used for
/// feature-level alignment. Input sides must be divisible by 4.
#[derive(Clone, Debug)]
pub struct Enhancer {
    config: EnhancerConfig,
    params: ParamSet,
    enc0: Conv,
    enc0_db: DenseBlock,
    enc1: Conv,
    enc1_db: DenseBlock,
    enc2: Conv,
    enc2_db: DenseBlock,
    dec1: Conv,
    dec1_db: DenseBlock,
    dec0: Conv,
    dec0_db: DenseBlock,
    out: Conv,
}

impl Enhancer {
    pub fn new(config: EnhancerConfig) -> Self {
        let mut b = ParamBuilder::new(config.seed);
        let c = config.width;
        let gr = config.growth;
        let enc0 = b.conv("enc0", 3, c, 3, 1, 1, true, 1.0);
        let enc0_db = DenseBlock::new(&mut b, "enc0.db", c, gr);
        let enc1 = b.conv("enc1", c, 2 * c, 3, 2, 1, true, 1.0);
        let enc1_db = DenseBlock::new(&mut b, "enc1.db", 2 * c, 2 * gr);
        let enc2 = b.conv("enc2", 2 * c, 4 * c, 3, 2, 1, true, 1.0);
        let enc2_db = DenseBlock::new(&mut b, "enc2.db", 4 * c, 2 * gr);
        let dec1 = b.conv("dec1", 6 * c, 2 * c, 3, 1, 1, true, 1.0);
        let dec1_db = DenseBlock::new(&mut b, "dec1.db", 2 * c, 2 * gr);
        let dec0 = b.conv("dec0", 3 * c, c, 3, 1, 1, true, 1.0);
        let dec0_db = DenseBlock::new(&mut b, "dec0.db", c, gr);
        let out = b.conv("out", c, 3, 3, 1, 1, true, 0.5);
        Self {
            config,
            params: b.finish(),
            enc0,
            enc0_db,
            enc1,
            enc1_db,
            enc2,
            enc2_db,
            dec1,
            dec1_db,
            dec0,
            dec0_db,
            out,
        }
    }

    pub fn config(&self) -> &EnhancerConfig {
        &self.config
    }

    /// Shape of the encoder output for an `h x w` input.
    pub fn encoder_shape(&self, n: usize, h: usize, w: usize) -> [usize; 4] {
        [n, 4 * self.config.width, h / 4, w / 4]
    }

    /// Encoder only; returns the bottleneck features.
    pub fn encode(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        Ok(self.encode_levels(g, p, x)?.2)
    }

    fn encode_levels(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<(Var, Var, Var)> {
        check_image_input(g.value(x), 4, "enhancer")?;
        let e0 = self.enc0.apply(g, p, x);
        let e0 = g.leaky_relu(e0, LEAK);
        let e0 = self.enc0_db.apply(g, p, e0);
        let e1 = self.enc1.apply(g, p, e0);
        let e1 = g.leaky_relu(e1, LEAK);
        let e1 = self.enc1_db.apply(g, p, e1);
        let e2 = self.enc2.apply(g, p, e1);
        let e2 = g.leaky_relu(e2, LEAK);
        let e2 = self.enc2_db.apply(g, p, e2);
        Ok((e0, e1, e2))
    }

    /// Returns `(enhanced image, encoder features)`.
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<(Var, Var)> {
        let (e0, e1, e2) = self.encode_levels(g, p, x)?;
        let [_, _, h1, w1] = g.shape(e1);
        let u1 = g.upsample2(e2, (h1, w1));
        let d1 = g.concat_channels(&[u1, e1]);
        let d1 = self.dec1.apply(g, p, d1);
        let d1 = g.leaky_relu(d1, LEAK);
        let d1 = self.dec1_db.apply(g, p, d1);
        let [_, _, h0, w0] = g.shape(e0);
        let u0 = g.upsample2(d1, (h0, w0));
        let d0 = g.concat_channels(&[u0, e0]);
        let d0 = self.dec0.apply(g, p, d0);
        let d0 = g.leaky_relu(d0, LEAK);
        let d0 = self.dec0_db.apply(g, p, d0);
        let y = self.out.apply(g, p, d0);
        Ok((g.tanh(y), e2))
    }

    /// Inference on a `[n, 3, h, w]` batch: `(image, encoder features)`.
    pub fn eval(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let (y, f) = self.forward(&mut g, &p, xv)?;
        Ok((g.value(y).clone(), g.value(f).clone()))
    }

    /// Parameter-group names (prefix before the first dot) in declaration order.
    pub fn groups(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for n in self.params.names() {
            let head = n.split('.').next().unwrap_or(n);
            if !out.contains(&head) {
                out.push(head);
            }
        }
        out
    }
}

impl Module for Enhancer {
    fn params(&self) -> &ParamSet {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}
