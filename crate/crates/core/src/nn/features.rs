use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Conv, Module, ParamBuilder, ParamSet};
use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Content-loss weights for taps 1..=5, shallow to deep.
pub const TAP_WEIGHTS: [f64; 5] = [1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureExtractorConfig {
    pub widths: [usize; 5],
    pub seed: u64,
}

impl Default for FeatureExtractorConfig {
    fn default() -> Self {
        Self { widths: [8, 16, 32, 32, 32], seed: 0x5eed_f00d }
    }
}

/// Frozen multi-scale feature stack.
///
/// Tap 1 is `relu(conv3x3(x))` at full resolution; tap `k+1` is
/// `relu(conv3x3(avgpool2(tap k)))`, so each tap is half the size of the
/// previous one. Weights come from a fixed seed unless replaced through
/// [`FeatureExtractor::load_weights`]. They are always recorded as graph
/// constants and never receive gradients.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    config: FeatureExtractorConfig,
    params: ParamSet,
    convs: Vec<Conv>,
}

impl FeatureExtractor {
    /// Smallest input side giving a non-empty fifth tap.
    pub const MIN_INPUT: usize = 16;

    pub fn new(config: FeatureExtractorConfig) -> Self {
        let mut b = ParamBuilder::new(config.seed);
        let mut cin = 3;
        let convs = config
            .widths
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let c = b.conv(&format!("conv{}_1", i + 1), cin, w, 3, 1, 1, true, 1.0);
                cin = w;
                c
            })
            .collect();
        Self { config, params: b.finish(), convs }
    }

    pub fn config(&self) -> &FeatureExtractorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Swaps in externally trained weights; names and shapes must match.
    pub fn load_weights(&mut self, weights: &ParamSet) -> Result<()> {
        self.params.load_from(weights)
    }

    /// Records the frozen weights on `g`. Bind once per graph and reuse.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.params.bind(g, false)
    }

    /// Five taps of `x` (`[n, 3, h, w]`), shallow to deep.
    pub fn taps(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Vec<Var>> {
        let [_, c, h, w] = g.shape(x);
        if c != 3 {
            return Err(Error::ShapeMismatch(format!("feature extractor expects 3 channels, got {}", c)));
        }
        if h < Self::MIN_INPUT || w < Self::MIN_INPUT {
            return Err(Error::ShapeMismatch(format!(
                "feature extractor needs at least {0}x{0} input, got {1}x{2}",
                Self::MIN_INPUT,
                h,
                w
            )));
        }
        let mut out = Vec::with_capacity(5);
        let mut cur = x;
        for (i, conv) in self.convs.iter().enumerate() {
            if i > 0 {
                cur = g.avg_pool2(cur);
            }
            let y = conv.apply(g, p, cur);
            cur = g.relu(y);
            out.push(cur);
        }
        Ok(out)
    }

    /// Tap values for a batch.
    pub fn extract(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut g = Graph::new();
        let p = self.bind(&mut g);
        let xv = g.constant(x.clone());
        let taps = self.taps(&mut g, &p, xv)?;
        Ok(taps.into_iter().map(|t| g.value(t).clone()).collect())
    }
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self::new(FeatureExtractorConfig::default())
    }
}

impl Module for FeatureExtractor {
    fn params(&self) -> &ParamSet {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}
