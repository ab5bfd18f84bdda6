use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Conv, Module, ParamBuilder, ParamSet, LEAK};
use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Stage tap names, shallow to deep.
pub const TAP_NAMES: [&str; 4] = ["stage1", "stage2", "stage3", "stage4"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackboneConfig {
    pub width: usize,
    pub seed: u64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self { width: 8, seed: 7 }
    }
}

impl BackboneConfig {
    pub fn stage_widths(&self) -> [usize; 4] {
        let w = self.width;
        [w, 2 * w, 4 * w, 4 * w]
    }
}

#[derive(Clone, Debug)]
struct ResStage {
    c1: Conv,
    c2: Conv,
    skip: Option<Conv>,
}

impl ResStage {
    fn new(b: &mut ParamBuilder, name: &str, cin: usize, cout: usize, stride: usize) -> Self {
        let skip = (cin != cout || stride != 1).then(|| b.conv(&format!("{}.skip", name), cin, cout, 1, stride, 0, false, 1.0));
        Self {
            c1: b.conv(&format!("{}.conv1", name), cin, cout, 3, stride, 1, true, 1.0),
            c2: b.conv(&format!("{}.conv2", name), cout, cout, 3, 1, 1, true, 0.5),
            skip,
        }
    }

    fn apply(&self, g: &mut Graph, p: &[Var], x: Var) -> Var {
        let h = self.c1.apply(g, p, x);
        let h = g.leaky_relu(h, LEAK);
        let h = self.c2.apply(g, p, h);
        let s = match &self.skip {
            Some(c) => c.apply(g, p, x),
            None => x,
        };
        let y = g.add(h, s);
        g.leaky_relu(y, LEAK)
    }
}

/// Layer descriptors shared by the ranker and the fine-tuned scorer.
#[derive(Clone, Debug)]
struct Trunk {
    stem: Conv,
    stages: Vec<ResStage>,
}

impl Trunk {
    fn new(b: &mut ParamBuilder, config: &BackboneConfig) -> Self {
        let widths = config.stage_widths();
        let stem = b.conv("stem", 3, config.width, 3, 2, 1, true, 1.0);
        let strides = [1, 2, 2, 2];
        let mut cin = config.width;
        let stages = (0..4)
            .map(|i| {
                let s = ResStage::new(b, &format!("{}", TAP_NAMES[i]), cin, widths[i], strides[i]);
                cin = widths[i];
                s
            })
            .collect();
        Self { stem, stages }
    }

    fn taps(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Vec<Var>> {
        let [_, c, h, w] = g.shape(x);
        if c != 3 || h < RankBackbone::MIN_INPUT || w < RankBackbone::MIN_INPUT {
            return Err(Error::ShapeMismatch(format!(
                "rank backbone expects [n, 3, h, w] with sides >= {}, got {:?}",
                RankBackbone::MIN_INPUT,
                g.shape(x)
            )));
        }
        let h = self.stem.apply(g, p, x);
        let mut cur = g.leaky_relu(h, LEAK);
        let mut taps = Vec::with_capacity(4);
        for st in &self.stages {
            cur = st.apply(g, p, cur);
            taps.push(cur);
        }
        Ok(taps)
    }
}

/// Reduced-depth residual network with four stage taps and a pairwise
/// ranking head (global average pool + FC to one value).
#[derive(Clone, Debug)]
pub struct RankBackbone {
    config: BackboneConfig,
    params: ParamSet,
    trunk: Trunk,
    rank_fc: Conv,
}

impl RankBackbone {
    /// Total stride is 16; smaller inputs would collapse the last stage.
    pub const MIN_INPUT: usize = 16;

    pub fn new(config: BackboneConfig) -> Self {
        let mut b = ParamBuilder::new(config.seed);
        let trunk = Trunk::new(&mut b, &config);
        let last = config.stage_widths()[3];
        let rank_fc = b.linear("rank_fc", last, 1, true, 1.0);
        Self { config, params: b.finish(), trunk, rank_fc }
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    /// Number of leading parameter tensors belonging to the trunk.
    fn trunk_len(&self) -> usize {
        self.params.len() - 2
    }

    /// Returns `(score [n,1,1,1], four stage taps)`.
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<(Var, Vec<Var>)> {
        let taps = self.trunk.taps(g, p, x)?;
        let gap = g.spatial_mean(taps[3]);
        let s = self.rank_fc.apply(g, p, gap);
        Ok((s, taps))
    }

    /// Siamese evaluation: both branches run through the same parameter vars.
    pub fn forward_pair(&self, g: &mut Graph, p: &[Var], a: Var, b: Var) -> Result<(Var, Var)> {
        let (sa, _) = self.forward(g, p, a)?;
        let (sb, _) = self.forward(g, p, b)?;
        Ok((sa, sb))
    }

    /// Ranking scores for a batch.
    pub fn eval(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let (s, _) = self.forward(&mut g, &p, xv)?;
        Ok(g.value(s).data().to_vec())
    }

    /// Stage taps for a batch.
    pub fn eval_taps(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let (_, taps) = self.forward(&mut g, &p, xv)?;
        Ok(taps.into_iter().map(|t| g.value(t).clone()).collect())
    }
}

impl Module for RankBackbone {
    fn params(&self) -> &ParamSet {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}

/// Multi-scale regression head: per tap a 1x1 conv, global average pool and
/// FC to a quality vector; the four vectors are concatenated and mapped to
/// one value `z`, reported as `50 + 25 z` so an untrained head starts near
/// the middle of the score range.
#[derive(Clone, Debug)]
pub struct ScorerHead {
    proj: Vec<Conv>,
    fc: Vec<Conv>,
    out: Conv,
}

impl ScorerHead {
    pub const CENTER: f64 = 50.0;
    pub const SPREAD: f64 = 25.0;

    fn new(b: &mut ParamBuilder, tap_widths: [usize; 4], q: usize) -> Self {
        let proj = (0..4).map(|i| b.linear(&format!("head.proj{}", i + 1), tap_widths[i], q, true, 1.0)).collect();
        let fc = (0..4).map(|i| b.linear(&format!("head.fc{}", i + 1), q, q, true, 1.0)).collect();
        let out = b.linear("head.out", 4 * q, 1, true, 0.5);
        Self { proj, fc, out }
    }

    fn apply(&self, g: &mut Graph, p: &[Var], taps: &[Var]) -> Var {
        let mut vecs = Vec::with_capacity(4);
        for (i, &t) in taps.iter().enumerate() {
            let h = self.proj[i].apply(g, p, t);
            let h = g.spatial_mean(h);
            let h = self.fc[i].apply(g, p, h);
            vecs.push(g.leaky_relu(h, LEAK));
        }
        let cat = g.concat_channels(&vecs);
        let z = self.out.apply(g, p, cat);
        let z = g.scale(z, Self::SPREAD);
        g.add_const(z, Self::CENTER)
    }
}

/// Backbone trunk plus [`ScorerHead`], sharing one parameter set (trunk
/// tensors first, then head tensors).
#[derive(Clone, Debug)]
pub struct Scorer {
    config: BackboneConfig,
    quality_dim: usize,
    params: ParamSet,
    trunk: Trunk,
    head: ScorerHead,
}

impl Scorer {
    /// Drops the ranking head of `backbone` and attaches a fresh scoring head.
    pub fn from_backbone(backbone: &RankBackbone, quality_dim: usize, seed: u64) -> Self {
        let mut params = ParamSet::new();
        let n = backbone.trunk_len();
        for (name, t) in backbone.params.names()[..n].iter().zip(&backbone.params.tensors()[..n]) {
            params.push(name.clone(), t.clone());
        }
        let mut b = ParamBuilder::extend(params, seed);
        let head = ScorerHead::new(&mut b, backbone.config.stage_widths(), quality_dim);
        Self {
            config: backbone.config.clone(),
            quality_dim,
            params: b.finish(),
            trunk: backbone.trunk.clone(),
            head,
        }
    }

    pub fn backbone_config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn quality_dim(&self) -> usize {
        self.quality_dim
    }

    /// Number of leading parameter tensors copied from the backbone trunk.
    pub fn trunk_len(&self) -> usize {
        self.params.names().iter().take_while(|n| !n.starts_with("head.")).count()
    }

    /// Raw (unclamped) scores `[n,1,1,1]` used for training.
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        let taps = self.trunk.taps(g, p, x)?;
        Ok(self.head.apply(g, p, &taps))
    }

    /// Raw scores for a batch.
    pub fn eval_raw(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let s = self.forward(&mut g, &p, xv)?;
        Ok(g.value(s).data().to_vec())
    }
}

impl Module for Scorer {
    fn params(&self) -> &ParamSet {
        &self.params
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}
