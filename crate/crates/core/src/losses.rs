//! Adversarial, content and task objectives.
//!
//! Every function records onto a [`Graph`] and returns a scalar [`Var`], so
//! gradients (including the second-order terms of the gradient penalty) come
//! from the tape.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{Critic, TAP_WEIGHTS};
use crate::tensor::Tensor;

/// Every scalar weight of the two adaptation objectives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// Gradient-penalty factor of the image-level critic.
    pub lambda_img: f64,
    /// Gradient-penalty factor of the feature-level critic.
    pub lambda_feat: f64,
    /// Inter phase: image adversarial, content, task, feature adversarial.
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    /// Intra phase, same order as `lambda1..4`.
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_c: f64,
    pub lambda_d: f64,
    /// Inter task loss: pixel L1 and perceptual weights.
    pub a: f64,
    pub b: f64,
    /// Intra task loss: pixel L1 and perceptual weights.
    pub c: f64,
    pub d: f64,
    pub tap_weights: [f64; 5],
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_img: 10.0,
            lambda_feat: 10.0,
            lambda1: 1.0,
            lambda2: 100.0,
            lambda3: 10.0,
            lambda4: 0.0005,
            lambda_a: 1.0,
            lambda_b: 100.0,
            lambda_c: 10.0,
            lambda_d: 0.0005,
            a: 0.8,
            b: 0.2,
            c: 0.8,
            d: 0.2,
            tap_weights: TAP_WEIGHTS,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda_img", self.lambda_img),
            ("lambda_feat", self.lambda_feat),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda4", self.lambda4),
            ("lambda_a", self.lambda_a),
            ("lambda_b", self.lambda_b),
            ("lambda_c", self.lambda_c),
            ("lambda_d", self.lambda_d),
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
        ];
        for (name, v) in named.iter().copied().chain(self.tap_weights.iter().map(|&w| ("tap_weights", w))) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("loss weight `{}` must be finite and >= 0, got {}", name, v)));
            }
        }
        Ok(())
    }
}

/// The four terms of either adaptation objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Components<T> {
    pub adv_img: T,
    pub content: T,
    pub task: T,
    pub adv_feat: T,
}

impl<T: Copy> Components<T> {
    fn named(&self) -> [(&'static str, T); 4] {
        [("adv_img", self.adv_img), ("content", self.content), ("task", self.task), ("adv_feat", self.adv_feat)]
    }

    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> Components<U> {
        Components { adv_img: f(self.adv_img), content: f(self.content), task: f(self.task), adv_feat: f(self.adv_feat) }
    }
}

fn weighted(c: &Components<f64>, lambdas: [f64; 4]) -> Result<f64> {
    let mut total = 0.0;
    for ((name, v), l) in c.named().into_iter().zip(lambdas) {
        if !v.is_finite() {
            return Err(Error::NonFinite(name.into()));
        }
        total += l * v;
    }
    Ok(total)
}

/// `lambda1 adv_img + lambda2 content + lambda3 task + lambda4 adv_feat`.
pub fn total_inter(c: &Components<f64>, w: &LossWeights) -> Result<f64> {
    weighted(c, [w.lambda1, w.lambda2, w.lambda3, w.lambda4])
}

/// Intra-phase analog of [`total_inter`] with `lambda_a..d`.
pub fn total_intra(c: &Components<f64>, w: &LossWeights) -> Result<f64> {
    weighted(c, [w.lambda_a, w.lambda_b, w.lambda_c, w.lambda_d])
}

/// Graph version of the weighted sum; fails naming the first non-finite term.
pub fn combine(g: &mut Graph, c: &Components<Var>, lambdas: [f64; 4]) -> Result<Var> {
    let mut total: Option<Var> = None;
    for ((name, v), l) in c.named().into_iter().zip(lambdas) {
        if !g.value(v).all_finite() {
            return Err(Error::NonFinite(name.into()));
        }
        let t = g.scale(v, l);
        total = Some(match total {
            Some(acc) => g.add(acc, t),
            None => t,
        });
    }
    Ok(total.expect("four components"))
}

pub fn inter_lambdas(w: &LossWeights) -> [f64; 4] {
    [w.lambda1, w.lambda2, w.lambda3, w.lambda4]
}

pub fn intra_lambdas(w: &LossWeights) -> [f64; 4] {
    [w.lambda_a, w.lambda_b, w.lambda_c, w.lambda_d]
}

fn check_same_shape(g: &Graph, a: Var, b: Var, what: &str) -> Result<()> {
    if g.shape(a) != g.shape(b) {
        return Err(Error::ShapeMismatch(format!("{}: {:?} vs {:?}", what, g.shape(a), g.shape(b))));
    }
    Ok(())
}

/// Per-element mean of `|a - b|`.
pub fn l1_mean(g: &mut Graph, a: Var, b: Var) -> Result<Var> {
    check_same_shape(g, a, b, "l1")?;
    let d = g.sub(a, b);
    let d = g.abs(d);
    Ok(g.mean(d))
}

/// Gradient penalty with explicit per-sample mixing factors:
/// `I = eps real + (1 - eps) fake`, `lambda mean_n (||grad_I D(I)_n|| - 1)^2`.
pub fn gradient_penalty_with<C: Critic + ?Sized>(
    g: &mut Graph,
    critic: &C,
    p: &[Var],
    fake: Var,
    real: Var,
    lambda: f64,
    eps: &[f64],
) -> Result<Var> {
    if !critic.twice_differentiable() {
        return Err(Error::NonDifferentiableCritic);
    }
    check_same_shape(g, fake, real, "gradient penalty batches")?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("penalty factor must be >= 0, got {}", lambda)));
    }
    let s = g.shape(real);
    let n = s[0];
    if eps.len() != n {
        return Err(Error::InvalidArgument(format!("{} mixing factors for a batch of {}", eps.len(), n)));
    }
    let plane = s[1] * s[2] * s[3];
    let (rv, fv) = (g.value(real).data(), g.value(fake).data());
    let mixed: Vec<f64> = (0..n * plane)
        .map(|i| {
            let e = eps[i / plane];
            e * rv[i] + (1.0 - e) * fv[i]
        })
        .collect();
    // a fresh leaf: the penalty is a function of the critic parameters only
    let mixed = g.input(Tensor::from_vec(s, mixed));
    let scores = critic.sample_scores(g, p, mixed)?;
    let total = g.sum(scores);
    let grad = g.grad(total, &[mixed])[0];
    let sq = g.square(grad);
    let norm2 = g.reduce(sq, [n, 1, 1, 1]);
    let norm = g.sqrt(norm2);
    let dev = g.add_const(norm, -1.0);
    let dev2 = g.square(dev);
    let m = g.mean(dev2);
    Ok(g.scale(m, lambda))
}

/// Gradient penalty with `eps ~ U(0, 1)` drawn once per sample from `rng`.
pub fn gradient_penalty<C: Critic + ?Sized, R: Rng + ?Sized>(
    g: &mut Graph,
    critic: &C,
    p: &[Var],
    fake: Var,
    real: Var,
    lambda: f64,
    rng: &mut R,
) -> Result<Var> {
    let n = g.shape(real)[0];
    let eps: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    gradient_penalty_with(g, critic, p, fake, real, lambda, &eps)
}

/// `mean D(fake) - mean D(real) + penalty`.
pub fn critic_loss_with<C: Critic + ?Sized>(
    g: &mut Graph,
    critic: &C,
    p: &[Var],
    fake: Var,
    real: Var,
    lambda: f64,
    eps: &[f64],
) -> Result<Var> {
    let gp = gradient_penalty_with(g, critic, p, fake, real, lambda, eps)?;
    let df = critic.mean_score(g, p, fake)?;
    let dr = critic.mean_score(g, p, real)?;
    let w = g.sub(df, dr);
    Ok(g.add(w, gp))
}

/// [`critic_loss_with`] drawing the mixing factors from `rng`.
pub fn critic_loss<C: Critic + ?Sized, R: Rng + ?Sized>(
    g: &mut Graph,
    critic: &C,
    p: &[Var],
    fake: Var,
    real: Var,
    lambda: f64,
    rng: &mut R,
) -> Result<Var> {
    let n = g.shape(real)[0];
    let eps: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    critic_loss_with(g, critic, p, fake, real, lambda, &eps)
}

/// Wasserstein generator term `-mean D(fake)`.
pub fn generator_adv_loss<C: Critic + ?Sized>(g: &mut Graph, critic: &C, p: &[Var], fake: Var) -> Result<Var> {
    let d = critic.mean_score(g, p, fake)?;
    Ok(g.scale(d, -1.0))
}

/// `sum_k w_k mean|a_k - b_k|`.
pub fn content_loss(g: &mut Graph, taps_a: &[Var], taps_b: &[Var], weights: &[f64]) -> Result<Var> {
    if taps_a.len() != taps_b.len() || taps_a.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "content loss needs matched taps: {} vs {} taps, {} weights",
            taps_a.len(),
            taps_b.len(),
            weights.len()
        )));
    }
    let mut total: Option<Var> = None;
    for ((&a, &b), &w) in taps_a.iter().zip(taps_b).zip(weights) {
        let l = l1_mean(g, a, b)?;
        let l = g.scale(l, w);
        total = Some(match total {
            Some(t) => g.add(t, l),
            None => l,
        });
    }
    match total {
        Some(t) => Ok(t),
        None => Ok(g.constant(Tensor::scalar(0.0))),
    }
}

/// `pixel mean|y - y_hat| + perceptual sum_k mean|phi_k(y) - phi_k(y_hat)|`.
pub fn task_loss(
    g: &mut Graph,
    y: Var,
    y_hat: Var,
    taps_y: &[Var],
    taps_y_hat: &[Var],
    pixel: f64,
    perceptual: f64,
) -> Result<Var> {
    let l1 = l1_mean(g, y, y_hat)?;
    let ones = alloc::vec![1.0; taps_y.len()];
    let pc = content_loss(g, taps_y, taps_y_hat, &ones)?;
    let a = g.scale(l1, pixel);
    let b = g.scale(pc, perceptual);
    Ok(g.add(a, b))
}
