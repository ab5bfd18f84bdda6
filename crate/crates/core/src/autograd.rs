//! Tape-based reverse-mode differentiation with higher-order support.
//!
//! Every vector-Jacobian product is itself recorded on the tape using the
//! same differentiable ops, so the result of [`Graph::grad`] can be
//! differentiated again. The gradient penalty relies on this: it needs the
//! derivative, with respect to critic weights, of the norm of the critic's
//! input gradient.
//!
//! The op set is closed under differentiation. Convolution in particular is
//! represented by three kernels (forward, input adjoint, weight adjoint) that
//! are all partial derivatives of the same trilinear form, so each one's
//! adjoints are again members of the family.

use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{self, ConvGeom, Shape, Tensor};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    MulConst(Var, Tensor),
    Tanh(Var),
    Sqrt(Var),
    Recip(Var),
    ClampMin(Var, f64),
    Abs(Var),
    LeakyRelu(Var, f64),
    Conv { x: Var, w: Var, geom: ConvGeom },
    ConvInputGrad { g: Var, w: Var, geom: ConvGeom },
    ConvWeightGrad { x: Var, g: Var, geom: ConvGeom },
    SumPool2(Var),
    Upsample2(Var),
    Broadcast(Var),
    Reduce(Var),
    Slice { x: Var, start: usize },
    Embed { x: Var, start: usize },
    Concat(Vec<Var>),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf => Vec::new(),
            Add(a, b) | Sub(a, b) | Mul(a, b) => vec![*a, *b],
            Scale(a, _) | AddConst(a) | MulConst(a, _) | Tanh(a) | Sqrt(a) | Recip(a)
            | ClampMin(a, _) | Abs(a) | LeakyRelu(a, _) | SumPool2(a) | Upsample2(a)
            | Broadcast(a) | Reduce(a) => vec![*a],
            Conv { x, w, .. } => vec![*x, *w],
            ConvInputGrad { g, w, .. } => vec![*g, *w],
            ConvWeightGrad { x, g, .. } => vec![*x, *g],
            Slice { x, .. } | Embed { x, .. } => vec![*x],
            Concat(parts) => parts.clone(),
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A recording of tensor computations.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that gradients can be taken with respect to.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// Re-records the current value of `v` as a constant, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddConst(a))
    }

    /// Elementwise product with a constant tensor of the same shape.
    pub fn mul_const(&mut self, a: Var, m: Tensor) -> Var {
        let v = self.value(a).zip_map(&m, |x, y| x * y);
        self.push(v, Op::MulConst(a, m))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(libm::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).map(libm::sqrt);
        self.push(v, Op::Sqrt(a))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| 1.0 / x);
        self.push(v, Op::Recip(a))
    }

    pub fn clamp_min(&mut self, a: Var, min: f64) -> Var {
        let v = self.value(a).map(|x| x.max(min));
        self.push(v, Op::ClampMin(a, min))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::abs);
        self.push(v, Op::Abs(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, 0.0)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    /// Zero-padded square-kernel convolution without bias. Weights are `[out, in, k, k]`.
    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Var {
        let k = self.shape(w)[2];
        let geom = ConvGeom { k, stride, pad };
        let v = tensor::conv2d(self.value(x), self.value(w), geom);
        self.push(v, Op::Conv { x, w, geom })
    }

    fn conv_input_grad(&mut self, g: Var, w: Var, geom: ConvGeom, in_hw: (usize, usize)) -> Var {
        let v = tensor::conv2d_input_grad(self.value(g), self.value(w), geom, in_hw);
        self.push(v, Op::ConvInputGrad { g, w, geom })
    }

    fn conv_weight_grad(&mut self, x: Var, g: Var, geom: ConvGeom) -> Var {
        let out = self.shape(g)[1];
        let v = tensor::conv2d_weight_grad(self.value(x), self.value(g), geom, out);
        self.push(v, Op::ConvWeightGrad { x, g, geom })
    }

    pub fn sum_pool2(&mut self, a: Var) -> Var {
        let v = tensor::sum_pool2(self.value(a));
        self.push(v, Op::SumPool2(a))
    }

    pub fn avg_pool2(&mut self, a: Var) -> Var {
        let s = self.sum_pool2(a);
        self.scale(s, 0.25)
    }

    /// Nearest-neighbour 2x upsampling to exactly `out_hw`, which must satisfy `out / 2 == in`.
    pub fn upsample2(&mut self, a: Var, out_hw: (usize, usize)) -> Var {
        let v = tensor::upsample2(self.value(a), out_hw);
        self.push(v, Op::Upsample2(a))
    }

    pub fn broadcast(&mut self, a: Var, shape: Shape) -> Var {
        if self.shape(a) == shape {
            return a;
        }
        let v = tensor::broadcast_to(self.value(a), shape);
        self.push(v, Op::Broadcast(a))
    }

    /// Sums over the axes where `shape` has extent 1.
    pub fn reduce(&mut self, a: Var, shape: Shape) -> Var {
        if self.shape(a) == shape {
            return a;
        }
        let v = tensor::reduce_to(self.value(a), shape);
        self.push(v, Op::Reduce(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        self.reduce(a, [1, 1, 1, 1])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Per-sample, per-channel spatial mean: `[n, c, h, w] -> [n, c, 1, 1]`.
    pub fn spatial_mean(&mut self, a: Var) -> Var {
        let [n, c, h, w] = self.shape(a);
        let s = self.reduce(a, [n, c, 1, 1]);
        self.scale(s, 1.0 / (h * w) as f64)
    }

    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Var {
        let v = tensor::slice_channels(self.value(x), start, len);
        self.push(v, Op::Slice { x, start })
    }

    fn embed_channels(&mut self, x: Var, start: usize, total: usize) -> Var {
        let v = tensor::embed_channels(self.value(x), start, total);
        self.push(v, Op::Embed { x, start })
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Var {
        if parts.len() == 1 {
            return parts[0];
        }
        let v = {
            let refs: Vec<&Tensor> = parts.iter().map(|p| self.value(*p)).collect();
            tensor::concat_channels(&refs)
        };
        self.push(v, Op::Concat(parts.to_vec()))
    }

    /// Gradient of `sum(y)` with respect to each of `wrt`.
    ///
    /// The returned variables live on this graph and can be differentiated
    /// again. Variables that `y` does not depend on get a zero gradient.
    pub fn grad(&mut self, y: Var, wrt: &[Var]) -> Vec<Var> {
        let n = y.0 + 1;
        let mut reach = vec![false; n];
        for w in wrt {
            if w.0 < n {
                reach[w.0] = true;
            }
        }
        for i in 0..n {
            if !reach[i] && self.nodes[i].requires_grad {
                reach[i] = self.nodes[i].op.inputs().iter().any(|v| reach[v.0]);
            }
        }
        let mut grads: Vec<Option<Var>> = vec![None; n];
        if reach[y.0] {
            let seed = Tensor::full(self.shape(y), 1.0);
            grads[y.0] = Some(self.constant(seed));
        }
        for i in (0..n).rev() {
            if !reach[i] {
                continue;
            }
            let Some(g) = grads[i] else { continue };
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let contribs = self.vjp(Var(i), g, &reach);
            for (input, c) in contribs {
                grads[input.0] = Some(match grads[input.0] {
                    Some(prev) => self.add(prev, c),
                    None => c,
                });
            }
        }
        wrt.iter()
            .map(|w| match grads.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let z = Tensor::zeros(self.shape(*w));
                    self.constant(z)
                }
            })
            .collect()
    }

    /// Convenience: first-order gradient values.
    pub fn grad_values(&mut self, y: Var, wrt: &[Var]) -> Vec<Tensor> {
        let gs = self.grad(y, wrt);
        gs.into_iter().map(|g| self.value(g).clone()).collect()
    }

    fn vjp(&mut self, node: Var, g: Var, reach: &[bool]) -> Vec<(Var, Var)> {
        let need = |v: &Var| reach[v.0];
        let op = self.nodes[node.0].op.clone();
        let mut out = Vec::with_capacity(2);
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if need(&a) {
                    out.push((a, g));
                }
                if need(&b) {
                    out.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if need(&a) {
                    out.push((a, g));
                }
                if need(&b) {
                    let n = self.scale(g, -1.0);
                    out.push((b, n));
                }
            }
            Op::Mul(a, b) => {
                if need(&a) {
                    let d = self.mul(g, b);
                    out.push((a, d));
                }
                if need(&b) {
                    let d = self.mul(g, a);
                    out.push((b, d));
                }
            }
            Op::Scale(a, c) => {
                let d = self.scale(g, c);
                out.push((a, d));
            }
            Op::AddConst(a) => out.push((a, g)),
            Op::MulConst(a, m) => {
                let d = self.mul_const(g, m);
                out.push((a, d));
            }
            Op::Tanh(a) => {
                let sq = self.mul(node, node);
                let neg = self.scale(sq, -1.0);
                let dt = self.add_const(neg, 1.0);
                let d = self.mul(g, dt);
                out.push((a, d));
            }
            Op::Sqrt(a) => {
                let safe = self.clamp_min(node, 1e-30);
                let r = self.recip(safe);
                let half = self.scale(r, 0.5);
                let d = self.mul(g, half);
                out.push((a, d));
            }
            Op::Recip(a) => {
                let sq = self.mul(node, node);
                let neg = self.scale(sq, -1.0);
                let d = self.mul(g, neg);
                out.push((a, d));
            }
            Op::ClampMin(a, min) => {
                let mask = self.value(a).map(|x| if x > min { 1.0 } else { 0.0 });
                let d = self.mul_const(g, mask);
                out.push((a, d));
            }
            Op::Abs(a) => {
                let mask = self.value(a).map(|x| {
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                });
                let d = self.mul_const(g, mask);
                out.push((a, d));
            }
            Op::LeakyRelu(a, slope) => {
                let mask = self.value(a).map(|x| if x > 0.0 { 1.0 } else { slope });
                let d = self.mul_const(g, mask);
                out.push((a, d));
            }
            Op::Conv { x, w, geom } => {
                if need(&x) {
                    let [_, _, h, wd] = self.shape(x);
                    let d = self.conv_input_grad(g, w, geom, (h, wd));
                    out.push((x, d));
                }
                if need(&w) {
                    let d = self.conv_weight_grad(x, g, geom);
                    out.push((w, d));
                }
            }
            Op::ConvInputGrad { g: gy, w, geom } => {
                // <u, Tx(gy, w)> = <gy, conv(u, w)> = <Tw(u, gy), w>
                if need(&gy) {
                    let d = self.conv2d_geom(g, w, geom);
                    out.push((gy, d));
                }
                if need(&w) {
                    let d = self.conv_weight_grad(g, gy, geom);
                    out.push((w, d));
                }
            }
            Op::ConvWeightGrad { x, g: gy, geom } => {
                // <u, Tw(x, gy)> = <gy, conv(x, u)> = <Tx(gy, u), x>
                if need(&x) {
                    let [_, _, h, wd] = self.shape(x);
                    let d = self.conv_input_grad(gy, g, geom, (h, wd));
                    out.push((x, d));
                }
                if need(&gy) {
                    let d = self.conv2d_geom(x, g, geom);
                    out.push((gy, d));
                }
            }
            Op::SumPool2(a) => {
                let [_, _, h, w] = self.shape(a);
                let d = self.upsample2(g, (h, w));
                out.push((a, d));
            }
            Op::Upsample2(a) => {
                let d = self.sum_pool2(g);
                out.push((a, d));
            }
            Op::Broadcast(a) => {
                let s = self.shape(a);
                let d = self.reduce(g, s);
                out.push((a, d));
            }
            Op::Reduce(a) => {
                let s = self.shape(a);
                let d = self.broadcast(g, s);
                out.push((a, d));
            }
            Op::Slice { x, start } => {
                let total = self.shape(x)[1];
                let d = self.embed_channels(g, start, total);
                out.push((x, d));
            }
            Op::Embed { x, start } => {
                let len = self.shape(x)[1];
                let d = self.slice_channels(g, start, len);
                out.push((x, d));
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = self.shape(p)[1];
                    if need(&p) {
                        let d = self.slice_channels(g, off, len);
                        out.push((p, d));
                    }
                    off += len;
                }
            }
        }
        out
    }

    fn conv2d_geom(&mut self, x: Var, w: Var, geom: ConvGeom) -> Var {
        let v = tensor::conv2d(self.value(x), self.value(w), geom);
        self.push(v, Op::Conv { x, w, geom })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(shape: Shape, scale: f64, offset: f64) -> Tensor {
        let n = tensor::numel(shape);
        Tensor::from_vec(shape, (0..n).map(|i| libm::sin(i as f64 * scale + offset) * 0.7).collect())
    }

    /// Central finite differences of a scalar function of one tensor.
    fn numeric_grad(x: &Tensor, f: &dyn Fn(&Tensor) -> f64) -> Tensor {
        let h = 1e-6;
        let mut out = Tensor::zeros(x.shape());
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            out.data_mut()[i] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        out
    }

    fn assert_close(a: &Tensor, b: &Tensor, tol: f64) {
        let scale = a.max_abs().max(b.max_abs()).max(1e-8);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() / scale < tol, "{} vs {}", x, y);
        }
    }

    /// A small network touching every op.
    fn everything(g: &mut Graph, x: Var, w: Var) -> Var {
        let c = g.conv2d(x, w, 1, 1);
        let l = g.leaky_relu(c, 0.2);
        let t = g.tanh(l);
        let p = g.avg_pool2(t);
        let [_, ch, h, wd] = g.shape(t);
        let u = g.upsample2(p, (h, wd));
        let cat = g.concat_channels(&[u, t]);
        let s = g.slice_channels(cat, 1, ch);
        let m = g.spatial_mean(s);
        let b = g.broadcast(m, g.shape(s));
        let d = g.sub(s, b);
        let sq = g.square(d);
        let e = g.add_const(sq, 0.5);
        let r = g.sqrt(e);
        let q = g.recip(r);
        let a = g.abs(q);
        let strided = g.conv2d(x, w, 2, 0);
        let st = g.mean(strided);
        let mean = g.mean(a);
        let mix = g.mul(mean, st);
        g.add(mix, mean)
    }

    #[test]
    fn first_order_matches_finite_differences() {
        let x0 = ramp([2, 2, 6, 6], 0.31, 0.2);
        let w0 = ramp([3, 2, 3, 3], 0.77, 1.0);
        let eval = |x: &Tensor, w: &Tensor| {
            let mut g = Graph::new();
            let xv = g.constant(x.clone());
            let wv = g.constant(w.clone());
            let y = everything(&mut g, xv, wv);
            g.value(y).item()
        };
        let mut g = Graph::new();
        let xv = g.input(x0.clone());
        let wv = g.input(w0.clone());
        let y = everything(&mut g, xv, wv);
        let grads = g.grad_values(y, &[xv, wv]);
        assert_close(&grads[0], &numeric_grad(&x0, &|x| eval(x, &w0)), 1e-6);
        assert_close(&grads[1], &numeric_grad(&w0, &|w| eval(&x0, w)), 1e-6);
    }

    #[test]
    fn second_order_through_input_gradient_norm() {
        // f(w) = || d/dx sum(tanh(conv(x, w))) ||^2, differentiated in w.
        let x0 = ramp([1, 2, 5, 5], 0.43, 0.1);
        let w0 = ramp([2, 2, 3, 3], 0.59, 0.4);
        let build = |g: &mut Graph, w: Var| -> Var {
            let x = g.input(x0.clone());
            let c = g.conv2d(x, w, 1, 1);
            let t = g.tanh(c);
            let y = g.sum(t);
            let gx = g.grad(y, &[x])[0];
            let sq = g.square(gx);
            g.sum(sq)
        };
        let mut g = Graph::new();
        let wv = g.input(w0.clone());
        let f = build(&mut g, wv);
        let analytic = g.grad_values(f, &[wv]).remove(0);
        let numeric = numeric_grad(&w0, &|w| {
            let mut g = Graph::new();
            let wv = g.input(w.clone());
            let f = build(&mut g, wv);
            g.value(f).item()
        });
        assert_close(&analytic, &numeric, 1e-6);
    }

    #[test]
    fn second_order_through_weight_gradient() {
        // f(x) = || d/dw sum(conv(x, w)^2) ||^2 exercises the weight-adjoint kernel's adjoints.
        let x0 = ramp([1, 2, 4, 4], 0.23, 0.3);
        let w0 = ramp([2, 2, 3, 3], 0.61, 0.9);
        let build = |g: &mut Graph, x: Var| -> Var {
            let w = g.input(w0.clone());
            let c = g.conv2d(x, w, 2, 1);
            let sq = g.square(c);
            let y = g.sum(sq);
            let gw = g.grad(y, &[w])[0];
            let sq2 = g.square(gw);
            g.sum(sq2)
        };
        let mut g = Graph::new();
        let xv = g.input(x0.clone());
        let f = build(&mut g, xv);
        let analytic = g.grad_values(f, &[xv]).remove(0);
        let numeric = numeric_grad(&x0, &|x| {
            let mut g = Graph::new();
            let xv = g.input(x.clone());
            let f = build(&mut g, xv);
            g.value(f).item()
        });
        assert_close(&analytic, &numeric, 1e-6);
    }

    #[test]
    fn unrelated_inputs_get_zero_gradient() {
        let mut g = Graph::new();
        let a = g.input(Tensor::scalar(2.0));
        let b = g.input(Tensor::scalar(3.0));
        let y = g.square(a);
        let gs = g.grad_values(y, &[a, b]);
        assert_eq!(gs[0].item(), 4.0);
        assert_eq!(gs[1].item(), 0.0);
    }

    #[test]
    fn constants_do_not_require_grad() {
        let mut g = Graph::new();
        let c = g.constant(Tensor::scalar(1.0));
        let d = g.tanh(c);
        assert!(!g.requires_grad(d));
        let x = g.input(Tensor::scalar(1.0));
        let e = g.mul(d, x);
        assert!(g.requires_grad(e));
    }
}
