#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use uwda_core::nn::{Module, PatchCritic};
use uwda_core::Tensor;

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect())
}

/// Relative error between an analytic gradient and central differences of
/// `f` at `x`, measured as ||analytic - numeric|| / max(||numeric||, tiny).
pub fn fd_rel_error(f: &dyn Fn(&[Tensor]) -> f64, x: &[Tensor], analytic: &[Tensor]) -> f64 {
    let h = 1e-6;
    let mut diff2 = 0.0;
    let mut num2 = 0.0;
    for (i, t) in x.iter().enumerate() {
        for j in 0..t.len() {
            let mut plus = x.to_vec();
            plus[i].data_mut()[j] += h;
            let mut minus = x.to_vec();
            minus[i].data_mut()[j] -= h;
            let num = (f(&plus) - f(&minus)) / (2.0 * h);
            let an = analytic[i].data()[j];
            diff2 += (an - num) * (an - num);
            num2 += num * num;
        }
    }
    diff2.sqrt() / num2.sqrt().max(1e-12)
}

pub fn with_params(critic: &PatchCritic, params: &[Tensor]) -> PatchCritic {
    let mut c = critic.clone();
    for (dst, src) in c.params_mut().tensors_mut().iter_mut().zip(params) {
        *dst = src.clone();
    }
    c
}
