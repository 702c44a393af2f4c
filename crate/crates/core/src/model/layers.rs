//! Convolution, pooling and activation primitives with explicit backward passes.
//!
//! 3x3 convolutions use replicate (edge) padding so a spatially constant
//! input produces a spatially constant output.

use rand::Rng;

use super::tensor::FeatureMap;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    /// 1 or 3.
    pub kernel: usize,
    /// `[out][in][ky][kx]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Gradient buffers shaped like a [`Conv2d`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvGrad<T> {
    pub fn zeros_like(conv: &Conv2d<T>) -> Self {
        Self {
            weight: vec![T::zero(); conv.weight.len()],
            bias: vec![T::zero(); conv.bias.len()],
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a = *a + *b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a = *a + *b;
        }
    }
}

/// Values retained by [`Conv2d::forward`] for the backward pass.
pub struct ConvCache<T> {
    /// Replicate-padded input for 3x3 kernels, plain input for 1x1.
    padded: FeatureMap<T>,
}

impl<T: Scalar> Conv2d<T> {
    /// Uniform init in `[-scale / sqrt(fan_in), scale / sqrt(fan_in)]`, bias in `[-bias_scale, bias_scale]`.
    pub fn init<R: Rng>(in_ch: usize, out_ch: usize, kernel: usize, scale: f64, bias_scale: f64, rng: &mut R) -> Self {
        assert!(kernel == 1 || kernel == 3, "unsupported kernel size {kernel}");
        let fan_in = (in_ch * kernel * kernel) as f64;
        let bound = scale / fan_in.sqrt();
        let weight = (0..out_ch * in_ch * kernel * kernel)
            .map(|_| T::lit(rng.gen_range(-bound..=bound)))
            .collect();
        let bias = (0..out_ch)
            .map(|_| {
                if bias_scale > 0.0 {
                    T::lit(rng.gen_range(-bias_scale..=bias_scale))
                } else {
                    T::zero()
                }
            })
            .collect();
        Self {
            in_ch,
            out_ch,
            kernel,
            weight,
            bias,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn taps(&self) -> usize {
        self.kernel * self.kernel
    }

    pub fn forward(&self, x: &FeatureMap<T>) -> (FeatureMap<T>, ConvCache<T>) {
        assert_eq!(x.channels(), self.in_ch, "conv input channel mismatch");
        let (h, w) = (x.height(), x.width());
        let mut out = FeatureMap::zeros(self.out_ch, h, w);
        let padded = if self.kernel == 3 { pad_replicate(x) } else { x.clone() };
        let pw = if self.kernel == 3 { w + 2 } else { w };
        let taps = self.taps();

        for o in 0..self.out_ch {
            let dst = out.plane_mut(o);
            dst.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.in_ch {
                let src = padded.plane(i);
                let wbase = (o * self.in_ch + i) * taps;
                for ky in 0..self.kernel {
                    for kx in 0..self.kernel {
                        let wv = self.weight[wbase + ky * self.kernel + kx];
                        for r in 0..h {
                            let s = &src[(r + ky) * pw + kx..(r + ky) * pw + kx + w];
                            let d = &mut dst[r * w..(r + 1) * w];
                            for (dv, &sv) in d.iter_mut().zip(s) {
                                *dv = *dv + wv * sv;
                            }
                        }
                    }
                }
            }
        }
        (out, ConvCache { padded })
    }

    /// Accumulates parameter gradients into `grad`; returns the input gradient
    /// when `want_input` is set.
    pub fn backward(
        &self,
        cache: &ConvCache<T>,
        grad_out: &FeatureMap<T>,
        grad: &mut ConvGrad<T>,
        want_input: bool,
    ) -> Option<FeatureMap<T>> {
        let (h, w) = (grad_out.height(), grad_out.width());
        let padded = &cache.padded;
        let pw = padded.width();
        let taps = self.taps();
        let mut grad_padded = want_input.then(|| FeatureMap::zeros(self.in_ch, padded.height(), pw));

        for o in 0..self.out_ch {
            let go = grad_out.plane(o);
            grad.bias[o] = grad.bias[o] + go.iter().copied().sum::<T>();
            for i in 0..self.in_ch {
                let src = padded.plane(i);
                let wbase = (o * self.in_ch + i) * taps;
                for ky in 0..self.kernel {
                    for kx in 0..self.kernel {
                        let mut acc = T::zero();
                        for r in 0..h {
                            let s = &src[(r + ky) * pw + kx..(r + ky) * pw + kx + w];
                            let g = &go[r * w..(r + 1) * w];
                            acc = acc + dot(g, s);
                        }
                        let idx = wbase + ky * self.kernel + kx;
                        grad.weight[idx] = grad.weight[idx] + acc;

                        if let Some(gp) = grad_padded.as_mut() {
                            let wv = self.weight[idx];
                            let dst = gp.plane_mut(i);
                            for r in 0..h {
                                let d = &mut dst[(r + ky) * pw + kx..(r + ky) * pw + kx + w];
                                let g = &go[r * w..(r + 1) * w];
                                for (dv, &gv) in d.iter_mut().zip(g) {
                                    *dv = *dv + wv * gv;
                                }
                            }
                        }
                    }
                }
            }
        }
        grad_padded.map(|gp| if self.kernel == 3 { fold_replicate(&gp, h, w) } else { gp })
    }

    pub fn step(&mut self, grad: &ConvGrad<T>, lr: T) {
        for (p, g) in self.weight.iter_mut().zip(&grad.weight) {
            *p = *p - lr * *g;
        }
        for (p, g) in self.bias.iter_mut().zip(&grad.bias) {
            *p = *p - lr * *g;
        }
    }
}

/// Dot product with eight independent partial sums so the loop vectorises.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            lanes[k] = lanes[k] + x[k] * y[k];
        }
    }
    let tail = ra.iter().zip(rb).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    lanes.iter().copied().sum::<T>() + tail
}

fn pad_replicate<T: Scalar>(x: &FeatureMap<T>) -> FeatureMap<T> {
    let (h, w) = (x.height(), x.width());
    let (ph, pw) = (h + 2, w + 2);
    let mut out = FeatureMap::zeros(x.channels(), ph, pw);
    for c in 0..x.channels() {
        let src = x.plane(c);
        let dst = out.plane_mut(c);
        for pr in 0..ph {
            let r = pr.saturating_sub(1).min(h - 1);
            let row = &src[r * w..(r + 1) * w];
            let d = &mut dst[pr * pw..(pr + 1) * pw];
            d[0] = row[0];
            d[1..=w].copy_from_slice(row);
            d[w + 1] = row[w - 1];
        }
    }
    out
}

/// Adjoint of [`pad_replicate`]: border gradients fold onto the edge pixels.
fn fold_replicate<T: Scalar>(gp: &FeatureMap<T>, h: usize, w: usize) -> FeatureMap<T> {
    let pw = w + 2;
    let mut out = FeatureMap::zeros(gp.channels(), h, w);
    for c in 0..gp.channels() {
        let src = gp.plane(c);
        let dst = out.plane_mut(c);
        for pr in 0..h + 2 {
            let r = pr.saturating_sub(1).min(h - 1);
            let s = &src[pr * pw..(pr + 1) * pw];
            let d = &mut dst[r * w..(r + 1) * w];
            for (dv, &sv) in d.iter_mut().zip(&s[1..=w]) {
                *dv = *dv + sv;
            }
            d[0] = d[0] + s[0];
            d[w - 1] = d[w - 1] + s[w + 1];
        }
    }
    out
}

pub fn relu<T: Scalar>(mut x: FeatureMap<T>) -> FeatureMap<T> {
    x.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero()));
    x
}

/// Backward of ReLU given its output.
pub fn relu_backward<T: Scalar>(out: &FeatureMap<T>, mut grad: FeatureMap<T>) -> FeatureMap<T> {
    for (g, &o) in grad.data_mut().iter_mut().zip(out.data()) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
    grad
}

pub fn tanh<T: Scalar>(mut x: FeatureMap<T>) -> FeatureMap<T> {
    x.data_mut().iter_mut().for_each(|v| *v = v.tanh());
    x
}

/// Backward of tanh given its output.
pub fn tanh_backward<T: Scalar>(out: &FeatureMap<T>, mut grad: FeatureMap<T>) -> FeatureMap<T> {
    for (g, &o) in grad.data_mut().iter_mut().zip(out.data()) {
        *g = *g * (T::one() - o * o);
    }
    grad
}

/// 2x2 average pooling; dimensions must be even.
pub fn avg_pool2<T: Scalar>(x: &FeatureMap<T>) -> FeatureMap<T> {
    let (h, w) = (x.height() / 2, x.width() / 2);
    let quarter = T::lit(0.25);
    let mut out = FeatureMap::zeros(x.channels(), h, w);
    for c in 0..x.channels() {
        let src = x.plane(c);
        let sw = x.width();
        let dst = out.plane_mut(c);
        for r in 0..h {
            for col in 0..w {
                let a = src[(2 * r) * sw + 2 * col];
                let b = src[(2 * r) * sw + 2 * col + 1];
                let cc = src[(2 * r + 1) * sw + 2 * col];
                let d = src[(2 * r + 1) * sw + 2 * col + 1];
                dst[r * w + col] = (a + b + cc + d) * quarter;
            }
        }
    }
    out
}

pub fn avg_pool2_backward<T: Scalar>(grad: &FeatureMap<T>) -> FeatureMap<T> {
    let quarter = T::lit(0.25);
    let (h, w) = (grad.height(), grad.width());
    let mut out = FeatureMap::zeros(grad.channels(), h * 2, w * 2);
    for c in 0..grad.channels() {
        let src = grad.plane(c);
        let dst = out.plane_mut(c);
        for r in 0..2 * h {
            for col in 0..2 * w {
                dst[r * 2 * w + col] = src[(r / 2) * w + col / 2] * quarter;
            }
        }
    }
    out
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample2<T: Scalar>(x: &FeatureMap<T>) -> FeatureMap<T> {
    let (h, w) = (x.height(), x.width());
    let mut out = FeatureMap::zeros(x.channels(), h * 2, w * 2);
    for c in 0..x.channels() {
        let src = x.plane(c);
        let dst = out.plane_mut(c);
        for r in 0..2 * h {
            for col in 0..2 * w {
                dst[r * 2 * w + col] = src[(r / 2) * w + col / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward<T: Scalar>(grad: &FeatureMap<T>) -> FeatureMap<T> {
    let (h, w) = (grad.height() / 2, grad.width() / 2);
    let mut out = FeatureMap::zeros(grad.channels(), h, w);
    for c in 0..grad.channels() {
        let src = grad.plane(c);
        let gw = grad.width();
        let dst = out.plane_mut(c);
        for r in 0..h {
            for col in 0..w {
                dst[r * w + col] = src[(2 * r) * gw + 2 * col]
                    + src[(2 * r) * gw + 2 * col + 1]
                    + src[(2 * r + 1) * gw + 2 * col]
                    + src[(2 * r + 1) * gw + 2 * col + 1];
            }
        }
    }
    out
}
