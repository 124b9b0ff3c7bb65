//! Network building blocks: convolution, fully connected, batch
//! normalization, max pooling, and the quantizing activation.
//!
//! Layers keep latent float parameters; quantized layers quantize the
//! weights on the fly in the forward pass and use a straight-through
//! estimator in the backward pass (gradients pass where the latent
//! value lies in [-1, 1] and are zeroed outside). Each `forward` returns
//! the cache needed by the matching `backward`; evaluation-only paths
//! (`forward_eval` on batch norm) avoid mutating running statistics.

use crate::error::{Error, Result};
use crate::quant::{self, QuantCodebook, FLOAT_BITS};
use crate::tensor::{Shape4, Tensor4};
use rand::Rng;

fn quantize_weights(latent: &[f32], codebook: Option<&QuantCodebook>) -> Vec<f32> {
    match codebook {
        Some(cb) => latent.iter().map(|&w| cb.quantize(w)).collect(),
        None => latent.to_vec(),
    }
}

/// Accumulate straight-through weight gradients: pass where the latent
/// weight is inside [-1, 1], zero outside. Float layers pass everything.
fn accumulate_ste(latent: &[f32], dq: &[f32], quantized: bool, grad: &mut [f32]) {
    for i in 0..latent.len() {
        let pass = !quantized || latent[i].abs() <= 1.0;
        if pass {
            grad[i] += dq[i];
        }
    }
}

/// `ys += a * xs` over equal-length slices. Unit stride, so the loop
/// vectorizes; this carries the bulk of the convolution arithmetic.
#[inline]
fn axpy(a: f32, xs: &[f32], ys: &mut [f32]) {
    for (y, x) in ys.iter_mut().zip(xs) {
        *y += a * x;
    }
}

/// Dot product with four independent accumulators. Strict IEEE addition
/// forms a serial dependency chain if summed naively; interleaving four
/// partial sums (a fixed, deterministic order) keeps the ALUs busy.
#[inline]
fn dot(xs: &[f32], ys: &[f32]) -> f32 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let (mut a0, mut a1, mut a2, mut a3) = (0.0f32, 0.0f32, 0.0f32, 0.0f32);
    let mut i = 0;
    while i + 4 <= n {
        a0 += xs[i] * ys[i];
        a1 += xs[i + 1] * ys[i + 1];
        a2 += xs[i + 2] * ys[i + 2];
        a3 += xs[i + 3] * ys[i + 3];
        i += 4;
    }
    let mut rest = 0.0f32;
    while i < n {
        rest += xs[i] * ys[i];
        i += 1;
    }
    ((a0 + a2) + (a1 + a3)) + rest
}

/// 2D convolution, square kernel, stride 1, no padding, no bias (batch
/// norm after each layer supplies the shift).
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub weight: Vec<f32>,
    pub weight_grad: Vec<f32>,
    pub weight_bits: u8,
    codebook: Option<QuantCodebook>,
}

#[derive(Debug, Clone)]
pub struct Conv2dCache {
    input: Tensor4,
    qweight: Vec<f32>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        weight_bits: u8,
    ) -> Result<Self> {
        let codebook = if weight_bits == FLOAT_BITS {
            None
        } else {
            Some(quant::make_codebook(weight_bits)?)
        };
        let n = out_channels * in_channels * kernel * kernel;
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            weight: vec![0.0; n],
            weight_grad: vec![0.0; n],
            weight_bits,
            codebook,
        })
    }

    /// Glorot-uniform initialization of the latent weights.
    pub fn init_weights(&mut self, rng: &mut impl Rng) {
        let fan_in = (self.in_channels * self.kernel * self.kernel) as f32;
        let fan_out = (self.out_channels * self.kernel * self.kernel) as f32;
        let limit = (6.0 / (fan_in + fan_out)).sqrt();
        for w in &mut self.weight {
            *w = rng.gen_range(-limit..limit);
        }
    }

    pub fn output_shape(&self, input: Shape4) -> Result<Shape4> {
        if input.c != self.in_channels {
            return Err(Error::Config(format!(
                "conv expects {} input channels, got {}",
                self.in_channels, input.c
            )));
        }
        if input.h < self.kernel || input.w < self.kernel {
            return Err(Error::Config(format!(
                "conv kernel {0}x{0} does not fit input {1}x{2}",
                self.kernel, input.h, input.w
            )));
        }
        Ok(Shape4::new(
            input.b,
            self.out_channels,
            input.h - self.kernel + 1,
            input.w - self.kernel + 1,
        ))
    }

    /// Row-kernel convolution with a fused fast path for 3x3 kernels
    /// (the only size the standard topology uses): all nine taps of one
    /// input channel are applied in a single unit-stride pass per output
    /// row, so each input row is loaded once per channel. Other kernel
    /// sizes fall back to one `axpy` per tap.
    fn convolve(&self, input: &Tensor4, qweight: &[f32]) -> Result<Tensor4> {
        let ishape = input.shape();
        let oshape = self.output_shape(ishape)?;
        let mut out = Tensor4::zeros(oshape);
        let (ih, iw) = (ishape.h, ishape.w);
        let (ohn, own) = (oshape.h, oshape.w);
        let k = self.kernel;
        let x = input.data();
        let y = out.data_mut();
        for b in 0..oshape.b {
            for oc in 0..self.out_channels {
                let obase = (b * self.out_channels + oc) * ohn * own;
                for ic in 0..self.in_channels {
                    let ibase = (b * self.in_channels + ic) * ih * iw;
                    let wbase = (oc * self.in_channels + ic) * k * k;
                    if k == 3 {
                        let w = &qweight[wbase..wbase + 9];
                        for oh in 0..ohn {
                            let r0 = &x[ibase + oh * iw..][..own + 2];
                            let r1 = &x[ibase + (oh + 1) * iw..][..own + 2];
                            let r2 = &x[ibase + (oh + 2) * iw..][..own + 2];
                            let yrow = &mut y[obase + oh * own..][..own];
                            for i in 0..own {
                                yrow[i] += w[0] * r0[i]
                                    + w[1] * r0[i + 1]
                                    + w[2] * r0[i + 2]
                                    + w[3] * r1[i]
                                    + w[4] * r1[i + 1]
                                    + w[5] * r1[i + 2]
                                    + w[6] * r2[i]
                                    + w[7] * r2[i + 1]
                                    + w[8] * r2[i + 2];
                            }
                        }
                    } else {
                        for kh in 0..k {
                            for kw in 0..k {
                                let w = qweight[wbase + kh * k + kw];
                                for oh in 0..ohn {
                                    let xoff = ibase + (oh + kh) * iw + kw;
                                    let yoff = obase + oh * own;
                                    axpy(w, &x[xoff..xoff + own], &mut y[yoff..yoff + own]);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn forward(&self, input: &Tensor4) -> Result<(Tensor4, Conv2dCache)> {
        let qweight = quantize_weights(&self.weight, self.codebook.as_ref());
        let out = self.convolve(input, &qweight)?;
        Ok((
            out,
            Conv2dCache {
                input: input.clone(),
                qweight,
            },
        ))
    }

    pub fn forward_eval(&self, input: &Tensor4) -> Result<Tensor4> {
        let qweight = quantize_weights(&self.weight, self.codebook.as_ref());
        self.convolve(input, &qweight)
    }

    /// Convolution with externally supplied (already quantized) weights;
    /// used to share the quantization work across a whole evaluation.
    pub fn forward_eval_with(&self, input: &Tensor4, qweight: &[f32]) -> Result<Tensor4> {
        self.convolve(input, qweight)
    }

    pub fn quantized_weights(&self) -> Vec<f32> {
        quantize_weights(&self.weight, self.codebook.as_ref())
    }

    /// Backward pass in the same row-kernel arrangement as the forward:
    /// per weight slot, the weight gradient is a row dot product and the
    /// input gradient a shifted row `axpy`.
    pub fn backward(&mut self, cache: &Conv2dCache, grad_out: &Tensor4) -> Result<Tensor4> {
        let ishape = cache.input.shape();
        let oshape = grad_out.shape();
        let mut grad_in = Tensor4::zeros(ishape);
        let mut dqw = vec![0.0f32; self.weight.len()];
        let (ih, iw) = (ishape.h, ishape.w);
        let (ohn, own) = (oshape.h, oshape.w);
        let k = self.kernel;
        let x = cache.input.data();
        let g = grad_out.data();
        let dx = grad_in.data_mut();
        for b in 0..oshape.b {
            for oc in 0..self.out_channels {
                let obase = (b * self.out_channels + oc) * ohn * own;
                for ic in 0..self.in_channels {
                    let ibase = (b * self.in_channels + ic) * ih * iw;
                    let wbase = (oc * self.in_channels + ic) * k * k;
                    if k == 3 {
                        // Fused 3x3 path: one pass per output row feeds
                        // all nine weight-gradient dots (independent
                        // accumulators), then nine shifted-row `axpy`s
                        // spread the output gradient back to the input.
                        let w = &cache.qweight[wbase..wbase + 9];
                        let mut a = [0.0f32; 9];
                        for oh in 0..ohn {
                            let goff = obase + oh * own;
                            let grow = &g[goff..goff + own];
                            let r0 = &x[ibase + oh * iw..][..own + 2];
                            let r1 = &x[ibase + (oh + 1) * iw..][..own + 2];
                            let r2 = &x[ibase + (oh + 2) * iw..][..own + 2];
                            for i in 0..own {
                                let gv = grow[i];
                                a[0] += gv * r0[i];
                                a[1] += gv * r0[i + 1];
                                a[2] += gv * r0[i + 2];
                                a[3] += gv * r1[i];
                                a[4] += gv * r1[i + 1];
                                a[5] += gv * r1[i + 2];
                                a[6] += gv * r2[i];
                                a[7] += gv * r2[i + 1];
                                a[8] += gv * r2[i + 2];
                            }
                            for kh in 0..3 {
                                let xoff = ibase + (oh + kh) * iw;
                                for kw in 0..3 {
                                    axpy(w[kh * 3 + kw], grow, &mut dx[xoff + kw..xoff + kw + own]);
                                }
                            }
                        }
                        for (wi, acc) in a.iter().enumerate() {
                            dqw[wbase + wi] += acc;
                        }
                    } else {
                        for kh in 0..k {
                            for kw in 0..k {
                                let wi = wbase + kh * k + kw;
                                let w = cache.qweight[wi];
                                let mut acc = 0.0f32;
                                for oh in 0..ohn {
                                    let goff = obase + oh * own;
                                    let xoff = ibase + (oh + kh) * iw + kw;
                                    let grow = &g[goff..goff + own];
                                    acc += dot(grow, &x[xoff..xoff + own]);
                                    axpy(w, grow, &mut dx[xoff..xoff + own]);
                                }
                                dqw[wi] += acc;
                            }
                        }
                    }
                }
            }
        }
        accumulate_ste(
            &self.weight,
            &dqw,
            self.codebook.is_some(),
            &mut self.weight_grad,
        );
        Ok(grad_in)
    }
}

/// Fully connected layer over flattened activations, no bias. Operates
/// on tensors of shape (batch, features, 1, 1).
#[derive(Debug, Clone)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Vec<f32>,
    pub weight_grad: Vec<f32>,
    pub weight_bits: u8,
    codebook: Option<QuantCodebook>,
}

#[derive(Debug, Clone)]
pub struct LinearCache {
    input: Tensor4,
    qweight: Vec<f32>,
}

impl Linear {
    pub fn new(in_features: usize, out_features: usize, weight_bits: u8) -> Result<Self> {
        let codebook = if weight_bits == FLOAT_BITS {
            None
        } else {
            Some(quant::make_codebook(weight_bits)?)
        };
        let n = out_features * in_features;
        Ok(Self {
            in_features,
            out_features,
            weight: vec![0.0; n],
            weight_grad: vec![0.0; n],
            weight_bits,
            codebook,
        })
    }

    pub fn init_weights(&mut self, rng: &mut impl Rng) {
        let limit = (6.0 / (self.in_features + self.out_features) as f32).sqrt();
        for w in &mut self.weight {
            *w = rng.gen_range(-limit..limit);
        }
    }

    fn check_input(&self, shape: Shape4) -> Result<()> {
        if shape.c != self.in_features || shape.h != 1 || shape.w != 1 {
            return Err(Error::Config(format!(
                "linear expects shape (b, {}, 1, 1), got {shape}",
                self.in_features
            )));
        }
        Ok(())
    }

    fn apply(&self, input: &Tensor4, qweight: &[f32]) -> Result<Tensor4> {
        self.check_input(input.shape())?;
        let batch = input.shape().b;
        let mut out = Tensor4::zeros(Shape4::new(batch, self.out_features, 1, 1));
        for b in 0..batch {
            let xs = &input.data()[b * self.in_features..(b + 1) * self.in_features];
            for o in 0..self.out_features {
                let row = &qweight[o * self.in_features..(o + 1) * self.in_features];
                out.data_mut()[b * self.out_features + o] = dot(row, xs);
            }
        }
        Ok(out)
    }

    pub fn forward(&self, input: &Tensor4) -> Result<(Tensor4, LinearCache)> {
        let qweight = quantize_weights(&self.weight, self.codebook.as_ref());
        let out = self.apply(input, &qweight)?;
        Ok((
            out,
            LinearCache {
                input: input.clone(),
                qweight,
            },
        ))
    }

    pub fn forward_eval(&self, input: &Tensor4) -> Result<Tensor4> {
        let qweight = quantize_weights(&self.weight, self.codebook.as_ref());
        self.apply(input, &qweight)
    }

    pub fn forward_eval_with(&self, input: &Tensor4, qweight: &[f32]) -> Result<Tensor4> {
        self.apply(input, qweight)
    }

    pub fn quantized_weights(&self) -> Vec<f32> {
        quantize_weights(&self.weight, self.codebook.as_ref())
    }

    pub fn backward(&mut self, cache: &LinearCache, grad_out: &Tensor4) -> Result<Tensor4> {
        let batch = grad_out.shape().b;
        let mut grad_in = Tensor4::zeros(cache.input.shape());
        let mut dqw = vec![0.0f32; self.weight.len()];
        for b in 0..batch {
            let xs = &cache.input.data()[b * self.in_features..(b + 1) * self.in_features];
            let gs = &grad_out.data()[b * self.out_features..(b + 1) * self.out_features];
            let gi = &mut grad_in.data_mut()[b * self.in_features..(b + 1) * self.in_features];
            for o in 0..self.out_features {
                let g = gs[o];
                if g == 0.0 {
                    continue;
                }
                let row = &cache.qweight[o * self.in_features..(o + 1) * self.in_features];
                let drow = &mut dqw[o * self.in_features..(o + 1) * self.in_features];
                for i in 0..self.in_features {
                    drow[i] += g * xs[i];
                    gi[i] += g * row[i];
                }
            }
        }
        accumulate_ste(
            &self.weight,
            &dqw,
            self.codebook.is_some(),
            &mut self.weight_grad,
        );
        Ok(grad_in)
    }
}

/// Per-channel batch normalization with learned scale and shift.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub gamma_grad: Vec<f32>,
    pub beta_grad: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub momentum: f32,
    pub eps: f32,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    xhat: Tensor4,
    inv_std: Vec<f32>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            gamma_grad: vec![0.0; channels],
            beta_grad: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    fn check_input(&self, shape: Shape4) -> Result<()> {
        if shape.c != self.channels {
            return Err(Error::Config(format!(
                "batch norm over {} channels got input {shape}",
                self.channels
            )));
        }
        Ok(())
    }

    /// Training forward: normalize by batch statistics and update the
    /// running estimates (unbiased variance for the running estimate,
    /// biased for the normalization itself).
    pub fn forward(&mut self, input: &Tensor4) -> Result<(Tensor4, BatchNormCache)> {
        let shape = input.shape();
        self.check_input(shape)?;
        let n = (shape.b * shape.h * shape.w) as f64;
        if n < 1.0 {
            return Err(Error::Config("batch norm over empty input".into()));
        }
        let mut out = Tensor4::zeros(shape);
        let mut xhat = Tensor4::zeros(shape);
        let mut inv_std = vec![0.0f32; self.channels];
        for c in 0..self.channels {
            let mut sum = 0.0f64;
            let mut sq = 0.0f64;
            for b in 0..shape.b {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        let x = input.at(b, c, h, w) as f64;
                        sum += x;
                        sq += x * x;
                    }
                }
            }
            let mean = sum / n;
            let var = (sq / n - mean * mean).max(0.0);
            let istd = 1.0 / (var + self.eps as f64).sqrt();
            inv_std[c] = istd as f32;
            for b in 0..shape.b {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        let xh = ((input.at(b, c, h, w) as f64 - mean) * istd) as f32;
                        let i = shape.idx(b, c, h, w);
                        xhat.data_mut()[i] = xh;
                        out.data_mut()[i] = self.gamma[c] * xh + self.beta[c];
                    }
                }
            }
            let m = self.momentum as f64;
            let unbiased = if n > 1.0 { var * n / (n - 1.0) } else { var };
            self.running_mean[c] = ((1.0 - m) * self.running_mean[c] as f64 + m * mean) as f32;
            self.running_var[c] = ((1.0 - m) * self.running_var[c] as f64 + m * unbiased) as f32;
        }
        Ok((out, BatchNormCache { xhat, inv_std }))
    }

    /// Evaluation forward using the frozen running statistics.
    pub fn forward_eval(&self, input: &Tensor4) -> Result<Tensor4> {
        let shape = input.shape();
        self.check_input(shape)?;
        let mut out = Tensor4::zeros(shape);
        for c in 0..self.channels {
            let istd = 1.0 / (self.running_var[c] + self.eps).sqrt();
            let scale = self.gamma[c] * istd;
            let shift = self.beta[c] - scale * self.running_mean[c];
            for b in 0..shape.b {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        let i = shape.idx(b, c, h, w);
                        out.data_mut()[i] = scale * input.data()[i] + shift;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, cache: &BatchNormCache, grad_out: &Tensor4) -> Result<Tensor4> {
        let shape = grad_out.shape();
        self.check_input(shape)?;
        let n = (shape.b * shape.h * shape.w) as f64;
        let mut grad_in = Tensor4::zeros(shape);
        for c in 0..self.channels {
            let mut sum_dy = 0.0f64;
            let mut sum_dy_xhat = 0.0f64;
            for b in 0..shape.b {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        let i = shape.idx(b, c, h, w);
                        let dy = grad_out.data()[i] as f64;
                        sum_dy += dy;
                        sum_dy_xhat += dy * cache.xhat.data()[i] as f64;
                    }
                }
            }
            self.beta_grad[c] += sum_dy as f32;
            self.gamma_grad[c] += sum_dy_xhat as f32;
            let scale = self.gamma[c] as f64 * cache.inv_std[c] as f64 / n;
            for b in 0..shape.b {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        let i = shape.idx(b, c, h, w);
                        let dy = grad_out.data()[i] as f64;
                        let xh = cache.xhat.data()[i] as f64;
                        grad_in.data_mut()[i] =
                            (scale * (n * dy - sum_dy - xh * sum_dy_xhat)) as f32;
                    }
                }
            }
        }
        Ok(grad_in)
    }
}

/// 2x2 max pooling with stride 2; trailing rows/columns that do not fill
/// a window are dropped. Ties resolve to the first maximum in row-major
/// window order.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2d;

#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    input_shape: Shape4,
    argmax: Vec<usize>,
}

impl MaxPool2d {
    pub fn output_shape(&self, input: Shape4) -> Result<Shape4> {
        if input.h < 2 || input.w < 2 {
            return Err(Error::Config(format!(
                "max pool needs at least 2x2 input, got {input}"
            )));
        }
        Ok(Shape4::new(input.b, input.c, input.h / 2, input.w / 2))
    }

    pub fn forward(&self, input: &Tensor4) -> Result<(Tensor4, MaxPoolCache)> {
        let ishape = input.shape();
        let oshape = self.output_shape(ishape)?;
        let mut out = Tensor4::zeros(oshape);
        let mut argmax = vec![0usize; oshape.len()];
        for b in 0..oshape.b {
            for c in 0..oshape.c {
                for oh in 0..oshape.h {
                    for ow in 0..oshape.w {
                        let mut best = f32::NEG_INFINITY;
                        let mut best_i = 0usize;
                        for dh in 0..2 {
                            for dw in 0..2 {
                                let i = ishape.idx(b, c, 2 * oh + dh, 2 * ow + dw);
                                let v = input.data()[i];
                                if v > best {
                                    best = v;
                                    best_i = i;
                                }
                            }
                        }
                        let o = oshape.idx(b, c, oh, ow);
                        out.data_mut()[o] = best;
                        argmax[o] = best_i;
                    }
                }
            }
        }
        Ok((
            out,
            MaxPoolCache {
                input_shape: ishape,
                argmax,
            },
        ))
    }

    pub fn forward_eval(&self, input: &Tensor4) -> Result<Tensor4> {
        Ok(self.forward(input)?.0)
    }

    pub fn backward(&self, cache: &MaxPoolCache, grad_out: &Tensor4) -> Result<Tensor4> {
        let mut grad_in = Tensor4::zeros(cache.input_shape);
        for (o, &i) in cache.argmax.iter().enumerate() {
            grad_in.data_mut()[i] += grad_out.data()[o];
        }
        Ok(grad_in)
    }
}

/// Quantizing activation: maps inputs to the nearest codebook value. In
/// float mode (bitwidth 32) it is the identity. Backward uses the
/// straight-through estimator: gradients pass where the pre-activation
/// lies in [-1, 1].
#[derive(Debug, Clone)]
pub struct QuantAct {
    pub bits: u8,
    codebook: Option<QuantCodebook>,
}

#[derive(Debug, Clone)]
pub struct QuantActCache {
    input: Tensor4,
}

impl QuantAct {
    pub fn new(bits: u8) -> Result<Self> {
        let codebook = if bits == FLOAT_BITS {
            None
        } else {
            Some(quant::make_codebook(bits)?)
        };
        Ok(Self { bits, codebook })
    }

    pub fn codebook(&self) -> Option<&QuantCodebook> {
        self.codebook.as_ref()
    }

    fn apply(&self, input: &Tensor4) -> Tensor4 {
        match &self.codebook {
            Some(cb) => {
                let mut out = input.clone();
                for v in out.data_mut() {
                    *v = cb.quantize(*v);
                }
                out
            }
            None => input.clone(),
        }
    }

    pub fn forward(&self, input: &Tensor4) -> Result<(Tensor4, QuantActCache)> {
        Ok((
            self.apply(input),
            QuantActCache {
                input: input.clone(),
            },
        ))
    }

    pub fn forward_eval(&self, input: &Tensor4) -> Result<Tensor4> {
        Ok(self.apply(input))
    }

    pub fn backward(&self, cache: &QuantActCache, grad_out: &Tensor4) -> Result<Tensor4> {
        if self.codebook.is_none() {
            return Ok(grad_out.clone());
        }
        let mut grad_in = grad_out.clone();
        for (g, &x) in grad_in.data_mut().iter_mut().zip(cache.input.data()) {
            if x.abs() > 1.0 {
                *g = 0.0;
            }
        }
        Ok(grad_in)
    }
}
