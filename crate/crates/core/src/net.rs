//! Network assembly: a validated sequence of layers with training and
//! evaluation forward passes, backpropagation, and stuck-at fault hooks
//! at the injection points.
//!
//! Evaluation (`forward_eval`) is a pure function of the parameters: it
//! never touches running statistics, consumes no randomness, and treats
//! injection and dropout layers as identities. A `FaultSpec` pins one
//! channel or pixel of one injection point to a fixed value for the
//! whole pass, which is how exhaustive stuck-at sweeps are evaluated.

use crate::error::{Error, Result};
use crate::inject::{
    self, Dropout2dMask, DropoutMask, FaultModel, InjectionConfig, InjectionMask, InjectionStatus,
};
use crate::layers::{
    BatchNorm, BatchNormCache, Conv2d, Conv2dCache, Linear, LinearCache, MaxPool2d, MaxPoolCache,
    QuantAct, QuantActCache,
};
use crate::quant::{QuantCodebook, FLOAT_BITS};
use crate::rng::hash_f32_slice;
use crate::tensor::{Shape4, Tensor4};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Serializable layer description; a network is built from a list of
/// these plus the input dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        weight_bits: u8,
    },
    Linear {
        in_features: usize,
        out_features: usize,
        weight_bits: u8,
    },
    BatchNorm {
        channels: usize,
    },
    MaxPool,
    QuantAct {
        bits: u8,
    },
    Flatten,
    Injection {
        model: FaultModel,
        bits: u8,
    },
    Dropout {
        p: f64,
    },
    Dropout2d {
        p: f64,
    },
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv2d(Conv2d),
    Linear(Linear),
    BatchNorm(BatchNorm),
    MaxPool(MaxPool2d),
    QuantAct(QuantAct),
    Flatten,
    Injection(InjectionConfig),
    Dropout { p: f64 },
    Dropout2d { p: f64 },
}

/// Per-layer forward state consumed by the backward pass.
pub enum LayerCache {
    Conv2d(Conv2dCache),
    Linear(LinearCache),
    BatchNorm(BatchNormCache),
    MaxPool(MaxPoolCache),
    QuantAct(QuantActCache),
    Flatten(Shape4),
    Injection(InjectionMask),
    Dropout(DropoutMask),
    Dropout2d(Dropout2dMask),
}

/// Location and geometry of one injection point inside a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionPoint {
    /// Ordinal among injection layers, 0-based from the input side.
    pub ordinal: usize,
    /// Index into the network's layer list.
    pub layer_index: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Multiply-accumulate operations performed by the producing conv
    /// or fully connected layer per output channel (conv cost counts
    /// its own output map, before any pooling).
    pub producer_macs: usize,
    pub codebook: QuantCodebook,
}

/// A stuck-at fault pinned for a whole evaluation pass: one channel or
/// one pixel of one injection point holds `epsilon` for every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    /// Injection point ordinal (0-based).
    pub layer: usize,
    pub target: FaultTarget,
    pub epsilon: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultTarget {
    Channel(usize),
    Pixel { h: usize, w: usize },
}

fn apply_fault(x: &mut Tensor4, target: FaultTarget, epsilon: f32) {
    let shape = x.shape();
    match target {
        FaultTarget::Channel(c) => {
            for b in 0..shape.b {
                let base = shape.idx(b, c, 0, 0);
                x.data_mut()[base..base + shape.h * shape.w].fill(epsilon);
            }
        }
        FaultTarget::Pixel { h, w } => {
            for b in 0..shape.b {
                for c in 0..shape.c {
                    let i = shape.idx(b, c, h, w);
                    x.data_mut()[i] = epsilon;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    input_channels: usize,
    input_height: usize,
    input_width: usize,
    classes: usize,
    injection_points: Vec<InjectionPoint>,
}

impl Network {
    /// Build and validate a network. Shape inference runs over the whole
    /// stack, so mismatched layer dimensions fail here rather than at
    /// first use.
    pub fn from_specs(
        input_channels: usize,
        input_height: usize,
        input_width: usize,
        specs: Vec<LayerSpec>,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut injection_points = Vec::new();
        let mut shape = Shape4::new(1, input_channels, input_height, input_width);
        let mut producer_macs: Option<usize> = None;
        for (layer_index, spec) in specs.iter().enumerate() {
            let layer = match *spec {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    weight_bits,
                } => {
                    let conv = Conv2d::new(in_channels, out_channels, kernel, weight_bits)?;
                    shape = conv.output_shape(shape)?;
                    producer_macs = Some(kernel * kernel * in_channels * shape.h * shape.w);
                    Layer::Conv2d(conv)
                }
                LayerSpec::Linear {
                    in_features,
                    out_features,
                    weight_bits,
                } => {
                    let fc = Linear::new(in_features, out_features, weight_bits)?;
                    if shape.c != in_features || shape.h != 1 || shape.w != 1 {
                        return Err(Error::Config(format!(
                            "layer {layer_index}: linear({in_features}) cannot take {shape}"
                        )));
                    }
                    shape = Shape4::new(shape.b, out_features, 1, 1);
                    producer_macs = Some(in_features);
                    Layer::Linear(fc)
                }
                LayerSpec::BatchNorm { channels } => {
                    if shape.c != channels {
                        return Err(Error::Config(format!(
                            "layer {layer_index}: batch norm({channels}) cannot take {shape}"
                        )));
                    }
                    Layer::BatchNorm(BatchNorm::new(channels))
                }
                LayerSpec::MaxPool => {
                    shape = MaxPool2d.output_shape(shape)?;
                    Layer::MaxPool(MaxPool2d)
                }
                LayerSpec::QuantAct { bits } => Layer::QuantAct(QuantAct::new(bits)?),
                LayerSpec::Flatten => {
                    shape = Shape4::new(shape.b, shape.c * shape.h * shape.w, 1, 1);
                    Layer::Flatten
                }
                LayerSpec::Injection { model, bits } => {
                    let codebook = crate::quant::make_codebook(bits)?;
                    let mut cfg = InjectionConfig::new(0.0, model, codebook.clone())?;
                    cfg.status = InjectionStatus::Disable;
                    let macs = producer_macs.ok_or_else(|| {
                        Error::Config(format!(
                            "layer {layer_index}: injection point before any conv or linear layer"
                        ))
                    })?;
                    injection_points.push(InjectionPoint {
                        ordinal: injection_points.len(),
                        layer_index,
                        channels: shape.c,
                        height: shape.h,
                        width: shape.w,
                        producer_macs: macs,
                        codebook,
                    });
                    Layer::Injection(cfg)
                }
                LayerSpec::Dropout { p } => {
                    if !(0.0..1.0).contains(&p) {
                        return Err(Error::Config(format!(
                            "layer {layer_index}: dropout probability {p} outside [0, 1)"
                        )));
                    }
                    Layer::Dropout { p }
                }
                LayerSpec::Dropout2d { p } => {
                    if !(0.0..1.0).contains(&p) {
                        return Err(Error::Config(format!(
                            "layer {layer_index}: dropout probability {p} outside [0, 1)"
                        )));
                    }
                    Layer::Dropout2d { p }
                }
            };
            layers.push(layer);
        }
        if shape.h != 1 || shape.w != 1 {
            return Err(Error::Config(format!(
                "network output {shape} is not a logit vector; missing flatten?"
            )));
        }
        Ok(Self {
            specs,
            layers,
            input_channels,
            input_height,
            input_width,
            classes: shape.c,
            injection_points,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        (self.input_channels, self.input_height, self.input_width)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn injection_points(&self) -> &[InjectionPoint] {
        &self.injection_points
    }

    /// Initialize all learnable weights from a single stream; layer
    /// order fixes the draw order, so the same seed reproduces the same
    /// network bit for bit.
    pub fn init_weights(&mut self, rng: &mut impl Rng) {
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(conv) => conv.init_weights(rng),
                Layer::Linear(fc) => fc.init_weights(rng),
                _ => {}
            }
        }
    }

    fn check_input(&self, input: &Tensor4) -> Result<()> {
        let s = input.shape();
        if s.c != self.input_channels || s.h != self.input_height || s.w != self.input_width {
            return Err(Error::Config(format!(
                "network expects (b, {}, {}, {}), got {s}",
                self.input_channels, self.input_height, self.input_width
            )));
        }
        Ok(())
    }

    /// Training forward pass. Batch norm updates its running statistics;
    /// enabled injection layers and dropout layers draw from `rng` in
    /// layer order. Disabled injection layers draw nothing.
    pub fn forward_train(
        &mut self,
        input: &Tensor4,
        rng: &mut impl Rng,
    ) -> Result<(Tensor4, Vec<LayerCache>)> {
        self.check_input(input)?;
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (y, cache) = match layer {
                Layer::Conv2d(conv) => {
                    let (y, c) = conv.forward(&x)?;
                    (y, LayerCache::Conv2d(c))
                }
                Layer::Linear(fc) => {
                    let (y, c) = fc.forward(&x)?;
                    (y, LayerCache::Linear(c))
                }
                Layer::BatchNorm(bn) => {
                    let (y, c) = bn.forward(&x)?;
                    (y, LayerCache::BatchNorm(c))
                }
                Layer::MaxPool(mp) => {
                    let (y, c) = mp.forward(&x)?;
                    (y, LayerCache::MaxPool(c))
                }
                Layer::QuantAct(qa) => {
                    let (y, c) = qa.forward(&x)?;
                    (y, LayerCache::QuantAct(c))
                }
                Layer::Flatten => {
                    let old = x.shape();
                    let flat = Shape4::new(old.b, old.c * old.h * old.w, 1, 1);
                    let y = Tensor4::from_vec(flat, x.data().to_vec())?;
                    (y, LayerCache::Flatten(old))
                }
                Layer::Injection(cfg) => {
                    let (y, mask) = inject::inject_forward(&x, cfg, rng)?;
                    (y, LayerCache::Injection(mask))
                }
                Layer::Dropout { p } => {
                    let (y, mask) = inject::dropout_forward(&x, *p, rng)?;
                    (y, LayerCache::Dropout(mask))
                }
                Layer::Dropout2d { p } => {
                    let (y, mask) = inject::dropout2d_forward(&x, *p, rng)?;
                    (y, LayerCache::Dropout2d(mask))
                }
            };
            x = y;
            caches.push(cache);
        }
        Ok((x, caches))
    }

    /// Evaluation forward pass: pure in the parameters, no randomness.
    /// Injection and dropout layers are identities; an optional
    /// `FaultSpec` pins one channel or pixel at its injection point.
    pub fn forward_eval(&self, input: &Tensor4, fault: Option<&FaultSpec>) -> Result<Tensor4> {
        self.check_input(input)?;
        if let Some(f) = fault {
            self.validate_fault(f)?;
        }
        let mut x = input.clone();
        let mut ordinal = 0usize;
        for layer in &self.layers {
            x = match layer {
                Layer::Conv2d(conv) => conv.forward_eval(&x)?,
                Layer::Linear(fc) => fc.forward_eval(&x)?,
                Layer::BatchNorm(bn) => bn.forward_eval(&x)?,
                Layer::MaxPool(mp) => mp.forward_eval(&x)?,
                Layer::QuantAct(qa) => qa.forward_eval(&x)?,
                Layer::Flatten => {
                    let old = x.shape();
                    let flat = Shape4::new(old.b, old.c * old.h * old.w, 1, 1);
                    Tensor4::from_vec(flat, x.data().to_vec())?
                }
                Layer::Injection(_) => {
                    if let Some(f) = fault {
                        if f.layer == ordinal {
                            apply_fault(&mut x, f.target, f.epsilon);
                        }
                    }
                    ordinal += 1;
                    x
                }
                Layer::Dropout { .. } | Layer::Dropout2d { .. } => x,
            };
        }
        Ok(x)
    }

    fn validate_fault(&self, f: &FaultSpec) -> Result<()> {
        let point = self.injection_points.get(f.layer).ok_or_else(|| {
            Error::Config(format!(
                "fault targets injection point {} but network has {}",
                f.layer,
                self.injection_points.len()
            ))
        })?;
        match f.target {
            FaultTarget::Channel(c) if c >= point.channels => Err(Error::Config(format!(
                "fault channel {c} out of range for injection point {} ({} channels)",
                f.layer, point.channels
            ))),
            FaultTarget::Pixel { h, w } if h >= point.height || w >= point.width => {
                Err(Error::Config(format!(
                    "fault pixel ({h}, {w}) out of range for injection point {} ({}x{})",
                    f.layer, point.height, point.width
                )))
            }
            _ => Ok(()),
        }
    }

    /// Backpropagate through the cached forward pass, accumulating
    /// parameter gradients in the layers.
    pub fn backward(&mut self, caches: &[LayerCache], grad_logits: &Tensor4) -> Result<()> {
        if caches.len() != self.layers.len() {
            return Err(Error::Config(format!(
                "{} caches for {} layers",
                caches.len(),
                self.layers.len()
            )));
        }
        let mut g = grad_logits.clone();
        for (layer, cache) in self.layers.iter_mut().zip(caches.iter()).rev() {
            g = match (layer, cache) {
                (Layer::Conv2d(conv), LayerCache::Conv2d(c)) => conv.backward(c, &g)?,
                (Layer::Linear(fc), LayerCache::Linear(c)) => fc.backward(c, &g)?,
                (Layer::BatchNorm(bn), LayerCache::BatchNorm(c)) => bn.backward(c, &g)?,
                (Layer::MaxPool(mp), LayerCache::MaxPool(c)) => mp.backward(c, &g)?,
                (Layer::QuantAct(qa), LayerCache::QuantAct(c)) => qa.backward(c, &g)?,
                (Layer::Flatten, LayerCache::Flatten(old)) => {
                    Tensor4::from_vec(*old, g.data().to_vec())?
                }
                (Layer::Injection(_), LayerCache::Injection(mask)) => {
                    inject::inject_backward(&g, mask)
                }
                (Layer::Dropout { p }, LayerCache::Dropout(mask)) => {
                    inject::dropout_backward(&g, mask, *p)?
                }
                (Layer::Dropout2d { p }, LayerCache::Dropout2d(mask)) => {
                    inject::dropout2d_backward(&g, mask, *p)?
                }
                _ => {
                    return Err(Error::Config(
                        "layer/cache mismatch in backward pass".into(),
                    ))
                }
            };
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(conv) => conv.weight_grad.fill(0.0),
                Layer::Linear(fc) => fc.weight_grad.fill(0.0),
                Layer::BatchNorm(bn) => {
                    bn.gamma_grad.fill(0.0);
                    bn.beta_grad.fill(0.0);
                }
                _ => {}
            }
        }
    }

    /// Every learnable (parameter, gradient) pair in a stable order:
    /// layer order, and within batch norm gamma before beta. The order
    /// is what the optimizer keys its moment buffers on.
    pub fn param_pairs(&mut self) -> Vec<(&mut [f32], &[f32])> {
        let mut out: Vec<(&mut [f32], &[f32])> = Vec::new();
        for layer in self.layers.iter_mut() {
            match layer {
                Layer::Conv2d(conv) => {
                    out.push((conv.weight.as_mut_slice(), conv.weight_grad.as_slice()))
                }
                Layer::Linear(fc) => {
                    out.push((fc.weight.as_mut_slice(), fc.weight_grad.as_slice()))
                }
                Layer::BatchNorm(bn) => {
                    out.push((bn.gamma.as_mut_slice(), bn.gamma_grad.as_slice()));
                    out.push((bn.beta.as_mut_slice(), bn.beta_grad.as_slice()));
                }
                _ => {}
            }
        }
        out
    }

    /// Clamp latent weights of quantized layers to [-1, 1] so the
    /// straight-through estimator keeps a live gradient.
    pub fn clip_latent_weights(&mut self) {
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(conv) if conv.weight_bits != FLOAT_BITS => {
                    for w in &mut conv.weight {
                        *w = w.clamp(-1.0, 1.0);
                    }
                }
                Layer::Linear(fc) if fc.weight_bits != FLOAT_BITS => {
                    for w in &mut fc.weight {
                        *w = w.clamp(-1.0, 1.0);
                    }
                }
                _ => {}
            }
        }
    }

    /// Order-sensitive hash over all parameters and running statistics;
    /// used to assert that evaluation never mutates the model.
    pub fn param_hash(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for layer in &self.layers {
            match layer {
                Layer::Conv2d(conv) => h = hash_f32_slice(h, &conv.weight),
                Layer::Linear(fc) => h = hash_f32_slice(h, &fc.weight),
                Layer::BatchNorm(bn) => {
                    h = hash_f32_slice(h, &bn.gamma);
                    h = hash_f32_slice(h, &bn.beta);
                    h = hash_f32_slice(h, &bn.running_mean);
                    h = hash_f32_slice(h, &bn.running_var);
                }
                _ => {}
            }
        }
        h
    }

    /// Set the injection probability (in percent) at every injection
    /// point.
    pub fn set_injection_p(&mut self, p: f64) -> Result<()> {
        if !(0.0..=100.0).contains(&p) {
            return Err(Error::Config(format!(
                "injection probability {p} outside [0, 100]"
            )));
        }
        for layer in &mut self.layers {
            if let Layer::Injection(cfg) = layer {
                cfg.p = p;
            }
        }
        Ok(())
    }

    /// Enable or disable every injection point.
    pub fn set_injection_status(&mut self, status: InjectionStatus) {
        for layer in &mut self.layers {
            if let Layer::Injection(cfg) = layer {
                cfg.status = status;
            }
        }
    }

    /// Enable or disable a single injection point by ordinal.
    pub fn set_injection_status_at(
        &mut self,
        ordinal: usize,
        status: InjectionStatus,
    ) -> Result<()> {
        let point = self.injection_points.get(ordinal).ok_or_else(|| {
            Error::Config(format!(
                "injection point {ordinal} out of range ({} present)",
                self.injection_points.len()
            ))
        })?;
        match &mut self.layers[point.layer_index] {
            Layer::Injection(cfg) => {
                cfg.status = status;
                Ok(())
            }
            _ => Err(Error::Config(format!(
                "layer {} is not an injection layer",
                point.layer_index
            ))),
        }
    }
}

/// Options for the small convolutional classifier used throughout.
#[derive(Debug, Clone)]
pub struct CnvOptions {
    pub weight_bits: u8,
    pub act_bits: u8,
    pub in_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub classes: usize,
    /// Fault model of the injection layers.
    pub fault_model: FaultModel,
    /// When set, a Dropout2d layer with this probability is placed in
    /// front of every injection point (the Dropout2D training baseline).
    pub dropout2d_p: Option<f64>,
}

impl Default for CnvOptions {
    fn default() -> Self {
        Self {
            weight_bits: 1,
            act_bits: 1,
            in_channels: 1,
            input_height: 28,
            input_width: 28,
            classes: 10,
            fault_model: FaultModel::Channel,
            dropout2d_p: None,
        }
    }
}

/// Build the small CNV classifier:
///
/// ```text
/// conv 3x3 (in -> 16) - BN - quant - pool - [inj 0]
/// conv 3x3 (16 -> 32) - BN - quant - pool - [inj 1]
/// conv 3x3 (32 -> 64) - BN - quant -        [inj 2]
/// flatten - fc (-> 128) - BN - quant -      [inj 3]
/// fc (-> classes) - BN
/// ```
///
/// In float activation mode (bits = 32) no injection points are
/// emitted, since stuck-at errors are defined over the activation
/// codebook.
pub fn build_cnv(opts: &CnvOptions) -> Result<Network> {
    let quantized = opts.act_bits != FLOAT_BITS;
    let mut specs = Vec::new();
    let mut h = opts.input_height;
    let mut w = opts.input_width;

    let push_inj = |specs: &mut Vec<LayerSpec>| {
        if let Some(p) = opts.dropout2d_p {
            specs.push(LayerSpec::Dropout2d { p });
        }
        if quantized {
            specs.push(LayerSpec::Injection {
                model: opts.fault_model,
                bits: opts.act_bits,
            });
        }
    };

    let conv_channels = [(opts.in_channels, 16), (16, 32), (32, 64)];
    for (stage, &(ci, co)) in conv_channels.iter().enumerate() {
        specs.push(LayerSpec::Conv2d {
            in_channels: ci,
            out_channels: co,
            kernel: 3,
            weight_bits: opts.weight_bits,
        });
        specs.push(LayerSpec::BatchNorm { channels: co });
        specs.push(LayerSpec::QuantAct {
            bits: opts.act_bits,
        });
        h -= 2;
        w -= 2;
        if stage < 2 {
            specs.push(LayerSpec::MaxPool);
            h /= 2;
            w /= 2;
        }
        push_inj(&mut specs);
    }

    specs.push(LayerSpec::Flatten);
    let flat = 64 * h * w;
    specs.push(LayerSpec::Linear {
        in_features: flat,
        out_features: 128,
        weight_bits: opts.weight_bits,
    });
    specs.push(LayerSpec::BatchNorm { channels: 128 });
    specs.push(LayerSpec::QuantAct {
        bits: opts.act_bits,
    });
    push_inj(&mut specs);
    specs.push(LayerSpec::Linear {
        in_features: 128,
        out_features: opts.classes,
        weight_bits: opts.weight_bits,
    });
    specs.push(LayerSpec::BatchNorm {
        channels: opts.classes,
    });

    Network::from_specs(opts.in_channels, opts.input_height, opts.input_width, specs)
}
