//! Stochastic stuck-at error injection plus Dropout/Dropout2D baselines.
//!
//! The injection layer overwrites activation elements with codebook
//! values at training time. Given an injection percentage `p` and a
//! codebook of `E` values, a uniform draw `r` in [0,1) per element
//! selects the outcome:
//!
//! ```text
//! element <- eps_k   when  p_{k-1} <= r < p_k,   p_k = (p/100) * (k+1) / E
//! element unchanged  when  r >= p/100
//! ```
//!
//! so every error value is injected with probability `(p/100)/E` and the
//! total injection probability is `p/100`. The backward pass zeroes the
//! gradient exactly at injected positions and passes all others through
//! unscaled, which distinguishes injection from Dropout.
//!
//! Fault models differ only in the shape of the random tensor: the
//! element model draws per element, the channel model draws one value
//! per `(batch, channel)` plane, and the pixel model draws one value per
//! `(batch, height, width)` fiber; the draw is then broadcast across the
//! remaining dimensions, so a whole plane (or fiber) is stuck at a
//! single shared value or left untouched.

use crate::error::{Error, Result};
use crate::quant::QuantCodebook;
use crate::tensor::{Shape4, Tensor4};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultModel {
    /// Independent draw per element.
    Element,
    /// One draw per (batch, channel), broadcast over height and width.
    Channel,
    /// One draw per (batch, height, width), broadcast over channels.
    Pixel,
}

impl std::fmt::Display for FaultModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FaultModel::Element => write!(f, "element"),
            FaultModel::Channel => write!(f, "channel"),
            FaultModel::Pixel => write!(f, "pixel"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionStatus {
    Enable,
    Disable,
}

#[derive(Debug, Clone)]
pub struct InjectionConfig {
    /// Global injection probability as a percentage in [0, 100].
    pub p: f64,
    pub model: FaultModel,
    pub status: InjectionStatus,
    pub codebook: QuantCodebook,
}

impl InjectionConfig {
    pub fn new(p: f64, model: FaultModel, codebook: QuantCodebook) -> Result<Self> {
        if !(0.0..=100.0).contains(&p) {
            return Err(Error::Config(format!(
                "injection probability {p} outside [0, 100]"
            )));
        }
        Ok(Self {
            p,
            model,
            status: InjectionStatus::Enable,
            codebook,
        })
    }
}

/// Per-element record of the forward outcome. `slots[i]` holds the
/// injected codebook index, or `NOT_INJECTED` where the input passed
/// through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionMask {
    shape: Shape4,
    slots: Vec<u8>,
}

impl InjectionMask {
    pub const NOT_INJECTED: u8 = u8::MAX;

    pub fn all_clear(shape: Shape4) -> Self {
        Self {
            shape,
            slots: vec![Self::NOT_INJECTED; shape.len()],
        }
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    #[inline(always)]
    pub fn injected(&self, i: usize) -> bool {
        self.slots[i] != Self::NOT_INJECTED
    }

    /// Codebook index written at flat position `i`, if any.
    pub fn slot(&self, i: usize) -> Option<u8> {
        let s = self.slots[i];
        (s != Self::NOT_INJECTED).then_some(s)
    }

    pub fn count_injected(&self) -> usize {
        self.slots
            .iter()
            .filter(|&&s| s != Self::NOT_INJECTED)
            .count()
    }
}

/// Draw the random tensor for a fault model. Broadcast dimensions carry
/// identical values; the underlying draws are i.i.d. U(0,1) in row-major
/// order of the reduced tensor.
pub fn draw_r(shape: Shape4, model: FaultModel, rng: &mut impl Rng) -> Tensor4 {
    let mut r = Tensor4::zeros(shape);
    match model {
        FaultModel::Element => {
            for v in r.data_mut() {
                *v = rng.gen::<f32>();
            }
        }
        FaultModel::Channel => {
            for b in 0..shape.b {
                for c in 0..shape.c {
                    let u = rng.gen::<f32>();
                    let base = shape.idx(b, c, 0, 0);
                    r.data_mut()[base..base + shape.h * shape.w].fill(u);
                }
            }
        }
        FaultModel::Pixel => {
            for b in 0..shape.b {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        let u = rng.gen::<f32>();
                        for c in 0..shape.c {
                            let i = shape.idx(b, c, h, w);
                            r.data_mut()[i] = u;
                        }
                    }
                }
            }
        }
    }
    r
}

/// Forward pass of the injection layer.
///
/// Disabled layers are exact identities and consume no randomness, so a
/// network with disabled injection layers is bit-identical to one with
/// the layers removed.
pub fn inject_forward(
    activations: &Tensor4,
    cfg: &InjectionConfig,
    rng: &mut impl Rng,
) -> Result<(Tensor4, InjectionMask)> {
    if !(0.0..=100.0).contains(&cfg.p) {
        return Err(Error::Config(format!(
            "injection probability {} outside [0, 100]",
            cfg.p
        )));
    }
    let shape = activations.shape();
    if cfg.status == InjectionStatus::Disable {
        return Ok((activations.clone(), InjectionMask::all_clear(shape)));
    }

    let total = (cfg.p / 100.0) as f32;
    let count = cfg.codebook.len();
    let r = draw_r(shape, cfg.model, rng);

    let mut out = activations.clone();
    let mut mask = InjectionMask::all_clear(shape);
    for (i, (&ri, v)) in r.data().iter().zip(out.data_mut()).enumerate() {
        if ri >= total {
            continue;
        }
        // r < p/100: find k with p_{k-1} <= r < p_k.
        for k in 0..count {
            let upper = total * (k + 1) as f32 / count as f32;
            if ri < upper {
                *v = cfg.codebook.value(k);
                mask.slots[i] = k as u8;
                break;
            }
        }
        // Float roundoff can leave r just below `total` but not below the
        // last threshold; stick it into the final slot then.
        if mask.slots[i] == InjectionMask::NOT_INJECTED {
            *v = cfg.codebook.value(count - 1);
            mask.slots[i] = (count - 1) as u8;
        }
    }
    Ok((out, mask))
}

/// Backward pass of the injection layer: gradients are zeroed exactly at
/// injected positions and passed through elsewhere, with no rescaling.
pub fn inject_backward(grad_out: &Tensor4, mask: &InjectionMask) -> Tensor4 {
    debug_assert_eq!(grad_out.shape(), mask.shape());
    let mut grad_in = grad_out.clone();
    for (i, g) in grad_in.data_mut().iter_mut().enumerate() {
        if mask.injected(i) {
            *g = 0.0;
        }
    }
    grad_in
}

/// Element dropout mask; `dropped[i]` marks zeroed positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    shape: Shape4,
    dropped: Vec<bool>,
}

impl DropoutMask {
    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn dropped(&self, i: usize) -> bool {
        self.dropped[i]
    }

    pub fn count_dropped(&self) -> usize {
        self.dropped.iter().filter(|&&d| d).count()
    }
}

fn check_dropout_p(p: f64) -> Result<f32> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!(
            "dropout probability {p} outside [0, 1)"
        )));
    }
    Ok(p as f32)
}

/// Dropout forward: zero each element with probability `p`, scale
/// survivors by 1/(1-p).
pub fn dropout_forward(
    activations: &Tensor4,
    p: f64,
    rng: &mut impl Rng,
) -> Result<(Tensor4, DropoutMask)> {
    let p = check_dropout_p(p)?;
    let scale = 1.0 / (1.0 - p);
    let mut out = activations.clone();
    let mut dropped = vec![false; activations.len()];
    for (v, d) in out.data_mut().iter_mut().zip(dropped.iter_mut()) {
        if rng.gen::<f32>() < p {
            *v = 0.0;
            *d = true;
        } else {
            *v *= scale;
        }
    }
    Ok((
        out,
        DropoutMask {
            shape: activations.shape(),
            dropped,
        },
    ))
}

/// Dropout backward: zero where dropped, scale by 1/(1-p) where kept.
pub fn dropout_backward(grad_out: &Tensor4, mask: &DropoutMask, p: f64) -> Result<Tensor4> {
    let p = check_dropout_p(p)?;
    debug_assert_eq!(grad_out.shape(), mask.shape());
    let scale = 1.0 / (1.0 - p);
    let mut grad_in = grad_out.clone();
    for (g, &d) in grad_in.data_mut().iter_mut().zip(&mask.dropped) {
        *g = if d { 0.0 } else { *g * scale };
    }
    Ok(grad_in)
}

/// Channel dropout mask; one flag per (batch, channel) plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Dropout2dMask {
    shape: Shape4,
    dropped_planes: Vec<bool>,
}

impl Dropout2dMask {
    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn plane_dropped(&self, b: usize, c: usize) -> bool {
        self.dropped_planes[b * self.shape.c + c]
    }

    pub fn count_dropped_planes(&self) -> usize {
        self.dropped_planes.iter().filter(|&&d| d).count()
    }
}

/// Dropout2D forward: zero whole (batch, channel) planes with
/// probability `p`, scale surviving planes by 1/(1-p).
pub fn dropout2d_forward(
    activations: &Tensor4,
    p: f64,
    rng: &mut impl Rng,
) -> Result<(Tensor4, Dropout2dMask)> {
    let p = check_dropout_p(p)?;
    let scale = 1.0 / (1.0 - p);
    let shape = activations.shape();
    let plane = shape.h * shape.w;
    let mut out = activations.clone();
    let mut dropped_planes = vec![false; shape.b * shape.c];
    for b in 0..shape.b {
        for c in 0..shape.c {
            let drop = rng.gen::<f32>() < p;
            dropped_planes[b * shape.c + c] = drop;
            let base = shape.idx(b, c, 0, 0);
            let slice = &mut out.data_mut()[base..base + plane];
            if drop {
                slice.fill(0.0);
            } else {
                slice.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }
    Ok((
        out,
        Dropout2dMask {
            shape,
            dropped_planes,
        },
    ))
}

/// Dropout2D backward, mirroring the forward plane mask.
pub fn dropout2d_backward(grad_out: &Tensor4, mask: &Dropout2dMask, p: f64) -> Result<Tensor4> {
    let p = check_dropout_p(p)?;
    debug_assert_eq!(grad_out.shape(), mask.shape());
    let scale = 1.0 / (1.0 - p);
    let shape = grad_out.shape();
    let plane = shape.h * shape.w;
    let mut grad_in = grad_out.clone();
    for b in 0..shape.b {
        for c in 0..shape.c {
            let base = shape.idx(b, c, 0, 0);
            let slice = &mut grad_in.data_mut()[base..base + plane];
            if mask.plane_dropped(b, c) {
                slice.fill(0.0);
            } else {
                slice.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }
    Ok(grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::make_codebook;
    use crate::rng::SeedFanout;
    use proptest::prelude::*;
    // Proptest's prelude also globs in an `Rng`; name the one we mean.
    use rand::Rng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        SeedFanout::new(seed).stream("inject-test")
    }

    #[test]
    fn channel_model_draws_are_constant_per_plane() {
        let shape = Shape4::new(2, 3, 4, 4);
        let r = draw_r(shape, FaultModel::Channel, &mut rng(1));
        let mut distinct = std::collections::BTreeSet::new();
        for b in 0..2 {
            for c in 0..3 {
                let v0 = r.at(b, c, 0, 0);
                for h in 0..4 {
                    for w in 0..4 {
                        assert_eq!(r.at(b, c, h, w), v0);
                    }
                }
                distinct.insert(v0.to_bits());
            }
        }
        assert_eq!(distinct.len(), 6, "expected 6 distinct underlying draws");
    }

    #[test]
    fn pixel_model_draws_are_constant_across_channels() {
        let shape = Shape4::new(1, 3, 2, 2);
        let r = draw_r(shape, FaultModel::Pixel, &mut rng(2));
        let mut distinct = std::collections::BTreeSet::new();
        for h in 0..2 {
            for w in 0..2 {
                let v0 = r.at(0, 0, h, w);
                for c in 0..3 {
                    assert_eq!(r.at(0, c, h, w), v0);
                }
                distinct.insert(v0.to_bits());
            }
        }
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn element_model_uniformity_ks_test() {
        // Kolmogorov-Smirnov against U(0,1) at alpha = 0.01.
        let n = 1_000_000usize;
        let shape = Shape4::new(1, 1, 1000, 1000);
        let r = draw_r(shape, FaultModel::Element, &mut rng(3));
        let mut xs: Vec<f32> = r.data().to_vec();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d_max = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let f = x as f64;
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            d_max = d_max.max((f - lo).abs()).max((hi - f).abs());
        }
        let critical = 1.628 / (n as f64).sqrt();
        assert!(
            d_max < critical,
            "KS statistic {d_max} exceeds critical value {critical}"
        );
    }

    #[test]
    fn disabled_layer_is_identity_and_draws_nothing() {
        let cb = make_codebook(1).unwrap();
        let mut cfg = InjectionConfig::new(100.0, FaultModel::Element, cb).unwrap();
        cfg.status = InjectionStatus::Disable;
        let x = Tensor4::filled(Shape4::new(1, 2, 3, 3), 0.25);
        let mut r1 = rng(4);
        let (y, mask) = inject_forward(&x, &cfg, &mut r1).unwrap();
        assert_eq!(y, x);
        assert_eq!(mask.count_injected(), 0);
        // No randomness consumed: stream still aligned with a fresh one.
        use rand::RngCore;
        assert_eq!(r1.next_u64(), rng(4).next_u64());
    }

    #[test]
    fn p_zero_is_identity() {
        let cb = make_codebook(2).unwrap();
        let cfg = InjectionConfig::new(0.0, FaultModel::Element, cb).unwrap();
        let x = Tensor4::filled(Shape4::new(2, 2, 2, 2), -1.0);
        let (y, mask) = inject_forward(&x, &cfg, &mut rng(5)).unwrap();
        assert_eq!(y, x);
        assert_eq!(mask.count_injected(), 0);
    }

    #[test]
    fn out_of_range_probability_rejected() {
        let cb = make_codebook(1).unwrap();
        assert!(InjectionConfig::new(-1.0, FaultModel::Element, cb.clone()).is_err());
        assert!(InjectionConfig::new(100.5, FaultModel::Element, cb).is_err());
    }

    #[test]
    fn injected_values_come_from_codebook_and_rest_pass_through() {
        let cb = make_codebook(2).unwrap();
        let cfg = InjectionConfig::new(50.0, FaultModel::Element, cb.clone()).unwrap();
        let x = Tensor4::filled(Shape4::new(1, 4, 8, 8), 1.0);
        let (y, mask) = inject_forward(&x, &cfg, &mut rng(6)).unwrap();
        for i in 0..y.len() {
            if mask.injected(i) {
                let k = mask.slot(i).unwrap() as usize;
                assert_eq!(y.data()[i], cb.value(k));
            } else {
                assert_eq!(y.data()[i], 1.0);
            }
        }
        assert!(mask.count_injected() > 0);
    }

    #[test]
    fn per_value_frequency_one_sixth_at_p50_two_bit() {
        // p = 50, E = 3: each value injected with probability 1/6.
        let cb = make_codebook(2).unwrap();
        let cfg = InjectionConfig::new(50.0, FaultModel::Element, cb).unwrap();
        let x = Tensor4::zeros(Shape4::new(1, 1, 1000, 1000));
        let (_, mask) = inject_forward(&x, &cfg, &mut rng(7)).unwrap();
        let n = x.len() as f64;
        let mut counts = [0usize; 3];
        for i in 0..x.len() {
            if let Some(k) = mask.slot(i) {
                counts[k as usize] += 1;
            }
        }
        for (k, &cnt) in counts.iter().enumerate() {
            let freq = cnt as f64 / n;
            assert!(
                (freq - 1.0 / 6.0).abs() < 0.002,
                "value {k}: frequency {freq}"
            );
        }
        let total = counts.iter().sum::<usize>() as f64 / n;
        assert!((total - 0.5).abs() < 0.003, "total injection rate {total}");
    }

    #[test]
    fn backward_zeroes_exactly_masked_indices() {
        let cb = make_codebook(1).unwrap();
        let cfg = InjectionConfig::new(30.0, FaultModel::Element, cb).unwrap();
        let x = Tensor4::filled(Shape4::new(2, 3, 4, 4), 1.0);
        let (_, mask) = inject_forward(&x, &cfg, &mut rng(8)).unwrap();
        let mut g = Tensor4::zeros(x.shape());
        for (i, v) in g.data_mut().iter_mut().enumerate() {
            *v = i as f32 + 1.0;
        }
        let back = inject_backward(&g, &mask);
        for i in 0..g.len() {
            let expect = if mask.injected(i) { 0.0 } else { g.data()[i] };
            assert_eq!(back.data()[i], expect);
        }
    }

    #[test]
    fn forward_is_deterministic_under_seed() {
        let cb = make_codebook(2).unwrap();
        let cfg = InjectionConfig::new(25.0, FaultModel::Channel, cb).unwrap();
        let x = Tensor4::filled(Shape4::new(3, 5, 6, 6), 1.0);
        let (y1, m1) = inject_forward(&x, &cfg, &mut rng(9)).unwrap();
        let (y2, m2) = inject_forward(&x, &cfg, &mut rng(9)).unwrap();
        assert_eq!(y1, y2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn channel_model_planes_are_all_or_nothing() {
        let cb = make_codebook(2).unwrap();
        let cfg = InjectionConfig::new(40.0, FaultModel::Channel, cb).unwrap();
        let shape = Shape4::new(4, 6, 5, 5);
        let x = Tensor4::filled(shape, 1.0);
        let (_, mask) = inject_forward(&x, &cfg, &mut rng(10)).unwrap();
        for b in 0..shape.b {
            for c in 0..shape.c {
                let first = mask.slot(shape.idx(b, c, 0, 0));
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        assert_eq!(mask.slot(shape.idx(b, c, h, w)), first);
                    }
                }
            }
        }
    }

    #[test]
    fn dropout_scales_survivors() {
        let x = Tensor4::filled(Shape4::new(1, 1, 100, 100), 1.0);
        let (y, mask) = dropout_forward(&x, 0.5, &mut rng(11)).unwrap();
        for i in 0..y.len() {
            if mask.dropped(i) {
                assert_eq!(y.data()[i], 0.0);
            } else {
                assert_eq!(y.data()[i], 2.0);
            }
        }
    }

    #[test]
    fn dropout_identity_at_p_zero() {
        let x = Tensor4::filled(Shape4::new(1, 2, 3, 3), 0.7);
        let (y, mask) = dropout_forward(&x, 0.0, &mut rng(12)).unwrap();
        assert_eq!(y, x);
        assert_eq!(mask.count_dropped(), 0);
    }

    #[test]
    fn dropout_rejects_p_one() {
        let x = Tensor4::filled(Shape4::new(1, 1, 1, 1), 1.0);
        assert!(dropout_forward(&x, 1.0, &mut rng(13)).is_err());
    }

    #[test]
    fn dropout_monte_carlo_rates() {
        let x = Tensor4::filled(Shape4::new(1, 1, 1000, 1000), 1.0);
        let (y, mask) = dropout_forward(&x, 0.3, &mut rng(14)).unwrap();
        let n = x.len() as f64;
        let zero_frac = mask.count_dropped() as f64 / n;
        assert!((zero_frac - 0.3).abs() < 0.002, "zero fraction {zero_frac}");
        let mean: f64 = y.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        assert!((mean - 1.0).abs() < 0.01, "output mean {mean}");
    }

    #[test]
    fn dropout_backward_matches_mask_oracle() {
        let x = Tensor4::filled(Shape4::new(2, 2, 4, 4), 1.0);
        let (_, mask) = dropout_forward(&x, 0.4, &mut rng(15)).unwrap();
        let g = Tensor4::filled(x.shape(), 3.0);
        let back = dropout_backward(&g, &mask, 0.4).unwrap();
        for i in 0..g.len() {
            let expect = if mask.dropped(i) { 0.0 } else { 3.0 / 0.6 };
            assert_eq!(back.data()[i], expect);
        }
    }

    #[test]
    fn dropout2d_drops_whole_planes() {
        let shape = Shape4::new(3, 4, 5, 5);
        let x = Tensor4::filled(shape, 1.0);
        let (y, mask) = dropout2d_forward(&x, 0.5, &mut rng(16)).unwrap();
        for b in 0..shape.b {
            for c in 0..shape.c {
                let expect = if mask.plane_dropped(b, c) { 0.0 } else { 2.0 };
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        assert_eq!(y.at(b, c, h, w), expect, "partial plane at ({b},{c})");
                    }
                }
            }
        }
    }

    #[test]
    fn dropout2d_identity_at_p_zero() {
        let x = Tensor4::filled(Shape4::new(2, 3, 4, 4), -0.5);
        let (y, mask) = dropout2d_forward(&x, 0.0, &mut rng(17)).unwrap();
        assert_eq!(y, x);
        assert_eq!(mask.count_dropped_planes(), 0);
    }

    #[test]
    fn dropout2d_channel_drop_rate() {
        // 100_000 planes at p = 0.25.
        let shape = Shape4::new(1000, 100, 1, 1);
        let x = Tensor4::filled(shape, 1.0);
        let (_, mask) = dropout2d_forward(&x, 0.25, &mut rng(18)).unwrap();
        let rate = mask.count_dropped_planes() as f64 / 100_000.0;
        assert!((rate - 0.25).abs() < 0.01, "drop rate {rate}");
    }

    proptest! {
        /// Whatever the model, probability, bit width and shape: an
        /// output element is either pinned to the codebook value its
        /// mask slot names, or passed through bit-exactly; the mask's
        /// count agrees; and the backward pass zeroes exactly the
        /// injected positions.
        #[test]
        fn forward_pins_to_codebook_and_backward_follows_mask(
            seed in 0u64..1 << 16,
            bits in 1u8..=4,
            p in 0.0f64..=100.0,
            model_pick in 0usize..3,
            b in 1usize..3,
            c in 1usize..4,
            h in 1usize..4,
            w in 1usize..4,
        ) {
            let model = [FaultModel::Element, FaultModel::Channel, FaultModel::Pixel][model_pick];
            let cb = make_codebook(bits).unwrap();
            let cfg = InjectionConfig::new(p, model, cb.clone()).unwrap();
            let shape = Shape4::new(b, c, h, w);
            let mut r = rng(seed);
            let mut x = Tensor4::zeros(shape);
            for v in x.data_mut() {
                *v = r.gen_range(-2.0f32..2.0);
            }

            let (out, mask) = inject_forward(&x, &cfg, &mut r).unwrap();
            let mut injected = 0usize;
            for i in 0..shape.len() {
                match mask.slot(i) {
                    Some(s) => {
                        injected += 1;
                        prop_assert_eq!(out.data()[i], cb.values()[s as usize]);
                    }
                    None => prop_assert_eq!(out.data()[i].to_bits(), x.data()[i].to_bits()),
                }
            }
            prop_assert_eq!(injected, mask.count_injected());

            let mut g = Tensor4::zeros(shape);
            for v in g.data_mut() {
                *v = r.gen_range(-1.0f32..1.0);
            }
            let gi = inject_backward(&g, &mask);
            for i in 0..shape.len() {
                let expect = if mask.injected(i) { 0.0f32 } else { g.data()[i] };
                prop_assert_eq!(gi.data()[i].to_bits(), expect.to_bits());
            }
        }
    }
}
