//! Quantization codebooks and the straight-through estimator.
//!
//! A codebook is the ordered set of representable values for a given bit
//! width. It serves double duty: it defines the quantizer of weight and
//! activation tensors, and it is the set of injectable stuck-at error
//! values for the fault models.
//!
//! Supported widths:
//! * 1 bit: `{-1, +1}` (two values, no zero),
//! * 2..=4 bits, symmetric: `{-1, ..., -d, 0, +d, ..., +1}` with spacing
//!   `d = 2 / (2^b - 2)`, i.e. `2^b - 1` values,
//! * 32: float passthrough (quantizer is the identity).

use crate::error::{Error, Result};
use crate::tensor::Tensor4;
use serde::{Deserialize, Serialize};

/// Bit width marker for float passthrough layers.
pub const FLOAT_BITS: u8 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantCodebook {
    bitwidth: u8,
    /// Strictly ascending. Symmetric about zero for b >= 2.
    values: Vec<f32>,
}

/// Build the codebook for a supported bit width.
///
/// The positive half is constructed first and mirrored, so `v` in the
/// codebook implies `-v` is present with the exact same bit pattern.
pub fn make_codebook(bitwidth: u8) -> Result<QuantCodebook> {
    match bitwidth {
        1 => Ok(QuantCodebook {
            bitwidth,
            values: vec![-1.0, 1.0],
        }),
        2..=4 => {
            let half = (1usize << (bitwidth - 1)) - 1; // positive levels
            let step = 2.0f32 / ((1usize << bitwidth) - 2) as f32;
            let mut values = Vec::with_capacity(2 * half + 1);
            for i in (1..=half).rev() {
                values.push(-(i as f32 * step));
            }
            values.push(0.0);
            for i in 1..=half {
                values.push(i as f32 * step);
            }
            Ok(QuantCodebook { bitwidth, values })
        }
        _ => Err(Error::Config(format!(
            "unsupported codebook bit width {bitwidth} (expected 1..=4)"
        ))),
    }
}

impl QuantCodebook {
    /// Reconstruct from serialized form; validates against `make_codebook`.
    pub fn from_parts(bitwidth: u8, values: Vec<f32>) -> Result<Self> {
        let reference = make_codebook(bitwidth)?;
        if reference.values != values {
            return Err(Error::Format(format!(
                "codebook values do not match bit width {bitwidth}"
            )));
        }
        Ok(reference)
    }

    pub fn bitwidth(&self) -> u8 {
        self.bitwidth
    }

    /// Number of representable values, i.e. how many distinct stuck-at
    /// errors a faulty wire can present.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f32 {
        self.values[index]
    }

    /// Index of the nearest codebook value; ties round toward +inf.
    #[inline]
    pub fn nearest_index(&self, x: f32) -> usize {
        if self.bitwidth == 1 {
            return if x >= 0.0 { 1 } else { 0 };
        }
        // Uniform grid: values[i] = -1 + i * step.
        let last = self.values.len() - 1;
        let step = 2.0 / last as f32;
        let pos = (x + 1.0) / step + 0.5;
        if pos <= 0.0 {
            0
        } else {
            (pos.floor() as usize).min(last)
        }
    }

    pub fn contains(&self, x: f32) -> bool {
        self.values.contains(&x)
    }

    /// Nearest codebook value for a single number (ties toward +inf).
    #[inline]
    pub fn quantize(&self, x: f32) -> f32 {
        self.value(self.nearest_index(x))
    }
}

/// Map every element to its nearest codebook value (ties toward +inf).
/// Output values are members of the codebook, bit-exact.
pub fn quantize(x: &Tensor4, cb: &QuantCodebook) -> Tensor4 {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = cb.value(cb.nearest_index(*v));
    }
    out
}

/// Straight-through gradient of the quantizer: pass where the
/// pre-activation lies in the clip range [-1, 1], zero elsewhere.
pub fn quantize_backward(grad_out: &Tensor4, pre_activation: &Tensor4) -> Tensor4 {
    debug_assert_eq!(grad_out.shape(), pre_activation.shape());
    let mut grad_in = grad_out.clone();
    for (g, &x) in grad_in.data_mut().iter_mut().zip(pre_activation.data()) {
        if x.abs() > 1.0 {
            *g = 0.0;
        }
    }
    grad_in
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape4;
    use proptest::prelude::*;

    /// Independent nearest-value oracle: linear scan, ties toward +inf.
    fn nearest_by_scan(cb: &QuantCodebook, x: f32) -> f32 {
        let mut best = cb.values()[0];
        let mut best_d = (x - best).abs();
        for &v in cb.values() {
            let d = (x - v).abs();
            // `<=` prefers the later (larger) value on exact ties.
            if d <= best_d {
                best = v;
                best_d = d;
            }
        }
        best
    }

    #[test]
    fn one_bit_codebook() {
        let cb = make_codebook(1).unwrap();
        assert_eq!(cb.values(), &[-1.0, 1.0]);
        assert_eq!(cb.len(), 2);
    }

    #[test]
    fn two_bit_codebook() {
        let cb = make_codebook(2).unwrap();
        assert_eq!(cb.values(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn three_bit_codebook_is_seven_symmetric_values() {
        let cb = make_codebook(3).unwrap();
        assert_eq!(cb.len(), 7);
        assert_eq!(cb.value(3), 0.0);
        assert_eq!(cb.value(0), -1.0);
        assert_eq!(cb.value(6), 1.0);
        // Uniform spacing 1/3 within float tolerance.
        for i in 1..cb.len() {
            let d = cb.value(i) - cb.value(i - 1);
            assert!((d - 1.0 / 3.0).abs() < 1e-6, "spacing {d}");
        }
        // Exact mirror symmetry by construction; the center is +0.0,
        // which is its own mirror (negating it would flip the sign bit).
        for i in 0..cb.len() {
            let v = cb.value(i);
            let mirror = cb.value(cb.len() - 1 - i);
            if v == 0.0 {
                assert_eq!(mirror.to_bits(), 0.0f32.to_bits(), "center must be +0.0");
            } else {
                assert_eq!(v.to_bits(), (-mirror).to_bits());
            }
        }
    }

    #[test]
    fn four_bit_codebook_has_fifteen_values() {
        let cb = make_codebook(4).unwrap();
        assert_eq!(cb.len(), 15);
        assert!(cb.contains(0.0));
    }

    #[test]
    fn unsupported_widths_are_rejected() {
        assert!(make_codebook(0).is_err());
        assert!(make_codebook(5).is_err());
        assert!(make_codebook(32).is_err());
    }

    #[test]
    fn sign_quantization_with_tie_up() {
        let cb = make_codebook(1).unwrap();
        let x = Tensor4::from_vec(Shape4::new(1, 1, 1, 4), vec![0.3, -0.0001, 0.0, -2.0]).unwrap();
        let q = quantize(&x, &cb);
        assert_eq!(q.data(), &[1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn two_bit_rounding_boundaries() {
        let cb = make_codebook(2).unwrap();
        let x = Tensor4::from_vec(Shape4::new(1, 1, 1, 4), vec![0.49, 0.51, -0.49, 0.5]).unwrap();
        let q = quantize(&x, &cb);
        assert_eq!(q.data(), &[0.0, 1.0, 0.0, 1.0]); // tie 0.5 rounds up
    }

    #[test]
    fn ste_masks_outside_clip_range() {
        let g = Tensor4::filled(Shape4::new(1, 1, 1, 3), 2.0);
        let pre = Tensor4::from_vec(Shape4::new(1, 1, 1, 3), vec![0.0, 5.0, -1.0]).unwrap();
        let back = quantize_backward(&g, &pre);
        assert_eq!(back.data(), &[2.0, 0.0, 2.0]);
    }

    #[test]
    fn serialized_roundtrip_validates() {
        let cb = make_codebook(3).unwrap();
        let again = QuantCodebook::from_parts(3, cb.values().to_vec()).unwrap();
        assert_eq!(cb, again);
        assert!(QuantCodebook::from_parts(3, vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn quantize_is_idempotent_and_in_codebook(
            bits in 1u8..=4,
            xs in proptest::collection::vec(-3.0f32..3.0, 1..64),
        ) {
            let cb = make_codebook(bits).unwrap();
            let n = xs.len();
            let t = Tensor4::from_vec(Shape4::new(1, 1, 1, n), xs).unwrap();
            let q1 = quantize(&t, &cb);
            let q2 = quantize(&q1, &cb);
            for (&a, &b) in q1.data().iter().zip(q2.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            for &v in q1.data() {
                prop_assert!(cb.contains(v), "{} not in codebook", v);
            }
        }

        #[test]
        fn quantize_matches_linear_scan_oracle(
            bits in 1u8..=4,
            xs in proptest::collection::vec(-2.0f32..2.0, 1..64),
        ) {
            let cb = make_codebook(bits).unwrap();
            let n = xs.len();
            let t = Tensor4::from_vec(Shape4::new(1, 1, 1, n), xs.clone()).unwrap();
            let q = quantize(&t, &cb);
            for (i, &x) in xs.iter().enumerate() {
                prop_assert_eq!(q.data()[i], nearest_by_scan(&cb, x));
            }
        }

        #[test]
        fn codebook_symmetry_for_multibit(bits in 2u8..=4) {
            let cb = make_codebook(bits).unwrap();
            prop_assert!(cb.contains(0.0));
            for &v in cb.values() {
                prop_assert!(cb.contains(-v));
            }
            for w in cb.values().windows(2) {
                prop_assert!(w[0] < w[1], "not strictly ascending");
            }
        }

        #[test]
        fn ste_matches_elementwise_mask_oracle(
            xs in proptest::collection::vec(-3.0f32..3.0, 1..64),
            gs in proptest::collection::vec(-1.0f32..1.0, 64),
        ) {
            let n = xs.len();
            let pre = Tensor4::from_vec(Shape4::new(1, 1, 1, n), xs.clone()).unwrap();
            let g = Tensor4::from_vec(Shape4::new(1, 1, 1, n), gs[..n].to_vec()).unwrap();
            let back = quantize_backward(&g, &pre);
            for i in 0..n {
                let expect = if xs[i].abs() <= 1.0 { g.data()[i] } else { 0.0 };
                prop_assert_eq!(back.data()[i], expect);
            }
        }
    }
}
