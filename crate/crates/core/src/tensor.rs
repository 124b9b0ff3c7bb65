//! Dense rank-4 tensor, the carrier for activations, gradients and
//! parameters. Layout is `(batch, channels, height, width)`, row-major:
//! the `w` index is contiguous in memory.
//!
//! Weight tensors reuse the same container with the convention
//! `(out_channels, in_channels, kernel_h, kernel_w)`; fully-connected
//! weights are `(out, in, 1, 1)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape4 {
    pub b: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub fn new(b: usize, c: usize, h: usize, w: usize) -> Self {
        Self { b, c, h, w }
    }

    pub fn len(&self) -> usize {
        self.b * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of `(b, c, h, w)`.
    #[inline(always)]
    pub fn idx(&self, b: usize, c: usize, h: usize, w: usize) -> usize {
        ((b * self.c + c) * self.h + h) * self.w + w
    }
}

impl std::fmt::Display for Shape4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{},{})", self.b, self.c, self.h, self.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: Shape4,
    data: Vec<f32>,
    grad: Option<Vec<f32>>,
}

impl Tensor4 {
    pub fn zeros(shape: Shape4) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
            grad: None,
        }
    }

    pub fn filled(shape: Shape4, value: f32) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
            grad: None,
        }
    }

    pub fn from_vec(shape: Shape4, data: Vec<f32>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Config(format!(
                "tensor data length {} does not match shape {} = {} elements",
                data.len(),
                shape,
                shape.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            grad: None,
        })
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline(always)]
    pub fn at(&self, b: usize, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.shape.idx(b, c, h, w)]
    }

    #[inline(always)]
    pub fn set(&mut self, b: usize, c: usize, h: usize, w: usize, v: f32) {
        let i = self.shape.idx(b, c, h, w);
        self.data[i] = v;
    }

    /// Allocate the gradient buffer (zeros) if not yet present.
    pub fn ensure_grad(&mut self) {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
    }

    pub fn grad(&self) -> Option<&[f32]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> &mut [f32] {
        self.ensure_grad();
        self.grad.as_deref_mut().unwrap()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// Fresh tensor with the same shape, zero-filled, no grad buffer.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f32> {
        self.data.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn indexing_is_row_major() {
        let s = Shape4::new(2, 3, 4, 5);
        assert_eq!(s.idx(0, 0, 0, 0), 0);
        assert_eq!(s.idx(0, 0, 0, 1), 1);
        assert_eq!(s.idx(0, 0, 1, 0), 5);
        assert_eq!(s.idx(0, 1, 0, 0), 20);
        assert_eq!(s.idx(1, 0, 0, 0), 60);
        assert_eq!(s.idx(1, 2, 3, 4), 119);
    }

    #[test]
    fn from_vec_rejects_wrong_length() {
        let err = Tensor4::from_vec(Shape4::new(1, 1, 2, 2), vec![0.0; 3]);
        assert!(err.is_err());
    }

    #[test]
    fn grad_buffer_matches_shape() {
        let mut t = Tensor4::zeros(Shape4::new(1, 2, 3, 4));
        t.ensure_grad();
        assert_eq!(t.grad().unwrap().len(), t.len());
    }

    proptest! {
        /// Walking (b, c, h, w) in lexicographic order must visit flat
        /// indices 0, 1, 2, ... exactly once — indexing is a bijection
        /// onto the contiguous buffer.
        #[test]
        fn index_enumeration_is_contiguous(
            b in 1usize..4,
            c in 1usize..4,
            h in 1usize..5,
            w in 1usize..5,
        ) {
            let s = Shape4::new(b, c, h, w);
            let mut next = 0usize;
            for bi in 0..b {
                for ci in 0..c {
                    for hi in 0..h {
                        for wi in 0..w {
                            prop_assert_eq!(s.idx(bi, ci, hi, wi), next);
                            next += 1;
                        }
                    }
                }
            }
            prop_assert_eq!(next, s.len());
        }
    }
}
