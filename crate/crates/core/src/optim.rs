//! ADAM optimizer over flat parameter tensors.
//!
//! The caller presents (parameter, gradient) slice pairs in a stable
//! order on every step; first and second moment buffers are allocated on
//! the first step and must keep matching thereafter.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update over every parameter tensor.
    pub fn step(&mut self, lr: f64, params: &mut [(&mut [f32], &[f32])]) -> Result<()> {
        if self.m.is_empty() {
            for (p, _) in params.iter() {
                self.m.push(vec![0.0; p.len()]);
                self.v.push(vec![0.0; p.len()]);
            }
        }
        if self.m.len() != params.len() {
            return Err(Error::Config(format!(
                "optimizer saw {} parameter tensors, expected {}",
                params.len(),
                self.m.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (slot, (param, grad)) in params.iter_mut().enumerate() {
            if param.len() != self.m[slot].len() {
                return Err(Error::Config(format!(
                    "parameter tensor {slot} changed size: {} vs {}",
                    param.len(),
                    self.m[slot].len()
                )));
            }
            if param.len() != grad.len() {
                return Err(Error::Config(format!(
                    "parameter/gradient length mismatch in tensor {slot}"
                )));
            }
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            for i in 0..param.len() {
                let g = grad[i] as f64;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                param[i] -= (lr * mhat / (vhat.sqrt() + self.eps)) as f32;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With constant unit gradient the bias-corrected update is
        // lr * 1 / (1 + eps) regardless of beta values.
        let mut adam = Adam::default();
        let mut p = vec![1.0f32];
        let g = vec![1.0f32];
        adam.step(0.1, &mut [(&mut p, &g)]).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-6, "param after one step: {}", p[0]);
    }

    #[test]
    fn two_steps_hand_computed() {
        let mut adam = Adam::default();
        let mut p = vec![0.0f32];
        let g = vec![2.0f32];
        adam.step(0.5, &mut [(&mut p, &g)]).unwrap();
        adam.step(0.5, &mut [(&mut p, &g)]).unwrap();
        // Both bias-corrected moments equal (4, 2) -> step 0.5 each time.
        let expect = -0.5_f64 * (2.0 / (2.0 + 1e-8)) - 0.5 * (2.0 / (2.0 + 1e-8));
        assert!(
            (p[0] as f64 - expect).abs() < 1e-5,
            "param {} expected {expect}",
            p[0]
        );
    }

    #[test]
    fn descends_a_quadratic() {
        // Minimize (x - 3)^2; gradient 2(x - 3).
        let mut adam = Adam::default();
        let mut p = vec![0.0f32];
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 3.0)];
            adam.step(0.05, &mut [(&mut p, &g)]).unwrap();
        }
        assert!((p[0] - 3.0).abs() < 0.05, "converged to {}", p[0]);
    }

    #[test]
    fn zero_gradient_leaves_parameter_fixed() {
        let mut adam = Adam::default();
        let mut p = vec![1.25f32];
        let g = vec![0.0f32];
        adam.step(0.1, &mut [(&mut p, &g)]).unwrap();
        assert_eq!(p[0], 1.25);
    }

    #[test]
    fn rejects_changing_tensor_count() {
        let mut adam = Adam::default();
        let mut a = vec![0.0f32; 2];
        let ga = vec![0.0f32; 2];
        adam.step(0.1, &mut [(&mut a, &ga)]).unwrap();
        let mut b = vec![0.0f32; 2];
        let gb = vec![0.0f32; 2];
        let err = adam.step(0.1, &mut [(&mut a, &ga), (&mut b, &gb)]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_changing_tensor_size() {
        let mut adam = Adam::default();
        let mut a = vec![0.0f32; 2];
        let ga = vec![0.0f32; 2];
        adam.step(0.1, &mut [(&mut a, &ga)]).unwrap();
        let mut small = vec![0.0f32; 1];
        let gs = vec![0.0f32; 1];
        assert!(adam.step(0.1, &mut [(&mut small, &gs)]).is_err());
    }
}
