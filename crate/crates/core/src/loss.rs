//! Squared hinge loss over one-vs-rest class targets.
//!
//! For logits `s` and targets `y` in {-1, +1} (the true class maps to
//! +1, every other class to -1) the loss for one sample is
//! `sum_k max(0, 1 - y_k * s_k)^2`, averaged over the batch.

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// Loss value and gradient with respect to the logits.
///
/// `logits` has shape (batch, classes, 1, 1); `labels` holds the true
/// class index per sample.
pub fn squared_hinge(logits: &Tensor4, labels: &[usize]) -> Result<(f64, Tensor4)> {
    let shape = logits.shape();
    if shape.h != 1 || shape.w != 1 {
        return Err(Error::Config(format!(
            "loss expects shape (b, classes, 1, 1), got {shape}"
        )));
    }
    if labels.len() != shape.b {
        return Err(Error::Config(format!(
            "{} labels for a batch of {}",
            labels.len(),
            shape.b
        )));
    }
    let classes = shape.c;
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Config(format!(
                "label {l} at sample {i} out of range for {classes} classes"
            )));
        }
    }
    let mut grad = Tensor4::zeros(shape);
    let mut total = 0.0f64;
    let inv_b = 1.0 / shape.b as f64;
    for b in 0..shape.b {
        for k in 0..classes {
            let y = if labels[b] == k { 1.0f32 } else { -1.0 };
            let s = logits.data()[b * classes + k];
            let margin = 1.0 - y * s;
            if margin > 0.0 {
                total += (margin as f64) * (margin as f64) * inv_b;
                grad.data_mut()[b * classes + k] = (-2.0 * y * margin) * inv_b as f32;
            }
        }
    }
    Ok((total, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape4;

    #[test]
    fn hand_computed_single_sample() {
        // Two classes, true class 0, logits (0.5, -2.0).
        // Class 0: y=+1, margin 1-0.5 = 0.5, contributes 0.25.
        // Class 1: y=-1, margin 1-2.0 = -1.0, clamped to zero.
        let logits = Tensor4::from_vec(Shape4::new(1, 2, 1, 1), vec![0.5, -2.0]).unwrap();
        let (loss, grad) = squared_hinge(&logits, &[0]).unwrap();
        assert!((loss - 0.25).abs() < 1e-9, "loss {loss}");
        assert_eq!(grad.data(), &[-1.0, 0.0]);
    }

    #[test]
    fn zero_loss_when_all_margins_met() {
        let logits = Tensor4::from_vec(Shape4::new(1, 3, 1, 1), vec![1.5, -1.0, -2.0]).unwrap();
        let (loss, grad) = squared_hinge(&logits, &[0]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn batch_average_halves_two_sample_loss() {
        let one = Tensor4::from_vec(Shape4::new(1, 2, 1, 1), vec![0.0, 0.0]).unwrap();
        let (l1, _) = squared_hinge(&one, &[0]).unwrap();
        let two = Tensor4::from_vec(Shape4::new(2, 2, 1, 1), vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        let (l2, g2) = squared_hinge(&two, &[0, 0]).unwrap();
        assert!(
            (l1 - l2).abs() < 1e-12,
            "averaging changed the per-sample value"
        );
        assert_eq!(g2.data()[0], -1.0, "per-sample gradient scaled by 1/batch");
    }

    #[test]
    fn rejects_label_out_of_range() {
        let logits = Tensor4::zeros(Shape4::new(1, 2, 1, 1));
        assert!(squared_hinge(&logits, &[2]).is_err());
    }

    #[test]
    fn rejects_label_count_mismatch() {
        let logits = Tensor4::zeros(Shape4::new(2, 2, 1, 1));
        assert!(squared_hinge(&logits, &[0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut logits = Tensor4::from_vec(
            Shape4::new(2, 3, 1, 1),
            vec![0.3, -0.2, 0.9, -1.4, 0.6, 0.05],
        )
        .unwrap();
        let labels = [2usize, 1];
        let (_, grad) = squared_hinge(&logits, &labels).unwrap();
        let h = 1e-3f32;
        for i in 0..logits.len() {
            let orig = logits.data()[i];
            logits.data_mut()[i] = orig + h;
            let (up, _) = squared_hinge(&logits, &labels).unwrap();
            logits.data_mut()[i] = orig - h;
            let (down, _) = squared_hinge(&logits, &labels).unwrap();
            logits.data_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h as f64);
            assert!(
                (grad.data()[i] as f64 - fd).abs() < 1e-3,
                "logit {i}: analytic {} vs fd {fd}",
                grad.data()[i]
            );
        }
    }
}
