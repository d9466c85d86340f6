use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    MomentumSgd { momentum: f64 },
}

/// Optimizer hyperparameters plus per-parameter moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step_count: u64,
    /// Adam first moment, or the momentum velocity.
    first: Vec<f64>,
    /// Adam second moment; empty for momentum SGD.
    second: Vec<f64>,
}

impl OptState {
    pub fn adam(len: usize, learning_rate: f64) -> Self {
        Self::adam_with(len, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn adam_with(len: usize, learning_rate: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        OptState {
            kind: OptimizerKind::Adam { beta1, beta2, eps },
            learning_rate,
            step_count: 0,
            first: vec![0.0; len],
            second: vec![0.0; len],
        }
    }

    pub fn momentum_sgd(len: usize, learning_rate: f64, momentum: f64) -> Self {
        OptState {
            kind: OptimizerKind::MomentumSgd { momentum },
            learning_rate,
            step_count: 0,
            first: vec![0.0; len],
            second: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    /// Momentum velocity or Adam first moment.
    pub fn first_moment(&self) -> &[f64] {
        &self.first
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.len() || grads.len() != self.len() {
            return Err(Error::spec(format!(
                "optimizer holds {} parameters, got {} params and {} grads",
                self.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step_count += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerKind::MomentumSgd { momentum } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(self.first.iter_mut()) {
                    *v = momentum * *v + g;
                    *p -= lr * *v;
                }
            }
        }
        Ok(())
    }
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_is_bounded_by_lr() {
        for g in [3.0, -0.5, 1e-4, -250.0] {
            let mut opt = OptState::adam(1, 0.01);
            let mut p = [1.0];
            opt.step(&mut p, &[g]).unwrap();
            let delta = p[0] - 1.0;
            assert!(
                delta.abs() > 0.0 && delta.abs() <= 0.01,
                "g={g} delta={delta}"
            );
            assert_eq!(delta.signum(), -g.signum());
        }
        assert_eq!(OptState::adam(2, 0.1).step_count, 0);
    }

    #[test]
    fn momentum_first_step_is_plain_sgd() {
        let mut opt = OptState::momentum_sgd(3, 0.01, 0.9);
        let mut p = [0.0, 0.0, 0.0];
        let g = [2.0, -4.0, 0.5];
        opt.step(&mut p, &g).unwrap();
        assert_eq!(p, [-0.01 * 2.0, -0.01 * -4.0, -0.01 * 0.5]);
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let start = [0.3, -1.2];
        for mut opt in [
            OptState::adam(2, 0.01),
            OptState::momentum_sgd(2, 0.01, 0.9),
        ] {
            let mut p = start;
            for _ in 0..50 {
                opt.step(&mut p, &[0.0, 0.0]).unwrap();
            }
            assert_eq!(p, start);
            assert_eq!(opt.step_count, 50);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut opt = OptState::adam(2, 0.01);
        assert!(opt.step(&mut [0.0; 3], &[0.0; 3]).is_err());
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = [3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut small = [0.1, 0.1];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small, [0.1, 0.1]);
    }
}
