use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const DEFAULT_LR: f64 = 1e-4;

/// Adam with bias correction. Moment buffers are allocated lazily on the
/// first step to match the parameter list they are applied to.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(DEFAULT_LR)
    }
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// Applies one update in place. Gradients must be finite and shaped like
    /// `params`; nothing is modified when validation fails.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} gradient blocks", params.len()),
                grads.len(),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::shape(
                    format!("adam_step block {i}"),
                    format!("{}x{}", p.rows(), p.cols()),
                    format!("{}x{}", g.rows(), g.cols()),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient block {i}")));
            }
        }
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| Matrix::zeros(g.rows(), g.cols())).collect();
            self.second = self.first.clone();
        } else if self.first.len() != grads.len() || self.first.iter().zip(grads).any(|(m, g)| m.shape() != g.shape()) {
            return Err(Error::shape(
                "adam_step moments",
                "moment buffers matching gradients",
                "a different parameter layout",
            ));
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let it = p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
            for ((w, &gi), (mi, vi)) in it {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Convenience wrapper over [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(0.1);
        let mut w = Matrix::filled(2, 2, 1.5);
        s.step(&mut [&mut w], &[Matrix::zeros(2, 2)]).unwrap();
        assert_eq!(w, Matrix::filled(2, 2, 1.5));
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_hand_computed() {
        // m̂ = g, v̂ = g², so Δ = -lr · g/(|g| + ε) = -0.1/(1 + 1e-8).
        let mut s = AdamState::new(0.1);
        let mut w = Matrix::zeros(1, 1);
        s.step(&mut [&mut w], &[Matrix::filled(1, 1, 1.0)]).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((w[(0, 0)] - expected).abs() < 1e-15);
        assert!((w[(0, 0)] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_update() {
        let mut s = AdamState::default();
        let mut w = Matrix::zeros(1, 2);
        let g = Matrix::row_vector(&[1.0, f64::NAN]);
        assert!(matches!(s.step(&mut [&mut w], &[g]), Err(Error::NonFinite(_))));
        assert_eq!(s.step, 0);
        assert_eq!(w, Matrix::zeros(1, 2));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut s = AdamState::default();
        let mut w = Matrix::zeros(1, 2);
        assert!(s.step(&mut [&mut w], &[Matrix::zeros(2, 1)]).is_err());
    }

    #[test]
    fn runs_are_bit_identical() {
        let run = || {
            let mut s = AdamState::new(0.01);
            let mut w = Matrix::row_vector(&[0.3, -0.2, 0.9]);
            for k in 0..50 {
                let g = w.map(|v| 2.0 * v + (k as f64 * 0.1).sin());
                s.step(&mut [&mut w], &[g]).unwrap();
            }
            w
        };
        let a = run();
        let b = run();
        assert!(a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
