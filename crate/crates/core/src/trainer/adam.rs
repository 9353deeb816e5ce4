use crate::error::{Error, Result};

/// Adam with bias correction and no weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(num_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer holds {} moments, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Free-function form of [`Adam::step`].
pub fn adam_step(state: &mut Adam, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    state.step(params, grads, lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Scalar Adam written out longhand.
    fn oracle(grads: &[f64], lr: f64) -> Vec<f64> {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut m, mut v, mut p) = (0.0, 0.0, 0.0);
        let mut out = Vec::new();
        for (i, g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            p -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            out.push(p);
        }
        out
    }

    #[test]
    fn zero_gradient_first_step() {
        let mut a = Adam::new(3);
        let mut p = vec![1.0, -2.0, 3.0];
        a.step(&mut p, &[0.0; 3], 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut a = Adam::new(2);
        let mut p = vec![0.0, 0.0];
        a.step(&mut p, &[3.0, -0.01], 0.05).unwrap();
        assert_abs_diff_eq!(p[0], -0.05, epsilon = 1e-9);
        assert_abs_diff_eq!(p[1], 0.05, epsilon = 1e-6);
    }

    #[test]
    fn second_step_differs_from_first() {
        // constant gradient: every step moves by lr, so two steps equal one
        // step with doubled lr
        let mut a = Adam::new(1);
        let mut p = vec![0.0];
        a.step(&mut p, &[1.0], 0.1).unwrap();
        a.step(&mut p, &[1.0], 0.1).unwrap();
        let mut b = Adam::new(1);
        let mut q = vec![0.0];
        b.step(&mut q, &[1.0], 0.2).unwrap();
        assert_abs_diff_eq!(p[0], q[0], epsilon = 1e-8);

        // a sign flip at step 2 is damped by the first moment instead
        let mut a = Adam::new(1);
        let mut p = vec![0.0];
        a.step(&mut p, &[1.0], 0.1).unwrap();
        let after_first = p[0];
        a.step(&mut p, &[-1.0], 0.1).unwrap();
        let expected = oracle(&[1.0, -1.0], 0.1);
        assert_abs_diff_eq!(after_first, expected[0], epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], expected[1], epsilon = 1e-15);
        // hand value: m̂ = -0.01/0.19, v̂ = 1
        assert_abs_diff_eq!(p[0] - after_first, 0.1 * 0.01 / 0.19, epsilon = 1e-9);
        assert!((p[0] - after_first).abs() < 0.1);
    }

    #[test]
    fn shape_mismatch() {
        let mut a = Adam::new(2);
        assert!(a.step(&mut [0.0], &[0.0], 0.1).is_err());
    }
}
