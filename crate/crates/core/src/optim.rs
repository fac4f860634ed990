//! Adaptive-moment first-order optimizer shared by tracking and mapping.

/// Adam state for a flat parameter vector with a per-parameter learning rate.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: Vec<u32>,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Appends fresh moment slots for newly added parameters.
    pub fn grow(&mut self, extra: usize) {
        let n = self.m.len() + extra;
        self.m.resize(n, 0.0);
        self.v.resize(n, 0.0);
        self.steps.resize(n, 0);
    }

    /// Returns the update to add to the parameters (already negated).
    pub fn step(&mut self, grad: &[f64], lr: &[f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.m.len());
        assert_eq!(lr.len(), self.m.len());
        let mut out = vec![0.0; grad.len()];
        for i in 0..grad.len() {
            self.steps[i] += 1;
            let t = self.steps[i] as i32;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / (1.0 - self.beta1.powi(t));
            let v_hat = self.v[i] / (1.0 - self.beta2.powi(t));
            out[i] = -lr[i] * m_hat / (v_hat.sqrt() + self.eps);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_has_learning_rate_magnitude() {
        let mut adam = Adam::new(2);
        let d = adam.step(&[3.0, -0.5], &[0.1, 0.2]);
        assert!((d[0] + 0.1).abs() < 1e-6);
        assert!((d[1] - 0.2).abs() < 1e-6);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut adam = Adam::new(1);
        let mut x = 3.0;
        for _ in 0..2000 {
            let d = adam.step(&[2.0 * (x - 1.0)], &[0.05]);
            x += d[0];
        }
        assert!((x - 1.0f64).abs() < 1e-3);
    }

    #[test]
    fn zero_gradient_does_not_move() {
        let mut adam = Adam::new(3);
        let d = adam.step(&[0.0; 3], &[1.0; 3]);
        assert!(d.iter().all(|x| *x == 0.0));
    }
}
