use serde::{Deserialize, Serialize};

/// Adaptive moment estimation with bias-corrected moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut opt = Adam::new(0.001, 2);
        let mut p = [1.0, -2.0];
        opt.step(&mut p, &[0.5, -4.0]);
        // m_hat = g, v_hat = g^2  =>  delta = -lr * g / (|g| + eps)
        let expect0 = 1.0 - 0.001 * 0.5 / (0.5 + 1e-8);
        let expect1 = -2.0 + 0.001 * 4.0 / (4.0 + 1e-8);
        assert!((p[0] - expect0).abs() < 1e-15);
        assert!((p[1] - expect1).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_fresh_params() {
        let mut opt = Adam::new(0.1, 1);
        let mut p = [3.0];
        opt.step(&mut p, &[0.0]);
        assert_eq!(p, [3.0]);
    }

    #[test]
    fn second_step_by_hand() {
        let mut opt = Adam::new(0.01, 1);
        let mut p = [0.0];
        opt.step(&mut p, &[1.0]);
        opt.step(&mut p, &[-1.0]);
        let m = 0.9 * 0.1 - 0.1 * 1.0;
        let v = 0.999 * 0.001 + 0.001;
        let second = -0.01 * (m / (1.0 - 0.81)) / ((v / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        let first = -0.01 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - (first + second)).abs() < 1e-15);
    }
}
