use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Second-order factorization machine over one-hot inputs.
///
/// Parameters are stored flat as `[w0, w_0..w_n, V_0 (k values), .., V_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fm {
    n_features: usize,
    dim: usize,
    params: Vec<f64>,
}

impl Fm {
    pub fn zeros(n_features: usize, dim: usize) -> Self {
        assert!(dim >= 1, "embedding dimension must be at least 1");
        Self {
            n_features,
            dim,
            params: vec![0.0; 1 + n_features + n_features * dim],
        }
    }

    pub fn init<R: Rng>(n_features: usize, dim: usize, init_std: f64, bias: f64, rng: &mut R) -> Self {
        let mut fm = Self::zeros(n_features, dim);
        fm.params[0] = bias;
        let normal = Normal::new(0.0, init_std).expect("valid init std");
        let start = fm.v_offset(0);
        for p in &mut fm.params[start..] {
            *p = normal.sample(rng);
        }
        fm
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bias(&self) -> f64 {
        self.params[0]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.params[1 + i]
    }

    pub fn factor(&self, i: usize) -> &[f64] {
        let at = self.v_offset(i);
        &self.params[at..at + self.dim]
    }

    pub fn set_bias(&mut self, w0: f64) {
        self.params[0] = w0;
    }

    pub fn set_weight(&mut self, i: usize, w: f64) {
        self.params[1 + i] = w;
    }

    pub fn factor_mut(&mut self, i: usize) -> &mut [f64] {
        let at = self.v_offset(i);
        &mut self.params[at..at + self.dim]
    }

    fn v_offset(&self, i: usize) -> usize {
        1 + self.n_features + i * self.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Per-factor sums over the active indices.
    fn factor_sums(&self, x: &[usize]) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim];
        for &i in x {
            for (s, v) in sums.iter_mut().zip(self.factor(i)) {
                *s += v;
            }
        }
        sums
    }

    /// `w0 + sum w_i + sum_{i<j} <V_i, V_j>` via
    /// `0.5 * sum_f [(sum_i V_if)^2 - sum_i V_if^2]`.
    pub fn predict(&self, x: &[usize]) -> f64 {
        let sums = self.factor_sums(x);
        let linear: f64 = x.iter().map(|&i| self.weight(i)).sum();
        let mut squares = 0.0;
        for &i in x {
            squares += self.factor(i).iter().map(|v| v * v).sum::<f64>();
        }
        let total: f64 = sums.iter().map(|s| s * s).sum();
        self.bias() + linear + 0.5 * (total - squares)
    }

    /// Adds `upstream(prediction) * d prediction / d params` into `grad` and
    /// returns the prediction.
    pub fn backward(&self, x: &[usize], grad: &mut [f64], upstream: impl FnOnce(f64) -> f64) -> f64 {
        let sums = self.factor_sums(x);
        let linear: f64 = x.iter().map(|&i| self.weight(i)).sum();
        let mut squares = 0.0;
        for &i in x {
            squares += self.factor(i).iter().map(|v| v * v).sum::<f64>();
        }
        let total: f64 = sums.iter().map(|s| s * s).sum();
        let pred = self.bias() + linear + 0.5 * (total - squares);
        let g = upstream(pred);
        grad[0] += g;
        for &i in x {
            grad[1 + i] += g;
            let at = self.v_offset(i);
            for f in 0..self.dim {
                grad[at + f] += g * (sums[f] - self.params[at + f]);
            }
        }
        pred
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_predict_zero() {
        let fm = Fm::zeros(6, 3);
        assert_eq!(fm.predict(&[0, 2, 5]), 0.0);
    }

    #[test]
    fn single_feature_has_no_interaction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut fm = Fm::init(4, 3, 0.5, 0.25, &mut rng);
        fm.set_weight(2, 1.5);
        assert_eq!(fm.predict(&[2]), 0.25 + 1.5);
    }

    #[test]
    fn pure_interaction_term() {
        let mut fm = Fm::zeros(4, 2);
        fm.factor_mut(1).copy_from_slice(&[1.0, 2.0]);
        fm.factor_mut(3).copy_from_slice(&[3.0, -0.5]);
        assert_eq!(fm.predict(&[1, 3]), 3.0 - 1.0);
    }
}
