use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Field embeddings concatenated into a ReLU dense stack with a scalar head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    n_features: usize,
    dim: usize,
    n_fields: usize,
    hidden: Vec<usize>,
    params: Vec<f64>,
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layer {
    w: usize,
    b: usize,
    inputs: usize,
    outputs: usize,
}

impl Mlp {
    pub fn init<R: Rng>(
        n_features: usize,
        dim: usize,
        n_fields: usize,
        hidden: &[usize],
        init_std: f64,
        bias: f64,
        rng: &mut R,
    ) -> Self {
        let mut mlp = Self {
            n_features,
            dim,
            n_fields,
            hidden: hidden.to_vec(),
            params: Vec::new(),
        };
        let layers = mlp.layers();
        let total = layers.last().map(|l| l.b + l.outputs).unwrap_or(n_features * dim);
        mlp.params = vec![0.0; total];
        let emb = Normal::new(0.0, init_std).expect("valid init std");
        for p in &mut mlp.params[..n_features * dim] {
            *p = emb.sample(rng);
        }
        for l in &layers {
            let he = Normal::new(0.0, (2.0 / l.inputs as f64).sqrt()).unwrap();
            for p in &mut mlp.params[l.w..l.w + l.inputs * l.outputs] {
                *p = he.sample(rng);
            }
        }
        let head = layers.last().unwrap();
        mlp.params[head.b] = bias;
        mlp
    }

    fn layers(&self) -> Vec<Layer> {
        let mut out = Vec::with_capacity(self.hidden.len() + 1);
        let mut at = self.n_features * self.dim;
        let mut inputs = self.n_fields * self.dim;
        for &outputs in self.hidden.iter().chain(std::iter::once(&1)) {
            out.push(Layer {
                w: at,
                b: at + inputs * outputs,
                inputs,
                outputs,
            });
            at += inputs * outputs + outputs;
            inputs = outputs;
        }
        out
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    fn embed(&self, x: &[usize]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_fields);
        let mut out = Vec::with_capacity(self.n_fields * self.dim);
        for &i in x {
            out.extend_from_slice(&self.params[i * self.dim..(i + 1) * self.dim]);
        }
        out
    }

    /// Post-activation outputs of every layer; the last holds the prediction.
    fn forward_all(&self, x: &[usize], layers: &[Layer]) -> Vec<Vec<f64>> {
        let mut acts = vec![self.embed(x)];
        for (li, l) in layers.iter().enumerate() {
            let input = acts.last().unwrap();
            let last = li + 1 == layers.len();
            let out: Vec<f64> = (0..l.outputs)
                .map(|o| {
                    let row = &self.params[l.w + o * l.inputs..l.w + (o + 1) * l.inputs];
                    let z = self.params[l.b + o]
                        + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                    if last {
                        z
                    } else {
                        z.max(0.0)
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    pub fn predict(&self, x: &[usize]) -> f64 {
        let layers = self.layers();
        self.forward_all(x, &layers).last().unwrap()[0]
    }

    /// Adds `upstream(prediction) * d prediction / d params` into `grad` and
    /// returns the prediction.
    pub fn backward(&self, x: &[usize], grad: &mut [f64], upstream: impl FnOnce(f64) -> f64) -> f64 {
        let layers = self.layers();
        let acts = self.forward_all(x, &layers);
        let pred = acts.last().unwrap()[0];
        let mut delta = vec![upstream(pred)];
        for li in (0..layers.len()).rev() {
            let l = layers[li];
            let input = &acts[li];
            let mut back = vec![0.0; l.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad[l.b + o] += d;
                let w_row = l.w + o * l.inputs;
                for j in 0..l.inputs {
                    grad[w_row + j] += d * input[j];
                    back[j] += d * self.params[w_row + j];
                }
            }
            if li > 0 {
                // ReLU derivative, taken as 0 at the kink
                for (b, a) in back.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = back;
        }
        for (f, &i) in x.iter().enumerate() {
            for c in 0..self.dim {
                grad[i * self.dim + c] += delta[f * self.dim + c];
            }
        }
        pred
    }
}
