use dvr_core::models::{DvrModel, ModelKind, Phi, Psi, Sample, Target, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_FEATURES: usize = 12;
const N_FIELDS: usize = 3;

fn tiny_model(kind: ModelKind, seed: u64) -> (DvrModel, Vec<Sample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = TrainConfig {
        seed,
        embedding_dim: 4,
        hidden: vec![6, 5],
        init_std: 0.4,
        ..TrainConfig::default()
    };
    let mut phi = Phi::new(kind, N_FEATURES, N_FIELDS, &cfg, rng.random_range(-1.0..1.0));
    // zero-initialized biases would put ReLU units exactly on their kink
    for p in phi.params_mut() {
        *p += rng.random_range(-0.1..0.1);
    }
    let psi = Psi {
        a: rng.random_range(-2.0..2.0),
        b: rng.random_range(-1.0..1.0),
    };
    let alpha = rng.random_range(0.1..1.0);
    let model = DvrModel::new(phi, Some(psi), alpha, Target::Wtg, 0.001);
    let samples = (0..6)
        .map(|_| Sample {
            // one index from each block of four features
            x: (0..N_FIELDS).map(|f| f * 4 + rng.random_range(0..4)).collect(),
            y: rng.random_range(-2.0..2.0),
            y_d: rng.random_range(0.0..1.0),
        })
        .collect();
    (model, samples)
}

fn phi_objective(m: &DvrModel, batch: &[&Sample]) -> f64 {
    let l = m.losses(batch);
    l.target - m.alpha * l.duration
}

fn psi_objective(m: &DvrModel, batch: &[&Sample]) -> f64 {
    m.alpha * m.losses(batch).duration
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let norm_a: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let norm_n: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    let scale = norm_a.max(norm_n);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Norm-relative error of the analytic Phi and Psi gradients against central
/// differences on a tiny random instance.
pub fn gradient_errors(kind: ModelKind, seed: u64) -> (f64, f64) {
    let (model, samples) = tiny_model(kind, seed);
    let batch: Vec<&Sample> = samples.iter().collect();
    let grads = model.gradients(&batch);
    let h = 1e-6;

    let mut numeric = vec![0.0; grads.phi.len()];
    for (i, slot) in numeric.iter_mut().enumerate() {
        let mut plus = model.clone();
        plus.phi.params_mut()[i] += h;
        let mut minus = model.clone();
        minus.phi.params_mut()[i] -= h;
        *slot = (phi_objective(&plus, &batch) - phi_objective(&minus, &batch)) / (2.0 * h);
    }
    let phi_err = relative_error(&grads.phi, &numeric);

    let mut psi_numeric = [0.0; 2];
    for (j, slot) in psi_numeric.iter_mut().enumerate() {
        let shift = |m: &mut DvrModel, by: f64| {
            let p = m.psi.as_mut().unwrap();
            if j == 0 {
                p.a += by
            } else {
                p.b += by
            }
        };
        let mut plus = model.clone();
        shift(&mut plus, h);
        let mut minus = model.clone();
        shift(&mut minus, -h);
        *slot = (psi_objective(&plus, &batch) - psi_objective(&minus, &batch)) / (2.0 * h);
    }
    let psi_err = relative_error(&grads.psi, &psi_numeric);
    (phi_err, psi_err)
}
