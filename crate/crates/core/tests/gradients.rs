mod common;

use common::gradient_errors;
use dvr_core::ingest::InteractionRecord;
use dvr_core::models::{FeatureSpace, Fm, ModelKind, Phi, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fm_gradients_match_finite_differences() {
    for seed in 0..50 {
        let (phi, psi) = gradient_errors(ModelKind::Fm, seed);
        assert!(phi < 1e-5, "seed {seed}: phi relative error {phi}");
        assert!(psi < 1e-5, "seed {seed}: psi relative error {psi}");
    }
}

#[test]
fn mlp_gradients_match_finite_differences() {
    for seed in 0..50 {
        let (phi, psi) = gradient_errors(ModelKind::Mlp, seed);
        assert!(phi < 1e-5, "seed {seed}: phi relative error {phi}");
        assert!(psi < 1e-5, "seed {seed}: psi relative error {psi}");
    }
}

#[test]
fn fm_matches_the_pairwise_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let fm = Fm::init(30, 5, 0.5, rng.random_range(-1.0..1.0), &mut rng);
        let mut x: Vec<usize> = (0..30).filter(|_| rng.random_bool(0.3)).collect();
        if x.is_empty() {
            x.push(0);
        }
        let mut naive = fm.bias() + x.iter().map(|&i| fm.weight(i)).sum::<f64>();
        for (a, &i) in x.iter().enumerate() {
            for &j in &x[a + 1..] {
                naive += fm.factor(i).iter().zip(fm.factor(j)).map(|(p, q)| p * q).sum::<f64>();
            }
        }
        let fast = fm.predict(&x);
        assert!((fast - naive).abs() < 1e-10 * naive.abs().max(1.0), "{fast} vs {naive}");
    }
}

#[test]
fn dropping_duration_makes_predictions_duration_invariant() {
    let records: Vec<InteractionRecord> = (0..40)
        .map(|i| InteractionRecord::new(format!("u{}", i % 5), format!("v{}", i % 9), 3.0, 5.0 + (i % 50) as f64, i))
        .collect();
    let with = FeatureSpace::fit(&records, true);
    let without = FeatureSpace::fit(&records, false);
    assert!(with.fields().iter().any(|f| f == "duration"));
    assert!(without.fields().iter().all(|f| f != "duration"));

    let cfg = TrainConfig {
        init_std: 0.3,
        ..TrainConfig::default()
    };
    let phi = Phi::new(ModelKind::Mlp, without.num_features(), without.num_fields(), &cfg, 0.0);
    let base = records[3].clone();
    let mut longer = base.clone();
    longer.duration = 59.0;
    assert_eq!(without.encode(&base), without.encode(&longer));
    assert_eq!(phi.predict(&without.encode(&base)), phi.predict(&without.encode(&longer)));
    assert_ne!(with.encode(&base), with.encode(&longer));
}
