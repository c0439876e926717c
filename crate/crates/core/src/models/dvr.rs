//! The regressor, the adversarial duration head and their joint training.
//!
//! The duration head `psi` reads the regressor's prediction and is trained to
//! recover (normalized) duration. A gradient reversal between the two flips
//! and scales by `alpha` the duration-loss gradient that reaches the regressor,
//! so the regressor descends `L_target - alpha * L_duration` while the head
//! descends `alpha * L_duration`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::fm::Fm;
use super::mlp::Mlp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    WatchTime,
    Wtg,
}

impl Target {
    pub fn as_str(&self) -> &'static str {
        match self {
            Target::WatchTime => "watch_time",
            Target::Wtg => "wtg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fm,
    Mlp,
}

/// How durations are turned into the duration head's regression target.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationNorm {
    /// Min-max scale to `[0, 1]` over the training range.
    #[default]
    MinMax,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub alpha: f64,
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub init_std: f64,
    pub duration_norm: DurationNorm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 64,
            max_epochs: 20,
            patience: 2,
            seed: 0,
            alpha: 0.1,
            embedding_dim: 16,
            hidden: vec![32, 32],
            init_std: 0.01,
            duration_norm: DurationNorm::MinMax,
        }
    }
}

impl TrainConfig {
    /// Batch and hidden sizes used at full scale.
    pub fn full_scale() -> Self {
        Self {
            batch_size: 512,
            hidden: vec![64, 64, 64],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.embedding_dim == 0 {
            return bad("batch size, epochs and embedding dimension must be positive");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be non-negative");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if !(self.init_std > 0.0) {
            return bad("init std must be positive");
        }
        Ok(())
    }
}

/// The recommendation regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Phi {
    Fm(Fm),
    Mlp(Mlp),
}

impl Phi {
    pub fn new(
        kind: ModelKind,
        n_features: usize,
        n_fields: usize,
        cfg: &TrainConfig,
        bias: f64,
    ) -> Self {
        // init stream is separate from the shuffling stream
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_1417);
        match kind {
            ModelKind::Fm => Phi::Fm(Fm::init(n_features, cfg.embedding_dim, cfg.init_std, bias, &mut rng)),
            ModelKind::Mlp => Phi::Mlp(Mlp::init(
                n_features,
                cfg.embedding_dim,
                n_fields,
                &cfg.hidden,
                cfg.init_std,
                bias,
                &mut rng,
            )),
        }
    }

    pub fn predict(&self, x: &[usize]) -> f64 {
        match self {
            Phi::Fm(m) => m.predict(x),
            Phi::Mlp(m) => m.predict(x),
        }
    }

    pub fn backward(&self, x: &[usize], grad: &mut [f64], upstream: impl FnOnce(f64) -> f64) -> f64 {
        match self {
            Phi::Fm(m) => m.backward(x, grad, upstream),
            Phi::Mlp(m) => m.backward(x, grad, upstream),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Phi::Fm(m) => m.params(),
            Phi::Mlp(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Phi::Fm(m) => m.params_mut(),
            Phi::Mlp(m) => m.params_mut(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Phi::Fm(_) => ModelKind::Fm,
            Phi::Mlp(_) => ModelKind::Mlp,
        }
    }
}

/// Affine duration head `a * y + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psi {
    pub a: f64,
    pub b: f64,
}

impl Psi {
    pub fn forward(&self, y: f64) -> f64 {
        self.a * y + self.b
    }
}

/// One training example: active feature indices, the regression target and the
/// duration head's target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<usize>,
    pub y: f64,
    pub y_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Losses {
    /// MSE of the regressor against its target.
    pub target: f64,
    /// MSE of the duration head; 0 without a head.
    pub duration: f64,
}

/// Gradients of one batch, evaluated at the current parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub losses: Losses,
    /// d(L_target - alpha * L_duration) / d phi
    pub phi: Vec<f64>,
    /// d(alpha * L_duration) / d(a, b)
    pub psi: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvrModel {
    pub phi: Phi,
    /// `None` trains plain regression.
    pub psi: Option<Psi>,
    pub alpha: f64,
    pub target: Target,
    phi_opt: Adam,
    psi_opt: Adam,
}

impl DvrModel {
    pub fn new(phi: Phi, psi: Option<Psi>, alpha: f64, target: Target, learning_rate: f64) -> Self {
        let n = phi.params().len();
        Self {
            phi,
            psi,
            alpha,
            target,
            phi_opt: Adam::new(learning_rate, n),
            psi_opt: Adam::new(learning_rate, 2),
        }
    }

    /// A head initialised to the constant 0.
    pub fn default_psi() -> Psi {
        Psi { a: 0.0, b: 0.0 }
    }

    pub fn predict(&self, x: &[usize]) -> f64 {
        self.phi.predict(x)
    }

    pub fn losses(&self, batch: &[&Sample]) -> Losses {
        let n = batch.len() as f64;
        let mut out = Losses::default();
        for s in batch {
            let y = self.phi.predict(&s.x);
            out.target += (y - s.y).powi(2);
            if let Some(psi) = &self.psi {
                out.duration += (psi.forward(y) - s.y_d).powi(2);
            }
        }
        out.target /= n;
        out.duration /= n;
        out
    }

    pub fn gradients(&self, batch: &[&Sample]) -> Gradients {
        let n = batch.len() as f64;
        let scale = 2.0 / n;
        let alpha = self.alpha;
        let mut phi_grad = vec![0.0; self.phi.params().len()];
        let mut psi_grad = [0.0; 2];
        let mut losses = Losses::default();
        for s in batch {
            let mut d_err = 0.0;
            let mut d_pred = 0.0;
            let y = self.phi.backward(&s.x, &mut phi_grad, |y| {
                let mut up = scale * (y - s.y);
                if let Some(psi) = &self.psi {
                    d_pred = psi.forward(y);
                    d_err = d_pred - s.y_d;
                    // reversed and scaled on its way back into phi
                    up -= alpha * scale * d_err * psi.a;
                }
                up
            });
            losses.target += (y - s.y).powi(2);
            if self.psi.is_some() {
                losses.duration += d_err * d_err;
                psi_grad[0] += alpha * scale * d_err * y;
                psi_grad[1] += alpha * scale * d_err;
            }
        }
        losses.target /= n;
        losses.duration /= n;
        Gradients {
            losses,
            phi: phi_grad,
            psi: psi_grad,
        }
    }

    /// One simultaneous update of both heads from the same pre-step parameters.
    pub fn train_step(&mut self, batch: &[&Sample]) -> Result<Losses> {
        if batch.is_empty() {
            return Err(Error::Data("empty training batch".into()));
        }
        let g = self.gradients(batch);
        if !(g.losses.target.is_finite() && g.losses.duration.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite loss after {} steps: target {}, duration {}",
                self.phi_opt.steps(),
                g.losses.target,
                g.losses.duration
            )));
        }
        if let Some(psi) = &mut self.psi {
            let mut ab = [psi.a, psi.b];
            self.psi_opt.step(&mut ab, &g.psi);
            psi.a = ab[0];
            psi.b = ab[1];
        }
        self.phi_opt.step(self.phi.params_mut(), &g.phi);
        Ok(g.losses)
    }

    fn mean_target_loss(&self, data: &[Sample]) -> f64 {
        if data.is_empty() {
            return f64::NAN;
        }
        data.iter()
            .map(|s| (self.phi.predict(&s.x) - s.y).powi(2))
            .sum::<f64>()
            / data.len() as f64
    }

    /// Seeded mini-batch training with early stopping on validation target loss.
    ///
    /// Without validation data the training loss drives early stopping. The
    /// best-scoring parameters are restored before returning.
    pub fn train(&mut self, train: &[Sample], val: &[Sample], cfg: &TrainConfig) -> Result<History> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::Data("no training samples".into()));
        }
        let monitor = |m: &DvrModel| {
            if val.is_empty() {
                m.mean_target_loss(train)
            } else {
                m.mean_target_loss(val)
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let initial = monitor(self);
        let mut history = History {
            epochs: vec![EpochRecord {
                epoch: 0,
                train_target: self.mean_target_loss(train),
                train_duration: 0.0,
                val_target: initial,
            }],
            best_epoch: 0,
            stopped_early: false,
        };
        let mut best = (initial, self.phi.clone(), self.psi);
        let mut stale = 0;
        for epoch in 1..=cfg.max_epochs {
            order.shuffle(&mut rng);
            let (mut tl, mut dl) = (0.0, 0.0);
            let mut batches = 0usize;
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
                let l = self.train_step(&batch)?;
                tl += l.target;
                dl += l.duration;
                batches += 1;
            }
            let val_loss = monitor(self);
            if !val_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "validation loss diverged at epoch {epoch}"
                )));
            }
            history.epochs.push(EpochRecord {
                epoch,
                train_target: tl / batches as f64,
                train_duration: dl / batches as f64,
                val_target: val_loss,
            });
            if val_loss < best.0 {
                best = (val_loss, self.phi.clone(), self.psi);
                history.best_epoch = epoch;
                stale = 0;
            } else {
                stale += 1;
                if stale > cfg.patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
        self.phi = best.1;
        self.psi = best.2;
        Ok(history)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_target: f64,
    pub train_duration: f64,
    pub val_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Entry 0 is the untrained model.
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl History {
    pub fn best_val(&self) -> f64 {
        self.epochs[self.best_epoch].val_target
    }
}
