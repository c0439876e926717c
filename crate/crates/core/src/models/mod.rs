//! Regressors, the adversarial duration head, training and ranking.

mod adam;
mod checkpoint;
mod dvr;
mod features;
mod fm;
mod mlp;
mod rank;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use dvr::{
    DurationNorm, DvrModel, EpochRecord, Gradients, History, Losses, ModelKind, Phi, Psi, Sample,
    Target, TrainConfig,
};
pub use features::{FeatureSpace, DURATION_FIELD};
pub use fm::Fm;
pub use mlp::Mlp;
pub use rank::{baseline_long_rec, baseline_random_rec, rank_for_user, Candidate, ScoreMode};
