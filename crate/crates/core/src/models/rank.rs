use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dvr::Phi;
use super::features::FeatureSpace;
use crate::binstats::BinStatistics;
use crate::error::Result;
use crate::ingest::InteractionRecord;
use crate::metrics::{RankedItem, RankedList};
use crate::wtg::compute_wtg;

/// A candidate video together with its ground-truth WTG.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub record: &'a InteractionRecord,
    pub wtg: f64,
}

fn item(c: &Candidate<'_>, score: f64) -> RankedItem {
    RankedItem {
        video_id: c.record.video_id.clone(),
        score,
        watch_time: c.record.watch_time,
        wtg: c.wtg,
        duration: c.record.duration,
        producer_id: c.record.producer_id.clone(),
    }
}

/// How model outputs become ranking scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Rank by the raw prediction.
    #[default]
    Direct,
    /// Treat the prediction as watch time and rank by its WTG under the bin statistics.
    WtgOfPrediction,
}

pub fn rank_for_user(
    phi: &Phi,
    space: &FeatureSpace,
    user: &str,
    candidates: &[Candidate<'_>],
    mode: ScoreMode,
    stats: Option<&BinStatistics>,
) -> Result<RankedList> {
    let mut items = Vec::with_capacity(candidates.len());
    for c in candidates {
        let pred = phi.predict(&space.encode(c.record));
        let score = match (mode, stats) {
            (ScoreMode::WtgOfPrediction, Some(s)) => compute_wtg(pred, c.record.duration, s)?.value,
            (ScoreMode::WtgOfPrediction, None) => {
                return Err(crate::Error::Config(
                    "scoring by WTG of predicted watch time needs bin statistics".into(),
                ))
            }
            (ScoreMode::Direct, _) => pred,
        };
        items.push(item(c, score));
    }
    Ok(RankedList::new(user, items))
}

/// Longest videos first.
pub fn baseline_long_rec(user: &str, candidates: &[Candidate<'_>]) -> RankedList {
    let items = candidates.iter().map(|c| item(c, c.record.duration)).collect();
    RankedList::new(user, items)
}

/// Seeded uniform shuffle; scores are descending positions.
pub fn baseline_random_rec(user: &str, candidates: &[Candidate<'_>], seed: u64) -> RankedList {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.shuffle(&mut rng);
    let n = order.len();
    let items = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| item(&candidates[i], (n - pos) as f64))
        .collect();
    RankedList::new(user, items)
}
