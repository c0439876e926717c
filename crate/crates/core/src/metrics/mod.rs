//! Evaluation: top-k gain metrics, error metrics, bad cases, producer traffic
//! and per-bin bias curves.

mod curves;
mod fairness;
mod ranking;
mod regression;
mod report;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use curves::{bias_curves, topk_duration_histogram, write_curves_csv, BiasCurveRow};
pub use fairness::{group_agreement, producer_groups, traffic_share, ProducerGroup, ProducerGroups, TrafficShare};
pub use ranking::{
    bad_cases_at_k, dcwtg_at_k, watch_time_at_k, watch_time_sums_at_k, wtg_at_k, AtK,
};
pub use regression::{mae, rmse};
pub use report::{evaluate_lists, EvalReport, ModelMetrics};

/// One candidate in a ranked list, with the ground truth needed for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub video_id: String,
    pub score: f64,
    pub watch_time: f64,
    pub wtg: f64,
    pub duration: f64,
    pub producer_id: String,
}

/// Items ordered by descending score; equal scores fall back to ascending video id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub user_id: String,
    items: Vec<RankedItem>,
}

pub(crate) fn ranking_order(a: &RankedItem, b: &RankedItem) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.video_id.cmp(&b.video_id))
}

impl RankedList {
    pub fn new(user_id: impl Into<String>, mut items: Vec<RankedItem>) -> Self {
        items.sort_by(ranking_order);
        Self {
            user_id: user_id.into(),
            items,
        }
    }

    pub fn items(&self) -> &[RankedItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn top(&self, k: usize) -> &[RankedItem] {
        &self.items[..k.min(self.items.len())]
    }
}
