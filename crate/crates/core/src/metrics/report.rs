use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::binstats::DurationBinner;
use crate::correlation::pearson;
use crate::error::{Error, Result};

use super::{
    bad_cases_at_k, dcwtg_at_k, topk_duration_histogram, traffic_share, watch_time_sums_at_k,
    wtg_at_k, ProducerGroups, RankedList,
};

/// Metrics for one ranker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    /// Users with at least one candidate.
    pub users: usize,
    /// Users with fewer than `k` candidates; their top-k metrics average what exists.
    pub short_users: usize,
    pub wtg_at_k: f64,
    pub dcwtg_at_k: f64,
    /// Bad cases summed over users.
    pub bc_at_k: usize,
    pub bc_per_user: f64,
    /// Mean over users of the per-user top-k watch-time sum.
    pub watch_time_at_k: f64,
    /// Top-k watch time summed over all users.
    pub watch_time_total_at_k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic_long: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic_short: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    /// `watch_time` or `wtg`: the space MAE and RMSE were computed in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_space: Option<String>,
    /// Pearson correlation between ranking scores and duration over all candidates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_duration_corr: Option<f64>,
    pub topk_duration_histogram: Vec<u64>,
}

/// Evaluates per-user lists. Empty lists are skipped.
pub fn evaluate_lists(
    lists: &[RankedList],
    k: usize,
    bc_threshold: f64,
    groups: Option<&ProducerGroups>,
    binner: &DurationBinner,
) -> Result<ModelMetrics> {
    let lists: Vec<RankedList> = lists.iter().filter(|l| !l.is_empty()).cloned().collect();
    if lists.is_empty() {
        return Err(Error::Data("no user has candidates to rank".into()));
    }
    let n = lists.len() as f64;
    let mut wtg = 0.0;
    let mut dcwtg = 0.0;
    let mut short_users = 0;
    for l in &lists {
        let g = wtg_at_k(l, k)?;
        wtg += g.value;
        dcwtg += dcwtg_at_k(l, k)?.value;
        if g.is_short(k) {
            short_users += 1;
        }
    }
    let bc = bad_cases_at_k(&lists, k, bc_threshold);
    let sums = watch_time_sums_at_k(&lists, k);
    let total: f64 = sums.iter().sum();
    let traffic = groups.map(|g| traffic_share(&lists, k, g)).transpose()?;
    let (scores, durations): (Vec<f64>, Vec<f64>) = lists
        .iter()
        .flat_map(|l| l.items().iter().map(|i| (i.score, i.duration)))
        .unzip();
    Ok(ModelMetrics {
        users: lists.len(),
        short_users,
        wtg_at_k: wtg / n,
        dcwtg_at_k: dcwtg / n,
        bc_at_k: bc,
        bc_per_user: bc as f64 / n,
        watch_time_at_k: total / n,
        watch_time_total_at_k: total,
        traffic_long: traffic.map(|t| t.long),
        traffic_short: traffic.map(|t| t.short),
        mae: None,
        rmse: None,
        error_space: None,
        score_duration_corr: pearson(&scores, &durations),
        topk_duration_histogram: topk_duration_histogram(&lists, k, binner),
    })
}

/// Everything one evaluation run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub bc_threshold: f64,
    /// Which records the bin statistics were fitted on: `train` or `all`.
    pub stats_scope: String,
    pub dataset_fingerprint: String,
    pub test_records: usize,
    /// Test users that never appear in training.
    pub cold_test_users: usize,
    pub models: BTreeMap<String, ModelMetrics>,
}

impl EvalReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Data(format!("report serialization: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        // skip the provenance header comments
        toml::from_str(text).map_err(|e| Error::Data(format!("report parse: {e}")))
    }
}
