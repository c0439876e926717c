//! Watch Time Gain: watch time standardized within its duration bin.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binstats::{BinStatistics, OutOfRangePolicy};
use crate::error::{Error, Result};
use crate::ingest::{self, Dataset, InteractionRecord};

/// Standard deviations below this are treated as degenerate.
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WtgLabel {
    pub value: f64,
    /// `None` when the duration fell outside the binner.
    pub bin: Option<usize>,
    /// False for under-populated or degenerate bins and out-of-range durations.
    pub valid: bool,
}

impl WtgLabel {
    fn out_of_range() -> Self {
        Self {
            value: 0.0,
            bin: None,
            valid: false,
        }
    }
}

/// Scores against whatever the statistics currently hold; never fails on range.
fn score(stats: &BinStatistics, wt: f64, d: f64) -> WtgLabel {
    let Ok(b) = stats.binner().bin_of(d) else {
        return WtgLabel::out_of_range();
    };
    let sigma = stats.std_dev(b);
    WtgLabel {
        value: (wt - stats.mean(b)) / sigma.max(SIGMA_FLOOR),
        bin: Some(b),
        valid: !stats.is_underpopulated(b) && sigma >= SIGMA_FLOOR,
    }
}

/// `(wt - mu_b) / max(sigma_b, SIGMA_FLOOR)` for the bin containing `d`.
pub fn compute_wtg(wt: f64, d: f64, stats: &BinStatistics) -> Result<WtgLabel> {
    if !stats.is_fitted() {
        return Err(Error::Data("bin statistics are unfitted".into()));
    }
    stats.binner().bin_of(d)?;
    Ok(score(stats, wt, d))
}

/// Inverse of [`compute_wtg`] on valid bins: `mu_b + g * sigma_b`.
pub fn wtg_to_watch_time(g: f64, d: f64, stats: &BinStatistics) -> Result<f64> {
    let b = stats.binner().bin_of(d)?;
    if stats.is_underpopulated(b) {
        return Err(Error::Data(format!(
            "bin {b} has {} records, below the minimum of {}",
            stats.count(b),
            stats.min_bin_count()
        )));
    }
    Ok(stats.mean(b) + g * stats.std_dev(b))
}

/// Mean and population standard deviation of the labels that fell in one bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinLabelSummary {
    pub bin: usize,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct AnnotatedDataset {
    pub dataset: Dataset,
    pub labels: Vec<WtgLabel>,
    pub invalid: usize,
    pub summary: Vec<BinLabelSummary>,
}

impl AnnotatedDataset {
    pub fn records(&self) -> &[InteractionRecord] {
        self.dataset.records()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InteractionRecord, &WtgLabel)> {
        self.records().iter().zip(&self.labels)
    }

    /// Adds `wtg` and `wtg_valid` columns to the canonical layout.
    pub fn write<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        ingest::write_records(&self.dataset, out, delimiter, &["wtg", "wtg_valid"], |i| {
            let l = &self.labels[i];
            vec![l.value.to_string(), (l.valid as u8).to_string()]
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file), b',')
    }
}

/// Attaches a label to every record, preserving order.
pub fn annotate_dataset(ds: &Dataset, stats: &BinStatistics) -> Result<AnnotatedDataset> {
    if !ds.is_empty() && !stats.is_fitted() {
        return Err(Error::Data("bin statistics are unfitted".into()));
    }
    let labels: Vec<WtgLabel> = ds
        .records()
        .iter()
        .map(|r| score(stats, r.watch_time, r.duration))
        .collect();
    let invalid = labels.iter().filter(|l| !l.valid).count();
    let summary = summarize(&labels, stats.binner().bins());
    Ok(AnnotatedDataset {
        dataset: ds.clone(),
        labels,
        invalid,
        summary,
    })
}

fn summarize(labels: &[WtgLabel], bins: usize) -> Vec<BinLabelSummary> {
    let mut n = vec![0usize; bins];
    let mut sum = vec![0.0; bins];
    for l in labels {
        if let Some(b) = l.bin {
            n[b] += 1;
            sum[b] += l.value;
        }
    }
    let mean: Vec<f64> = (0..bins)
        .map(|b| if n[b] == 0 { 0.0 } else { sum[b] / n[b] as f64 })
        .collect();
    let mut ss = vec![0.0; bins];
    for l in labels {
        if let Some(b) = l.bin {
            ss[b] += (l.value - mean[b]).powi(2);
        }
    }
    (0..bins)
        .filter(|&b| n[b] > 0)
        .map(|b| BinLabelSummary {
            bin: b,
            count: n[b],
            mean: mean[b],
            std: (ss[b] / n[b] as f64).sqrt(),
        })
        .collect()
}

/// Online labelling: each event is scored with the statistics as they stood
/// before the event, then folded into them.
#[derive(Debug, Clone)]
pub struct OnlineWtg {
    stats: BinStatistics,
}

impl OnlineWtg {
    pub fn new(stats: BinStatistics) -> Self {
        Self { stats }
    }

    pub fn process(&mut self, wt: f64, d: f64) -> WtgLabel {
        let label = score(&self.stats, wt, d);
        // Skip never errors.
        let _ = self.stats.stream_update(wt, d, OutOfRangePolicy::Skip);
        label
    }

    pub fn stats(&self) -> &BinStatistics {
        &self.stats
    }

    pub fn into_stats(self) -> BinStatistics {
        self.stats
    }

    /// Range violations seen so far.
    pub fn skipped(&self) -> u64 {
        self.stats.skipped()
    }

    /// Adapts an event stream into a stream of `(event, label)` pairs.
    pub fn pipeline<'a, I>(&'a mut self, events: I) -> impl Iterator<Item = (InteractionRecord, WtgLabel)> + 'a
    where
        I: IntoIterator<Item = InteractionRecord> + 'a,
    {
        events.into_iter().map(move |ev| {
            let label = self.process(ev.watch_time, ev.duration);
            (ev, label)
        })
    }
}
