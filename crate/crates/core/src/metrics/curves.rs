use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::binstats::DurationBinner;
use crate::error::{Error, Result};
use crate::ingest::InteractionRecord;
use crate::wtg::WtgLabel;

use super::RankedList;

/// Per-bin watch behaviour. Means are 0 for empty bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurveRow {
    pub bin: usize,
    pub start: f64,
    pub end: f64,
    pub count: usize,
    pub mean_watch_time: f64,
    pub mean_watch_pct: f64,
    /// Present only when labels were supplied.
    pub mean_wtg: Option<f64>,
}

/// One row per bin. Records outside the binner are ignored.
pub fn bias_curves(
    records: &[InteractionRecord],
    labels: Option<&[WtgLabel]>,
    binner: &DurationBinner,
) -> Vec<BiasCurveRow> {
    let m = binner.bins();
    let mut n = vec![0usize; m];
    let mut wt = vec![0.0; m];
    let mut pct = vec![0.0; m];
    let mut wtg = vec![0.0; m];
    for (i, r) in records.iter().enumerate() {
        let Ok(b) = binner.bin_of(r.duration) else {
            continue;
        };
        n[b] += 1;
        wt[b] += r.watch_time;
        pct[b] += r.watch_time / r.duration;
        if let Some(l) = labels {
            wtg[b] += l[i].value;
        }
    }
    let avg = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
    (0..m)
        .map(|b| BiasCurveRow {
            bin: b,
            start: binner.bin_start(b),
            end: binner.bin_end(b),
            count: n[b],
            mean_watch_time: avg(wt[b], n[b]),
            mean_watch_pct: avg(pct[b], n[b]),
            mean_wtg: labels.map(|_| avg(wtg[b], n[b])),
        })
        .collect()
}

/// Counts of recommended top-k items per duration bin.
pub fn topk_duration_histogram(lists: &[RankedList], k: usize, binner: &DurationBinner) -> Vec<u64> {
    let mut hist = vec![0u64; binner.bins()];
    for l in lists {
        for item in l.top(k) {
            if let Ok(b) = binner.bin_of(item.duration) {
                hist[b] += 1;
            }
        }
    }
    hist
}

/// Writes curves plus one top-k histogram column per named model.
pub fn write_curves_csv(path: &Path, rows: &[BiasCurveRow], histograms: &[(&str, &[u64])]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    write!(out, "bin,start,end,count,mean_watch_time,mean_watch_pct,mean_wtg").map_err(io)?;
    for (name, _) in histograms {
        write!(out, ",topk_{name}").map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for r in rows {
        write!(
            out,
            "{},{},{},{},{},{},{}",
            r.bin,
            r.start,
            r.end,
            r.count,
            r.mean_watch_time,
            r.mean_watch_pct,
            r.mean_wtg.map(|v| v.to_string()).unwrap_or_default()
        )
        .map_err(io)?;
        for (_, h) in histograms {
            write!(out, ",{}", h[r.bin]).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}
