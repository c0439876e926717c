//! Interaction logs: the canonical record type, delimited-text parsing and
//! serialization, duration filtering and timestamp splits.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One watch event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub video_id: String,
    /// Empty when the source has no producer column.
    pub producer_id: String,
    /// Seconds watched; may exceed `duration` when playback loops.
    pub watch_time: f64,
    /// Video length in seconds, strictly positive.
    pub duration: f64,
    pub timestamp: u64,
    /// Ordered `(field, value)` categorical features.
    pub features: Vec<(String, String)>,
}

impl InteractionRecord {
    pub fn new(
        user_id: impl Into<String>,
        video_id: impl Into<String>,
        watch_time: f64,
        duration: f64,
        timestamp: u64,
    ) -> Self {
        Self {
            user_id: user_id.into(),
            video_id: video_id.into(),
            producer_id: String::new(),
            watch_time,
            duration,
            timestamp,
            features: Vec::new(),
        }
    }

    pub fn with_producer(mut self, producer_id: impl Into<String>) -> Self {
        self.producer_id = producer_id.into();
        self
    }

    pub fn with_feature(mut self, field: impl Into<String>, value: impl Into<String>) -> Self {
        self.features.push((field.into(), value.into()));
        self
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.watch_time.is_finite() && self.watch_time >= 0.0) {
            return Err(format!(
                "watch_time must be non-negative, got {}",
                self.watch_time
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
    Unsplit,
}

/// An immutable collection of interaction records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<InteractionRecord>,
    split: SplitTag,
}

impl Dataset {
    pub fn new(records: Vec<InteractionRecord>, split: SplitTag) -> Self {
        Self { records, split }
    }

    pub fn unsplit(records: Vec<InteractionRecord>) -> Self {
        Self::new(records, SplitTag::Unsplit)
    }

    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<InteractionRecord> {
        self.records
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_producers(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| !r.producer_id.is_empty())
    }

    /// Feature field names in first-seen order.
    pub fn feature_fields(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            for (name, _) in &r.features {
                if seen.insert(name.as_str()) {
                    out.push(name.clone());
                }
            }
        }
        out
    }
}

/// Column mapping and parsing options for delimited logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatConfig {
    pub delimiter: u8,
    pub user: String,
    pub video: String,
    pub watch_time: String,
    pub duration: String,
    /// Row order is used when absent.
    pub timestamp: Option<String>,
    pub producer: Option<String>,
    /// Fail on the first malformed row instead of counting and skipping it.
    pub strict: bool,
    /// Opt-in: clamp watch time to the video duration.
    pub clip_watch_time: bool,
}

impl Default for FormatConfig {
    fn default() -> Self {
        Self {
            delimiter: b',',
            user: "user".into(),
            video: "video".into(),
            watch_time: "watch_time".into(),
            duration: "duration".into(),
            timestamp: Some("timestamp".into()),
            producer: Some("producer".into()),
            strict: true,
            clip_watch_time: false,
        }
    }
}

/// Columns that annotated files carry but which are not input features.
const DERIVED_COLUMNS: [&str; 2] = ["wtg", "wtg_valid"];

#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    pub rows: usize,
    pub accepted: usize,
    pub rejected: Vec<RowIssue>,
}

struct ColumnIndex {
    user: usize,
    video: usize,
    watch_time: usize,
    duration: usize,
    timestamp: Option<usize>,
    producer: Option<usize>,
    features: Vec<(usize, String)>,
}

impl ColumnIndex {
    fn resolve(headers: &csv::StringRecord, cfg: &FormatConfig) -> Result<Self> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let required = |name: &str| {
            find(name).ok_or_else(|| Error::Config(format!("missing mandatory column `{name}`")))
        };
        let user = required(&cfg.user)?;
        let video = required(&cfg.video)?;
        let watch_time = required(&cfg.watch_time)?;
        let duration = required(&cfg.duration)?;
        // Optional columns that were named explicitly but are absent fall back silently;
        // the defaults name them so logs without them still parse.
        let timestamp = cfg.timestamp.as_deref().and_then(find);
        let producer = cfg.producer.as_deref().and_then(find);
        let mapped: Vec<usize> = [Some(user), Some(video), Some(watch_time), Some(duration)]
            .into_iter()
            .chain([timestamp, producer])
            .flatten()
            .collect();
        let features = headers
            .iter()
            .enumerate()
            .filter(|(i, h)| !mapped.contains(i) && !DERIVED_COLUMNS.contains(&h.trim()))
            .map(|(i, h)| (i, h.trim().to_string()))
            .collect();
        Ok(Self {
            user,
            video,
            watch_time,
            duration,
            timestamp,
            producer,
            features,
        })
    }
}

fn parse_row(
    row: &csv::StringRecord,
    cols: &ColumnIndex,
    row_no: usize,
    cfg: &FormatConfig,
) -> std::result::Result<InteractionRecord, String> {
    let field = |i: usize| row.get(i).map(str::trim).unwrap_or("");
    let number = |i: usize, what: &str| {
        field(i)
            .parse::<f64>()
            .map_err(|_| format!("non-numeric {what} `{}`", field(i)))
    };
    let watch_time = number(cols.watch_time, "watch_time")?;
    let duration = number(cols.duration, "duration")?;
    let timestamp = match cols.timestamp {
        Some(i) => field(i)
            .parse::<u64>()
            .map_err(|_| format!("invalid timestamp `{}`", field(i)))?,
        None => row_no as u64,
    };
    let mut rec = InteractionRecord {
        user_id: field(cols.user).to_string(),
        video_id: field(cols.video).to_string(),
        producer_id: cols.producer.map(field).unwrap_or("").to_string(),
        watch_time,
        duration,
        timestamp,
        features: cols
            .features
            .iter()
            .filter(|(i, _)| !field(*i).is_empty())
            .map(|(i, name)| (name.clone(), field(*i).to_string()))
            .collect(),
    };
    if rec.user_id.is_empty() || rec.video_id.is_empty() {
        return Err("empty user or video id".into());
    }
    rec.check()?;
    if cfg.clip_watch_time {
        rec.watch_time = rec.watch_time.min(rec.duration);
    }
    Ok(rec)
}

/// Parses a delimited log with a header row.
///
/// In strict mode the first malformed row aborts with its row number; otherwise
/// malformed rows are skipped and listed in the returned report.
pub fn parse_log<R: Read>(source: R, cfg: &FormatConfig) -> Result<(Dataset, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(cfg.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = ColumnIndex::resolve(&headers, cfg)?;
    let mut report = ParseReport::default();
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        report.rows += 1;
        let parsed = row
            .map_err(|e| e.to_string())
            .and_then(|row| parse_row(&row, &cols, row_no, cfg));
        match parsed {
            Ok(rec) => records.push(rec),
            Err(message) if cfg.strict => return Err(Error::Parse { row: row_no, message }),
            Err(message) => report.rejected.push(RowIssue { row: row_no, message }),
        }
    }
    report.accepted = records.len();
    if !report.rejected.is_empty() {
        log::warn!(
            "skipped {} malformed rows of {}",
            report.rejected.len(),
            report.rows
        );
    }
    Ok((Dataset::unsplit(records), report))
}

pub fn read_dataset(path: &Path, cfg: &FormatConfig) -> Result<(Dataset, ParseReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_log(BufReader::new(file), cfg)
}

/// Column order of the canonical on-disk layout, before feature columns.
pub const CANONICAL_COLUMNS: [&str; 6] = [
    "user",
    "video",
    "producer",
    "watch_time",
    "duration",
    "timestamp",
];

/// Writes the canonical layout, optionally with trailing extra columns per record.
pub(crate) fn write_records<W: Write>(
    ds: &Dataset,
    out: W,
    delimiter: u8,
    extra_headers: &[&str],
    mut extra: impl FnMut(usize) -> Vec<String>,
) -> Result<()> {
    let fields = ds.feature_fields();
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(out);
    let header: Vec<&str> = CANONICAL_COLUMNS
        .iter()
        .copied()
        .chain(fields.iter().map(String::as_str))
        .chain(extra_headers.iter().copied())
        .collect();
    writer.write_record(&header)?;
    for (i, r) in ds.records().iter().enumerate() {
        let mut row = vec![
            r.user_id.clone(),
            r.video_id.clone(),
            r.producer_id.clone(),
            r.watch_time.to_string(),
            r.duration.to_string(),
            r.timestamp.to_string(),
        ];
        for name in &fields {
            let value = r
                .features
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v.clone())
                .unwrap_or_default();
            row.push(value);
        }
        row.extend(extra(i));
        writer.write_record(&row)?;
    }
    writer
        .flush()
        .map_err(|e| Error::io("<dataset writer>", e))?;
    Ok(())
}

/// Serializes a dataset in the canonical column order
/// `user, video, producer, watch_time, duration, timestamp, features...`.
pub fn write_dataset<W: Write>(ds: &Dataset, out: W, delimiter: u8) -> Result<()> {
    write_records(ds, out, delimiter, &[], |_| Vec::new())
}

pub fn write_dataset_file(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(ds, BufWriter::new(file), b',')
}

/// Inclusive duration window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationRange {
    pub min: f64,
    pub max: f64,
}

impl DurationRange {
    pub const WECHAT: DurationRange = DurationRange { min: 5.0, max: 60.0 };
    pub const KUAISHOU: DurationRange = DurationRange {
        min: 5.0,
        max: 120.0,
    };

    pub fn contains(&self, d: f64) -> bool {
        self.min <= d && d <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterReport {
    pub kept: usize,
    pub removed: usize,
}

impl FilterReport {
    pub fn fraction_removed(&self) -> f64 {
        let total = self.kept + self.removed;
        if total == 0 {
            0.0
        } else {
            self.removed as f64 / total as f64
        }
    }
}

/// Keeps records with `min_d <= duration <= max_d`.
pub fn filter_duration_range(
    ds: &Dataset,
    min_d: f64,
    max_d: f64,
) -> Result<(Dataset, FilterReport)> {
    if !(min_d < max_d) {
        return Err(Error::Config(format!(
            "duration range requires min < max, got [{min_d}, {max_d}]"
        )));
    }
    let range = DurationRange {
        min: min_d,
        max: max_d,
    };
    let kept: Vec<_> = ds
        .records()
        .iter()
        .filter(|r| range.contains(r.duration))
        .cloned()
        .collect();
    let report = FilterReport {
        kept: kept.len(),
        removed: ds.len() - kept.len(),
    };
    if kept.is_empty() {
        log::warn!("duration filter [{min_d}, {max_d}] removed every record");
    }
    Ok((Dataset::new(kept, ds.split()), report))
}

/// Splits by timestamp into contiguous train/validation/test segments.
///
/// Records are stably sorted by `(timestamp, user_id, video_id)`. Validation and
/// test sizes are rounded down so any remainder goes to train.
pub fn split_by_time(ds: &Dataset, ratios: (f64, f64, f64)) -> Result<(Dataset, Dataset, Dataset)> {
    let (tr, va, te) = ratios;
    if [tr, va, te].iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Config(format!(
            "split ratios must be positive, got {ratios:?}"
        )));
    }
    if ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must sum to 1, got {}",
            tr + va + te
        )));
    }
    if ds.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let mut records = ds.records().to_vec();
    records.sort_by(|a, b| {
        (a.timestamp, &a.user_id, &a.video_id).cmp(&(b.timestamp, &b.user_id, &b.video_id))
    });
    let n = records.len();
    let n_val = ((n as f64) * va + 1e-9).floor() as usize;
    let n_test = ((n as f64) * te + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test;
    let test = records.split_off(n_train + n_val);
    let val = records.split_off(n_train);
    Ok((
        Dataset::new(records, SplitTag::Train),
        Dataset::new(val, SplitTag::Validation),
        Dataset::new(test, SplitTag::Test),
    ))
}
