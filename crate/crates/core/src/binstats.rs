//! Duration bins and per-bin watch-time moments.
//!
//! [`BinStatistics`] tracks `(n, mu, sigma^2)` per bin with the population
//! (divisor-`n`) convention, so the streaming recurrence and the batch fit agree.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::InteractionRecord;

/// Maps durations in `[min_duration, max_duration]` to equal-width bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationBinner {
    min_duration: f64,
    max_duration: f64,
    bin_width: f64,
    bins: usize,
}

impl DurationBinner {
    pub fn new(min_duration: f64, max_duration: f64, bin_width: f64) -> Result<Self> {
        if !(min_duration.is_finite() && max_duration.is_finite() && min_duration < max_duration)
        {
            return Err(Error::Config(format!(
                "binner range must satisfy min < max, got [{min_duration}, {max_duration}]"
            )));
        }
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::Config(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        let bins = ((max_duration - min_duration) / bin_width).ceil().max(1.0) as usize;
        Ok(Self {
            min_duration,
            max_duration,
            bin_width,
            bins,
        })
    }

    pub fn min_duration(&self) -> f64 {
        self.min_duration
    }

    pub fn max_duration(&self) -> f64 {
        self.max_duration
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn contains(&self, d: f64) -> bool {
        self.min_duration <= d && d <= self.max_duration
    }

    /// Bin index of `d`; the upper boundary belongs to the last bin.
    pub fn bin_of(&self, d: f64) -> Result<usize> {
        if !self.contains(d) {
            return Err(Error::OutOfRange {
                duration: d,
                min: self.min_duration,
                max: self.max_duration,
            });
        }
        let idx = ((d - self.min_duration) / self.bin_width).floor() as usize;
        Ok(idx.min(self.bins - 1))
    }

    /// Lower edge of a bin.
    pub fn bin_start(&self, bin: usize) -> f64 {
        self.min_duration + bin as f64 * self.bin_width
    }

    pub fn bin_end(&self, bin: usize) -> f64 {
        (self.bin_start(bin) + self.bin_width).min(self.max_duration)
    }
}

/// What [`BinStatistics::stream_update`] does with a duration outside the binner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutOfRangePolicy {
    #[default]
    Skip,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamOutcome {
    Updated(usize),
    Skipped,
}

pub const DEFAULT_MIN_BIN_COUNT: u64 = 30;

/// Per-bin tracking variables.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStatistics {
    binner: DurationBinner,
    n: Vec<u64>,
    mu: Vec<f64>,
    var: Vec<f64>,
    min_bin_count: u64,
    skipped: u64,
}

impl BinStatistics {
    pub fn empty(binner: DurationBinner, min_bin_count: u64) -> Self {
        let m = binner.bins();
        Self {
            binner,
            n: vec![0; m],
            mu: vec![0.0; m],
            var: vec![0.0; m],
            min_bin_count,
            skipped: 0,
        }
    }

    /// Two-pass batch fit over records in range. Out-of-range records are rejected.
    pub fn fit_batch(
        binner: DurationBinner,
        records: &[InteractionRecord],
        min_bin_count: u64,
    ) -> Result<Self> {
        let pairs = records
            .iter()
            .map(|r| (r.watch_time, r.duration))
            .collect::<Vec<_>>();
        Self::fit_pairs(binner, &pairs, min_bin_count)
    }

    /// Batch fit over `(watch_time, duration)` pairs.
    pub fn fit_pairs(binner: DurationBinner, pairs: &[(f64, f64)], min_bin_count: u64) -> Result<Self> {
        let m = binner.bins();
        let mut bins = Vec::with_capacity(pairs.len());
        let mut n = vec![0u64; m];
        let mut sum = vec![0.0; m];
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for &(wt, d) in pairs {
            let b = binner.bin_of(d)?;
            bins.push(b);
            n[b] += 1;
            sum[b] += wt;
            lo[b] = lo[b].min(wt);
            hi[b] = hi[b].max(wt);
        }
        let mu: Vec<f64> = (0..m)
            .map(|b| match n[b] {
                0 => 0.0,
                // exact when every member is equal
                _ if lo[b] == hi[b] => lo[b],
                c => sum[b] / c as f64,
            })
            .collect();
        let mut ss = vec![0.0; m];
        for (&(wt, _), &b) in pairs.iter().zip(&bins) {
            if lo[b] != hi[b] {
                let dev = wt - mu[b];
                ss[b] += dev * dev;
            }
        }
        let var = (0..m)
            .map(|b| if n[b] == 0 { 0.0 } else { ss[b] / n[b] as f64 })
            .collect();
        Ok(Self {
            binner,
            n,
            mu,
            var,
            min_bin_count,
            skipped: 0,
        })
    }

    /// One step of the online recurrence: count, then variance with the old mean,
    /// then mean.
    pub fn stream_update(
        &mut self,
        wt: f64,
        d: f64,
        policy: OutOfRangePolicy,
    ) -> Result<StreamOutcome> {
        let b = match self.binner.bin_of(d) {
            Ok(b) => b,
            Err(e) => {
                return match policy {
                    OutOfRangePolicy::Skip => {
                        self.skipped += 1;
                        Ok(StreamOutcome::Skipped)
                    }
                    OutOfRangePolicy::Error => Err(e),
                }
            }
        };
        self.n[b] += 1;
        let n = self.n[b] as f64;
        let dev = wt - self.mu[b];
        self.var[b] = (n - 1.0) / (n * n) * dev * dev + (n - 1.0) / n * self.var[b];
        self.mu[b] += dev / n;
        Ok(StreamOutcome::Updated(b))
    }

    /// Pools two statistics over the same geometry.
    pub fn merge(&self, other: &BinStatistics) -> Result<BinStatistics> {
        if self.binner != other.binner {
            return Err(Error::Config(format!(
                "cannot merge statistics with different bin geometry: {:?} vs {:?}",
                self.binner, other.binner
            )));
        }
        let mut out = self.clone();
        out.skipped = self.skipped + other.skipped;
        out.min_bin_count = self.min_bin_count.max(other.min_bin_count);
        for b in 0..self.n.len() {
            let (na, nb) = (self.n[b], other.n[b]);
            if nb == 0 {
                continue;
            }
            if na == 0 {
                out.n[b] = nb;
                out.mu[b] = other.mu[b];
                out.var[b] = other.var[b];
                continue;
            }
            let (fa, fb) = (na as f64, nb as f64);
            let n = fa + fb;
            let delta = other.mu[b] - self.mu[b];
            out.n[b] = na + nb;
            out.mu[b] = (fa * self.mu[b] + fb * other.mu[b]) / n;
            out.var[b] =
                (fa * self.var[b] + fb * other.var[b] + delta * delta * (fa * fb / n)) / n;
        }
        Ok(out)
    }

    pub fn binner(&self) -> &DurationBinner {
        &self.binner
    }

    pub fn count(&self, bin: usize) -> u64 {
        self.n[bin]
    }

    pub fn mean(&self, bin: usize) -> f64 {
        self.mu[bin]
    }

    pub fn variance(&self, bin: usize) -> f64 {
        self.var[bin]
    }

    pub fn std_dev(&self, bin: usize) -> f64 {
        self.var[bin].sqrt()
    }

    pub fn counts(&self) -> &[u64] {
        &self.n
    }

    pub fn means(&self) -> &[f64] {
        &self.mu
    }

    pub fn variances(&self) -> &[f64] {
        &self.var
    }

    pub fn min_bin_count(&self) -> u64 {
        self.min_bin_count
    }

    pub fn set_min_bin_count(&mut self, min_bin_count: u64) {
        self.min_bin_count = min_bin_count;
    }

    /// Stream events dropped for falling outside the binner.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn total_count(&self) -> u64 {
        self.n.iter().sum()
    }

    pub fn is_fitted(&self) -> bool {
        self.n.iter().any(|&c| c > 0)
    }

    pub fn is_underpopulated(&self, bin: usize) -> bool {
        self.n[bin] < self.min_bin_count
    }

    pub fn underpopulated_bins(&self) -> Vec<usize> {
        (0..self.n.len())
            .filter(|&b| self.is_underpopulated(b))
            .collect()
    }

    pub fn snapshot(&self) -> Vec<u8> {
        snapshot::encode(self)
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        snapshot::decode(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.snapshot()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::restore(&bytes)
    }
}

/// Versioned little-endian snapshot:
///
/// ```text
/// magic "WTGS" | version u32 | m u64 | min_duration f64 | bin_width f64 | max_duration f64
/// | min_bin_count u64 | skipped u64 | m x (n u64, mu f64, var f64) | crc32 u32
/// ```
mod snapshot {
    use super::*;

    const MAGIC: &[u8; 4] = b"WTGS";
    const VERSION: u32 = 1;
    const HEADER: usize = 4 + 4 + 8 * 6;
    const ROW: usize = 24;

    pub(super) fn encode(s: &BinStatistics) -> Vec<u8> {
        let m = s.n.len();
        let mut out = Vec::with_capacity(HEADER + ROW * m + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(m as u64).to_le_bytes());
        out.extend_from_slice(&s.binner.min_duration.to_le_bytes());
        out.extend_from_slice(&s.binner.bin_width.to_le_bytes());
        out.extend_from_slice(&s.binner.max_duration.to_le_bytes());
        out.extend_from_slice(&s.min_bin_count.to_le_bytes());
        out.extend_from_slice(&s.skipped.to_le_bytes());
        for b in 0..m {
            out.extend_from_slice(&s.n[b].to_le_bytes());
            out.extend_from_slice(&s.mu[b].to_le_bytes());
            out.extend_from_slice(&s.var[b].to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    fn u64_at(bytes: &[u8], at: usize) -> u64 {
        u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
    }

    fn f64_at(bytes: &[u8], at: usize) -> f64 {
        f64::from_bits(u64_at(bytes, at))
    }

    pub(super) fn decode(bytes: &[u8]) -> Result<BinStatistics> {
        if bytes.len() < HEADER + 4 {
            return Err(Error::Checksum(format!(
                "snapshot truncated: {} bytes",
                bytes.len()
            )));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(Error::Checksum("crc32 mismatch".into()));
        }
        if &body[..4] != MAGIC {
            return Err(Error::Checksum("bad magic".into()));
        }
        let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checksum(format!("unsupported version {version}")));
        }
        let m = u64_at(body, 8) as usize;
        if body.len() != HEADER + ROW * m {
            return Err(Error::Checksum(format!(
                "expected {} bins, body length {}",
                m,
                body.len()
            )));
        }
        let binner = DurationBinner::new(f64_at(body, 16), f64_at(body, 32), f64_at(body, 24))
            .map_err(|e| Error::Checksum(format!("invalid geometry: {e}")))?;
        if binner.bins() != m {
            return Err(Error::Checksum("bin count disagrees with geometry".into()));
        }
        let mut stats = BinStatistics::empty(binner, u64_at(body, 40));
        stats.skipped = u64_at(body, 48);
        for b in 0..m {
            let at = HEADER + b * ROW;
            stats.n[b] = u64_at(body, at);
            stats.mu[b] = f64_at(body, at + 8);
            stats.var[b] = f64_at(body, at + 16);
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wechat() -> DurationBinner {
        DurationBinner::new(5.0, 60.0, 1.0).unwrap()
    }

    #[test]
    fn bin_boundaries() {
        let b = wechat();
        assert_eq!(b.bins(), 55);
        assert_eq!(b.bin_of(5.0).unwrap(), 0);
        assert_eq!(b.bin_of(60.0).unwrap(), 54);
        assert_eq!(b.bin_of(12.7).unwrap(), 7);
        assert!(matches!(b.bin_of(4.99), Err(Error::OutOfRange { .. })));
        assert!(b.bin_of(60.01).is_err());
    }

    #[test]
    fn bin_count_rounds_up() {
        let b = DurationBinner::new(0.0, 10.0, 3.0).unwrap();
        assert_eq!(b.bins(), 4);
        assert_eq!(b.bin_of(10.0).unwrap(), 3);
        assert!(DurationBinner::new(1.0, 1.0, 1.0).is_err());
        assert!(DurationBinner::new(0.0, 1.0, 0.0).is_err());
    }

    fn single_bin() -> DurationBinner {
        DurationBinner::new(0.0, 10.0, 10.0).unwrap()
    }

    #[test]
    fn batch_two_points() {
        let s = BinStatistics::fit_pairs(single_bin(), &[(2.0, 5.0), (4.0, 5.0)], 30).unwrap();
        assert_eq!((s.count(0), s.mean(0), s.std_dev(0)), (2, 3.0, 1.0));
        assert!(s.is_underpopulated(0));
    }

    #[test]
    fn batch_single_and_empty_bins() {
        let b = DurationBinner::new(0.0, 2.0, 1.0).unwrap();
        let s = BinStatistics::fit_pairs(b, &[(7.0, 0.5)], 1).unwrap();
        assert_eq!((s.count(0), s.mean(0), s.std_dev(0)), (1, 7.0, 0.0));
        assert_eq!((s.count(1), s.mean(1), s.std_dev(1)), (0, 0.0, 0.0));
        assert_eq!(s.underpopulated_bins(), vec![1]);
    }

    #[test]
    fn equal_members_have_exactly_zero_sigma() {
        let pairs = vec![(0.1, 3.0); 7];
        let batch = BinStatistics::fit_pairs(single_bin(), &pairs, 1).unwrap();
        assert_eq!(batch.variance(0), 0.0);
        assert_eq!(batch.mean(0), 0.1);
        let mut s = BinStatistics::empty(single_bin(), 1);
        for &(wt, d) in &pairs {
            s.stream_update(wt, d, OutOfRangePolicy::Skip).unwrap();
        }
        assert_eq!(s.variance(0), 0.0);
        assert_eq!(s.mean(0), 0.1);
    }

    #[test]
    fn stream_recurrence_by_hand() {
        let mut s = BinStatistics::empty(single_bin(), 1);
        s.stream_update(2.0, 5.0, OutOfRangePolicy::Skip).unwrap();
        assert_eq!((s.count(0), s.variance(0), s.mean(0)), (1, 0.0, 2.0));
        s.stream_update(4.0, 5.0, OutOfRangePolicy::Skip).unwrap();
        // (1/4)(4-2)^2 + (1/2)*0 = 1, mean 2 + 2/2 = 3
        assert_eq!((s.count(0), s.variance(0), s.mean(0)), (2, 1.0, 3.0));
    }

    #[test]
    fn out_of_range_stream_events() {
        let mut s = BinStatistics::empty(wechat(), 1);
        assert_eq!(
            s.stream_update(1.0, 70.0, OutOfRangePolicy::Skip).unwrap(),
            StreamOutcome::Skipped
        );
        assert_eq!(s.skipped(), 1);
        assert!(s.stream_update(1.0, 70.0, OutOfRangePolicy::Error).is_err());
        assert_eq!(s.total_count(), 0);
    }

    #[test]
    fn merge_identity_and_pair() {
        let a = BinStatistics::fit_pairs(single_bin(), &[(2.0, 1.0)], 1).unwrap();
        let b = BinStatistics::fit_pairs(single_bin(), &[(4.0, 1.0)], 1).unwrap();
        let empty = BinStatistics::empty(single_bin(), 1);
        assert_eq!(a.merge(&empty).unwrap(), a);
        assert_eq!(empty.merge(&a).unwrap(), a);
        let ab = a.merge(&b).unwrap();
        assert_eq!((ab.count(0), ab.mean(0), ab.variance(0)), (2, 3.0, 1.0));
        assert_eq!(b.merge(&a).unwrap(), ab);
    }

    #[test]
    fn merge_rejects_geometry_mismatch() {
        let a = BinStatistics::empty(wechat(), 1);
        let b = BinStatistics::empty(DurationBinner::new(5.0, 120.0, 1.0).unwrap(), 1);
        assert!(matches!(a.merge(&b), Err(Error::Config(_))));
    }

    #[test]
    fn streaming_matches_batch_on_dense_bins() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = DurationBinner::new(0.0, 3.0, 1.0).unwrap();
        let pairs: Vec<(f64, f64)> = (0..30_000)
            .map(|_| (rng.random_range(0.0..50.0), rng.random_range(0.0..3.0)))
            .collect();
        let batch = BinStatistics::fit_pairs(b, &pairs, 1).unwrap();
        let mut s = BinStatistics::empty(b, 1);
        for &(wt, d) in &pairs {
            s.stream_update(wt, d, OutOfRangePolicy::Error).unwrap();
        }
        for bin in 0..3 {
            assert_eq!(s.count(bin), batch.count(bin));
            assert!((s.mean(bin) - batch.mean(bin)).abs() <= 1e-9 * batch.mean(bin).abs());
            assert!((s.std_dev(bin) - batch.std_dev(bin)).abs() <= 1e-9 * batch.std_dev(bin));
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let empty = BinStatistics::empty(wechat(), 30);
        assert_eq!(BinStatistics::restore(&empty.snapshot()).unwrap(), empty);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = BinStatistics::empty(wechat(), 30);
        for _ in 0..100_000 {
            let d = rng.random_range(0.0..70.0);
            s.stream_update(rng.random_range(0.0..90.0), d, OutOfRangePolicy::Skip)
                .unwrap();
        }
        let back = BinStatistics::restore(&s.snapshot()).unwrap();
        assert_eq!(back.skipped(), s.skipped());
        for b in 0..s.binner().bins() {
            assert_eq!(back.count(b), s.count(b));
            assert_eq!(back.mean(b).to_bits(), s.mean(b).to_bits());
            assert_eq!(back.variance(b).to_bits(), s.variance(b).to_bits());
        }
    }

    #[test]
    fn corrupt_snapshots_fail_checksum() {
        let s = BinStatistics::fit_pairs(wechat(), &[(3.0, 10.0)], 1).unwrap();
        let bytes = s.snapshot();
        let truncated = &bytes[..bytes.len() - 10];
        assert!(matches!(BinStatistics::restore(truncated), Err(Error::Checksum(_))));
        assert!(matches!(BinStatistics::restore(&bytes[..3]), Err(Error::Checksum(_))));
        let mut flipped = bytes.clone();
        flipped[70] ^= 0x01;
        assert!(matches!(BinStatistics::restore(&flipped), Err(Error::Checksum(_))));
    }
}
