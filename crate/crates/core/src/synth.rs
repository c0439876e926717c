//! Seeded synthetic watch logs with planted duration bias and a long/short
//! producer structure, plus the latent ground truth that generated them.
//!
//! Watch fraction for user `u` on video `v` of duration `d`:
//!
//! ```text
//! a = logistic(z_u . x_v / sqrt(L))
//! p = clamp(a * f0 * (d / d_min)^(-beta) + eps, 0, 1.5),  eps ~ N(0, noise_std)
//! watch_time = p * d
//! ```
//!
//! so mean watch time grows like `d^(1 - beta)` while mean watch percentage
//! shrinks like `d^(-beta)`.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::binstats::BinStatistics;
use crate::error::{Error, Result};
use crate::ingest::{Dataset, InteractionRecord};
use crate::metrics::{ProducerGroup, ProducerGroups, RankedItem, RankedList};
use crate::models::Candidate;
use crate::wtg::SIGMA_FLOOR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_videos: usize,
    pub n_producers: usize,
    pub interactions_per_user: usize,
    pub d_min: u32,
    pub d_max: u32,
    pub latent_dim: usize,
    /// Standard deviation of every latent coordinate.
    pub latent_std: f64,
    pub beta: f64,
    pub f0: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 500,
            n_videos: 2000,
            n_producers: 100,
            interactions_per_user: 200,
            d_min: 5,
            d_max: 60,
            latent_dim: 8,
            latent_std: 1.0,
            beta: 0.5,
            f0: 0.9,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synthetic config: {m}")));
        if self.n_users == 0 || self.n_videos == 0 || self.n_producers == 0 {
            return fail("user, video and producer counts must be positive");
        }
        if self.interactions_per_user == 0 || self.latent_dim == 0 {
            return fail("interactions per user and latent dim must be positive");
        }
        if !(self.d_min >= 1 && self.d_min < self.d_max) {
            return fail("duration range must satisfy 1 <= d_min < d_max");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return fail("beta must lie strictly inside (0, 1)");
        }
        if !(self.f0 > 0.0) || !(self.noise_std >= 0.0) || !(self.latent_std >= 0.0) {
            return fail("f0 must be positive, noise and latent std non-negative");
        }
        Ok(())
    }

    fn producer_centers(&self) -> (f64, f64) {
        let span = (self.d_min + self.d_max) as f64;
        (0.3 * span, 0.7 * span)
    }

    fn producer_spread(&self) -> f64 {
        0.1 * (self.d_max - self.d_min) as f64
    }
}

/// The generator's hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentGroundTruth {
    pub config: SynthConfig,
    pub user_latents: Vec<Vec<f64>>,
    pub video_latents: Vec<Vec<f64>>,
    pub video_durations: Vec<f64>,
    pub video_producers: Vec<usize>,
    pub producer_means: Vec<f64>,
    pub producer_clusters: Vec<ProducerGroup>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn parse_index(id: &str, prefix: char) -> Option<usize> {
    id.strip_prefix(prefix)?.parse().ok()
}

impl LatentGroundTruth {
    pub fn affinity(&self, user: usize, video: usize) -> f64 {
        let dot: f64 = self.user_latents[user]
            .iter()
            .zip(&self.video_latents[video])
            .map(|(a, b)| a * b)
            .sum();
        logistic(dot / (self.config.latent_dim as f64).sqrt())
    }

    /// Noise-free watch fraction.
    pub fn expected_fraction(&self, user: usize, video: usize) -> f64 {
        let c = &self.config;
        let d = self.video_durations[video];
        (self.affinity(user, video) * c.f0 * (d / c.d_min as f64).powf(-c.beta)).clamp(0.0, 1.5)
    }

    pub fn expected_watch_time(&self, user: usize, video: usize) -> f64 {
        self.expected_fraction(user, video) * self.video_durations[video]
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        parse_index(id, 'u').filter(|&i| i < self.user_latents.len())
    }

    pub fn video_index(&self, id: &str) -> Option<usize> {
        parse_index(id, 'v').filter(|&i| i < self.video_latents.len())
    }

    /// The long/short clusters the producers were drawn from.
    pub fn planted_groups(&self) -> ProducerGroups {
        self.producer_clusters
            .iter()
            .enumerate()
            .map(|(p, g)| (format!("p{p}"), *g))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Generates a log in round-robin order: every round gives each user one
/// interaction, so each user's history is spread over the whole time axis.
///
/// Video durations are uniform over integer seconds. Each producer is planted
/// in the short or long cluster with its own mean duration, and every video is
/// assigned to a producer with probability proportional to a Gaussian kernel
/// around that producer's mean, so durations stay uniform overall.
pub fn generate(config: &SynthConfig) -> Result<(Dataset, LatentGroundTruth)> {
    config.validate()?;
    let cfg = config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let latent = Normal::new(0.0, cfg.latent_std).map_err(|e| Error::Config(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(e.to_string()))?;

    let draw_latent = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..cfg.latent_dim).map(|_| latent.sample(rng)).collect()
    };
    let user_latents: Vec<Vec<f64>> = (0..cfg.n_users).map(|_| draw_latent(&mut rng)).collect();
    let video_latents: Vec<Vec<f64>> = (0..cfg.n_videos).map(|_| draw_latent(&mut rng)).collect();

    let (short_c, long_c) = cfg.producer_centers();
    let spread = cfg.producer_spread();
    let center_noise = Normal::new(0.0, spread).unwrap();
    let (lo, hi) = (cfg.d_min as f64, cfg.d_max as f64);
    let producer_clusters: Vec<ProducerGroup> = (0..cfg.n_producers)
        .map(|p| if p % 2 == 0 { ProducerGroup::Short } else { ProducerGroup::Long })
        .collect();
    let producer_means: Vec<f64> = producer_clusters
        .iter()
        .map(|g| {
            let c = if *g == ProducerGroup::Short { short_c } else { long_c };
            (c + center_noise.sample(&mut rng)).clamp(lo, hi)
        })
        .collect();

    let mut video_durations = Vec::with_capacity(cfg.n_videos);
    let mut video_producers = Vec::with_capacity(cfg.n_videos);
    for _ in 0..cfg.n_videos {
        let d = rng.random_range(cfg.d_min..=cfg.d_max) as f64;
        let weights: Vec<f64> = producer_means
            .iter()
            .map(|m| (-(d - m).powi(2) / (2.0 * spread * spread)).exp() + 1e-300)
            .collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;
        video_durations.push(d);
        video_producers.push(pick.sample(&mut rng));
    }
    let categories: Vec<String> = video_latents
        .iter()
        .map(|x| {
            let best = x
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            format!("c{best}")
        })
        .collect();

    let truth = LatentGroundTruth {
        config: cfg.clone(),
        user_latents,
        video_latents,
        video_durations,
        video_producers,
        producer_means,
        producer_clusters,
    };

    let mut records = Vec::with_capacity(cfg.n_users * cfg.interactions_per_user);
    let mut ts = 0u64;
    for _round in 0..cfg.interactions_per_user {
        for u in 0..cfg.n_users {
            let v = rng.random_range(0..cfg.n_videos);
            let d = truth.video_durations[v];
            let base = truth.affinity(u, v) * cfg.f0 * (d / lo).powf(-cfg.beta);
            let p = (base + noise.sample(&mut rng)).clamp(0.0, 1.5);
            records.push(
                InteractionRecord::new(format!("u{u}"), format!("v{v}"), p * d, d, ts)
                    .with_producer(format!("p{}", truth.video_producers[v]))
                    .with_feature("category", categories[v].clone()),
            );
            ts += 1;
        }
    }
    Ok((Dataset::unsplit(records), truth))
}

/// Ranks candidates by their noise-free expected WTG under `stats`.
pub fn oracle_best_ranking(
    user: &str,
    candidates: &[Candidate<'_>],
    truth: &LatentGroundTruth,
    stats: &BinStatistics,
) -> Result<RankedList> {
    let u = truth
        .user_index(user)
        .ok_or_else(|| Error::Data(format!("user {user} is not in the ground truth")))?;
    let mut items = Vec::with_capacity(candidates.len());
    for c in candidates {
        let r = c.record;
        let v = truth
            .video_index(&r.video_id)
            .ok_or_else(|| Error::Data(format!("video {} is not in the ground truth", r.video_id)))?;
        let b = stats.binner().bin_of(r.duration)?;
        let expected = truth.expected_watch_time(u, v);
        let score = (expected - stats.mean(b)) / stats.std_dev(b).max(SIGMA_FLOOR);
        items.push(RankedItem {
            video_id: r.video_id.clone(),
            score,
            watch_time: r.watch_time,
            wtg: c.wtg,
            duration: r.duration,
            producer_id: r.producer_id.clone(),
        });
    }
    Ok(RankedList::new(user, items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binstats::DurationBinner;

    fn small() -> SynthConfig {
        SynthConfig {
            n_users: 20,
            n_videos: 60,
            n_producers: 10,
            interactions_per_user: 30,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let (a, ta) = generate(&small()).unwrap();
        let (b, tb) = generate(&small()).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        crate::ingest::write_dataset(&a, &mut ba, b',').unwrap();
        crate::ingest::write_dataset(&b, &mut bb, b',').unwrap();
        assert_eq!(ba, bb);
        assert_eq!(ta, tb);
        let (c, _) = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn watch_time_bounds_and_integer_durations() {
        let (ds, _) = generate(&small()).unwrap();
        assert_eq!(ds.len(), 600);
        for w in ds.records().windows(2) {
            assert!(w[0].timestamp < w[1].timestamp);
        }
        for r in ds.records() {
            assert!(r.watch_time >= 0.0 && r.watch_time <= 1.5 * r.duration);
            assert!((5.0..=60.0).contains(&r.duration));
            assert_eq!(r.duration.fract(), 0.0);
        }
    }

    #[test]
    fn degenerate_config_gives_constant_bins() {
        let cfg = SynthConfig { noise_std: 0.0, latent_std: 0.0, ..small() };
        let (ds, _) = generate(&cfg).unwrap();
        // the closed last bin of [5, 60] pools 59 s and 60 s, so give 60 s its own bin
        let fine = DurationBinner::new(5.0, 61.0, 1.0).unwrap();
        let stats = BinStatistics::fit_batch(fine, ds.records(), 1).unwrap();
        for b in 0..fine.bins() {
            assert_eq!(stats.variance(b), 0.0, "bin {b}");
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate(&SynthConfig { beta: 1.0, ..small() }).is_err());
        assert!(generate(&SynthConfig { n_users: 0, ..small() }).is_err());
        assert!(generate(&SynthConfig { d_min: 60, d_max: 5, ..small() }).is_err());
    }

    #[test]
    fn ids_resolve_in_ground_truth() {
        let (ds, truth) = generate(&small()).unwrap();
        let r = &ds.records()[0];
        let v = truth.video_index(&r.video_id).unwrap();
        assert_eq!(truth.video_durations[v], r.duration);
        assert_eq!(format!("p{}", truth.video_producers[v]), r.producer_id);
        assert_eq!(truth.user_index("u19"), Some(19));
        assert_eq!(truth.user_index("u20"), None);
        assert_eq!(truth.video_index("x1"), None);
    }
}
