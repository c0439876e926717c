//! End-to-end runs: ingest, filter, split, fit statistics, annotate, train,
//! rank and evaluate, plus alpha sweeps, strategy ablations and run comparison.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::binstats::{BinStatistics, DurationBinner, DEFAULT_MIN_BIN_COUNT};
use crate::error::{Error, Result};
use crate::ingest::{self, Dataset, DurationRange, FormatConfig};
use crate::metrics::{
    bias_curves, evaluate_lists, mae, producer_groups, rmse, write_curves_csv, BiasCurveRow,
    EvalReport, ModelMetrics, ProducerGroups, RankedList,
};
use crate::models::{
    baseline_long_rec, baseline_random_rec, rank_for_user, Candidate, Checkpoint, DurationNorm,
    DvrModel, FeatureSpace, History, ModelKind, Phi, Sample, ScoreMode, Target, TrainConfig,
    CHECKPOINT_VERSION,
};
use crate::synth::{self, LatentGroundTruth, SynthConfig};
use crate::wtg::{annotate_dataset, AnnotatedDataset};

/// Name of the report file inside a run directory.
pub const REPORT_FILE: &str = "report.toml";

/// The three debiasing strategies. Adversarial training needs the WTG target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Strategy {
    /// Drop duration from the input features.
    pub dd: bool,
    /// Regress on WTG instead of watch time.
    pub wtg: bool,
    /// Adversarial duration head behind a gradient reversal.
    pub adv: bool,
}

impl Strategy {
    pub const NONE: Strategy = Strategy { dd: false, wtg: false, adv: false };
    pub const FULL: Strategy = Strategy { dd: true, wtg: true, adv: true };

    /// None, +DD, +WTG, +ADV: each arm adds one strategy to the previous.
    pub fn ladder() -> [Strategy; 4] {
        [
            Strategy::NONE,
            Strategy { dd: true, ..Strategy::NONE },
            Strategy { dd: true, wtg: true, adv: false },
            Strategy::FULL,
        ]
    }

    pub fn target(&self) -> Target {
        if self.wtg {
            Target::Wtg
        } else {
            Target::WatchTime
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.adv && !self.wtg {
            return Err(Error::Config(
                "adversarial training (adv) requires the WTG target (wtg)".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [(self.dd, "dd"), (self.wtg, "wtg"), (self.adv, "adv")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// Accepts `none`, `full`, or `+`-joined flags such as `dd+wtg+adv`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "none" {
            return Ok(Strategy::NONE);
        }
        if s == "full" || s == "dvr" {
            return Ok(Strategy::FULL);
        }
        let mut out = Strategy::NONE;
        for part in s.split('+') {
            match part.trim() {
                "dd" => out.dd = true,
                "wtg" => out.wtg = true,
                "adv" => out.adv = true,
                other => {
                    return Err(Error::Config(format!("unknown strategy flag `{other}`")))
                }
            }
        }
        Ok(out)
    }
}

/// Which records the bin statistics are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsScope {
    #[default]
    Train,
    All,
}

impl StatsScope {
    pub fn as_str(&self) -> &'static str {
        match self {
            StatsScope::Train => "train",
            StatsScope::All => "all",
        }
    }
}

impl FromStr for StatsScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(StatsScope::Train),
            "all" => Ok(StatsScope::All),
            other => Err(Error::Config(format!("unknown stats scope `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synth(SynthConfig),
    File { path: PathBuf, format: FormatConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelKind,
    pub strategy: Strategy,
    pub score_mode: ScoreMode,
    pub k: usize,
    pub bc_threshold: f64,
    pub duration_range: DurationRange,
    pub bin_width: f64,
    pub min_bin_count: u64,
    /// Keep records from under-populated bins in WTG training and evaluation.
    pub include_underpopulated: bool,
    pub stats_scope: StatsScope,
    pub split: (f64, f64, f64),
    /// Also evaluate LongRec, RandomRec and (for synthetic data) the oracle.
    pub baselines: bool,
    pub data: DataSource,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: ModelKind::Fm,
            strategy: Strategy::FULL,
            score_mode: ScoreMode::Direct,
            k: 10,
            bc_threshold: 2.0,
            duration_range: DurationRange::WECHAT,
            bin_width: 1.0,
            min_bin_count: DEFAULT_MIN_BIN_COUNT,
            include_underpopulated: false,
            stats_scope: StatsScope::Train,
            split: (0.8, 0.1, 0.1),
            baselines: true,
            data: DataSource::Synth(SynthConfig::default()),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn synthetic(seed: u64, strategy: Strategy) -> Self {
        Self {
            seed,
            strategy,
            ..Self::default()
        }
    }

    /// Propagates the top-level seed into the data and training configs.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.train.seed = self.seed;
        if let DataSource::Synth(s) = &mut out.data {
            s.seed = self.seed;
        }
        out
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        self.train.validate()?;
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.bc_threshold > 0.0) {
            return Err(Error::Config("bad-case threshold must be positive".into()));
        }
        DurationBinner::new(self.duration_range.min, self.duration_range.max, self.bin_width)?;
        if let DataSource::Synth(s) = &self.data {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Serialized as `report.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: String,
    pub target: String,
    pub training: TrainingSummary,
    pub config: ExperimentConfig,
    pub eval: EvalReport,
}

impl RunReport {
    /// The trained model's metrics.
    pub fn model(&self) -> &ModelMetrics {
        &self.eval.models["model"]
    }

    /// TOML body preceded by a single timestamp header line.
    pub fn render(&self) -> Result<String> {
        let body = toml::to_string(self)
            .map_err(|e| Error::Data(format!("report serialization: {e}")))?;
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(format!("# generated_at_unix = {now}\n{body}"))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Data(format!("report parse: {e}")))
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(REPORT_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }
}

/// Everything a run produces, before anything is written to disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub checkpoint: Checkpoint,
    pub history: History,
    pub curves: Vec<BiasCurveRow>,
    pub lists: RankerLists,
    pub stats: BinStatistics,
}

/// Regression targets for the annotated records.
///
/// With the WTG target, records with invalid labels are dropped unless
/// `include_invalid`; the duration head's target is min-max scaled over
/// `duration_range` unless `norm` is raw.
pub fn prepare_samples(
    data: &AnnotatedDataset,
    space: &FeatureSpace,
    target: Target,
    duration_range: (f64, f64),
    norm: DurationNorm,
    include_invalid: bool,
) -> Vec<Sample> {
    let (lo, hi) = duration_range;
    let span = if hi > lo { hi - lo } else { 1.0 };
    data.iter()
        .filter(|(_, l)| target == Target::WatchTime || include_invalid || l.valid)
        .map(|(r, l)| Sample {
            x: space.encode(r),
            y: match target {
                Target::WatchTime => r.watch_time,
                Target::Wtg => l.value,
            },
            y_d: match norm {
                DurationNorm::MinMax => (r.duration - lo) / span,
                DurationNorm::Raw => r.duration,
            },
        })
        .collect()
}

/// Options for [`fit_model`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub model: ModelKind,
    pub strategy: Strategy,
    pub score_mode: ScoreMode,
    pub include_invalid: bool,
    pub train: TrainConfig,
}

pub fn fit_model(
    train: &AnnotatedDataset,
    val: &AnnotatedDataset,
    opts: &FitOptions,
) -> Result<(Checkpoint, History)> {
    opts.strategy.validate()?;
    let target = opts.strategy.target();
    let space = FeatureSpace::fit(train.records(), !opts.strategy.dd);
    let (lo, hi) = train
        .records()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.duration), hi.max(r.duration))
        });
    let norm = opts.train.duration_norm;
    let train_s = prepare_samples(train, &space, target, (lo, hi), norm, opts.include_invalid);
    let val_s = prepare_samples(val, &space, target, (lo, hi), norm, opts.include_invalid);
    if train_s.is_empty() {
        return Err(Error::Data("no usable training samples".into()));
    }
    let bias = train_s.iter().map(|s| s.y).sum::<f64>() / train_s.len() as f64;
    let phi = Phi::new(opts.model, space.num_features(), space.num_fields(), &opts.train, bias);
    let (psi, alpha) = if opts.strategy.adv {
        (Some(DvrModel::default_psi()), opts.train.alpha)
    } else {
        (None, 0.0)
    };
    let mut model = DvrModel::new(phi, psi, alpha, target, opts.train.learning_rate);
    let history = model.train(&train_s, &val_s, &opts.train)?;
    Ok((
        Checkpoint {
            version: CHECKPOINT_VERSION,
            space,
            model,
            config: opts.train.clone(),
            score_mode: opts.score_mode,
            duration_range: (lo, hi),
        },
        history,
    ))
}

/// Test candidates grouped by user, in user-id order.
pub fn user_candidates(test: &AnnotatedDataset, include_invalid: bool) -> BTreeMap<String, Vec<Candidate<'_>>> {
    let mut out: BTreeMap<String, Vec<Candidate<'_>>> = BTreeMap::new();
    for (r, l) in test.iter() {
        if l.bin.is_some() && (include_invalid || l.valid) {
            out.entry(r.user_id.clone()).or_default().push(Candidate {
                record: r,
                wtg: l.value,
            });
        }
    }
    out
}

fn user_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// Ranked lists keyed by ranker name.
pub type RankerLists = BTreeMap<String, Vec<RankedList>>;

/// Options for [`rank_all`].
pub struct RankOptions<'a> {
    pub stats: &'a BinStatistics,
    pub baselines: bool,
    pub seed: u64,
    pub truth: Option<&'a LatentGroundTruth>,
}

/// Ranked lists per ranker name: `model`, and optionally `long_rec`,
/// `random_rec` and `oracle`.
pub fn rank_all(
    ckpt: &Checkpoint,
    candidates: &BTreeMap<String, Vec<Candidate<'_>>>,
    opts: &RankOptions<'_>,
) -> Result<RankerLists> {
    let mut out: BTreeMap<String, Vec<RankedList>> = BTreeMap::new();
    for (i, (user, cands)) in candidates.iter().enumerate() {
        let list = rank_for_user(&ckpt.model.phi, &ckpt.space, user, cands, ckpt.score_mode, Some(opts.stats))?;
        out.entry("model".into()).or_default().push(list);
        if opts.baselines {
            out.entry("long_rec".into()).or_default().push(baseline_long_rec(user, cands));
            out.entry("random_rec".into())
                .or_default()
                .push(baseline_random_rec(user, cands, user_seed(opts.seed, i)));
            if let Some(truth) = opts.truth {
                out.entry("oracle".into())
                    .or_default()
                    .push(synth::oracle_best_ranking(user, cands, truth, opts.stats)?);
            }
        }
    }
    Ok(out)
}

/// Regression error of the checkpoint on test records, in its target space.
pub fn prediction_errors(ckpt: &Checkpoint, test: &AnnotatedDataset, include_invalid: bool) -> Result<(f64, f64)> {
    let target = ckpt.model.target;
    let samples = prepare_samples(test, &ckpt.space, target, ckpt.duration_range, DurationNorm::Raw, include_invalid);
    let preds: Vec<f64> = samples.iter().map(|s| ckpt.model.predict(&s.x)).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.y).collect();
    Ok((mae(&preds, &ys)?, rmse(&preds, &ys)?))
}

/// Options for [`evaluate_checkpoint`].
pub struct EvalOptions<'a> {
    pub k: usize,
    pub bc_threshold: f64,
    pub include_invalid: bool,
    pub rank: RankOptions<'a>,
    pub groups: Option<&'a ProducerGroups>,
}

/// Ranks every test user's candidates and computes metrics per ranker.
/// The trained model's entry also carries the test regression error.
pub fn evaluate_checkpoint(
    ckpt: &Checkpoint,
    test: &AnnotatedDataset,
    opts: &EvalOptions<'_>,
) -> Result<(BTreeMap<String, ModelMetrics>, RankerLists)> {
    let candidates = user_candidates(test, opts.include_invalid);
    let lists = rank_all(ckpt, &candidates, &opts.rank).map_err(|e| e.in_stage("rank"))?;
    let binner = opts.rank.stats.binner();
    let mut models = BTreeMap::new();
    for (name, ls) in &lists {
        let m = evaluate_lists(ls, opts.k, opts.bc_threshold, opts.groups, binner)
            .map_err(|e| e.in_stage("evaluate"))?;
        models.insert(name.clone(), m);
    }
    if let Some(m) = models.get_mut("model") {
        let (e_abs, e_sq) = prediction_errors(ckpt, test, opts.include_invalid).map_err(|e| e.in_stage("evaluate"))?;
        m.mae = Some(e_abs);
        m.rmse = Some(e_sq);
        m.error_space = Some(ckpt.model.target.as_str().into());
    }
    Ok((models, lists))
}

fn fingerprint(ds: &Dataset) -> Result<String> {
    let mut buf = Vec::new();
    ingest::write_dataset(ds, &mut buf, b',')?;
    Ok(format!("{:08x}", crc32fast::hash(&buf)))
}

struct Loaded {
    dataset: Dataset,
    truth: Option<LatentGroundTruth>,
}

fn load(config: &ExperimentConfig) -> Result<Loaded> {
    match &config.data {
        DataSource::Synth(s) => {
            let (dataset, truth) = synth::generate(s)?;
            Ok(Loaded {
                dataset,
                truth: Some(truth),
            })
        }
        DataSource::File { path, format } => {
            let (dataset, _) = ingest::read_dataset(path, format)?;
            Ok(Loaded {
                dataset,
                truth: None,
            })
        }
    }
}

/// Runs the whole pipeline in memory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    let config = config.resolved();
    config.validate()?;
    let loaded = load(&config).map_err(|e| e.in_stage("ingest"))?;
    let range = config.duration_range;
    let (filtered, _) = ingest::filter_duration_range(&loaded.dataset, range.min, range.max)
        .map_err(|e| e.in_stage("filter"))?;
    let (train, val, test) =
        ingest::split_by_time(&filtered, config.split).map_err(|e| e.in_stage("split"))?;

    let binner = DurationBinner::new(range.min, range.max, config.bin_width)?;
    let fit_on = match config.stats_scope {
        StatsScope::Train => &train,
        StatsScope::All => &filtered,
    };
    let stats = BinStatistics::fit_batch(binner, fit_on.records(), config.min_bin_count)
        .map_err(|e| e.in_stage("stats"))?;

    let annotate = |ds: &Dataset| annotate_dataset(ds, &stats).map_err(|e| e.in_stage("annotate"));
    let train_a = annotate(&train)?;
    let val_a = annotate(&val)?;
    let test_a = annotate(&test)?;

    let opts = FitOptions {
        model: config.model,
        strategy: config.strategy,
        score_mode: config.score_mode,
        include_invalid: config.include_underpopulated,
        train: config.train.clone(),
    };
    let (ckpt, history) = fit_model(&train_a, &val_a, &opts).map_err(|e| e.in_stage("train"))?;

    let groups: Option<ProducerGroups> = if filtered.has_producers() {
        Some(producer_groups(&filtered).map_err(|e| e.in_stage("evaluate"))?)
    } else {
        None
    };
    let eval_opts = EvalOptions {
        k: config.k,
        bc_threshold: config.bc_threshold,
        include_invalid: config.include_underpopulated,
        rank: RankOptions {
            stats: &stats,
            baselines: config.baselines,
            seed: config.seed,
            truth: loaded.truth.as_ref(),
        },
        groups: groups.as_ref(),
    };
    let (models, lists) = evaluate_checkpoint(&ckpt, &test_a, &eval_opts)?;
    let candidates = user_candidates(&test_a, config.include_underpopulated);
    let train_users: std::collections::BTreeSet<&str> =
        train.records().iter().map(|r| r.user_id.as_str()).collect();
    let cold = candidates
        .keys()
        .filter(|u| !train_users.contains(u.as_str()))
        .count();

    let eval = EvalReport {
        k: config.k,
        bc_threshold: config.bc_threshold,
        stats_scope: config.stats_scope.as_str().into(),
        dataset_fingerprint: fingerprint(&filtered)?,
        test_records: test.len(),
        cold_test_users: cold,
        models,
    };
    let curves = bias_curves(train_a.records(), Some(&train_a.labels), &binner);
    let report = RunReport {
        strategy: config.strategy.to_string(),
        target: config.strategy.target().as_str().into(),
        training: TrainingSummary {
            epochs_run: history.epochs.len() - 1,
            best_epoch: history.best_epoch,
            best_val_loss: history.best_val(),
            stopped_early: history.stopped_early,
        },
        config,
        eval,
    };
    Ok(RunOutcome {
        report,
        checkpoint: ckpt,
        history,
        curves,
        lists,
        stats,
    })
}

fn write_history(path: &Path, history: &History) -> Result<()> {
    let mut text = String::from("epoch,train_target,train_duration,val_target\n");
    for e in &history.epochs {
        let _ = writeln!(text, "{},{},{},{}", e.epoch, e.train_target, e.train_duration, e.val_target);
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_outcome(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    let report_path = dir.join(REPORT_FILE);
    fs::write(&report_path, outcome.report.render()?).map_err(|e| Error::io(&report_path, e))?;
    let hists: Vec<(&str, &[u64])> = outcome
        .report
        .eval
        .models
        .iter()
        .map(|(n, m)| (n.as_str(), m.topk_duration_histogram.as_slice()))
        .collect();
    write_curves_csv(&dir.join("curves.csv"), &outcome.curves, &hists)?;
    outcome.checkpoint.save(&dir.join("model.json"))?;
    outcome.stats.save(&dir.join("stats.bin"))?;
    write_history(&dir.join("history.csv"), &outcome.history)?;
    let mut per_user = String::from("model,user,watch_time_at_k\n");
    for (name, lists) in &outcome.lists {
        for (l, s) in lists
            .iter()
            .zip(crate::metrics::watch_time_sums_at_k(lists, outcome.report.eval.k))
        {
            let _ = writeln!(per_user, "{name},{},{s}", l.user_id);
        }
    }
    let path = dir.join("watch_time_per_user.csv");
    fs::write(&path, per_user).map_err(|e| Error::io(&path, e))
}

/// Runs into a sibling `.partial` directory and renames it into place, so a
/// failed run leaves nothing behind.
fn with_staging<T>(out_dir: &Path, body: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    let mut staging = out_dir.as_os_str().to_owned();
    staging.push(".partial");
    let staging = PathBuf::from(staging);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    match body(&staging) {
        Ok(v) => {
            if out_dir.exists() {
                fs::remove_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
            }
            fs::rename(&staging, out_dir).map_err(|e| Error::io(out_dir, e))?;
            Ok(v)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

/// Runs the pipeline and writes `report.toml`, `curves.csv`, `model.json`,
/// `stats.bin`, `history.csv` and `watch_time_per_user.csv` into `out_dir`.
pub fn cmd_pipeline(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    config.resolved().validate()?;
    with_staging(out_dir, |dir| {
        let outcome = run_experiment(config)?;
        write_outcome(dir, &outcome).map_err(|e| e.in_stage("write"))?;
        Ok(outcome.report)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub wtg_at_k: f64,
    pub dcwtg_at_k: f64,
    pub bc_at_k: usize,
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("alpha,wtg_at_k,dcwtg_at_k,bc_at_k\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.alpha, r.wtg_at_k, r.dcwtg_at_k, r.bc_at_k);
    }
    s
}

/// The full strategy at each alpha; one run directory per alpha plus `sweep.csv`.
pub fn sweep_alpha(config: &ExperimentConfig, alphas: &[f64], out_dir: &Path) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        return Err(Error::Config("alpha sweep needs at least one value".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(Error::Config(format!("invalid alpha {a}")));
    }
    let mut base = config.clone();
    base.strategy = Strategy::FULL;
    base.resolved().validate()?;
    with_staging(out_dir, |dir| {
        let mut rows = Vec::new();
        for &alpha in alphas {
            let mut c = base.clone();
            c.train.alpha = alpha;
            let report = cmd_pipeline(&c, &dir.join(format!("alpha_{alpha}")))?;
            let m = report.model();
            rows.push(SweepRow {
                alpha,
                wtg_at_k: m.wtg_at_k,
                dcwtg_at_k: m.dcwtg_at_k,
                bc_at_k: m.bc_at_k,
            });
        }
        let path = dir.join("sweep.csv");
        fs::write(&path, sweep_csv(&rows)).map_err(|e| Error::io(&path, e))?;
        Ok(rows)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub strategy: String,
    pub wtg_at_k: f64,
    pub dcwtg_at_k: f64,
    pub bc_at_k: usize,
    pub traffic_long: Option<f64>,
}

/// Runs the four-arm strategy ladder; one run directory per arm plus `ablation.csv`.
pub fn ablate(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<AblationRow>> {
    config.resolved().validate()?;
    with_staging(out_dir, |dir| {
        let mut rows = Vec::new();
        for strategy in Strategy::ladder() {
            let mut c = config.clone();
            c.strategy = strategy;
            let report = cmd_pipeline(&c, &dir.join(strategy.to_string()))?;
            let m = report.model();
            rows.push(AblationRow {
                strategy: strategy.to_string(),
                wtg_at_k: m.wtg_at_k,
                dcwtg_at_k: m.dcwtg_at_k,
                bc_at_k: m.bc_at_k,
                traffic_long: m.traffic_long,
            });
        }
        let mut s = String::from("strategy,wtg_at_k,dcwtg_at_k,bc_at_k,traffic_long\n");
        for r in &rows {
            let traffic = r.traffic_long.map(|t| t.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{traffic}", r.strategy, r.wtg_at_k, r.dcwtg_at_k, r.bc_at_k);
        }
        let path = dir.join("ablation.csv");
        fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        Ok(rows)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub run: String,
    pub wtg_at_k: f64,
    pub dcwtg_at_k: f64,
    pub bc_at_k: usize,
    /// Relative change against the first run, in percent.
    pub wtg_delta_pct: f64,
    pub dcwtg_delta_pct: f64,
    pub bc_delta_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub k: usize,
    pub rows: Vec<ComparisonRow>,
}

fn rel_pct(value: f64, base: f64) -> f64 {
    if base == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(value)
        }
    } else {
        (value - base) / base.abs() * 100.0
    }
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let k = self.k;
        let width = self.rows.iter().map(|r| r.run.len()).max().unwrap_or(3).max(3);
        let mut s = format!(
            "{:<width$}  {:>10}  {:>9}  {:>10}  {:>9}  {:>8}  {:>9}\n",
            "run",
            format!("WTG@{k}"),
            "delta%",
            format!("DCWTG@{k}"),
            "delta%",
            format!("#BC@{k}"),
            "delta%"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<width$}  {:>10.4}  {:>+9.2}  {:>10.4}  {:>+9.2}  {:>8}  {:>+9.2}",
                r.run, r.wtg_at_k, r.wtg_delta_pct, r.dcwtg_at_k, r.dcwtg_delta_pct, r.bc_at_k, r.bc_delta_pct
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("run,wtg_at_k,wtg_delta_pct,dcwtg_at_k,dcwtg_delta_pct,bc_at_k,bc_delta_pct\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.run, r.wtg_at_k, r.wtg_delta_pct, r.dcwtg_at_k, r.dcwtg_delta_pct, r.bc_at_k, r.bc_delta_pct
            );
        }
        s
    }
}

/// Side-by-side metrics of completed runs, relative to the first.
pub fn cmd_compare(run_dirs: &[PathBuf]) -> Result<Comparison> {
    if run_dirs.len() < 2 {
        return Err(Error::Config("compare needs at least two runs".into()));
    }
    let mut reports = Vec::new();
    for dir in run_dirs {
        if !dir.join(REPORT_FILE).is_file() {
            return Err(Error::Data(format!(
                "no {REPORT_FILE} in run directory {}",
                dir.display()
            )));
        }
        reports.push(RunReport::load(dir)?);
    }
    let base = &reports[0];
    for (dir, r) in run_dirs.iter().zip(&reports).skip(1) {
        if r.eval.k != base.eval.k {
            return Err(Error::Data(format!(
                "{} uses k={} but the first run uses k={}",
                dir.display(),
                r.eval.k,
                base.eval.k
            )));
        }
        if r.eval.dataset_fingerprint != base.eval.dataset_fingerprint {
            return Err(Error::Data(format!(
                "{} was evaluated on a different dataset",
                dir.display()
            )));
        }
    }
    let b = base.model().clone();
    let rows = run_dirs
        .iter()
        .zip(&reports)
        .map(|(dir, r)| {
            let m = r.model();
            ComparisonRow {
                run: dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string()),
                wtg_at_k: m.wtg_at_k,
                dcwtg_at_k: m.dcwtg_at_k,
                bc_at_k: m.bc_at_k,
                wtg_delta_pct: rel_pct(m.wtg_at_k, b.wtg_at_k),
                dcwtg_delta_pct: rel_pct(m.dcwtg_at_k, b.dcwtg_at_k),
                bc_delta_pct: rel_pct(m.bc_at_k as f64, b.bc_at_k as f64),
            }
        })
        .collect();
    Ok(Comparison { k: base.eval.k, rows })
}
