use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use dvr_core::binstats::{BinStatistics, DurationBinner, OutOfRangePolicy, DEFAULT_MIN_BIN_COUNT};
use dvr_core::experiment::{
    self, DataSource, EvalOptions, ExperimentConfig, FitOptions, RankOptions, RunReport, StatsScope,
};
use dvr_core::ingest::{self, Dataset, DurationRange, FormatConfig};
use dvr_core::metrics::{producer_groups, EvalReport};
use dvr_core::models::{Checkpoint, ModelKind, ScoreMode, TrainConfig};
use dvr_core::synth::{self, SynthConfig};
use dvr_core::wtg::{annotate_dataset, OnlineWtg};
use dvr_core::{Error, ErrorKind, Result};

#[derive(Parser, Debug)]
#[command(name = "dvr", version, about = "Duration-debiased watch-time experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// Seed for data generation, training and baselines [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Duration bin width in seconds [default: 1]
    #[arg(long, global = true)]
    bin_width: Option<f64>,
    /// Cut-off for top-k metrics [default: 10]
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Watch time (seconds) below which a recommendation is a bad case [default: 2]
    #[arg(long, global = true)]
    bc_threshold: Option<f64>,
    /// Weight of the adversarial duration loss [default: 0.1]
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Records the bin statistics are fitted on [default: train]
    #[arg(long, global = true, value_enum)]
    stats_scope: Option<ScopeArg>,
    /// Shortest kept duration in seconds [default: 5]
    #[arg(long, global = true)]
    min_duration: Option<f64>,
    /// Longest kept duration in seconds [default: 60]
    #[arg(long, global = true)]
    max_duration: Option<f64>,
    /// Bins with fewer records are under-populated [default: 30]
    #[arg(long, global = true)]
    min_bin_count: Option<u64>,
    /// Increase log verbosity
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl GlobalArgs {
    fn binner(&self) -> Result<DurationBinner> {
        DurationBinner::new(
            self.min_duration.unwrap_or(DurationRange::WECHAT.min),
            self.max_duration.unwrap_or(DurationRange::WECHAT.max),
            self.bin_width.unwrap_or(1.0),
        )
    }

    fn min_bin_count(&self) -> u64 {
        self.min_bin_count.unwrap_or(DEFAULT_MIN_BIN_COUNT)
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.bin_width {
            cfg.bin_width = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.bc_threshold {
            cfg.bc_threshold = v;
        }
        if let Some(v) = self.alpha {
            cfg.train.alpha = v;
        }
        if let Some(v) = self.stats_scope {
            cfg.stats_scope = v.into();
        }
        if let Some(v) = self.min_duration {
            cfg.duration_range.min = v;
        }
        if let Some(v) = self.max_duration {
            cfg.duration_range.max = v;
        }
        if let Some(v) = self.min_bin_count {
            cfg.min_bin_count = v;
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ScopeArg {
    Train,
    All,
}

impl From<ScopeArg> for StatsScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Train => StatsScope::Train,
            ScopeArg::All => StatsScope::All,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModelArg {
    Fm,
    Mlp,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Fm => ModelKind::Fm,
            ModelArg::Mlp => ModelKind::Mlp,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ScoreArg {
    Direct,
    /// Rank by the WTG of the predicted watch time (DVR-)
    WtgOfPrediction,
}

impl From<ScoreArg> for ScoreMode {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Direct => ScoreMode::Direct,
            ScoreArg::WtgOfPrediction => ScoreMode::WtgOfPrediction,
        }
    }
}

/// Column mapping for delimited interaction logs.
#[derive(Args, Debug, Clone)]
struct FormatArgs {
    /// Field delimiter (`tab` for tab-separated)
    #[arg(long, default_value = ",")]
    delimiter: String,
    #[arg(long, default_value = "user")]
    col_user: String,
    #[arg(long, default_value = "video")]
    col_video: String,
    #[arg(long, default_value = "watch_time")]
    col_wt: String,
    #[arg(long, default_value = "duration")]
    col_dur: String,
    /// Timestamp column; `none` uses row order
    #[arg(long, default_value = "timestamp")]
    col_ts: String,
    /// Producer column; `none` disables producer metrics
    #[arg(long, default_value = "producer")]
    col_producer: String,
    /// Skip malformed rows instead of failing
    #[arg(long)]
    lenient: bool,
    /// Clamp watch time to the video duration
    #[arg(long)]
    clip_watch_time: bool,
}

impl FormatArgs {
    fn to_config(&self) -> Result<FormatConfig> {
        let delimiter = match self.delimiter.as_str() {
            "tab" | "\\t" => b'\t',
            d if d.len() == 1 => d.as_bytes()[0],
            d => return Err(Error::Config(format!("delimiter must be one byte, got `{d}`"))),
        };
        let optional = |s: &str| (s != "none").then(|| s.to_string());
        Ok(FormatConfig {
            delimiter,
            user: self.col_user.clone(),
            video: self.col_video.clone(),
            watch_time: self.col_wt.clone(),
            duration: self.col_dur.clone(),
            timestamp: optional(&self.col_ts),
            producer: optional(&self.col_producer),
            strict: !self.lenient,
            clip_watch_time: self.clip_watch_time,
        })
    }
}

#[derive(Args, Debug, Clone)]
struct SynthArgs {
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    videos: Option<usize>,
    #[arg(long)]
    producers: Option<usize>,
    #[arg(long)]
    per_user: Option<usize>,
    #[arg(long)]
    latent_std: Option<f64>,
}

impl SynthArgs {
    fn apply(&self, cfg: &mut SynthConfig) {
        if let Some(v) = self.users {
            cfg.n_users = v;
        }
        if let Some(v) = self.videos {
            cfg.n_videos = v;
        }
        if let Some(v) = self.producers {
            cfg.n_producers = v;
        }
        if let Some(v) = self.per_user {
            cfg.interactions_per_user = v;
        }
        if let Some(v) = self.latent_std {
            cfg.latent_std = v;
        }
    }
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// `none`, `full`, or flags joined by `+` (dd, wtg, adv)
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, value_enum)]
    score_mode: Option<ScoreArg>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    /// Comma-separated MLP hidden sizes
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
}

impl TrainArgs {
    fn apply_train(&self, t: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            t.max_epochs = v;
        }
        if let Some(v) = self.lr {
            t.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.patience {
            t.patience = v;
        }
        if let Some(v) = self.embedding_dim {
            t.embedding_dim = v;
        }
        if let Some(v) = &self.hidden {
            t.hidden = v.clone();
        }
    }

    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(m) = self.model {
            cfg.model = m.into();
        }
        if let Some(s) = &self.strategy {
            cfg.strategy = s.parse()?;
        }
        if let Some(s) = self.score_mode {
            cfg.score_mode = s.into();
        }
        self.apply_train(&mut cfg.train);
        Ok(())
    }
}

/// Where a pipeline run takes its data and base configuration from.
#[derive(Args, Debug, Clone)]
struct ExperimentArgs {
    /// Base configuration (TOML); flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generate synthetic data (the default when no input is given)
    #[arg(long, conflicts_with = "input")]
    synth: bool,
    /// Interaction log to run on
    #[arg(long)]
    input: Option<PathBuf>,
    /// Keep records from under-populated bins
    #[arg(long)]
    include_underpopulated: bool,
    /// Skip the LongRec, RandomRec and oracle rankers
    #[arg(long)]
    no_baselines: bool,
    #[command(flatten)]
    format: FormatArgs,
    #[command(flatten)]
    synth_args: SynthArgs,
    #[command(flatten)]
    train: TrainArgs,
}

impl ExperimentArgs {
    fn build(&self, global: &GlobalArgs) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.input {
            cfg.data = DataSource::File {
                path: path.clone(),
                format: self.format.to_config()?,
            };
        } else if self.synth {
            cfg.data = DataSource::Synth(SynthConfig::default());
        }
        if let DataSource::Synth(s) = &mut cfg.data {
            self.synth_args.apply(s);
        }
        if self.include_underpopulated {
            cfg.include_underpopulated = true;
        }
        if self.no_baselines {
            cfg.baselines = false;
        }
        global.apply(&mut cfg);
        self.train.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthetic interaction logs
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Parse, filter by duration and optionally split a raw log
    Ingest {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write train.csv, val.csv and test.csv into this directory
        #[arg(long)]
        split_dir: Option<PathBuf>,
        /// Train, validation and test fractions
        #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.1, 0.1])]
        split: Vec<f64>,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Duration-bin statistics
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Watch Time Gain labels
    #[command(subcommand)]
    Wtg(WtgCommand),
    /// Train a model on annotated or raw train/validation logs
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        include_underpopulated: bool,
        #[command(flatten)]
        format: FormatArgs,
        #[command(flatten)]
        args: TrainArgs,
    },
    /// Rank each test user's candidates with a trained model
    Rank {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        include_underpopulated: bool,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Evaluate a trained model and the baselines on test users
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        /// Log used to split producers into long and short groups
        #[arg(long)]
        groups_from: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        include_underpopulated: bool,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Print the metrics of a completed run
    Report { run_dir: PathBuf },
    /// Run the whole pipeline into an output directory
    Run {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Run the full strategy at several alpha values
    SweepAlpha {
        /// Comma-separated alpha values
        #[arg(value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])]
        alphas: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Add the strategies one by one: none, +dd, +wtg, +adv
    Ablate {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Compare completed runs against the first one
    Compare {
        #[arg(num_args = 2.., required = true)]
        runs: Vec<PathBuf>,
        /// Emit comma-separated rows instead of an aligned table
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Generate a log with latent ground truth
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// Also write the latent ground truth (JSON)
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        synth: SynthArgs,
    },
}

#[derive(Subcommand, Debug)]
enum StatsCommand {
    /// Fit statistics over a log in one pass
    Fit {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Fold a log into statistics record by record
    Stream {
        input: PathBuf,
        /// Snapshot to continue from
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Fail on out-of-range durations instead of skipping them
        #[arg(long)]
        strict_range: bool,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Combine two snapshots
    Merge {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-bin statistics as CSV
    Show { snapshot: PathBuf },
}

#[derive(Subcommand, Debug)]
enum WtgCommand {
    /// Label every record with its WTG under fitted statistics
    Annotate {
        input: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Score records online, each with the statistics seen before it
    Stream {
        input: PathBuf,
        /// Snapshot to start from; empty statistics otherwise
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write the final statistics here
        #[arg(long)]
        save_stats: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArgs,
    },
}

fn read_log(path: &Path, format: &FormatArgs) -> Result<Dataset> {
    let (ds, report) = ingest::read_dataset(path, &format.to_config()?)?;
    info!("{}: {} rows, {} accepted", path.display(), report.rows, report.accepted);
    for issue in report.rejected.iter().take(10) {
        log::warn!("row {}: {}", issue.row, issue.message);
    }
    Ok(ds)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn print_run(report: &RunReport) {
    println!(
        "strategy {} (target {}), {} epochs, best epoch {}",
        report.strategy, report.target, report.training.epochs_run, report.training.best_epoch
    );
    print_models(&report.eval);
}

fn print_models(eval: &EvalReport) {
    let k = eval.k;
    println!(
        "{:<12} {:>10} {:>10} {:>8} {:>12} {:>10}",
        "ranker",
        format!("WTG@{k}"),
        format!("DCWTG@{k}"),
        format!("#BC@{k}"),
        format!("WatchTime@{k}"),
        "long share"
    );
    for (name, m) in &eval.models {
        let share = m.traffic_long.map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<12} {:>10.4} {:>10.4} {:>8} {:>12.2} {:>10}",
            name, m.wtg_at_k, m.dcwtg_at_k, m.bc_at_k, m.watch_time_at_k, share
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Synth(SynthCommand::Generate { out, truth, synth: args }) => {
            let mut cfg = SynthConfig::default();
            args.apply(&mut cfg);
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            let (ds, gt) = synth::generate(&cfg)?;
            ingest::write_dataset_file(&ds, &out)?;
            if let Some(path) = truth {
                gt.save(&path)?;
            }
            println!("wrote {} records to {}", ds.len(), out.display());
        }
        Command::Ingest {
            input,
            out,
            split_dir,
            split,
            format,
        } => {
            let ds = read_log(&input, &format)?;
            let binner = g.binner()?;
            let (kept, report) =
                ingest::filter_duration_range(&ds, binner.min_duration(), binner.max_duration())?;
            println!(
                "kept {} records, removed {} ({:.2}%)",
                report.kept,
                report.removed,
                100.0 * report.fraction_removed()
            );
            ingest::write_dataset_file(&kept, &out)?;
            if let Some(dir) = split_dir {
                let [tr, va, te] = split[..] else {
                    return Err(Error::Config("--split needs three fractions".into()));
                };
                let (train, val, test) = ingest::split_by_time(&kept, (tr, va, te))?;
                fs::create_dir_all(&dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
                for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
                    ingest::write_dataset_file(part, &dir.join(format!("{name}.csv")))?;
                }
                println!("split {} / {} / {}", train.len(), val.len(), test.len());
            }
        }
        Command::Stats(cmd) => stats_command(g, cmd)?,
        Command::Wtg(cmd) => wtg_command(g, cmd)?,
        Command::Train {
            train,
            val,
            stats,
            out,
            include_underpopulated,
            format,
            args,
        } => {
            let stats = BinStatistics::load(&stats)?;
            let train = annotate_dataset(&read_log(&train, &format)?, &stats)?;
            let val = annotate_dataset(&read_log(&val, &format)?, &stats)?;
            let mut cfg = ExperimentConfig::default();
            global_train(g, &mut cfg);
            args.apply(&mut cfg)?;
            let opts = FitOptions {
                model: cfg.model,
                strategy: cfg.strategy,
                score_mode: cfg.score_mode,
                include_invalid: include_underpopulated,
                train: cfg.train,
            };
            let (ckpt, history) = experiment::fit_model(&train, &val, &opts)?;
            ckpt.save(&out)?;
            println!(
                "trained {} epochs, best epoch {} (validation loss {:.6})",
                history.epochs.len() - 1,
                history.best_epoch,
                history.best_val()
            );
        }
        Command::Rank {
            model,
            test,
            stats,
            out,
            include_underpopulated,
            format,
        } => {
            let ckpt = Checkpoint::load(&model)?;
            let stats = BinStatistics::load(&stats)?;
            let test = annotate_dataset(&read_log(&test, &format)?, &stats)?;
            let candidates = experiment::user_candidates(&test, include_underpopulated);
            let opts = RankOptions {
                stats: &stats,
                baselines: false,
                seed: g.seed.unwrap_or(0),
                truth: None,
            };
            let lists = experiment::rank_all(&ckpt, &candidates, &opts)?;
            let mut text = String::from("user,rank,video,score,watch_time,wtg,duration\n");
            for list in lists.get("model").into_iter().flatten() {
                for (i, it) in list.items().iter().enumerate() {
                    text.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        list.user_id,
                        i + 1,
                        it.video_id,
                        it.score,
                        it.watch_time,
                        it.wtg,
                        it.duration
                    ));
                }
            }
            write_text(&out, &text)?;
            println!("ranked {} users", candidates.len());
        }
        Command::Eval {
            model,
            test,
            stats,
            groups_from,
            out,
            include_underpopulated,
            format,
        } => {
            let ckpt = Checkpoint::load(&model)?;
            let stats = BinStatistics::load(&stats)?;
            let test_ds = read_log(&test, &format)?;
            let test = annotate_dataset(&test_ds, &stats)?;
            let group_source = match groups_from {
                Some(p) => Some(read_log(&p, &format)?),
                None => test_ds.has_producers().then(|| test_ds.clone()),
            };
            let groups = group_source.as_ref().map(producer_groups).transpose()?;
            let opts = EvalOptions {
                k: g.k.unwrap_or(10),
                bc_threshold: g.bc_threshold.unwrap_or(2.0),
                include_invalid: include_underpopulated,
                rank: RankOptions {
                    stats: &stats,
                    baselines: true,
                    seed: g.seed.unwrap_or(0),
                    truth: None,
                },
                groups: groups.as_ref(),
            };
            let (models, _) = experiment::evaluate_checkpoint(&ckpt, &test, &opts)?;
            let report = EvalReport {
                k: opts.k,
                bc_threshold: opts.bc_threshold,
                stats_scope: "external".into(),
                dataset_fingerprint: String::new(),
                test_records: test.len(),
                cold_test_users: 0,
                models,
            };
            write_text(&out, &report.to_toml()?)?;
            print_models(&report);
        }
        Command::Report { run_dir } => {
            let report = RunReport::load(&run_dir)?;
            print_run(&report);
        }
        Command::Run { out, exp } => {
            let cfg = exp.build(g)?;
            let report = experiment::cmd_pipeline(&cfg, &out)?;
            print_run(&report);
            println!("wrote {}", out.display());
        }
        Command::SweepAlpha { alphas, out, exp } => {
            let cfg = exp.build(g)?;
            let rows = experiment::sweep_alpha(&cfg, &alphas, &out)?;
            let k = cfg.k;
            println!("{:>8} {:>10} {:>10} {:>8}", "alpha", format!("WTG@{k}"), format!("DCWTG@{k}"), format!("#BC@{k}"));
            for r in rows {
                println!("{:>8} {:>10.4} {:>10.4} {:>8}", r.alpha, r.wtg_at_k, r.dcwtg_at_k, r.bc_at_k);
            }
        }
        Command::Ablate { out, exp } => {
            let cfg = exp.build(g)?;
            let rows = experiment::ablate(&cfg, &out)?;
            let k = cfg.k;
            println!("{:<12} {:>10} {:>10} {:>8}", "strategy", format!("WTG@{k}"), format!("DCWTG@{k}"), format!("#BC@{k}"));
            for r in rows {
                println!("{:<12} {:>10.4} {:>10.4} {:>8}", r.strategy, r.wtg_at_k, r.dcwtg_at_k, r.bc_at_k);
            }
        }
        Command::Compare { runs, csv } => {
            let cmp = experiment::cmd_compare(&runs)?;
            if csv {
                print!("{}", cmp.to_csv());
            } else {
                print!("{}", cmp.to_text());
            }
        }
    }
    Ok(())
}

fn global_train(g: &GlobalArgs, cfg: &mut ExperimentConfig) {
    if let Some(s) = g.seed {
        cfg.train.seed = s;
    }
    if let Some(a) = g.alpha {
        cfg.train.alpha = a;
    }
}

fn stats_command(g: &GlobalArgs, cmd: StatsCommand) -> Result<()> {
    match cmd {
        StatsCommand::Fit { input, out, format } => {
            let ds = read_log(&input, &format)?;
            let binner = g.binner()?;
            let (kept, _) = ingest::filter_duration_range(&ds, binner.min_duration(), binner.max_duration())?;
            let stats = BinStatistics::fit_batch(binner, kept.records(), g.min_bin_count())?;
            stats.save(&out)?;
            println!(
                "fitted {} bins from {} records ({} under-populated)",
                binner.bins(),
                stats.total_count(),
                stats.underpopulated_bins().len()
            );
        }
        StatsCommand::Stream {
            input,
            from,
            out,
            strict_range,
            format,
        } => {
            let ds = read_log(&input, &format)?;
            let mut stats = match from {
                Some(p) => BinStatistics::load(&p)?,
                None => BinStatistics::empty(g.binner()?, g.min_bin_count()),
            };
            let policy = if strict_range {
                OutOfRangePolicy::Error
            } else {
                OutOfRangePolicy::Skip
            };
            for r in ds.records() {
                stats.stream_update(r.watch_time, r.duration, policy)?;
            }
            stats.save(&out)?;
            println!("{} records folded in, {} skipped", stats.total_count(), stats.skipped());
        }
        StatsCommand::Merge { a, b, out } => {
            let merged = BinStatistics::load(&a)?.merge(&BinStatistics::load(&b)?)?;
            merged.save(&out)?;
            println!("merged statistics cover {} records", merged.total_count());
        }
        StatsCommand::Show { snapshot } => {
            let stats = BinStatistics::load(&snapshot)?;
            let b = stats.binner();
            let stdout = io::stdout();
            let mut w = stdout.lock();
            let _ = writeln!(w, "bin,start,end,count,mean,std,underpopulated");
            for i in 0..b.bins() {
                let _ = writeln!(
                    w,
                    "{i},{},{},{},{},{},{}",
                    b.bin_start(i),
                    b.bin_end(i),
                    stats.count(i),
                    stats.mean(i),
                    stats.std_dev(i),
                    stats.is_underpopulated(i)
                );
            }
        }
    }
    Ok(())
}

fn wtg_command(g: &GlobalArgs, cmd: WtgCommand) -> Result<()> {
    match cmd {
        WtgCommand::Annotate {
            input,
            stats,
            out,
            format,
        } => {
            let stats = BinStatistics::load(&stats)?;
            let ds = read_log(&input, &format)?;
            let annotated = annotate_dataset(&ds, &stats)?;
            annotated.write_file(&out)?;
            println!("annotated {} records, {} without a valid label", annotated.len(), annotated.invalid);
        }
        WtgCommand::Stream {
            input,
            from,
            out,
            save_stats,
            format,
        } => {
            let ds = read_log(&input, &format)?;
            let stats = match from {
                Some(p) => BinStatistics::load(&p)?,
                None => BinStatistics::empty(g.binner()?, g.min_bin_count()),
            };
            let mut online = OnlineWtg::new(stats);
            let mut text = String::from("user,video,watch_time,duration,wtg,wtg_valid\n");
            for (r, l) in online.pipeline(ds.into_records()) {
                text.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.user_id, r.video_id, r.watch_time, r.duration, l.value, l.valid
                ));
            }
            write_text(&out, &text)?;
            if let Some(p) = save_stats {
                online.stats().save(&p)?;
            }
            println!("scored {} events, {} out of range", online.stats().total_count(), online.skipped());
        }
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
