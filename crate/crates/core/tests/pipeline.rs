use std::fs;

use dvr_core::experiment::{
    cmd_compare, cmd_pipeline, sweep_alpha, DataSource, ExperimentConfig, RunReport, Strategy,
};
use dvr_core::ingest::FormatConfig;
use dvr_core::models::Checkpoint;
use dvr_core::synth::SynthConfig;
use dvr_core::{Error, ErrorKind};

fn small(strategy: Strategy) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::synthetic(3, strategy);
    cfg.data = DataSource::Synth(SynthConfig {
        n_users: 60,
        n_videos: 300,
        n_producers: 20,
        interactions_per_user: 60,
        ..SynthConfig::default()
    });
    cfg.train.max_epochs = 3;
    cfg
}

#[test]
fn run_directory_contents() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let report = cmd_pipeline(&small(Strategy::FULL), &out).unwrap();
    for f in ["report.toml", "curves.csv", "model.json", "stats.bin", "history.csv", "watch_time_per_user.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let text = fs::read_to_string(out.join("report.toml")).unwrap();
    assert!(text.starts_with("# generated_at_unix = "));
    let back = RunReport::load(&out).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.config.seed, 3);
    let ckpt = Checkpoint::load(&out.join("model.json")).unwrap();
    assert!(!ckpt.space.include_duration());
    assert!(ckpt.model.psi.is_some());
    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 56);
}

#[test]
fn failed_stage_is_named_and_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    fs::write(&log, "user,video,watch_time,duration\nu1,v1,3.0,200\nu2,v2,4.0,300\n").unwrap();
    let mut cfg = small(Strategy::FULL);
    cfg.data = DataSource::File {
        path: log,
        format: FormatConfig::default(),
    };
    let out = dir.path().join("run");
    let err = cmd_pipeline(&cfg, &out).unwrap_err();
    assert!(matches!(err, Error::Stage { stage, .. } if stage == "split"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Data);
    assert!(!out.exists());
    assert!(!dir.path().join("run.partial").exists());
}

#[test]
fn missing_mandatory_column_is_a_config_error_in_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    fs::write(&log, "user,video,duration\nu1,v1,20\n").unwrap();
    let mut cfg = small(Strategy::NONE);
    cfg.data = DataSource::File {
        path: log,
        format: FormatConfig::default(),
    };
    let err = cmd_pipeline(&cfg, &dir.path().join("run")).unwrap_err();
    assert!(err.to_string().starts_with("ingest:"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Config);
}

#[test]
fn compare_with_itself_and_with_missing_runs() {
    let dir = tempfile::tempdir().unwrap();
    let none = dir.path().join("none");
    let full = dir.path().join("full");
    cmd_pipeline(&small(Strategy::NONE), &none).unwrap();
    cmd_pipeline(&small(Strategy::FULL), &full).unwrap();

    let same = cmd_compare(&[full.clone(), full.clone()]).unwrap();
    for r in &same.rows {
        assert_eq!((r.wtg_delta_pct, r.dcwtg_delta_pct, r.bc_delta_pct), (0.0, 0.0, 0.0));
    }
    let cmp = cmd_compare(&[none.clone(), full.clone()]).unwrap();
    assert_eq!(cmp.rows.len(), 2);
    assert!(cmp.to_text().contains("WTG@10"));
    assert_eq!(cmp.to_csv().lines().count(), 3);

    let missing = dir.path().join("nowhere");
    let err = cmd_compare(&[none.clone(), missing.clone()]).unwrap_err();
    assert!(err.to_string().contains(&*missing.to_string_lossy()), "{err}");

    let mut other = small(Strategy::FULL);
    other.k = 5;
    let k5 = dir.path().join("k5");
    cmd_pipeline(&other, &k5).unwrap();
    assert!(cmd_compare(&[full.clone(), k5]).is_err());

    let mut other_data = small(Strategy::FULL);
    other_data.seed = 4;
    let seed4 = dir.path().join("seed4");
    cmd_pipeline(&other_data, &seed4).unwrap();
    assert!(cmd_compare(&[full, seed4]).is_err());
}

#[test]
fn alpha_sweep_writes_one_row_per_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let alphas = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
    let rows = sweep_alpha(&small(Strategy::FULL), &alphas, &out).unwrap();
    assert_eq!(rows.iter().map(|r| r.alpha).collect::<Vec<_>>(), alphas);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), alphas.len() + 1);
    assert!(out.join("alpha_0.3").join("report.toml").is_file());
    assert!(sweep_alpha(&small(Strategy::FULL), &[-1.0], &dir.path().join("bad")).is_err());
}

#[test]
fn config_file_round_trip_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Strategy::FULL);
    let a = cmd_pipeline(&cfg, &dir.path().join("a")).unwrap();
    let text = toml::to_string(&a.config).unwrap();
    let reloaded = ExperimentConfig::from_toml(&text).unwrap();
    let b = cmd_pipeline(&reloaded, &dir.path().join("b")).unwrap();
    assert_eq!(a, b);
}
