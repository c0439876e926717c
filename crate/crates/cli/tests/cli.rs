use std::path::Path;
use std::process::{Command, Output};

fn dvr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dvr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: [&str; 8] = ["--users", "40", "--videos", "200", "--per-user", "50", "--epochs", "2"];

fn run_args<'a>(out: &'a str, strategy: &'a str) -> Vec<&'a str> {
    let mut args = vec!["run", "--synth", "--strategy", strategy, "--out", out];
    args.extend(SMALL);
    args
}

#[test]
fn exit_codes_distinguish_error_families() {
    let dir = tempfile::tempdir().unwrap();
    let bad_flags = dvr(&run_args("x", "dd+adv"), dir.path());
    assert_eq!(bad_flags.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_flags.stderr).contains("requires the WTG target"));
    assert!(!dir.path().join("x").exists());

    let missing = dvr(&["compare", "nope1", "nope2"], dir.path());
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope1"));

    let mut blow_up = run_args("boom", "none");
    blow_up.extend(["--lr", "1e200"]);
    let out = dvr(&blow_up, dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.path().join("boom").exists());

    assert_eq!(dvr(&["run", "--bogus"], dir.path()).status.code(), Some(2));
}

#[test]
fn run_report_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let none = dvr(&run_args("none", "none"), dir.path());
    assert!(none.status.success(), "{}", String::from_utf8_lossy(&none.stderr));
    let full = dvr(&run_args("full", "full"), dir.path());
    assert!(full.status.success());
    assert!(stdout(&full).contains("DCWTG@10"));

    let report = dvr(&["report", "full"], dir.path());
    assert!(report.status.success());
    assert!(stdout(&report).contains("dd+wtg+adv"));

    let cmp = dvr(&["compare", "full", "full"], dir.path());
    assert!(cmp.status.success());
    assert!(stdout(&cmp).contains("+0.00"));
    let csv = dvr(&["compare", "--csv", "none", "full"], dir.path());
    assert_eq!(stdout(&csv).lines().count(), 3);
}

#[test]
fn step_by_step_commands() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let ok = |args: &[&str]| {
        let o = dvr(args, p);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    ok(&["synth", "generate", "--out", "logs.csv", "--users", "60", "--per-user", "60", "--truth", "truth.json"]);
    ok(&["ingest", "logs.csv", "--out", "clean.csv", "--split-dir", "split"]);
    ok(&["stats", "fit", "split/train.csv", "--out", "a.bin"]);
    ok(&["stats", "stream", "split/train.csv", "--out", "b.bin"]);
    ok(&["stats", "merge", "a.bin", "b.bin", "--out", "c.bin"]);
    let shown = ok(&["stats", "show", "a.bin"]);
    assert_eq!(shown.lines().count(), 56);
    ok(&["wtg", "annotate", "split/train.csv", "--stats", "a.bin", "--out", "ann.csv"]);
    ok(&["wtg", "stream", "split/train.csv", "--out", "online.csv"]);
    ok(&["train", "--train", "split/train.csv", "--val", "split/val.csv", "--stats", "a.bin", "--out", "m.json", "--strategy", "dd+wtg", "--epochs", "2"]);
    ok(&["rank", "--model", "m.json", "--test", "split/test.csv", "--stats", "a.bin", "--out", "ranked.csv"]);
    let eval = ok(&["eval", "--model", "m.json", "--test", "split/test.csv", "--stats", "a.bin", "--groups-from", "clean.csv", "--out", "eval.toml"]);
    assert!(eval.contains("random_rec"));
    assert!(p.join("eval.toml").is_file());
}

#[test]
fn sweep_and_ablation() {
    let dir = tempfile::tempdir().unwrap();
    let mut sweep = vec!["sweep-alpha", "0,0.25,0.5", "--out", "sweep"];
    sweep.extend(SMALL);
    let o = dvr(&sweep, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 4);

    let mut ablate = vec!["ablate", "--out", "abl"];
    ablate.extend(SMALL);
    let o = dvr(&ablate, dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("abl/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}
