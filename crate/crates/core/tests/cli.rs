//! Behaviour of the `soccer-summary` binary: staged runs, exit codes and
//! configuration handling.

use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "synth.matches = 9\nsynth.events_per_match = 600\neval.folds = 3\neval.run_folds = 1\n\
                     mil.epochs = 4\nhma.epochs = 4\nsampling.k = 4\n";

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soccer-summary"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn bin_env(dir: &Path, args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soccer-summary"))
        .current_dir(dir)
        .env(key, value)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn staged_commands_match_the_e2e_tables() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    for stage in [
        "gen-data",
        "extract-features",
        "train-proposals",
        "score-events",
        "extract-proposals",
        "train-hma",
        "summarize",
        "evaluate",
    ] {
        let o = bin(dir.path(), &["--config", "small.cfg", "--out-dir", "staged", stage]);
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", stderr(&o));
    }
    let o = bin(dir.path(), &["--config", "small.cfg", "--out-dir", "whole", "e2e"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let tables = |run: &str| {
        let mut files: Vec<_> = std::fs::read_dir(dir.path().join(run).join("tables"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files.iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>()
    };
    let staged = tables("staged");
    assert!(!staged.is_empty());
    assert_eq!(staged, tables("whole"));
}

#[test]
fn missing_artifacts_name_their_producer() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    let run = |cmd: &str| bin(dir.path(), &["--config", "small.cfg", "--out-dir", "run", cmd]);
    let expect_missing = |cmd: &str, producer: &str| {
        let o = run(cmd);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        let err = stderr(&o);
        assert!(err.contains("missing artifact"), "{cmd}: {err}");
        assert!(err.contains(&format!("run `{producer}` first")), "{cmd}: {err}");
    };
    expect_missing("summarize", "gen-data");
    assert_eq!(run("gen-data").status.code(), Some(0));
    expect_missing("train-proposals", "extract-features");
    assert_eq!(run("extract-features").status.code(), Some(0));
    expect_missing("score-events", "train-proposals");
    expect_missing("evaluate", "extract-proposals");
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(dir.path(), &[]).status.code(), Some(1));
    assert_eq!(bin(dir.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(bin(dir.path(), &["--jobs", "0", "show-config"]).status.code(), Some(1));

    std::fs::write(dir.path().join("bad.cfg"), "bogus.key = 1\n").unwrap();
    let o = bin(dir.path(), &["--config", "bad.cfg", "show-config"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus.key"));

    let o = bin(dir.path(), &["--config", "absent.cfg", "show-config"]);
    assert_eq!(o.status.code(), Some(1));

    let o = bin_env(dir.path(), &["show-config"], "SOCCER_SUMMARY_MIL__EPOCHS", "many");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn show_config_reflects_files_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("base.cfg"), "mil.epochs = 5\n").unwrap();
    std::fs::write(dir.path().join("top.cfg"), "include base.cfg\nsampling.k = 7\n").unwrap();

    let o = bin(dir.path(), &["--config", "top.cfg", "show-config"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# config_hash="));
    assert!(text.lines().any(|l| l == "mil.epochs = 5"));
    assert!(text.lines().any(|l| l == "sampling.k = 7"));

    let o = bin_env(dir.path(), &["--config", "top.cfg", "show-config"], "SOCCER_SUMMARY_MIL__EPOCHS", "9");
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l == "mil.epochs = 9"));
}
