//! Exit codes and run-directory layout of the `lada` binary.

use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[data]
train_size = 60
test_size = 20

[model]
d_model = 16
trunk_layers = 1
attention_heads = 2

[train]
epochs = 1
"#;

fn lada(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lada"))
        .args(args)
        .output()
        .expect("spawn lada")
}

fn code(args: &[&str]) -> i32 {
    lada(args).status.code().unwrap()
}

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn unknown_flag_is_a_validation_error_with_usage() {
    let out = lada(&["train", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_and_missing_required_flag_exit_1() {
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["eval"]), 1);
    assert_eq!(code(&[]), 1);
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["bench", "--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
}

#[test]
fn bad_config_and_missing_files_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[train]\nno_such_key = 1\n").unwrap();
    let run = tmp.path().join("run");
    let run = run.to_str().unwrap();
    assert_eq!(
        code(&[
            "gen-data",
            "--config",
            bad.to_str().unwrap(),
            "--run-dir",
            run
        ]),
        1
    );
    assert_eq!(
        code(&[
            "gen-data",
            "--config",
            "/nonexistent/x.toml",
            "--run-dir",
            run
        ]),
        1
    );
    assert_eq!(
        code(&[
            "eval",
            "--checkpoint",
            "/nonexistent/ckpt",
            "--run-dir",
            run
        ]),
        1
    );
    let config = tiny_config(tmp.path());
    assert_eq!(
        code(&["train", "--config", &config, "--run-dir", run, "--lr", "-1"]),
        1
    );
}

#[test]
fn failed_gradient_check_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("gc");
    let args = [
        "gradcheck",
        "--run-dir",
        run.to_str().unwrap(),
        "--per-param",
        "1",
        "--tolerance",
        "1e-30",
    ];
    assert_eq!(code(&args), 2);
    let report = std::fs::read_to_string(run.join("report.csv")).unwrap();
    assert!(report.trim_end().ends_with("false"));
}

#[test]
fn train_writes_the_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tiny_config(tmp.path());
    let run = tmp.path().join("train");
    let out = lada(&[
        "train",
        "--config",
        &config,
        "--run-dir",
        run.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "config.resolved",
        "history.csv",
        "report.csv",
        "report.md",
        "checkpoints/final",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let resolved = std::fs::read_to_string(run.join("config.resolved")).unwrap();
    assert!(resolved.contains("seed = 11"));
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2);
    assert!(history.starts_with("epoch,steps,slu_loss,action_loss,total_loss\n"));

    let ckpt = run.join("checkpoints/final");
    let eval = tmp.path().join("eval");
    let args = [
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--run-dir",
        eval.to_str().unwrap(),
    ];
    assert_eq!(code(&args), 0);
    let report = std::fs::read_to_string(eval.join("report.csv")).unwrap();
    assert!(report.starts_with("split,alpha,mode,"));
    assert!(eval.join("checkpoints").is_dir());
}

#[test]
fn gen_data_reports_every_split() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tiny_config(tmp.path());
    let run = tmp.path().join("data");
    let args = [
        "gen-data",
        "--config",
        &config,
        "--run-dir",
        run.to_str().unwrap(),
        "--format",
        "conll",
    ];
    assert_eq!(code(&args), 0);
    for f in ["train.conll", "source_test.conll", "target_test.conll"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let report = std::fs::read_to_string(run.join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows[0], "split,utterances,tokens,spans,intents");
    assert!(rows[1].starts_with("train,60,"));
    assert!(rows[3].starts_with("target_test,20,"));
}
