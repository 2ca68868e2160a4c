//! Integration tests for the `conqa` binary: subcommand workflows, exit
//! codes, and output determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conqa::data::{Example, Origin, TaskFormat, WIQA_CANDIDATES};
use conqa::model::{save_checkpoint, Parameters};

fn conqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conqa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn gen_toy(dir: &Path, prefix: &str, size: usize, dev: usize, seed: u64) -> (PathBuf, PathBuf) {
    let out = dir.join(prefix);
    let output = conqa(&[
        "gen-toy",
        "--out",
        path_str(&out),
        "--size",
        &size.to_string(),
        "--dev-size",
        &dev.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    (
        dir.join(format!("{prefix}.train.jsonl")),
        dir.join(format!("{prefix}.dev.jsonl")),
    )
}

#[test]
fn help_lists_all_subcommands() {
    let output = conqa(&["--help"]);
    assert!(output.status.success());
    let text = stdout(&output);
    for subcommand in ["augment", "train", "eval", "audit", "gen-toy"] {
        assert!(text.contains(subcommand), "missing {subcommand}");
    }
    for subcommand in ["augment", "train", "eval", "audit", "gen-toy"] {
        let output = conqa(&[subcommand, "--help"]);
        assert!(output.status.success(), "{subcommand} --help failed");
        assert!(stdout(&output).contains("--config"));
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let output = conqa(&["augment", "--bogus-flag", "1"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let output = conqa(&[]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn gen_toy_and_augment_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (train_a, _) = gen_toy(dir.path(), "a", 200, 50, 13);
    let (train_b, _) = gen_toy(dir.path(), "b", 200, 50, 13);
    assert_eq!(
        std::fs::read_to_string(&train_a).unwrap(),
        std::fs::read_to_string(&train_b).unwrap()
    );

    let aug_a = dir.path().join("aug_a.jsonl");
    let aug_b = dir.path().join("aug_b.jsonl");
    for (train, aug) in [(&train_a, &aug_a), (&train_a, &aug_b)] {
        let output = conqa(&[
            "augment",
            "--train",
            path_str(train),
            "--augmented",
            path_str(aug),
            "--sample-rate",
            "0.5",
            "--seed",
            "13",
        ]);
        assert!(output.status.success(), "{}", stderr(&output));
        let text = stdout(&output);
        for field in ["candidates:", "sampled:", "deduped:", "written:"] {
            assert!(text.contains(field), "missing {field} in output");
        }
    }
    assert_eq!(
        std::fs::read_to_string(&aug_a).unwrap(),
        std::fs::read_to_string(&aug_b).unwrap()
    );
}

#[test]
fn gen_toy_supports_choice_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("choice");
    let output = conqa(&[
        "gen-toy",
        "--out",
        path_str(&out),
        "--size",
        "80",
        "--dev-size",
        "20",
        "--format",
        "choice",
        "--seed",
        "4",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = std::fs::read_to_string(dir.path().join("choice.train.jsonl")).unwrap();
    assert!(text.contains("\"format\":\"choice\""));
}

#[test]
fn full_train_eval_audit_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let (train, dev) = gen_toy(dir.path(), "toy", 300, 80, 7);
    let aug = dir.path().join("aug.jsonl");
    let output = conqa(&[
        "augment",
        "--train",
        path_str(&train),
        "--augmented",
        path_str(&aug),
        "--seed",
        "7",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));

    let checkpoint = dir.path().join("model.json");
    let output = conqa(&[
        "train",
        "--train",
        path_str(&train),
        "--dev",
        path_str(&dev),
        "--augmented",
        path_str(&aug),
        "--checkpoint",
        path_str(&checkpoint),
        "--mode",
        "da_reg",
        "--epochs",
        "6",
        "--dim",
        "1024",
        "--seed",
        "7",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("dev accuracy:"), "got: {text}");
    assert!(text.contains("v_total:"));
    assert!(checkpoint.exists());
    assert!(dir.path().join("model.history.jsonl").exists());

    let output = conqa(&[
        "eval",
        "--checkpoint",
        path_str(&checkpoint),
        "--dev",
        path_str(&dev),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let accuracy = stdout(&output);
    let value: f64 = accuracy.trim().parse().expect("accuracy is a number");
    assert!((0.0..=100.0).contains(&value));

    let report = dir.path().join("report.json");
    let output = conqa(&[
        "audit",
        "--checkpoint",
        path_str(&checkpoint),
        "--dev",
        path_str(&dev),
        "--report",
        path_str(&report),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(stdout(&output).contains("v_total:"));
    let parsed: conqa::audit::AuditReport =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(parsed.n_sym_pairs > 0);
}

#[test]
fn eval_prints_class_zero_rate_for_zero_weights() {
    // A zero-weight model always predicts index 0 (lowest-index tie-break),
    // so accuracy equals the class-0 gold share: 6/10 here.
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("fixture.jsonl");
    let lines: Vec<String> = (0..10)
        .map(|i| {
            let ex = Example {
                id: format!("f{i}"),
                format: TaskFormat::Classification,
                paragraph: "paragraph".into(),
                question: format!("question {i}"),
                candidates: WIQA_CANDIDATES.iter().map(|s| s.to_string()).collect(),
                gold: if i < 6 { 0 } else { 1 },
                cause: None,
                effect: None,
                origin: Origin::Original,
            };
            serde_json::to_string(&ex).unwrap()
        })
        .collect();
    std::fs::write(&dataset, lines.join("\n")).unwrap();

    let checkpoint = dir.path().join("zero.json");
    save_checkpoint(&Parameters::new(64, 3).unwrap(), &checkpoint).unwrap();

    let output = conqa(&[
        "eval",
        "--checkpoint",
        path_str(&checkpoint),
        "--dev",
        path_str(&dataset),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert_eq!(stdout(&output).trim(), "60.0");

    // A fixture whose golds are all index 0 scores perfectly.
    let perfect = dir.path().join("perfect.jsonl");
    let lines: Vec<String> = (0..5)
        .map(|i| {
            let ex = Example {
                id: format!("p{i}"),
                format: TaskFormat::Classification,
                paragraph: "paragraph".into(),
                question: format!("question {i}"),
                candidates: WIQA_CANDIDATES.iter().map(|s| s.to_string()).collect(),
                gold: 0,
                cause: None,
                effect: None,
                origin: Origin::Original,
            };
            serde_json::to_string(&ex).unwrap()
        })
        .collect();
    std::fs::write(&perfect, lines.join("\n")).unwrap();
    let output = conqa(&[
        "eval",
        "--checkpoint",
        path_str(&checkpoint),
        "--dev",
        path_str(&perfect),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert_eq!(stdout(&output).trim(), "100.0");
}

#[test]
fn train_reg_without_links_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let (train, dev) = gen_toy(dir.path(), "toy", 120, 30, 3);
    // Strip the links by copying only the example files elsewhere.
    let bare = dir.path().join("bare.jsonl");
    std::fs::copy(&train, &bare).unwrap();
    let output = conqa(&[
        "train",
        "--train",
        path_str(&bare),
        "--dev",
        path_str(&dev),
        "--checkpoint",
        path_str(&dir.path().join("m.json")),
        "--mode",
        "reg",
        "--epochs",
        "1",
        "--dim",
        "256",
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("links"));
}

#[test]
fn train_da_with_missing_augmented_exits_1_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let (train, dev) = gen_toy(dir.path(), "toy", 120, 30, 3);
    let output = conqa(&[
        "train",
        "--train",
        path_str(&train),
        "--dev",
        path_str(&dev),
        "--checkpoint",
        path_str(&dir.path().join("m.json")),
        "--mode",
        "da",
        "--augmented",
        path_str(&dir.path().join("missing_aug.jsonl")),
        "--epochs",
        "1",
        "--dim",
        "256",
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("missing_aug.jsonl"));
}

#[test]
fn audit_with_both_sources_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dev) = gen_toy(dir.path(), "toy", 120, 30, 3);
    let output = conqa(&[
        "audit",
        "--checkpoint",
        "a.json",
        "--predictions",
        "b.jsonl",
        "--dev",
        path_str(&dev),
        "--report",
        path_str(&dir.path().join("r.json")),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("exactly one"));
}

#[test]
fn config_file_drives_a_run_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = gen_toy(dir.path(), "toy", 150, 30, 9);
    let aug = dir.path().join("aug.jsonl");
    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        format!(
            "# augmentation settings\ntrain = {}\naugmented = {}\nsample_rate = 1.0\nseed = 9\n",
            path_str(&train),
            path_str(&aug),
        ),
    )
    .unwrap();
    let output = conqa(&["augment", "--config", path_str(&config)]);
    assert!(output.status.success(), "{}", stderr(&output));
    let full = std::fs::read_to_string(&aug).unwrap();

    // The flag overrides the file's sample_rate.
    let output = conqa(&[
        "augment",
        "--config",
        path_str(&config),
        "--sample-rate",
        "0.0",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let empty = std::fs::read_to_string(&aug).unwrap();
    assert!(!full.is_empty());
    assert!(empty.is_empty());
}

#[test]
fn config_file_with_unknown_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "no_such_key = 1\n").unwrap();
    let output = conqa(&["augment", "--config", path_str(&config)]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("no_such_key"));
}
