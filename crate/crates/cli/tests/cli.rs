use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const TINY: &str = r#"
output_dir = "run"

[corpus]
n_utterances = 20
n_valid = 2
n_test = 2
min_duration_s = 0.3
max_duration_s = 0.4

[net]
n_blocks = 1
layers_per_block = 4
residual_channels = 8
skip_channels = 8

[train]
learning_rate = 1e-3
segment_len = 400
max_steps = 4
batches_per_epoch = 2

[seeds]
corpus = 3
train = 5
eval = 7
"#;

fn mbg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbg"))
        .args(args)
        .env("MBG_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = mbg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("stderr has an error line");
    serde_json::from_str(last).expect("error line is JSON")
}

fn setup(dir: &Path, text: &str) -> String {
    let cfg = dir.join("exp.toml");
    std::fs::write(&cfg, text).unwrap();
    cfg.to_string_lossy().into_owned()
}

fn read(path: PathBuf) -> Vec<u8> {
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn full_pipeline_emits_every_artifact_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), TINY);
    let run = dir.path().join("run");
    let other = dir.path().join("again");
    let other_s = other.to_string_lossy().into_owned();

    ok(&["corpus-gen", "--config", &cfg]);
    assert!(run.join("corpus/manifest.tsv").exists());
    assert!(run.join("corpus/wav/utt0019.wav").exists());
    ok(&["analyze", "--config", &cfg]);

    let parent = run.join("models/plain.ckpt").to_string_lossy().into_owned();
    for mode in ["plain", "g", "mbg"] {
        ok(&["train", "--config", &cfg, "--mode", mode]);
    }
    ok(&["train", "--config", &cfg, "--mode", "mbg_star", "--parent", &parent]);

    let manifest = String::from_utf8(read(run.join("corpus/manifest.tsv"))).unwrap();
    let test_utt = manifest
        .lines()
        .find(|l| l.ends_with("\ttest"))
        .and_then(|l| l.split('\t').next())
        .unwrap()
        .to_string();
    ok(&["synthesize", "--config", &cfg, "--system", "mbg", "--utt", &test_utt]);
    ok(&["evaluate", "--config", &cfg]);
    ok(&["report", "--config", &cfg]);

    for rel in [
        "corpus/corpus.provenance.json",
        "features/features.mbgf",
        "features/features.provenance.json",
        "models/mbg_star.ckpt",
        "models/mbg_star.nll.csv",
        "models/mbg_star.provenance.json",
        "eval/metrics.csv",
        "eval/deltas.csv",
        "eval/summary.txt",
        "eval/report.json",
        "eval/eval.provenance.json",
        "report/nll_curves.csv",
        "report/nll_curves.dat",
        "report/summary.txt",
        "report/report.provenance.json",
    ] {
        assert!(run.join(rel).exists(), "missing {rel}");
    }
    let wav = run.join(format!("synth/mbg/{test_utt}.wav"));
    assert!(read(wav.clone()).starts_with(b"RIFF"));

    let prov: Value = serde_json::from_slice(&read(run.join("models/plain.provenance.json"))).unwrap();
    assert_eq!(prov["seeds"]["train"], 5);
    assert_eq!(prov["config_sha256"].as_str().unwrap().len(), 64);
    let header = String::from_utf8(read(run.join("report/nll_curves.csv"))).unwrap();
    assert!(header.starts_with("step,plain_train,plain_valid,g_train,g_valid,mbg_train,mbg_valid,mbg_star_train,mbg_star_valid"));

    // Same config and seeds into a second directory: byte-identical outputs.
    ok(&["corpus-gen", "--config", &cfg, "--out", &other_s]);
    ok(&["analyze", "--config", &cfg, "--out", &other_s]);
    ok(&["train", "--config", &cfg, "--out", &other_s, "--mode", "mbg"]);
    ok(&["train", "--config", &cfg, "--out", &other_s, "--mode", "plain"]);
    ok(&["synthesize", "--config", &cfg, "--out", &other_s, "--system", "mbg", "--utt", &test_utt]);
    for rel in ["features/features.mbgf", "models/mbg.ckpt", "models/mbg.nll.csv"] {
        assert_eq!(read(run.join(rel)), read(other.join(rel)), "{rel} differs");
    }
    assert_eq!(read(wav), read(other.join(format!("synth/mbg/{test_utt}.wav"))));
    let before = read(run.join("eval/report.json"));
    ok(&["evaluate", "--config", &cfg]);
    assert_eq!(before, read(run.join("eval/report.json")));

    // A different training seed changes the model.
    ok(&["train", "--config", &cfg, "--out", &other_s, "--mode", "mbg", "--seed", "6"]);
    assert_ne!(read(run.join("models/mbg.ckpt")), read(other.join("models/mbg.ckpt")));
}

#[test]
fn mbg_star_without_parent_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), TINY);
    let out = mbg(&["train", "--config", &cfg, "--mode", "mbg_star"]);
    assert_eq!(out.status.code(), Some(2));
    let line = error_line(&out);
    assert_eq!(line["status"], "error");
    assert_eq!(line["stage"], "train");
    assert_eq!(line["kind"], "usage");
    assert!(line["message"].as_str().unwrap().contains("--parent"));
}

#[test]
fn unknown_mode_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), TINY);
    let out = mbg(&["train", "--config", &cfg, "--mode", "wavenet"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["message"].as_str().unwrap().contains("wavenet"));
}

#[test]
fn config_errors_list_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(
        dir.path(),
        "[corpus]\nn_utterances = 0\n[surrogate]\nsmooth_frames = 2\n[train]\nmax_steps = 0\n",
    );
    let out = mbg(&["corpus-gen", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let line = error_line(&out);
    assert_eq!(line["kind"], "config");
    let v: Vec<&str> = line["violations"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
    for section in ["corpus:", "surrogate:", "train:"] {
        assert!(v.iter().any(|s| s.starts_with(section)), "{section} not in {v:?}");
    }
    assert!(!dir.path().join("run").exists());
}

#[test]
fn missing_stage_inputs_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), TINY);
    for (args, needle) in [
        (vec!["analyze"], "manifest.tsv"),
        (vec!["train", "--mode", "plain"], "features.mbgf"),
        (vec!["evaluate"], "features.mbgf"),
        (vec!["report"], "models"),
    ] {
        let mut full = args.clone();
        full.extend(["--config", cfg.as_str()]);
        let out = mbg(&full);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let line = error_line(&out);
        assert_eq!(line["kind"], "missing_input");
        assert!(line["path"].as_str().unwrap().contains(needle), "{line}");
    }
}

#[test]
fn bad_thread_count_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_mbg"))
        .args(["report"])
        .env("MBG_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["kind"], "config");
}
