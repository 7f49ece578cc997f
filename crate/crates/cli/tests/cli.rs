use std::path::Path;
use std::process::{Command, Output};

use mfk_core::data::{read_npy, write_npy};
use ndarray::s;

const SMALL: &str = r#"
[synth]
samples = 12
frames = 80

[model]
psm_hidden = 16
encoder_hidden = 16
psm_gcn_layers = 2
encoder_layers = 2
decoder_tcn_layers = 2

[train]
epochs = 1
batch_size = 8
window_stride = 10
"#;

fn mfk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfk"))
        .current_dir(dir)
        .env_remove("MFK_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    ok(&mfk(dir.path(), &["--config", "small.toml", "synth"]));
    dir
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    ok(&mfk(dir.path(), &["--help"]));
    assert_eq!(mfk(dir.path(), &["bogus"]).status.code(), Some(2));
    assert_eq!(mfk(dir.path(), &["synth", "--nope", "1"]).status.code(), Some(2));
    assert_eq!(mfk(dir.path(), &["synth", "--model.nope", "1"]).status.code(), Some(2));
    assert_eq!(mfk(dir.path(), &["synth", "--train.epochs", "many"]).status.code(), Some(2));
    assert_eq!(mfk(dir.path(), &["--config", "missing.toml", "synth"]).status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfk(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("manifest"));
    let out = mfk(dir.path(), &["eval", "--checkpoint", "nothing.ckpt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nothing.ckpt"));
}

#[test]
fn invalid_synth_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfk(dir.path(), &["synth", "--persons", "9"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn synth_is_reproducible_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    for (root, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        ok(&mfk(
            dir.path(),
            &["synth", "--samples", "6", "--frames", "30", "--data", root, "--seed", seed],
        ));
    }
    let read = |root: &str| std::fs::read(dir.path().join(root).join("park_0000.npy")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    let manifest = std::fs::read_to_string(dir.path().join("a/manifest.toml")).unwrap();
    assert_eq!(manifest.matches("[[samples]]").count(), 6);
}

#[test]
fn seed_from_environment_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let run = |root: &str, env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mfk"));
        cmd.current_dir(dir.path()).env_remove("MFK_SEED");
        if let Some(e) = env {
            cmd.env("MFK_SEED", e);
        }
        cmd.args(["synth", "--samples", "1", "--frames", "10", "--data", root, "--out", root]);
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        ok(&cmd.output().unwrap());
        std::fs::read_to_string(dir.path().join(root).join("resolved_config.toml")).unwrap()
    };
    assert!(run("env", Some("17"), None).contains("seed = 17"));
    assert!(run("both", Some("17"), Some("5")).contains("seed = 5"));
    assert!(run("none", None, None).contains("seed = 0"));
}

#[test]
fn empty_dataset_is_allowed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&mfk(dir.path(), &["synth", "--samples", "0"]));
    let manifest = std::fs::read_to_string(dir.path().join("data/manifest.toml")).unwrap();
    assert!(!manifest.contains("[[samples]]"));
    let out = mfk(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no training windows"));
}

#[test]
fn corrupted_sample_names_the_file() {
    let dir = setup();
    std::fs::write(dir.path().join("data/park_0000.npy"), b"not an array").unwrap();
    let out = mfk(dir.path(), &["--config", "small.toml", "train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("park_0000.npy"), "{}", stderr(&out));
}

#[test]
fn train_eval_predict_report() {
    let dir = setup();
    let out = mfk(dir.path(), &["--config", "small.toml", "train", "--epochs", "2"]);
    ok(&out);
    let runs = dir.path().join("runs");
    let history = std::fs::read_to_string(runs.join("history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 2);
    for line in history.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["rec"].as_f64().unwrap().is_finite());
        assert!(v["seconds"].as_f64().is_some());
    }
    let log = std::fs::read_to_string(runs.join("run.log")).unwrap();
    assert!(log.contains("epochs = 2"));
    assert!(std::fs::read_to_string(runs.join("resolved_config.toml"))
        .unwrap()
        .contains("psm_hidden = 16"));

    ok(&mfk(
        dir.path(),
        &["--config", "small.toml", "eval", "--checkpoint", "runs/model.ckpt"],
    ));
    for name in ["model", "zero_velocity", "constant_velocity"] {
        assert!(runs.join(format!("{name}.json")).is_file());
        let csv = std::fs::read_to_string(runs.join(format!("{name}.csv"))).unwrap();
        assert!(csv.starts_with("scene,metric,time_ms,value"));
    }

    ok(&mfk(
        dir.path(),
        &["report", "runs/model.json", "runs/zero_velocity.json", "--out", "merged"],
    ));
    let table = std::fs::read_to_string(dir.path().join("merged/table.csv")).unwrap();
    assert!(table.starts_with("metric,time_ms,model,"));
    assert!(table.contains(",zero_velocity,"));
    let curves = std::fs::read_to_string(dir.path().join("merged/ps_curves.csv")).unwrap();
    assert!(curves.starts_with("model,scene,second,ps_entropy,ps_kld"));

    let input = dir.path().join("data/complex_crowd_0004.npy");
    ok(&mfk(
        dir.path(),
        &[
            "predict", "--checkpoint", "runs/model.ckpt", "--input",
            input.to_str().unwrap(), "--output", "one.npy",
        ],
    ));
    ok(&mfk(
        dir.path(),
        &[
            "predict", "--checkpoint", "runs/model.ckpt", "--input",
            input.to_str().unwrap(), "--output", "three.npy", "--steps", "3",
        ],
    ));
    let persons = read_npy(&input).unwrap().shape()[0];
    let one = read_npy(dir.path().join("one.npy")).unwrap();
    let three = read_npy(dir.path().join("three.npy")).unwrap();
    assert_eq!(one.shape(), &[persons, 25, 18, 3]);
    assert_eq!(three.shape(), &[persons, 75, 18, 3]);
    assert_eq!(three.slice(s![.., ..25, .., ..]), one);

    let short = read_npy(&input).unwrap().slice(s![.., ..10, .., ..]).to_owned();
    write_npy(dir.path().join("short.npy"), &short).unwrap();
    let out = mfk(
        dir.path(),
        &["predict", "--checkpoint", "runs/model.ckpt", "--input", "short.npy", "--output", "x.npy"],
    );
    assert_eq!(out.status.code(), Some(2));

    let narrow = read_npy(&input).unwrap().slice(s![.., .., ..10, ..]).to_owned();
    write_npy(dir.path().join("narrow.npy"), &narrow).unwrap();
    let out = mfk(
        dir.path(),
        &["predict", "--checkpoint", "runs/model.ckpt", "--input", "narrow.npy", "--output", "x.npy"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_rejects_unknown_schema() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("old.json"),
        r#"{"schema_version": 99, "model": "x", "split": "test", "seed": 0, "schedule_ms": [], "scenes": []}"#,
    )
    .unwrap();
    let out = mfk(dir.path(), &["report", "old.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("old.json"));
    assert_eq!(mfk(dir.path(), &["report"]).status.code(), Some(2));
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.ckpt"), b"MFKCKPT\0\x01").unwrap();
    let out = mfk(
        dir.path(),
        &["predict", "--checkpoint", "bad.ckpt", "--input", "x.npy", "--output", "y.npy"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn preprocess_raw_exports() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("exports");
    std::fs::create_dir_all(&raw).unwrap();
    let sample = mfk_core::synth::generate_scene(&mfk_core::synth::SynthConfig {
        frames: 30,
        ..Default::default()
    })
    .unwrap();
    let json = mfk_core::data::scene_json_string(&mfk_core::data::RawSample::from_selected(&sample));
    for name in ["park_a.json", "park_b.json", "complex_crowd_a.json"] {
        std::fs::write(raw.join(name), &json).unwrap();
    }
    ok(&mfk(dir.path(), &["preprocess", "--input", "exports"]));
    let manifest = std::fs::read_to_string(dir.path().join("data/manifest.toml")).unwrap();
    assert_eq!(manifest.matches("[[samples]]").count(), 3);
    assert!(manifest.contains("scene = \"ComplexCrowd\""));
    let processed = read_npy(dir.path().join("data/park_a.npy")).unwrap();
    assert_eq!(processed.shape(), &[3, 10, 18, 3]);

    std::fs::write(raw.join("unknown_place.json"), &json).unwrap();
    assert_eq!(mfk(dir.path(), &["preprocess", "--input", "exports"]).status.code(), Some(2));
    std::fs::remove_file(raw.join("unknown_place.json")).unwrap();
    std::fs::write(raw.join("park_c.json"), "{\"fps\": 75, \"persons\": [").unwrap();
    let out = mfk(dir.path(), &["preprocess", "--input", "exports"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("park_c.json"));
}
