use std::path::Path;
use std::process::{Command, Output};

use vesselmatch::eval::{compute_metrics, pooled_pairs, RecallForm};
use vesselmatch::pipeline::Prediction;

fn vm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vesselmatch"))
        .args(args)
        .current_dir(dir)
        .env_remove("VESSELMATCH_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = vm(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    vm(dir, args).status.code().unwrap()
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_SYNTH: [&str; 7] = ["synth", "--count", "12", "--train", "8", "--templates-per-view", "1"];

fn small_dataset(dir: &Path) {
    let mut args = SMALL_SYNTH.to_vec();
    args.extend(["--out", "ds"]);
    ok(dir, &args);
}

#[test]
fn synth_is_reproducible_and_stamps_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for out in ["a", "b"] {
        let mut args = SMALL_SYNTH.to_vec();
        args.extend(["--out", out]);
        ok(d, &args);
    }
    let a = std::fs::read(d.join("a/manifest.json")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b/manifest.json")).unwrap());
    let manifest = json(d.join("a/manifest.json"));
    let hash = manifest["run_config_hash"].as_str().unwrap();
    assert_eq!(json(d.join("a/run_config.json"))["run_config_hash"], hash);
    let cases = manifest["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 12);
    let splits: Vec<&str> = cases.iter().map(|c| c["split"].as_str().unwrap()).collect();
    assert!(splits[..8].iter().all(|&s| s == "train"));
    assert!(splits[8..].contains(&"template") && splits[8..].contains(&"test"));
    for c in cases {
        let g = json(d.join("a").join(c["graph"].as_str().unwrap()));
        assert_eq!(g["run_config_hash"], hash);
        assert_eq!(g["case_id"], c["id"]);
        let pgm = std::fs::read(d.join("a").join(c["mask"].as_str().unwrap())).unwrap();
        let header = String::from_utf8_lossy(&pgm[..120]).into_owned();
        assert!(header.contains(&format!("run_config_hash={hash}")), "{header}");
    }
}

#[test]
fn other_seed_changes_data_and_hash() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["synth", "--count", "3", "--train", "1", "--out", "a"]);
    ok(
        tmp.path(),
        &["synth", "--count", "3", "--train", "1", "--out", "b", "--seed", "1"],
    );
    let (a, b) = (
        json(tmp.path().join("a/manifest.json")),
        json(tmp.path().join("b/manifest.json")),
    );
    assert_ne!(a["run_config_hash"], b["run_config_hash"]);
    assert_ne!(a["cases"][0]["seed"], b["cases"][0]["seed"]);
}

#[test]
fn train_with_zero_steps_writes_the_init_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_dataset(d);
    ok(d, &["init", "--dataset", "ds", "--hidden", "8", "--out", "init"]);
    ok(
        d,
        &[
            "train",
            "--dataset",
            "ds",
            "--hidden",
            "8",
            "--steps",
            "0",
            "--out",
            "zero",
        ],
    );
    ok(
        d,
        &[
            "train",
            "--dataset",
            "ds",
            "--hidden",
            "8",
            "--steps",
            "3",
            "--out",
            "three",
        ],
    );
    let init = std::fs::read(d.join("init/weights.bin")).unwrap();
    assert_eq!(init, std::fs::read(d.join("zero/weights.bin")).unwrap());
    assert_ne!(init, std::fs::read(d.join("three/weights.bin")).unwrap());
    let losses = std::fs::read_to_string(d.join("three/losses.csv")).unwrap();
    let lines: Vec<&str> = losses.lines().collect();
    assert!(lines[0].starts_with("# format_version=1 run_config_hash="));
    assert_eq!(lines[1], "step,loss");
    assert_eq!(lines.len(), 5);
}

#[test]
fn eval_agrees_with_the_library_on_the_predictions_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_dataset(d);
    ok(
        d,
        &[
            "train",
            "--dataset",
            "ds",
            "--hidden",
            "8",
            "--steps",
            "20",
            "--out",
            "tr",
        ],
    );
    ok(
        d,
        &[
            "infer",
            "--weights",
            "tr/weights.bin",
            "--dataset",
            "ds",
            "--out",
            "inf",
        ],
    );
    ok(d, &["eval", "--predictions", "inf/predictions.json", "--out", "ev"]);
    let preds_file = json(d.join("inf/predictions.json"));
    assert_eq!(
        preds_file["weights_run_config_hash"],
        json(d.join("tr/run_config.json"))["run_config_hash"]
    );
    let preds: Vec<Prediction> = serde_json::from_value(preds_file["predictions"].clone()).unwrap();
    assert!(!preds.is_empty());
    let report = compute_metrics(&pooled_pairs(&preds), RecallForm::Standard).unwrap();
    let metrics = json(d.join("ev/metrics.json"));
    assert_eq!(metrics["weighted"]["acc"].as_f64().unwrap(), report.weighted.acc);
    assert_eq!(metrics["weighted"]["f1"].as_f64().unwrap(), report.weighted.f1);
    assert_eq!(metrics["micro_accuracy"].as_f64().unwrap(), report.micro_accuracy);
    let csv = std::fs::read_to_string(d.join("ev/metrics.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("weighted,")).unwrap();
    let acc: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(acc, report.weighted.acc);
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(d, &["--help"]), 0);
    assert_eq!(code(d, &["--version"]), 0);
    assert_eq!(code(d, &["train", "--steps", "many"]), 1);
    assert_eq!(code(d, &["frobnicate"]), 1);
    assert_eq!(code(d, &["infer", "--dataset", "ds"]), 1, "missing --weights");
    assert_eq!(code(d, &["extract", "--mask", "m.pgm"]), 1, "missing --view");
    assert_eq!(code(d, &["synth", "--count", "2", "--train", "5", "--out", "x"]), 1);
    small_dataset(d);
    assert_eq!(code(d, &["train", "--dataset", "missing", "--out", "t"]), 2);
    std::fs::write(d.join("bogus.bin"), b"not weights").unwrap();
    assert_eq!(
        code(d, &["infer", "--weights", "bogus.bin", "--dataset", "ds", "--out", "i"]),
        2
    );
    ok(d, &["init", "--dataset", "ds", "--hidden", "8", "--out", "w"]);
    let tau = [
        "explain-features",
        "--weights",
        "w/weights.bin",
        "--dataset",
        "ds",
        "--tau",
        "1.5",
        "--out",
        "e",
    ];
    assert_eq!(code(d, &tau), 1);
}

#[test]
fn config_file_is_overridden_by_flags_and_checked() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("synth.json"),
        r#"{"count": 5, "train": 2, "templates_per_view": 1, "grammar": {"d_branch_prob": 0.0}}"#,
    )
    .unwrap();
    ok(d, &["synth", "--config", "synth.json", "--count", "4", "--out", "s"]);
    let run = json(d.join("s/run_config.json"));
    assert_eq!(run["params"]["count"], 4);
    assert_eq!(run["params"]["train"], 2);
    assert_eq!(run["params"]["grammar"]["d_branch_prob"], 0.0);
    assert_eq!(run["params"]["grammar"]["om_branch_prob"], 0.7);
    std::fs::write(d.join("bad.json"), r#"{"cuont": 5}"#).unwrap();
    let out = vm(d, &["synth", "--config", "bad.json", "--out", "s2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("cuont"), "{err}");
}

#[test]
fn out_dir_comes_from_flag_then_env_then_default() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let synth = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_vesselmatch"));
        cmd.args(["synth", "--count", "1", "--train", "1"])
            .args(extra)
            .current_dir(d);
        match env {
            Some(v) => cmd.env("VESSELMATCH_OUT_DIR", v),
            None => cmd.env_remove("VESSELMATCH_OUT_DIR"),
        };
        assert!(cmd.output().unwrap().status.success());
    };
    synth(&[], None);
    assert!(d.join("out/manifest.json").exists());
    synth(&[], Some("from-env"));
    assert!(d.join("from-env/manifest.json").exists());
    synth(&["--out", "from-flag"], Some("from-env-2"));
    assert!(d.join("from-flag/manifest.json").exists());
    assert!(!d.join("from-env-2").exists());
}

#[test]
fn extract_reads_synthesized_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--count", "2", "--train", "2", "--out", "ds"]);
    let manifest = json(d.join("ds/manifest.json"));
    let case = &manifest["cases"][0];
    let view = case["view_angle"].as_str().unwrap();
    let mask = format!("ds/{}", case["mask"].as_str().unwrap());
    let intensity = format!("ds/{}", case["intensity"].as_str().unwrap());
    ok(
        d,
        &[
            "extract",
            "--mask",
            &mask,
            "--intensity",
            &intensity,
            "--view",
            view,
            "--root",
            "128,0",
            "--out",
            "ex",
        ],
    );
    assert_eq!(
        json(d.join("ex/run_config.json"))["params"]["root"],
        serde_json::json!([128.0, 0.0])
    );
    let g = json(d.join("ex/case-0000.json"));
    assert_eq!(g["case_id"], "case-0000");
    assert_eq!(g["view_angle"], view);
    let features = g["nodes"][0]["features"].as_array().unwrap().len();
    assert_eq!(
        features,
        manifest["feature_manifest"]["names"].as_array().unwrap().len()
    );
    assert!(!g["nodes"].as_array().unwrap().is_empty());
}
