use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use retigrade_core::grader::{self, Dense, Network, Preprocess};
use retigrade_core::synth;
use retigrade_core::{FeatureMode, GraderModel, SizeThresholds, TrainConfig};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retigrade")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Runs a command expected to fail; returns (exit code, stderr).
fn fails(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    (out.status.code().unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn synth_small(dir: &Path, out: &str, n: &str, seed: &str) -> PathBuf {
    ok(dir, &["synth", "--out", out, "--n-images", n, "--width", "256", "--height", "256", "--seed", seed]);
    dir.join(out)
}

#[test]
fn extract_matches_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let data = synth_small(d, "data", "10", "3");
    let stdout = ok(d, &["extract", "--manifest", "data/manifest.csv", "--out", "f.csv"]);
    assert!(stdout.contains("10 extended"), "{stdout}");

    let (mode, rows) = retigrade_core::symbolic::read_features_csv(d.join("f.csv")).unwrap();
    let truth = synth::read_ground_truth(data.join("ground_truth.csv")).unwrap();
    assert_eq!(mode, FeatureMode::Extended);
    assert_eq!(rows.len(), 10);
    for (row, t) in rows.iter().zip(&truth) {
        assert_eq!(row.image_id, t.image_id);
        assert_eq!(row.features, t.counts.to_features());
        assert_eq!(row.grades, Some(t.grades));
    }

    ok(d, &["extract", "--manifest", "data/manifest.csv", "--mode", "simple", "--out", "s.csv"]);
    let header = fs::read_to_string(d.join("s.csv")).unwrap().lines().next().unwrap().to_owned();
    assert_eq!(header, "image_id,f1,f2,f3,f4,dr_grade,dme_grade");
}

#[test]
fn empty_manifest_gives_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("m.csv"), "image_id,ma_mask,he_mask,se_mask,ex_mask,dr_grade,dme_grade\n").unwrap();
    ok(d, &["extract", "--manifest", "m.csv", "--out", "f.csv"]);
    let text = fs::read_to_string(d.join("f.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("image_id,f1,"));
}

#[test]
fn missing_mask_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_small(d, "data", "3", "1");
    fs::remove_file(d.join("data/masks/img_0001_HE.pgm")).unwrap();
    let (code, stderr) = fails(d, &["extract", "--manifest", "data/manifest.csv", "--out", "f.csv"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("img_0001_HE.pgm"), "{stderr}");
    assert!(!d.join("f.csv").exists());
}

#[test]
fn training_is_reproducible_and_configurable() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_small(d, "data", "40", "2");
    ok(d, &["extract", "--manifest", "data/manifest.csv", "--out", "f.csv"]);
    fs::write(d.join("cfg.json"), r#"{"max_epochs": 3, "seed": 3, "hidden_dims": [8, 6]}"#).unwrap();
    let args = ["train", "--features", "f.csv", "--config", "cfg.json", "--seed", "4"];
    ok(d, &[&args[..], &["--out-model", "a.json"]].concat());
    ok(d, &[&args[..], &["--out-model", "b.json"]].concat());
    let a = fs::read(d.join("a.json")).unwrap();
    assert_eq!(a, fs::read(d.join("b.json")).unwrap());

    let model = grader::load_model(d.join("a.json")).unwrap();
    let config = &model.training().unwrap().config;
    let expected = TrainConfig { max_epochs: 3, seed: 4, hidden_dims: vec![8, 6], ..Default::default() };
    assert_eq!(config, &expected);
}

#[test]
fn unlabeled_features_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut text = String::from("image_id,f1,f2,f3,f4,dr_grade,dme_grade\n");
    for i in 0..5 {
        text.push_str(&format!("i{i},{i},0,1,2,,\n"));
    }
    fs::write(d.join("f.csv"), text).unwrap();
    let (code, stderr) = fails(d, &["train", "--features", "f.csv", "--out-model", "m.json"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("labels required"), "{stderr}");
    assert!(!d.join("m.json").exists());
}

#[test]
fn predict_then_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_small(d, "train", "120", "5");
    synth_small(d, "test", "30", "6");
    ok(d, &["extract", "--manifest", "train/manifest.csv", "--out", "train.csv"]);
    ok(d, &["extract", "--manifest", "test/manifest.csv", "--out", "test.csv"]);
    ok(
        d,
        &[
            "train",
            "--features",
            "train.csv",
            "--out-model",
            "m.json",
            "--learning-rate",
            "0.001",
            "--max-epochs",
            "40",
        ],
    );
    ok(d, &["predict", "--model", "m.json", "--features", "test.csv", "--out", "p.csv"]);
    assert_eq!(fs::read_to_string(d.join("p.csv")).unwrap().lines().count(), 31);

    let stdout = ok(d, &["evaluate", "--truth", "test/manifest.csv", "--predictions", "p.csv", "--out", "r.csv"]);
    assert!(stdout.contains("joint accuracy:"), "{stdout}");
    let csv = fs::read_to_string(d.join("r.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "model");
    assert_eq!(row[1], "30");
    let joint: f64 = row[2].parse().unwrap();
    assert!(stdout.contains(&format!("{joint:.4}")));

    // Features CSV works as ground truth too.
    let again = ok(d, &["evaluate", "--truth", "test.csv", "--predictions", "p.csv"]);
    assert_eq!(again.lines().next(), stdout.lines().next());
}

#[test]
fn evaluate_rejects_mismatched_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("t.csv"), "image_id,f1,f2,f3,f4,dr_grade,dme_grade\na,1,0,0,0,1,0\nb,2,0,0,0,1,0\n").unwrap();
    fs::write(d.join("p.csv"), "image_id,dr_pred,dme_pred\na,1,0\n").unwrap();
    let (code, stderr) = fails(d, &["evaluate", "--truth", "t.csv", "--predictions", "p.csv", "--out", "r.csv"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("2 labeled rows but 1 predictions"), "{stderr}");
    assert!(!d.join("r.csv").exists());
}

/// An extended model that always predicts severe NPDR: zero trunk, DR head
/// bias favouring grade 3.
fn severe_model(path: &Path) {
    let trunk = vec![Dense::zeros(12, 4)];
    let dr_head = Dense::from_rows(&vec![vec![0.0; 4]; 5], vec![0.0, 0.0, 0.0, 5.0, 0.0]).unwrap();
    let network = Network::from_layers(trunk, dr_head, Dense::zeros(4, 3)).unwrap();
    let model =
        GraderModel::new(FeatureMode::Extended, SizeThresholds::default(), network, Preprocess::identity(12), 0)
            .unwrap();
    grader::save_model(&model, path).unwrap();
}

#[test]
fn explain_reproduces_reference_sentence() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    severe_model(&d.join("m.json"));
    let header = "image_id,f1,f2,f3,f4,f5,f6,f7,f8,f9,f10,f11,f12,dr_grade,dme_grade";
    fs::write(d.join("f.csv"), format!("{header}\n1,37,0,0,26,2,2,0,0,0,197,5,3,,\n")).unwrap();
    let stdout = ok(d, &["explain", "--model", "m.json", "--features", "f.csv"]);
    assert_eq!(
        stdout,
        "The image 1 is classified as severe NPDR because 37 small MAs, 26 small HEs, 2 medium HEs, 2 large HEs, \
         197 small EXs, 5 medium EXs and 3 large EXs are detected.\n"
    );

    fs::write(d.join("p.csv"), "image_id,dr_pred,dme_pred\n1,3,2\n").unwrap();
    ok(d, &["explain", "--predictions", "p.csv", "--features", "f.csv", "--out", "e.txt"]);
    assert_eq!(fs::read_to_string(d.join("e.txt")).unwrap(), stdout);

    let (code, _) = fails(d, &["explain", "--features", "f.csv"]);
    assert_eq!(code, 2);
}

#[test]
fn ablation_prints_both_arms() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_small(d, "data", "30", "8");
    let stdout = ok(d, &["ablation", "--manifest", "data/manifest.csv", "--max-epochs", "3", "--out", "a.csv"]);
    assert!(stdout.contains("simple") && stdout.contains("extended"), "{stdout}");
    let csv = fs::read_to_string(d.join("a.csv")).unwrap();
    let arms: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(arms, ["simple", "extended"]);
    let first = fs::read(d.join("a.csv")).unwrap();
    ok(d, &["ablation", "--manifest", "data/manifest.csv", "--max-epochs", "3", "--out", "a.csv"]);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), first);
}

#[test]
fn synth_is_idempotent_and_protects_existing_output() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_small(d, "a", "5", "9");
    synth_small(d, "b", "5", "9");
    for name in ["manifest.csv", "ground_truth.csv", "masks/img_0004_EX.pgm"] {
        assert_eq!(fs::read(d.join("a").join(name)).unwrap(), fs::read(d.join("b").join(name)).unwrap());
    }
    let (code, stderr) = fails(d, &["synth", "--out", "a", "--n-images", "2"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("not empty"), "{stderr}");
    assert!(d.join("a/masks/img_0004_EX.pgm").exists());
    // No staging directories are left next to the outputs.
    let mut entries: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    entries.sort();
    assert_eq!(entries, ["a", "b"]);
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("cfg.json"), r#"{"learning_rte": 0.1}"#).unwrap();
    fs::write(d.join("f.csv"), "image_id,f1,f2,f3,f4,dr_grade,dme_grade\na,1,0,0,0,1,0\nb,2,0,0,0,1,0\n").unwrap();
    let (code, stderr) = fails(d, &["train", "--features", "f.csv", "--config", "cfg.json", "--out-model", "m.json"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("learning_rte"), "{stderr}");
    let (code, _) = fails(d, &["train", "--features", "f.csv", "--batch-size", "0", "--out-model", "m.json"]);
    assert_eq!(code, 2);
    let (code, _) = fails(d, &["extract", "--manifest", "f.csv", "--thresholds", "5,4,3,2", "--out", "x.csv"]);
    assert_eq!(code, 2);
    let (code, _) = fails(d, &["predict", "--model", "missing.json", "--features", "f.csv", "--out", "p.csv"]);
    assert_eq!(code, 2);
    let (code, _) = fails(d, &["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn help_documents_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let t = TrainConfig::default();
    let train = ok(d, &["train", "--help"]);
    for expected in [
        format!("[default: {}]", t.learning_rate),
        format!("[default: {}]", t.batch_size),
        format!("[default: {}]", t.dropout_prob),
        format!("[default: {}]", t.max_epochs),
        format!("[default: {}]", t.patience),
        format!("[default: {}]", t.validation_fraction),
        format!("[default: {}]", SizeThresholds::default()),
        format!("[default: {}]", t.hidden_dims.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
    ] {
        assert!(train.contains(&expected), "train --help lacks {expected}");
    }
    assert!(ok(d, &["ablation", "--help"]).contains("[default: 0.2]"));
    assert!(ok(d, &["extract", "--help"]).contains("[default: extended]"));
    let s = synth::SynthSpec::default();
    let synth_help = ok(d, &["synth", "--help"]);
    for expected in [
        format!("[default: {}]", s.n_images),
        format!("[default: {}]", s.width),
        format!("[default: {}]", s.label_rule),
    ] {
        assert!(synth_help.contains(&expected), "synth --help lacks {expected}");
    }
    for cmd in ["predict", "explain", "evaluate"] {
        assert!(ok(d, &[cmd, "--help"]).contains("Usage: retigrade"));
    }
}
