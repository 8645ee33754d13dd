//! The `mlme` binary, driven as a subprocess.

use std::path::Path;
use std::process::{Command, Output};

use mlme::cli::{load_model, predictions_csv};
use mlme::dataset::Dataset;
use mlme::inference::{predict_all, AnnealConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mlme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlme")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn toy(dir: &Path) -> (Dataset, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..20 {
        let x: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        labels.push(vec![x[0] > 0.0, x[0] + x[1] > 0.0]);
        feats.push(x.to_vec());
    }
    let data = Dataset::from_rows(feats, labels).unwrap();
    let path = dir.join("toy.csv");
    std::fs::write(&path, data.to_csv_string()).unwrap();
    (data, path.to_string_lossy().into_owned())
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let (data, csv) = toy(dir.path());
    let model = dir.path().join("m.json");
    let preds = dir.path().join("p.csv");
    let m = model.to_str().unwrap();

    let o = mlme(&["train", "--data", &csv, "--labels", "2", "--max-experts", "2", "--out", m]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("m.json.log.json").exists());

    let o = mlme(&["predict", "--model", m, "--data", &csv, "--out", preds.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&preds).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "y0,y1,log_prob");
    assert_eq!(lines.len(), 21);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));

    // Same bytes as predicting in memory with the saved model.
    let loaded = load_model(&model).unwrap();
    let mem = predict_all(&loaded, &loaded.prepare(&data).unwrap(), &AnnealConfig::default()).unwrap();
    assert_eq!(text, predictions_csv(&mem, 2));
}

#[test]
fn shape_mismatch_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_, csv) = toy(dir.path());
    let model = dir.path().join("m.json");
    let m = model.to_str().unwrap();
    assert!(mlme(&["train", "--data", &csv, "--labels", "2", "--max-experts", "1", "--out", m]).status.success());

    // Two features where the model expects three.
    let narrow = dir.path().join("narrow.csv");
    std::fs::write(&narrow, "0.1,0.2,1,0\n0.3,0.4,0,1\n").unwrap();
    let o = mlme(&["predict", "--model", m, "--data", narrow.to_str().unwrap(), "--out", "/dev/null"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[E_SCHEMA]"), "{}", stderr(&o));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let o = mlme(&["train", "--data", "/nonexistent/x.csv", "--labels", "2", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[E_IO]"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn bad_flags_are_argument_errors() {
    for args in [&["train", "--bogus"][..], &["cv", "--data", "x.csv", "--folds", "many"], &["frobnicate"]] {
        let o = mlme(args);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).starts_with("error[E_ARGUMENT]"), "{}", stderr(&o));
    }
    let o = mlme(&["--help"]);
    assert!(o.status.success());
}

#[test]
fn corrupt_model_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_, csv) = toy(dir.path());
    let model = dir.path().join("bad.json");
    std::fs::write(&model, "{\"format\":\"something-else\"}").unwrap();
    let o = mlme(&["predict", "--model", model.to_str().unwrap(), "--data", &csv, "--out", "/dev/null"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[E_FORMAT]"), "{}", stderr(&o));
}
