use std::fs;
use std::process::Command;

use fakenews::cli;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("fakenews").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn stem_prints_porter_stem() {
    let (code, out, _) = run(&["stem", "caresses"]);
    assert_eq!(code, 0);
    assert_eq!(out, "caress\n");
    let (_, out, _) = run(&["stem", "ponies", "relational", "hopping"]);
    assert_eq!(out, "poni\nrelat\nhop\n");
}

#[test]
fn missing_config_names_path() {
    let (code, _, err) = run(&["--config", "does/not/exist.toml", "grid"]);
    assert_eq!(code, cli::EXIT_USAGE);
    assert!(err.contains("does/not/exist.toml"), "{err}");
}

#[test]
fn bad_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    fs::write(&path, "[train]\nbatch_size = 8\n").unwrap();
    let (code, _, err) = run(&["--config", path.to_str().unwrap(), "grid"]);
    assert_eq!(code, cli::EXIT_USAGE);
    assert!(err.contains("batch_size"), "{err}");
}

#[test]
fn usage_errors_print_usage() {
    let (code, _, err) = run(&["frobnicate"]);
    assert_eq!(code, cli::EXIT_USAGE);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, err) = run(&["--bogus", "grid"]);
    assert_eq!(code, cli::EXIT_USAGE);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    fs::write(&path, "[corpus]\nkaggle_csv = \"/nonexistent/train.csv\"\n").unwrap();
    let (code, _, err) = run(&["--config", path.to_str().unwrap(), "vocab", "--dataset", "kaggle"]);
    assert_eq!(code, cli::EXIT_DATA);
    assert!(err.contains("/nonexistent/train.csv"), "{err}");
}

#[test]
fn prep_shows_preprocessed_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.txt");
    fs::write(&path, "The Senators were running!\nCafé owners\n").unwrap();
    let (code, out, _) = run(&["prep", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out, "senat run\ncafe owner\n");
}

#[test]
fn gradcheck_passes() {
    let (code, out, _) = run(&["gradcheck", "--shapes", "3"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().count(), 13);
}

#[test]
fn train_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, err) = run(&[
        "--output-dir", d, "train", "--dataset", "fixture", "--representation", "tfidf", "--architecture", "ann",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("dataset,representation,architecture,accuracy"));
    assert!(out.lines().nth(1).unwrap().starts_with("fixture,tfidf,ann,"));
    assert!(dir.path().join("checkpoints/fixture_tfidf_ann.ckpt").exists());

    let cfg = dir.path().join("cfg.toml");
    fs::write(
        &cfg,
        "[grid]\ndatasets = [\"fixture\"]\nrepresentations = [\"tfidf\"]\narchitectures = [\"ann\"]\n",
    )
    .unwrap();
    let (code, out, err) = run(&["--config", cfg.to_str().unwrap(), "--output-dir", d, "grid"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("2 cells, 0 absent"), "{out}");
    let csv = dir.path().join("results.csv");
    let (code, md, _) = run(&["report", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(md.contains("| Dataset | One-hot | TFIDF | Word2Vec | Doc2Vec |"));
    assert_eq!(md, fs::read_to_string(dir.path().join("results.md")).unwrap());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fakenews");
    let ok = Command::new(bin).args(["stem", "caresses"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout), "caress\n");
    let bad = Command::new(bin).args(["--config", "missing.toml", "grid"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("missing.toml"));
}
