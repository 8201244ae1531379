mod common;

use std::collections::HashSet;

use fakenews::corpus::Source;
use fakenews::harness::{self, CellKey, ResultsMatrix};
use fakenews::models::{Architecture, Representation};

#[test]
fn fixture_grid_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::quick_config(dir.path());
    cfg.grid.datasets = vec![Source::Fixture];
    let matrix = harness::run_grid(&cfg).unwrap();

    assert_eq!(matrix.absent().count(), 0);
    assert_eq!(matrix.len(), 13);
    let keys: HashSet<CellKey> = matrix.rows().map(|r| r.key).collect();
    for rep in Representation::ALL {
        for arch in Architecture::NEURAL {
            assert!(keys.contains(&CellKey::new(Source::Fixture, Some(rep), arch)));
        }
    }
    for row in matrix.rows() {
        assert_eq!((row.n_train, row.n_test), (160, 40));
        let correct = row.accuracy * row.n_test as f64;
        assert_eq!(correct, correct.round(), "{row:?}");
        assert!((0.0..=1.0).contains(&row.accuracy));
    }
    let back = ResultsMatrix::from_csv(&matrix.to_csv()).unwrap();
    assert_eq!(back, matrix);
}

#[test]
fn failing_cells_are_marked_absent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::quick_config(dir.path());
    cfg.grid.datasets = vec![Source::Fixture];
    cfg.grid.representations = vec![Representation::Onehot];
    cfg.vectorizers.onehot_len = 6;
    let matrix = harness::run_grid(&cfg).unwrap();

    let cnn = CellKey::new(Source::Fixture, Some(Representation::Onehot), Architecture::Cnn);
    assert!(matrix.get(&cnn).is_none());
    let reason = matrix.absent_reason(&cnn).unwrap();
    assert!(reason.contains("at least 9"), "{reason}");
    assert_eq!(matrix.len(), 3);
    assert!(matrix.to_markdown().contains("n/a"));
}

#[test]
fn baseline_matches_majority_share() {
    let dir = tempfile::tempdir().unwrap();
    common::write_liar(dir.path(), 200, 80, 5);
    let mut cfg = common::quick_config(dir.path());
    cfg.corpus.liar_dir = Some(dir.path().to_path_buf());
    let pre = harness::preprocessor(&cfg).unwrap();
    let data = harness::PreparedDataset::load(&cfg, Source::Liar, &pre).unwrap();
    let row = harness::baseline_row(&cfg, &data).unwrap();
    let majority = harness::majority_label(&data.train.labels);
    let expected = data.test.labels.iter().filter(|&&y| y == majority).count() as f64 / data.test.len() as f64;
    assert_eq!(row.accuracy, expected);
}

#[test]
fn checkpoints_are_written_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::quick_config(dir.path());
    cfg.grid.datasets = vec![Source::Fixture];
    cfg.grid.representations = vec![Representation::Tfidf];
    cfg.grid.architectures = vec![Architecture::Ann];
    cfg.report.checkpoints = true;
    harness::run_grid(&cfg).unwrap();
    let path = dir.path().join("checkpoints").join("fixture_tfidf_ann.ckpt");
    let (net, header) = fakenews::neural::checkpoint::load::<f32>(&path).unwrap();
    assert!(net.param_count() > 0);
    assert_eq!(header.model["architecture"], "ann");
}
