//! Acceptance criteria. Each test prints one PASS/FAIL line with its
//! tolerance. Criteria that need the real corpora read their locations
//! from `FAKENEWS_KAGGLE_CSV` and `FAKENEWS_LIAR_DIR` and report FAIL
//! (BLOCKED) when the data is absent.

mod common;

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fakenews::corpus::{self, Source};
use fakenews::embeddings::{train_doc2vec, train_word2vec, EmbeddingTable, TrainConfig};
use fakenews::harness::{self, CellKey, ExperimentConfig, ResultsMatrix};
use fakenews::models::{Architecture, Representation};
use fakenews::textprep::{porter_stem, TokenList};
use fakenews::vectorizers::fit_tfidf;
use fakenews::verify;

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "[acceptance] criterion {criterion} {name}: {} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
}

fn blocked(criterion: u32, name: &str, var: &str) {
    report(criterion, name, false, &format!("BLOCKED: dataset not found; set {var}"));
}

fn env_path(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).map(PathBuf::from).filter(|p| p.exists())
}

#[test]
fn criterion_1_gradient_verification() {
    let start = Instant::now();
    let suite = verify::run_suite(20, 20240611).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let worst = suite.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max);
    let pass = suite.passed() && suite.entries.len() == 13 && secs < 120.0;
    for e in &suite.entries {
        eprintln!("  {e}");
    }
    report(
        1,
        "gradient verification",
        pass,
        &format!(
            "{} components x 20 shapes, max rel err {worst:.2e}, tolerance < 1e-4; {secs:.1}s, limit 120s",
            suite.entries.len()
        ),
    );
    assert!(pass);
}

fn random_docs(rng: &mut ChaCha8Rng, n: usize, max_len: usize, vocab: usize) -> Vec<TokenList> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(0..=max_len);
            (0..len).map(|_| format!("w{}", rng.random_range(0..vocab))).collect()
        })
        .collect()
}

#[test]
fn criterion_2_tfidf_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut worst_norm = 0.0f64;
    let mut vectors = 0;
    for _ in 0..40 {
        let n = rng.random_range(1..=50);
        let vocab = rng.random_range(1..300);
        let mut train = random_docs(&mut rng, n, 200, vocab);
        if train.iter().all(|d| d.is_empty()) {
            train[0].push("w0".into());
        }
        let test = random_docs(&mut rng, 10, 200, vocab + 50);
        let model = fit_tfidf(&train, None).unwrap();

        let distinct: HashSet<&String> = train.iter().flatten().collect();
        assert_eq!(model.dim(), distinct.len() + 1);
        for doc in train.iter().chain(&test) {
            let v = model.transform(doc);
            let mut raw = vec![0.0f64; model.dim()];
            for term in &distinct {
                let id = model.vocab().get(term).unwrap() as usize;
                let df = train.iter().filter(|d| d.contains(term)).count() as f64;
                let idf = ((1.0 + n as f64) / (1.0 + df)).ln() + 1.0;
                let tf = doc.iter().filter(|t| t == term).count() as f64;
                raw[id] = tf * idf;
            }
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (i, r) in raw.iter().enumerate() {
                let expected = if norm > 0.0 { r / norm } else { 0.0 };
                worst = worst.max((v.get(i) - expected).abs());
            }
            if norm > 0.0 {
                worst_norm = worst_norm.max((v.norm() - 1.0).abs());
                vectors += 1;
            } else {
                assert_eq!(v.nnz(), 0);
            }
        }
    }
    let pass = worst <= 1e-9 && worst_norm <= 1e-9;
    report(
        2,
        "tfidf oracle",
        pass,
        &format!(
            "max abs diff {worst:.1e}, max |norm-1| {worst_norm:.1e} over {vectors} nonzero vectors; tolerance 1e-9"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_porter_fixture() {
    let text = include_str!("../data/porter_vocabulary.tsv");
    let pairs: Vec<(&str, &str)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split_once('\t').unwrap())
        .collect();
    let mismatches: Vec<_> = pairs.iter().filter(|(w, s)| porter_stem(w) != *s).collect();
    let pass = mismatches.is_empty() && pairs.len() >= 2000;
    report(
        3,
        "porter stemmer oracle",
        pass,
        &format!(
            "{}/{} pairs agree; required 100% of >= 2000 pairs",
            pairs.len() - mismatches.len(),
            pairs.len()
        ),
    );
    assert!(pass, "first mismatches: {:?}", &mismatches[..mismatches.len().min(10)]);
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

const ANIMALS: [&str; 5] = ["cat", "dog", "cow", "horse", "goat"];
const FOODS: [&str; 5] = ["grass", "meat", "hay", "fish", "corn"];
const VEHICLES: [&str; 5] = ["car", "truck", "bus", "van", "taxi"];
const ROADS: [&str; 5] = ["highway", "street", "lane", "avenue", "road"];

fn template_corpus(seed: u64) -> Vec<TokenList> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..200)
        .map(|i| {
            let s = if i % 2 == 0 {
                format!("{} eats {}", ANIMALS.choose(&mut rng).unwrap(), FOODS.choose(&mut rng).unwrap())
            } else {
                format!("{} drives {}", VEHICLES.choose(&mut rng).unwrap(), ROADS.choose(&mut rng).unwrap())
            };
            s.split_whitespace().map(String::from).collect()
        })
        .collect()
}

fn mean_cos(t: &EmbeddingTable, a: &[&str], b: &[&str]) -> f64 {
    let pairs: Vec<f64> = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| (x, y)))
        .filter(|(x, y)| x != y)
        .map(|(x, y)| cosine(t.vector(x).unwrap(), t.vector(y).unwrap()))
        .collect();
    pairs.iter().sum::<f64>() / pairs.len() as f64
}

/// Fifty documents over ten topics; the last one duplicates the first.
fn topical_corpus(seed: u64) -> Vec<TokenList> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared: Vec<String> = (0..30).map(|i| format!("s{i}")).collect();
    let topics: Vec<Vec<String>> = (0..10)
        .map(|t| (0..15).map(|i| format!("t{t}w{i}")).collect())
        .collect();
    let mut docs: Vec<TokenList> = (0..49)
        .map(|d| {
            let n = rng.random_range(20..40);
            (0..n)
                .map(|_| {
                    let pool = if rng.random_bool(0.7) { &topics[d % 10] } else { &shared };
                    pool.choose(&mut rng).unwrap().clone()
                })
                .collect()
        })
        .collect();
    docs.push(docs[0].clone());
    docs
}

const DOC_EPOCHS: usize = 30;

#[test]
fn criterion_4_embedding_sanity() {
    let start = Instant::now();
    let w2v = (0..5u64)
        .filter(|&seed| {
            let cfg = TrainConfig { seed: 50 + seed, ..TrainConfig::word2vec() };
            let t = train_word2vec(&template_corpus(500 + seed), &cfg).unwrap();
            mean_cos(&t, &ANIMALS, &ANIMALS) > mean_cos(&t, &ANIMALS, &VEHICLES)
        })
        .count();

    let mut d2v = 0;
    let mut inferred = 0;
    for seed in 0..5u64 {
        let docs = topical_corpus(600 + seed);
        let cfg = TrainConfig { seed: 60 + seed, epochs: DOC_EPOCHS, ..TrainConfig::doc2vec() };
        let m = train_doc2vec(&docs, &cfg).unwrap();
        let last = docs.len() - 1;
        let twin = cosine(m.doc_vector(0), m.doc_vector(last));
        let others = (1..last).map(|j| cosine(m.doc_vector(0), m.doc_vector(j))).collect();
        d2v += usize::from(twin > median(others));

        let v: Vec<f32> = m.infer(&docs[last], DOC_EPOCHS).to_dense().iter().map(|&x| x as f32).collect();
        let own = cosine(&v, m.doc_vector(0));
        let others = (1..last).map(|j| cosine(&v, m.doc_vector(j))).collect();
        inferred += usize::from(own > median(others));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = w2v >= 4 && d2v >= 4 && inferred >= 4 && secs < 180.0;
    report(
        4,
        "embedding sanity",
        pass,
        &format!(
            "word2vec {w2v}/5, doc2vec duplicate {d2v}/5, inferred duplicate {inferred}/5 seeds; required >= 4/5 each; {secs:.1}s, limit 180s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_separable_fixture() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.grid.datasets = vec![Source::Fixture];
    cfg.grid.representations = vec![Representation::Tfidf, Representation::Onehot];
    cfg.grid.baseline = false;
    cfg.train.epochs = 5;
    cfg.train.batch = 4;
    cfg.report.checkpoints = false;
    cfg.report.output_dir = dir.path().to_path_buf();
    let matrix = harness::run_grid(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();

    let cells = [
        (Representation::Tfidf, Architecture::Ann),
        (Representation::Onehot, Architecture::Rnn),
        (Representation::Tfidf, Architecture::Cnn),
    ];
    let accs: Vec<f64> = cells
        .iter()
        .map(|&(r, a)| matrix.get(&CellKey::new(Source::Fixture, Some(r), a)).map_or(0.0, |row| row.accuracy))
        .collect();
    let pass = accs.iter().all(|&a| a >= 0.95) && secs < 120.0;
    report(
        5,
        "separable fixture",
        pass,
        &format!(
            "tfidf+ann {:.3}, onehot+rnn {:.3}, tfidf+cnn {:.3} after 5 epochs; required >= 0.95; {secs:.1}s, limit 120s",
            accs[0], accs[1], accs[2]
        ),
    );
    assert!(pass);
}

fn kaggle_desk_scale() -> Option<&'static ResultsMatrix> {
    static RUN: OnceLock<Option<ResultsMatrix>> = OnceLock::new();
    RUN.get_or_init(|| {
        let csv = env_path("FAKENEWS_KAGGLE_CSV")?;
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.corpus.kaggle_csv = Some(csv);
        cfg.desk_scale.enabled = true;
        cfg.grid.datasets = vec![Source::Kaggle];
        cfg.grid.representations = vec![Representation::Tfidf, Representation::Onehot];
        cfg.report.wall_time = true;
        cfg.report.checkpoints = false;
        cfg.report.output_dir = dir.path().to_path_buf();
        Some(harness::run_grid(&cfg).unwrap())
    })
    .as_ref()
}

fn kaggle_acc(m: &ResultsMatrix, rep: Representation, arch: Architecture) -> f64 {
    m.get(&CellKey::new(Source::Kaggle, Some(rep), arch)).map_or(f64::NAN, |r| r.accuracy)
}

#[test]
fn criterion_6_kaggle_desk_scale() {
    let name = "kaggle desk-scale tfidf";
    let Some(m) = kaggle_desk_scale() else {
        return blocked(6, name, "FAKENEWS_KAGGLE_CSV");
    };
    let mut details = Vec::new();
    let mut pass = true;
    for arch in Architecture::NEURAL {
        let key = CellKey::new(Source::Kaggle, Some(Representation::Tfidf), arch);
        let (acc, secs) = m.get(&key).map_or((f64::NAN, f64::NAN), |r| (r.accuracy, r.wall_time_s.unwrap_or(f64::NAN)));
        pass &= acc >= 0.90 && secs < 600.0;
        details.push(format!("{arch} {acc:.4} in {secs:.0}s"));
    }
    report(6, name, pass, &format!("{}; required >= 0.90 and < 600s per cell", details.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_7_liar_band() {
    let name = "liar band and baseline";
    let Some(dir) = env_path("FAKENEWS_LIAR_DIR") else {
        return blocked(7, name, "FAKENEWS_LIAR_DIR");
    };
    let out = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.corpus.liar_dir = Some(dir);
    cfg.grid.datasets = vec![Source::Liar];
    cfg.report.checkpoints = false;
    cfg.report.output_dir = out.path().to_path_buf();
    let matrix = harness::run_grid(&cfg).unwrap();

    let (_, test, _) = harness::data::load_split(&cfg, Source::Liar).unwrap();
    let balance = corpus::class_balance(&test).unwrap();
    let baseline = matrix
        .get(&CellKey::new(Source::Liar, None, Architecture::Baseline))
        .map_or(f64::NAN, |r| r.accuracy);
    let mut outside = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for rep in Representation::ALL {
        for arch in Architecture::NEURAL {
            let acc = matrix
                .get(&CellKey::new(Source::Liar, Some(rep), arch))
                .map_or(f64::NAN, |r| r.accuracy);
            lo = lo.min(acc);
            hi = hi.max(acc);
            if !(0.45..=0.65).contains(&acc) {
                outside.push(format!("{rep}+{arch} {acc:.4}"));
            }
        }
    }
    let pass = outside.is_empty() && baseline == balance;
    report(
        7,
        name,
        pass,
        &format!(
            "cells span [{lo:.4}, {hi:.4}], outside: [{}]; baseline {baseline} vs class balance {balance}; band [0.45, 0.65], baseline exact",
            outside.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_tfidf_beats_onehot() {
    let name = "tfidf beats one-hot at desk scale";
    let Some(m) = kaggle_desk_scale() else {
        return blocked(8, name, "FAKENEWS_KAGGLE_CSV");
    };
    let pairs: Vec<(Architecture, f64, f64)> = [Architecture::Ann, Architecture::Cnn]
        .into_iter()
        .map(|a| (a, kaggle_acc(m, Representation::Tfidf, a), kaggle_acc(m, Representation::Onehot, a)))
        .collect();
    let pass = pairs.iter().all(|&(_, t, o)| t > o);
    let detail: Vec<String> = pairs
        .iter()
        .map(|(a, t, o)| format!("{a}: tfidf {t:.4} vs onehot {o:.4}"))
        .collect();
    report(8, name, pass, &format!("{}; required strictly greater", detail.join(", ")));
    assert!(pass);
}

fn desk_grid_csv(cfg: &ExperimentConfig) -> String {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = cfg.clone();
    cfg.report.output_dir = out.path().to_path_buf();
    let matrix = harness::run_grid(&cfg).unwrap();
    let (path, _) = harness::write_reports(&matrix, out.path()).unwrap();
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn criterion_9_determinism() {
    let mut cfg = ExperimentConfig::default();
    cfg.desk_scale.enabled = true;
    cfg.report.threads = 1;
    cfg.report.checkpoints = false;
    let data = tempfile::tempdir().unwrap();
    let (liar, kaggle) = (env_path("FAKENEWS_LIAR_DIR"), env_path("FAKENEWS_KAGGLE_CSV"));
    let source = match (liar, kaggle) {
        (Some(l), Some(k)) => {
            cfg.corpus.liar_dir = Some(l);
            cfg.corpus.kaggle_csv = Some(k);
            "real corpora"
        }
        _ => {
            let csv = data.path().join("kaggle.csv");
            common::write_kaggle(&csv, 400, 9);
            common::write_liar(data.path(), 240, 80, 9);
            cfg.corpus.kaggle_csv = Some(csv);
            cfg.corpus.liar_dir = Some(data.path().to_path_buf());
            "synthetic surrogate corpora; real datasets not found"
        }
    };
    let first = desk_grid_csv(&cfg);
    let second = desk_grid_csv(&cfg);
    let rows = first.lines().filter(|l| !l.starts_with('#')).count() - 1;
    let absent = first.lines().filter(|l| l.starts_with("# absent")).count();
    let pass = first == second && rows == 26 && absent == 0;
    report(
        9,
        "determinism",
        pass,
        &format!("{source}; {rows} rows, {absent} absent; two serial runs byte-identical: {}", first == second),
    );
    assert!(pass);
}

#[test]
fn porter_idempotence_is_measured() {
    let text = include_str!("../data/porter_vocabulary.tsv");
    let reference: HashMap<&str, &str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split_once('\t').unwrap())
        .collect();
    let mut words: Vec<&str> = reference.keys().copied().collect();
    words.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let sample: Vec<&str> = words.choose_multiple(&mut rng, 10_000).copied().collect();
    let mut fixed = 0usize;
    let mut exceptions: Vec<(String, String)> = Vec::new();
    for w in &sample {
        let s = porter_stem(w);
        let again = porter_stem(&s);
        if again == s {
            fixed += 1;
        } else {
            exceptions.push((s, again));
        }
    }
    exceptions.sort();
    exceptions.dedup();
    // every exception the reference table can speak to must be the reference's own behaviour
    let checked: Vec<_> = exceptions.iter().filter(|(s, _)| reference.contains_key(s.as_str())).collect();
    let inherent = checked.iter().all(|(s, again)| reference[s.as_str()] == again);
    let share = fixed as f64 / sample.len() as f64;
    let line = format!(
        "[acceptance] invariant porter idempotence: {} ({share:.4} of {} words, threshold 0.99; {} distinct exceptions, {} confirmed by the reference table; e.g. {:?})\n",
        if share >= 0.99 { "PASS" } else { "FAIL" },
        sample.len(),
        exceptions.len(),
        checked.len(),
        &exceptions[..exceptions.len().min(8)]
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(inherent, "stemmer departs from the reference on its own output");
}
