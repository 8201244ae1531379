#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fakenews::harness::ExperimentConfig;

const SHARED: &[&str] = &[
    "senator", "governor", "tax", "plan", "vote", "bill", "state", "county", "school", "health",
    "jobs", "money", "report", "office", "people", "year", "percent", "million", "city", "law",
    "market", "energy", "water", "court", "police", "border", "trade", "budget", "debt", "wage",
];
const RELIABLE: &[&str] = &[
    "according", "data", "official", "census", "bureau", "statistics", "analysis", "study",
    "survey", "record", "quarterly", "audit", "testimony", "filing", "researchers",
];
const UNRELIABLE: &[&str] = &[
    "shocking", "secret", "hoax", "exposed", "truth", "banned", "miracle", "elite", "cover",
    "conspiracy", "outrage", "hidden", "insane", "leaked", "destroy",
];

/// Text whose class-specific words appear with probability `signal`.
fn text(rng: &mut ChaCha8Rng, reliable: bool, words: usize, signal: f64) -> String {
    let own = if reliable { RELIABLE } else { UNRELIABLE };
    (0..words)
        .map(|_| {
            let pool = if rng.random_bool(signal) { own } else { SHARED };
            *pool.choose(rng).unwrap()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Kaggle-format CSV (`id,title,author,text,label`, label 1 = unreliable).
pub fn write_kaggle(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("id,title,author,text,label\n");
    for i in 0..n {
        let reliable = rng.random_bool(0.5);
        let len = rng.random_range(30..80);
        let title = text(&mut rng, reliable, 6, 0.3);
        let body = text(&mut rng, reliable, len, 0.3);
        writeln!(out, "{i},\"{title}\",author{},\"{body}\",{}", i % 7, u8::from(!reliable)).unwrap();
    }
    fs::write(path, out).unwrap();
}

const LIAR_TRUE: &[&str] = &["half-true", "mostly-true", "true"];
const LIAR_FALSE: &[&str] = &["pants-fire", "false", "barely-true"];

fn write_liar_file(path: &Path, n: usize, prefix: &str, rng: &mut ChaCha8Rng) {
    let mut out = String::new();
    for i in 0..n {
        let reliable = rng.random_bool(0.55);
        let label = if reliable { LIAR_TRUE } else { LIAR_FALSE }.choose(rng).unwrap();
        let len = rng.random_range(8..20);
        let statement = text(rng, reliable, len, 0.1);
        writeln!(
            out,
            "{prefix}{i}.json\t{label}\t{statement}\teconomy\tspeaker{}\tjob\tstate\tparty\t1\t2\t3\t4\t5\ta speech",
            i % 11
        )
        .unwrap();
    }
    fs::write(path, out).unwrap();
}

/// A LIAR-format directory holding `train.tsv` and `test.tsv`.
pub fn write_liar(dir: &Path, n_train: usize, n_test: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    write_liar_file(&dir.join("train.tsv"), n_train, "tr", &mut rng);
    write_liar_file(&dir.join("test.tsv"), n_test, "te", &mut rng);
}

/// Small embeddings and a short schedule so whole grids run in seconds.
pub fn quick_config(output_dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.embeddings.word2vec.dim = 20;
    cfg.embeddings.doc2vec.dim = 30;
    cfg.embeddings.word2vec.epochs = 2;
    cfg.embeddings.doc2vec.epochs = 2;
    cfg.embeddings.infer_epochs = 2;
    cfg.train.epochs = 2;
    cfg.report.output_dir = output_dir.to_path_buf();
    cfg.report.checkpoints = false;
    cfg
}
