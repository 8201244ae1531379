//! Runs the dataset × representation × architecture grid and writes the
//! accuracy reports.

pub mod config;
pub mod data;
pub mod report;
pub mod train;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{error, info, warn};
use rayon::prelude::*;

use crate::corpus::Source;
use crate::error::{Error, Result};
use crate::models::{target_form, AdapterDescriptor, Architecture, Encoded, ModelSpec, Representation, TargetForm};
use crate::seed::derive_seed;
use crate::textprep::Preprocessor;

pub use config::ExperimentConfig;
pub use data::{Fitted, PreparedDataset, Side};
pub use report::{CellKey, ReportMeta, ResultRow, ResultsMatrix};
pub use train::{majority_label, train_and_evaluate, Metrics, TrainOutcome};

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_MD: &str = "results.md";

pub fn preprocessor(cfg: &ExperimentConfig) -> Result<Preprocessor> {
    Ok(Preprocessor::new(data::stop_list(cfg)?))
}

pub fn report_meta(cfg: &ExperimentConfig, pre: &Preprocessor) -> ReportMeta {
    ReportMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        profile: cfg.profile().to_string(),
        stoplist_sha256: pre.stop_list().digest().to_string(),
        config_json: cfg.effective_json(),
    }
}

pub fn cell_seed(cfg: &ExperimentConfig, key: &CellKey) -> u64 {
    derive_seed(cfg.seed, &key.slug())
}

fn fit_seed(cfg: &ExperimentConfig, source: Source, rep: Representation) -> u64 {
    derive_seed(cfg.seed, &format!("{source}_{rep}_fit"))
}

pub fn fit(cfg: &ExperimentConfig, data: &PreparedDataset, rep: Representation) -> Result<Fitted> {
    Fitted::fit(rep, &data.train, cfg, fit_seed(cfg, data.source, rep))
}

/// Majority-class prediction from the training labels.
pub fn baseline_row(cfg: &ExperimentConfig, data: &PreparedDataset) -> Result<ResultRow> {
    let key = CellKey::new(data.source, None, Architecture::Baseline);
    let label = majority_label(&data.train.labels);
    let metrics = Metrics::new(&vec![label; data.test.len()], &data.test.labels)?;
    Ok(ResultRow {
        key,
        accuracy: metrics.accuracy(),
        n_train: data.train.len(),
        n_test: data.test.len(),
        epochs: 0,
        seed: cell_seed(cfg, &key),
        wall_time_s: cfg.report.wall_time.then_some(0.0),
        drop_count: data.drop_count,
        divergent: false,
    })
}

fn checkpoint_path(cfg: &ExperimentConfig, key: &CellKey) -> Option<PathBuf> {
    cfg.report
        .checkpoints
        .then(|| cfg.report.output_dir.join("checkpoints").join(format!("{}.ckpt", key.slug())))
}

/// Trains and evaluates one neural cell on already encoded inputs.
pub fn run_cell(
    cfg: &ExperimentConfig,
    data: &PreparedDataset,
    fitted: &Fitted,
    arch: Architecture,
    train: &[Encoded],
    test: &[Encoded],
) -> Result<ResultRow> {
    let rep = fitted.representation();
    let key = CellKey::new(data.source, Some(rep), arch);
    let form = target_form(rep, arch)?;
    let adapter = AdapterDescriptor::new(rep, arch, fitted.source_dim(form, cfg), &cfg.models)?;
    let spec = ModelSpec::new(arch, adapter, fitted.vocab_size(), &cfg.models)?;
    let seed = cell_seed(cfg, &key);
    let ckpt = checkpoint_path(cfg, &key);
    let start = Instant::now();
    let outcome = train_and_evaluate(
        &spec,
        train,
        &data.train.labels,
        test,
        &data.test.labels,
        &cfg.train,
        seed,
        ckpt.as_deref(),
    )?;
    let elapsed = start.elapsed().as_secs_f64();
    if outcome.divergent {
        warn!("{} diverged", key.slug());
    }
    info!("{} accuracy {:.4}", key.slug(), outcome.metrics.accuracy());
    Ok(ResultRow {
        key,
        accuracy: outcome.metrics.accuracy(),
        n_train: data.train.len(),
        n_test: data.test.len(),
        epochs: cfg.train.epochs,
        seed,
        wall_time_s: cfg.report.wall_time.then_some(elapsed),
        drop_count: data.drop_count,
        divergent: outcome.divergent,
    })
}

/// Fits one representation and runs every configured architecture on it.
/// Returns one result per architecture, in configuration order.
fn run_representation(
    cfg: &ExperimentConfig,
    data: &PreparedDataset,
    rep: Representation,
) -> Vec<(CellKey, Result<ResultRow>)> {
    let keys: Vec<CellKey> = cfg
        .grid
        .architectures
        .iter()
        .map(|&a| CellKey::new(data.source, Some(rep), a))
        .collect();
    let fitted = match fit(cfg, data, rep) {
        Ok(f) => f,
        Err(e) => {
            let reason = e.to_string();
            return keys
                .into_iter()
                .map(|k| (k, Err(Error::InvalidArgument(reason.clone()))))
                .collect();
        }
    };
    let mut encoded: HashMap<bool, (Vec<Encoded>, Vec<Encoded>)> = HashMap::new();
    for &arch in &cfg.grid.architectures {
        if let Ok(form) = target_form(rep, arch) {
            let ids = form == TargetForm::IdSequence;
            encoded.entry(ids).or_insert_with(|| fitted.encode(data, form, cfg));
        }
    }
    keys.into_par_iter()
        .map(|key| {
            let result = target_form(rep, key.architecture).and_then(|form| {
                let (train, test) = &encoded[&(form == TargetForm::IdSequence)];
                run_cell(cfg, data, &fitted, key.architecture, train, test)
            });
            (key, result)
        })
        .collect()
}

/// Runs the grid over prepared datasets. A cell that fails is recorded as
/// absent with its error rather than aborting the run.
pub fn run_grid_on(cfg: &ExperimentConfig, pre: &Preprocessor, datasets: &[PreparedDataset]) -> Result<ResultsMatrix> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.report.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if cfg.report.checkpoints {
        let dir = cfg.report.output_dir.join("checkpoints");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut matrix = ResultsMatrix::new(report_meta(cfg, pre));
    for data in datasets {
        if cfg.grid.baseline {
            matrix.insert(baseline_row(cfg, data)?)?;
        }
        let cells: Vec<(CellKey, Result<ResultRow>)> = pool.install(|| {
            cfg.grid
                .representations
                .iter()
                .flat_map(|&rep| run_representation(cfg, data, rep))
                .collect()
        });
        for (key, result) in cells {
            match result {
                Ok(row) => matrix.insert(row)?,
                Err(e) => {
                    error!("{} failed: {e}", key.slug());
                    matrix.mark_absent(key, &e.to_string())?;
                }
            }
        }
    }
    Ok(matrix)
}

/// Loads every configured dataset and runs the grid.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<ResultsMatrix> {
    let pre = preprocessor(cfg)?;
    let datasets = cfg
        .grid
        .datasets
        .iter()
        .map(|&s| PreparedDataset::load(cfg, s, &pre))
        .collect::<Result<Vec<_>>>()?;
    run_grid_on(cfg, &pre, &datasets)
}

/// Writes `results.csv` and `results.md` into `dir`.
pub fn write_reports(matrix: &ResultsMatrix, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(RESULTS_CSV);
    let md = dir.join(RESULTS_MD);
    matrix.write_csv(&csv)?;
    matrix.write_markdown(&md)?;
    Ok((csv, md))
}
