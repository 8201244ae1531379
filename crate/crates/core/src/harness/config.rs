use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Source;
use crate::embeddings::TrainConfig;
use crate::error::{Error, Result};
use crate::models::{Architecture, ModelOptions, Representation};

/// Full run configuration, read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub textprep: TextprepConfig,
    pub vectorizers: VectorizerConfig,
    pub embeddings: EmbeddingConfig,
    pub models: ModelOptions,
    pub train: TrainParams,
    pub grid: GridConfig,
    pub desk_scale: DeskScale,
    pub report: ReportConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            corpus: CorpusConfig::default(),
            textprep: TextprepConfig::default(),
            vectorizers: VectorizerConfig::default(),
            embeddings: EmbeddingConfig::default(),
            models: ModelOptions::default(),
            train: TrainParams::default(),
            grid: GridConfig::default(),
            desk_scale: DeskScale::default(),
            report: ReportConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    /// Directory holding the LIAR `train.tsv` and `test.tsv`.
    pub liar_dir: Option<PathBuf>,
    /// The labeled Kaggle `train.csv`.
    pub kaggle_csv: Option<PathBuf>,
    /// JSONL fixture; the bundled one is used when unset.
    pub fixture: Option<PathBuf>,
    /// Train share for corpora without provided splits.
    pub split_ratio: f64,
    pub liar_label_col: usize,
    pub liar_statement_col: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            liar_dir: None,
            kaggle_csv: None,
            fixture: None,
            split_ratio: 0.8,
            liar_label_col: 1,
            liar_statement_col: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextprepConfig {
    /// Stop-word file, one word per line; the bundled list when unset.
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VectorizerConfig {
    pub onehot_vocab: usize,
    pub onehot_len: usize,
    pub tfidf_max_features: Option<usize>,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig {
            onehot_vocab: 5000,
            onehot_len: 20,
            tfidf_max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub word2vec: TrainConfig,
    pub doc2vec: TrainConfig,
    pub infer_epochs: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            word2vec: TrainConfig::word2vec(),
            doc2vec: TrainConfig::doc2vec(),
            infer_epochs: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 5,
            batch: 32,
            lr: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub datasets: Vec<Source>,
    pub representations: Vec<Representation>,
    pub architectures: Vec<Architecture>,
    /// Adds one majority-class row per dataset.
    pub baseline: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            datasets: vec![Source::Liar, Source::Kaggle],
            representations: Representation::ALL.to_vec(),
            architectures: Architecture::NEURAL.to_vec(),
            baseline: true,
        }
    }
}

/// Reduced-size profile: seeded subsets and a capped TFIDF vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeskScale {
    pub enabled: bool,
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    pub tfidf_max_features: usize,
}

impl Default for DeskScale {
    fn default() -> Self {
        DeskScale {
            enabled: false,
            train_size: Some(4000),
            test_size: Some(1000),
            tfidf_max_features: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub output_dir: PathBuf,
    /// Worker threads for grid cells; 1 runs cells serially.
    pub threads: usize,
    /// Records elapsed seconds per cell. Off by default because timings
    /// make otherwise identical reports differ.
    pub wall_time: bool,
    pub checkpoints: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            output_dir: PathBuf::from("results"),
            threads: 1,
            wall_time: false,
            checkpoints: true,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Single-line JSON of the settings that influence results; the output
    /// directory is left out so relocated runs report identically.
    pub fn effective_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(report) = value.get_mut("report").and_then(|r| r.as_object_mut()) {
            report.remove("output_dir");
            report.remove("threads");
        }
        value.to_string()
    }

    pub fn profile(&self) -> &'static str {
        if self.desk_scale.enabled {
            "desk-scale"
        } else {
            "full"
        }
    }

    /// TFIDF feature cap after applying the profile.
    pub fn tfidf_max_features(&self) -> Option<usize> {
        if self.desk_scale.enabled {
            Some(self.desk_scale.tfidf_max_features)
        } else {
            self.vectorizers.tfidf_max_features
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("{key}: {why}")));
        if !(self.corpus.split_ratio > 0.0 && self.corpus.split_ratio < 1.0) {
            return bad("corpus.split_ratio", "must lie strictly between 0 and 1");
        }
        if self.vectorizers.onehot_vocab < 2 {
            return bad("vectorizers.onehot_vocab", "must be at least 2");
        }
        if self.vectorizers.onehot_len == 0 {
            return bad("vectorizers.onehot_len", "must be positive");
        }
        if self.vectorizers.tfidf_max_features.is_some_and(|m| m < 2) {
            return bad("vectorizers.tfidf_max_features", "must be at least 2");
        }
        self.embeddings
            .word2vec
            .validate()
            .or_else(|e| bad("embeddings.word2vec", &e.to_string()))?;
        self.embeddings
            .doc2vec
            .validate()
            .or_else(|e| bad("embeddings.doc2vec", &e.to_string()))?;
        if self.train.epochs == 0 {
            return bad("train.epochs", "must be positive");
        }
        if self.train.batch == 0 {
            return bad("train.batch", "must be positive");
        }
        if !(self.train.lr > 0.0 && self.train.lr.is_finite()) {
            return bad("train.lr", "must be a positive number");
        }
        if self.models.kernel == 0 || self.models.frame_size == 0 || self.models.embed_dim == 0 {
            return bad("models", "kernel, frame_size and embed_dim must be positive");
        }
        if self.models.rnn_hidden == 0 || self.models.cnn_filters.contains(&0) {
            return bad("models", "rnn_hidden and cnn_filters must be positive");
        }
        for (key, rate) in [
            ("models.cnn_dropout", self.models.cnn_dropout),
            ("models.rnn_dropout", self.models.rnn_dropout),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return bad(key, "must lie in [0, 1)");
            }
        }
        if self.grid.architectures.contains(&Architecture::Baseline) {
            return bad("grid.architectures", "use grid.baseline for the majority baseline");
        }
        if self.desk_scale.tfidf_max_features < 2 {
            return bad("desk_scale.tfidf_max_features", "must be at least 2");
        }
        if self.desk_scale.train_size == Some(0) || self.desk_scale.test_size == Some(0) {
            return bad("desk_scale", "subset sizes must be positive");
        }
        if self.report.threads == 0 {
            return bad("report.threads", "must be positive");
        }
        Ok(())
    }
}
