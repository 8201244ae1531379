use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::corpus::{self, LabeledCorpus, LiarColumns, Source};
use crate::embeddings::{doc_vector_avg, train_doc2vec, train_word2vec, DocEmbeddingModel, EmbeddingTable};
use crate::error::{Error, Result};
use crate::models::{Encoded, Representation, TargetForm};
use crate::seed::derive_seed;
use crate::textprep::{Preprocessor, StopList, TokenList};
use crate::vectorizers::{encode_onehot, fit_tfidf, khot_bag, TfidfModel, Vocabulary};

pub fn stop_list(cfg: &ExperimentConfig) -> Result<StopList> {
    match &cfg.textprep.stopwords {
        Some(path) => StopList::from_file(path),
        None => Ok(StopList::bundled()),
    }
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("corpus.{key} is not set")))
}

fn liar_columns(cfg: &ExperimentConfig) -> LiarColumns {
    LiarColumns {
        label_col: cfg.corpus.liar_label_col,
        statement_col: cfg.corpus.liar_statement_col,
        ..LiarColumns::default()
    }
}

/// Loads only the training side. LIAR reads `train.tsv` alone; the other
/// corpora have no separate training file, so this is the seeded split's
/// training half.
pub fn load_train(cfg: &ExperimentConfig, source: Source) -> Result<LabeledCorpus> {
    match source {
        Source::Liar => {
            let dir = required(&cfg.corpus.liar_dir, "liar_dir")?;
            let train = corpus::load_liar(&dir.join("train.tsv"), liar_columns(cfg))?;
            Ok(subsample(train, cfg.desk_scale.train_size, cfg, source, "train"))
        }
        _ => load_split(cfg, source).map(|s| s.0),
    }
}

fn subsample(
    c: LabeledCorpus,
    size: Option<usize>,
    cfg: &ExperimentConfig,
    source: Source,
    side: &str,
) -> LabeledCorpus {
    match size {
        Some(n) if cfg.desk_scale.enabled && n < c.len() => {
            c.sample(n, derive_seed(cfg.seed, &format!("{source}/subset/{side}")))
        }
        _ => c,
    }
}

/// Train and test corpora plus the number of rows dropped while loading.
pub fn load_split(cfg: &ExperimentConfig, source: Source) -> Result<(LabeledCorpus, LabeledCorpus, usize)> {
    let (train, test, dropped) = match source {
        Source::Liar => {
            let dir = required(&cfg.corpus.liar_dir, "liar_dir")?;
            let cols = liar_columns(cfg);
            let train = corpus::load_liar(&dir.join("train.tsv"), cols)?;
            let test = corpus::load_liar(&dir.join("test.tsv"), cols)?;
            let dropped = train.drop_count() + test.drop_count();
            (train, test, dropped)
        }
        Source::Kaggle | Source::Fixture => {
            let full = match source {
                Source::Kaggle => corpus::load_kaggle(required(&cfg.corpus.kaggle_csv, "kaggle_csv")?)?,
                _ => match &cfg.corpus.fixture {
                    Some(path) => corpus::load_fixture(path)?,
                    None => corpus::bundled_fixture(),
                },
            };
            let pair = corpus::split(
                &full,
                cfg.corpus.split_ratio,
                derive_seed(cfg.seed, &format!("{source}/split")),
            )?;
            (pair.train, pair.test, full.drop_count())
        }
    };
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok((
        subsample(train, cfg.desk_scale.train_size, cfg, source, "train"),
        subsample(test, cfg.desk_scale.test_size, cfg, source, "test"),
        dropped,
    ))
}

/// One side of a dataset after preprocessing.
#[derive(Debug, Clone, Default)]
pub struct Side {
    pub ids: Vec<String>,
    pub tokens: Vec<TokenList>,
    pub labels: Vec<u8>,
}

impl Side {
    pub fn from_corpus(c: &LabeledCorpus, pre: &Preprocessor) -> Side {
        Side {
            ids: c.docs().iter().map(|d| d.id.clone()).collect(),
            tokens: c.docs().par_iter().map(|d| pre.preprocess(&d.content)).collect(),
            labels: c.labels().map(u8::from).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub source: Source,
    pub train: Side,
    pub test: Side,
    pub drop_count: usize,
}

impl PreparedDataset {
    pub fn load(cfg: &ExperimentConfig, source: Source, pre: &Preprocessor) -> Result<Self> {
        let (train, test, drop_count) = load_split(cfg, source)?;
        Ok(Self::from_corpora(source, &train, &test, drop_count, pre))
    }

    pub fn from_corpora(
        source: Source,
        train: &LabeledCorpus,
        test: &LabeledCorpus,
        drop_count: usize,
        pre: &Preprocessor,
    ) -> Self {
        PreparedDataset {
            source,
            train: Side::from_corpus(train, pre),
            test: Side::from_corpus(test, pre),
            drop_count,
        }
    }
}

/// A representation fitted on training documents only.
#[derive(Debug, Clone)]
pub enum Fitted {
    Onehot(Vocabulary),
    Tfidf(TfidfModel),
    W2v(EmbeddingTable),
    D2v(DocEmbeddingModel),
}

impl Fitted {
    pub fn fit(rep: Representation, train: &Side, cfg: &ExperimentConfig, seed: u64) -> Result<Fitted> {
        Ok(match rep {
            Representation::Onehot => {
                Fitted::Onehot(Vocabulary::build(&train.tokens, Some(cfg.vectorizers.onehot_vocab))?)
            }
            Representation::Tfidf => Fitted::Tfidf(fit_tfidf(&train.tokens, cfg.tfidf_max_features())?),
            Representation::W2vAvg => {
                let tc = crate::embeddings::TrainConfig { seed, ..cfg.embeddings.word2vec };
                Fitted::W2v(train_word2vec(&train.tokens, &tc)?)
            }
            Representation::D2v => {
                let tc = crate::embeddings::TrainConfig { seed, ..cfg.embeddings.doc2vec };
                let mut model = train_doc2vec(&train.tokens, &tc)?;
                model.set_doc_ids(train.ids.clone())?;
                Fitted::D2v(model)
            }
        })
    }

    pub fn representation(&self) -> Representation {
        match self {
            Fitted::Onehot(_) => Representation::Onehot,
            Fitted::Tfidf(_) => Representation::Tfidf,
            Fitted::W2v(_) => Representation::W2vAvg,
            Fitted::D2v(_) => Representation::D2v,
        }
    }

    /// Vocabulary size for id-sequence inputs.
    pub fn vocab_size(&self) -> Option<usize> {
        match self {
            Fitted::Onehot(v) => Some(v.size()),
            _ => None,
        }
    }

    /// Adapter source dimension for the given target form.
    pub fn source_dim(&self, form: TargetForm, cfg: &ExperimentConfig) -> usize {
        match self {
            Fitted::Onehot(v) if form == TargetForm::Flat => v.size(),
            Fitted::Onehot(_) => cfg.vectorizers.onehot_len,
            Fitted::Tfidf(m) => m.dim(),
            Fitted::W2v(t) => t.dim(),
            Fitted::D2v(m) => m.dim(),
        }
    }

    /// Text serialization of every fitted parameter.
    pub fn serialize(&self) -> String {
        match self {
            Fitted::Onehot(v) => v.to_text(),
            Fitted::Tfidf(m) => m.to_text(),
            Fitted::W2v(t) => t.to_text(),
            Fitted::D2v(m) => format!("{}{}", m.words().to_text(), m.doc_vectors_text()),
        }
    }

    /// Encodes both sides for one target form. Training documents of a
    /// paragraph-vector model use their stored vectors; test documents are
    /// inferred.
    pub fn encode(&self, data: &PreparedDataset, form: TargetForm, cfg: &ExperimentConfig) -> (Vec<Encoded>, Vec<Encoded>) {
        let side = |s: &Side, train: bool| -> Vec<Encoded> {
            match self {
                Fitted::Onehot(v) if form == TargetForm::Flat => s
                    .tokens
                    .par_iter()
                    .map(|t| Encoded::Vector(khot_bag(t, v)))
                    .collect(),
                Fitted::Onehot(v) => s
                    .tokens
                    .par_iter()
                    .map(|t| Encoded::Ids(encode_onehot(t, v, cfg.vectorizers.onehot_len)))
                    .collect(),
                Fitted::Tfidf(m) => s.tokens.par_iter().map(|t| Encoded::Vector(m.transform(t))).collect(),
                Fitted::W2v(t) => s
                    .tokens
                    .par_iter()
                    .map(|tok| Encoded::Vector(doc_vector_avg(tok, t)))
                    .collect(),
                Fitted::D2v(m) if train => (0..s.len())
                    .map(|i| {
                        Encoded::Vector(crate::vectorizers::FeatureVector::Dense(
                            m.doc_vector(i).iter().map(|&v| v as f64).collect(),
                        ))
                    })
                    .collect(),
                Fitted::D2v(m) => s
                    .tokens
                    .par_iter()
                    .map(|t| Encoded::Vector(m.infer(t, cfg.embeddings.infer_epochs)))
                    .collect(),
            }
        };
        (side(&data.train, true), side(&data.test, false))
    }
}
