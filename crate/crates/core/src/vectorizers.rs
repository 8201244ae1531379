//! Count-based document encoders.
//!
//! All of them are fit on training documents only; transforming held-out
//! documents reads the fitted state and never extends it.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textprep::TokenList;

/// Reserved id for padding and for tokens outside the vocabulary.
pub const OOV_ID: u32 = 0;

const OOV_TOKEN: &str = "<oov>";
const VOCAB_MAGIC: &str = "fakenews-vocab";
const TFIDF_MAGIC: &str = "fakenews-tfidf";
const FORMAT_VERSION: u32 = 1;

/// Token ↔ id map ranked by descending corpus frequency.
///
/// Id 0 is reserved for padding and out-of-vocabulary tokens; real tokens
/// occupy `1..size`. Ties in frequency are broken lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    index: HashMap<String, u32>,
    tokens: Vec<String>,
    counts: Vec<u64>,
    df: Vec<u64>,
    n_docs: usize,
}

impl Vocabulary {
    /// Keeps the `max_size - 1` most frequent tokens; `None` keeps all.
    pub fn build(docs: &[TokenList], max_size: Option<usize>) -> Result<Vocabulary> {
        Self::build_with_min_count(docs, max_size, 1)
    }

    pub fn build_with_min_count(
        docs: &[TokenList],
        max_size: Option<usize>,
        min_count: u64,
    ) -> Result<Vocabulary> {
        if let Some(m) = max_size {
            if m < 2 {
                return Err(Error::InvalidArgument(format!(
                    "vocabulary max_size must be at least 2, got {m}"
                )));
            }
        }
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }

        let mut stats: HashMap<&str, (u64, u64)> = HashMap::new();
        for doc in docs {
            let mut last_doc: HashMap<&str, ()> = HashMap::new();
            for tok in doc {
                let entry = stats.entry(tok.as_str()).or_insert((0, 0));
                entry.0 += 1;
                if last_doc.insert(tok.as_str(), ()).is_none() {
                    entry.1 += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, u64, u64)> = stats
            .into_iter()
            .filter(|&(_, (count, _))| count >= min_count)
            .map(|(t, (c, d))| (t, c, d))
            .collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if let Some(m) = max_size {
            ranked.truncate(m - 1);
        }

        let mut vocab = Vocabulary {
            index: HashMap::with_capacity(ranked.len()),
            tokens: vec![OOV_TOKEN.to_string()],
            counts: vec![0],
            df: vec![0],
            n_docs: docs.len(),
        };
        for (tok, count, df) in ranked {
            vocab.index.insert(tok.to_string(), vocab.tokens.len() as u32);
            vocab.tokens.push(tok.to_string());
            vocab.counts.push(count);
            vocab.df.push(df);
        }
        Ok(vocab)
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    /// Id for a token, or [`OOV_ID`].
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(OOV_ID)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        match id {
            OOV_ID => None,
            _ => self.tokens.get(id as usize).map(String::as_str),
        }
    }

    /// Corpus frequency of the token with this id.
    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    /// Number of training documents containing the token with this id.
    pub fn df(&self, id: u32) -> u64 {
        self.df[id as usize]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// `(id, token)` pairs for every real token in id order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (i as u32, t.as_str()))
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    fn render(&self, magic: &str, idf: Option<&[f64]>) -> String {
        let mut out = format!(
            "{magic} {FORMAT_VERSION} size={} docs={}\n",
            self.size(),
            self.n_docs
        );
        for (id, tok) in self.iter() {
            let i = id as usize;
            write!(out, "{tok}\t{id}\t{}\t{}", self.counts[i], self.df[i]).unwrap();
            if let Some(idf) = idf {
                write!(out, "\t{}", idf[i]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    fn parse(text: &str, magic: &str) -> Result<(Vocabulary, Vec<f64>)> {
        let bad = |reason: String| Error::format(magic, reason);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != magic {
            return Err(bad(format!("bad header {header:?}")));
        }
        if fields[1] != FORMAT_VERSION.to_string() {
            return Err(bad(format!("unsupported version {}", fields[1])));
        }
        let field = |f: &str, key: &str| -> Result<usize> {
            f.strip_prefix(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("bad header field {f:?}")))
        };
        let size = field(fields[2], "size=")?;
        let n_docs = field(fields[3], "docs=")?;

        let mut vocab = Vocabulary {
            index: HashMap::with_capacity(size),
            tokens: vec![OOV_TOKEN.to_string()],
            counts: vec![0],
            df: vec![0],
            n_docs,
        };
        let mut idf = vec![0.0];
        for (n, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            let parsed = (|| {
                let id: usize = cols.get(1)?.parse().ok()?;
                let count = cols.get(2)?.parse().ok()?;
                let df = cols.get(3)?.parse().ok()?;
                let weight = match cols.get(4) {
                    Some(v) => v.parse().ok()?,
                    None => 0.0,
                };
                Some((id, count, df, weight))
            })();
            let Some((id, count, df, weight)) = parsed else {
                return Err(bad(format!("line {}: {line:?}", n + 2)));
            };
            if id != vocab.tokens.len() {
                return Err(bad(format!("line {}: ids must be dense", n + 2)));
            }
            vocab.index.insert(cols[0].to_string(), id as u32);
            vocab.tokens.push(cols[0].to_string());
            vocab.counts.push(count);
            vocab.df.push(df);
            idf.push(weight);
        }
        if vocab.size() != size {
            return Err(bad(format!("header says {size} entries, found {}", vocab.size())));
        }
        Ok((vocab, idf))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render(VOCAB_MAGIC, None)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Vocabulary> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text, VOCAB_MAGIC)?.0)
    }

    pub fn to_text(&self) -> String {
        self.render(VOCAB_MAGIC, None)
    }
}

pub fn build_vocab(train_docs: &[TokenList], max_size: usize) -> Result<Vocabulary> {
    Vocabulary::build(train_docs, Some(max_size))
}

/// Fixed-length token-id sequence, left-padded with [`OOV_ID`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdSequence {
    pub ids: Vec<u32>,
}

impl IdSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Maps tokens to ids, keeps the last `len` ids and left-pads to `len`.
pub fn encode_onehot(tokens: &[String], vocab: &Vocabulary, len: usize) -> IdSequence {
    let ids = vocab.ids(tokens);
    let tail = &ids[ids.len().saturating_sub(len)..];
    let mut out = vec![OOV_ID; len - tail.len()];
    out.extend_from_slice(tail);
    IdSequence { ids: out }
}

/// A real vector stored densely or as sorted index/value pairs.
#[derive(Debug, Clone)]
pub enum FeatureVector {
    Dense(Vec<f64>),
    Sparse {
        dim: usize,
        indices: Vec<u32>,
        values: Vec<f64>,
    },
}

/// Below this fill ratio vectors are stored sparsely.
const SPARSE_DENSITY: f64 = 0.25;

impl FeatureVector {
    /// Builds from sorted, unique `(index, value)` pairs, picking the storage
    /// by density.
    pub fn from_pairs(dim: usize, pairs: Vec<(u32, f64)>) -> FeatureVector {
        debug_assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0));
        if dim > 0 && (pairs.len() as f64) < SPARSE_DENSITY * dim as f64 {
            let (indices, values) = pairs.into_iter().unzip();
            FeatureVector::Sparse {
                dim,
                indices,
                values,
            }
        } else {
            let mut dense = vec![0.0; dim];
            for (i, v) in pairs {
                dense[i as usize] = v;
            }
            FeatureVector::Dense(dense)
        }
    }

    pub fn zeros(dim: usize) -> FeatureVector {
        Self::from_pairs(dim, Vec::new())
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureVector::Dense(v) => v.len(),
            FeatureVector::Sparse { dim, .. } => *dim,
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            FeatureVector::Dense(v) => v[i],
            FeatureVector::Sparse {
                indices, values, ..
            } => indices
                .binary_search(&(i as u32))
                .map(|p| values[p])
                .unwrap_or(0.0),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, FeatureVector::Sparse { .. })
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.write_into(&mut out);
        out
    }

    /// Writes every component into `out`, which must be zeroed and of length
    /// `dim`.
    pub fn write_into<T: num_traits::Float>(&self, out: &mut [T]) {
        match self {
            FeatureVector::Dense(v) => {
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = T::from(x).unwrap();
                }
            }
            FeatureVector::Sparse {
                indices, values, ..
            } => {
                for (&i, &x) in indices.iter().zip(values) {
                    out[i as usize] = T::from(x).unwrap();
                }
            }
        }
    }

    pub fn norm(&self) -> f64 {
        let values = match self {
            FeatureVector::Dense(v) => v.as_slice(),
            FeatureVector::Sparse { values, .. } => values.as_slice(),
        };
        values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn nnz(&self) -> usize {
        match self {
            FeatureVector::Dense(v) => v.iter().filter(|x| **x != 0.0).count(),
            FeatureVector::Sparse { values, .. } => values.iter().filter(|x| **x != 0.0).count(),
        }
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        FeatureVector::Dense(v)
    }
}

impl PartialEq for FeatureVector {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && (0..self.dim()).all(|i| self.get(i) == other.get(i))
    }
}

/// Smoothed-idf TFIDF fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocab: Vocabulary,
    idf: Vec<f64>,
}

impl TfidfModel {
    /// Output dimension; component 0 is the out-of-vocabulary slot and is
    /// always zero.
    pub fn dim(&self) -> usize {
        self.vocab.size()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn idf(&self, id: u32) -> f64 {
        self.idf[id as usize]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self) -> String {
        self.vocab.render(TFIDF_MAGIC, Some(&self.idf))
    }

    pub fn load(path: &Path) -> Result<TfidfModel> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (vocab, idf) = Vocabulary::parse(&text, TFIDF_MAGIC)?;
        Ok(TfidfModel { vocab, idf })
    }

    /// Raw counts times idf, then L2-normalized. Unknown tokens are ignored.
    pub fn transform(&self, tokens: &[String]) -> FeatureVector {
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for tok in tokens {
            if let Some(id) = self.vocab.get(tok) {
                *counts.entry(id).or_default() += 1;
            }
        }
        let mut pairs: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(id, c)| (id, c as f64 * self.idf[id as usize]))
            .collect();
        pairs.sort_unstable_by_key(|p| p.0);
        let norm = pairs.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for p in &mut pairs {
                p.1 /= norm;
            }
        }
        FeatureVector::from_pairs(self.dim(), pairs)
    }
}

/// Fits vocabulary and `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
/// `max_features` caps the output dimension, out-of-vocabulary slot included.
pub fn fit_tfidf(train_docs: &[TokenList], max_features: Option<usize>) -> Result<TfidfModel> {
    let vocab = Vocabulary::build(train_docs, max_features)?;
    let n = vocab.n_docs() as f64;
    let idf = (0..vocab.size())
        .map(|i| match i {
            0 => 0.0,
            _ => ((1.0 + n) / (1.0 + vocab.df[i] as f64)).ln() + 1.0,
        })
        .collect();
    Ok(TfidfModel { vocab, idf })
}

pub fn transform_tfidf(model: &TfidfModel, tokens: &[String]) -> FeatureVector {
    model.transform(tokens)
}

/// Binary bag of token ids over the vocabulary; the out-of-vocabulary
/// component stays zero.
pub fn khot_bag(tokens: &[String], vocab: &Vocabulary) -> FeatureVector {
    let mut ids: Vec<u32> = vocab.ids(tokens).into_iter().filter(|&i| i != OOV_ID).collect();
    ids.sort_unstable();
    ids.dedup();
    FeatureVector::from_pairs(vocab.size(), ids.into_iter().map(|i| (i, 1.0)).collect())
}
