//! CBOW word vectors and PV-DM paragraph vectors trained with negative
//! sampling.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::Real;
use crate::seed::derive_seed_tokens;
use crate::textprep::TokenList;
use crate::vectorizers::{FeatureVector, Vocabulary, OOV_ID};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negative_k: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub min_count: u64,
    /// Set by the caller; never read from configuration files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            window: 5,
            negative_k: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            min_count: 1,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn word2vec() -> Self {
        TrainConfig::default()
    }

    pub fn doc2vec() -> Self {
        TrainConfig {
            dim: 300,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("embedding config: {what}")));
        if self.dim < 1 {
            return bad("dim must be at least 1");
        }
        if self.window < 1 || self.negative_k < 1 || self.epochs < 1 || self.min_count < 1 {
            return bad("window, negative_k, epochs and min_count must be positive");
        }
        if !(self.lr_end > 0.0 && self.lr_end < self.lr_start && self.lr_start.is_finite()) {
            return bad("need 0 < lr_end < lr_start");
        }
        Ok(())
    }
}

/// Loss and gradients of one negative-sampling objective
/// `-ln σ(w'_c·h) - Σ ln σ(-w'_n·h)` where `h` is the mean of the context
/// rows and the optional document vector.
#[derive(Debug, Clone)]
pub struct NsGrad<T> {
    pub loss: T,
    pub d_input: Vec<T>,
    pub d_output: Vec<T>,
    pub d_doc: Option<Vec<T>>,
}

#[derive(Debug, Clone, Default)]
struct Scratch<T> {
    h: Vec<T>,
    dh: Vec<T>,
    g: Vec<T>,
}

fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Forward pass and gradient pieces for one context. Leaves `h`, the
/// ascent direction `dh = Σ g·w'` and the per-target `g = label - σ(s)` in
/// the scratch. Returns `None` when the context is empty.
fn ns_core<T: Real>(
    input: &[T],
    output: &[T],
    dim: usize,
    context: &[u32],
    doc: Option<&[T]>,
    targets: &[(u32, bool)],
    s: &mut Scratch<T>,
) -> Option<T> {
    let n = context.len() + doc.is_some() as usize;
    if n == 0 {
        return None;
    }
    s.h.clear();
    s.h.resize(dim, T::zero());
    for &c in context {
        let row = &input[c as usize * dim..][..dim];
        s.h.iter_mut().zip(row).for_each(|(h, &v)| *h += v);
    }
    if let Some(d) = doc {
        s.h.iter_mut().zip(d).for_each(|(h, &v)| *h += v);
    }
    let inv = T::one() / T::of(n as f64);
    s.h.iter_mut().for_each(|h| *h *= inv);

    s.dh.clear();
    s.dh.resize(dim, T::zero());
    s.g.clear();
    let mut loss = T::zero();
    for &(t, positive) in targets {
        let row = &output[t as usize * dim..][..dim];
        let score: T = row.iter().zip(&s.h).map(|(&a, &b)| a * b).sum();
        let (label, l) = if positive {
            (T::one(), softplus(-score))
        } else {
            (T::zero(), softplus(score))
        };
        loss += l;
        let g = label - crate::neural::layer::sigmoid(score);
        s.dh.iter_mut().zip(row).for_each(|(d, &w)| *d += g * w);
        s.g.push(g);
    }
    Some(loss)
}

/// Exact loss and gradient of the negative-sampling objective with respect
/// to the input table, output table and document vector.
pub fn ns_loss_grad<T: Real>(
    input: &[T],
    output: &[T],
    dim: usize,
    context: &[u32],
    doc: Option<&[T]>,
    targets: &[(u32, bool)],
) -> NsGrad<T> {
    let mut s = Scratch::default();
    let mut grad = NsGrad {
        loss: T::zero(),
        d_input: vec![T::zero(); input.len()],
        d_output: vec![T::zero(); output.len()],
        d_doc: doc.map(|d| vec![T::zero(); d.len()]),
    };
    let Some(loss) = ns_core(input, output, dim, context, doc, targets, &mut s) else {
        return grad;
    };
    grad.loss = loss;
    let n = T::of((context.len() + doc.is_some() as usize) as f64);
    for (&(t, _), &g) in targets.iter().zip(&s.g) {
        let row = &mut grad.d_output[t as usize * dim..][..dim];
        row.iter_mut().zip(&s.h).for_each(|(d, &h)| *d -= g * h);
    }
    for &c in context {
        let row = &mut grad.d_input[c as usize * dim..][..dim];
        row.iter_mut().zip(&s.dh).for_each(|(d, &v)| *d -= v / n);
    }
    if let Some(dd) = grad.d_doc.as_mut() {
        dd.iter_mut().zip(&s.dh).for_each(|(d, &v)| *d -= v / n);
    }
    grad
}

/// Negative sampler drawing ids with probability proportional to
/// `count^0.75`.
#[derive(Debug, Clone)]
pub struct UnigramSampler {
    dist: WeightedIndex<f64>,
    probs: Vec<f64>,
}

impl UnigramSampler {
    pub fn new(vocab: &Vocabulary) -> Result<Self> {
        let weights: Vec<f64> = (1..vocab.size() as u32)
            .map(|id| (vocab.count(id) as f64).powf(0.75))
            .collect();
        let total: f64 = weights.iter().sum();
        let dist = WeightedIndex::new(&weights).map_err(|_| Error::EmptyCorpus)?;
        let mut probs = vec![0.0];
        probs.extend(weights.iter().map(|w| w / total));
        Ok(UnigramSampler { dist, probs })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        self.dist.sample(rng) as u32 + 1
    }

    /// Theoretical probability of drawing `id`.
    pub fn probability(&self, id: u32) -> f64 {
        self.probs[id as usize]
    }
}

/// Word input vectors `W`, output vectors `W'` and the sampling table.
///
/// Row `id` of each table belongs to vocabulary id `id`; row 0 (the
/// out-of-vocabulary slot) stays zero.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    dim: usize,
    input: Vec<f32>,
    output: Vec<f32>,
    sampler: UnigramSampler,
    epoch_loss: Vec<f64>,
}

impl EmbeddingTable {
    fn init(vocab: Vocabulary, dim: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let bound = 0.5 / dim as f32;
        let dist = Uniform::new_inclusive(-bound, bound).unwrap();
        let mut input = vec![0.0f32; vocab.size() * dim];
        input[dim..].iter_mut().for_each(|v| *v = dist.sample(rng));
        let output = vec![0.0f32; vocab.size() * dim];
        let sampler = UnigramSampler::new(&vocab)?;
        Ok(EmbeddingTable {
            vocab,
            dim,
            input,
            output,
            sampler,
            epoch_loss: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn sampler(&self) -> &UnigramSampler {
        &self.sampler
    }

    pub fn input_vectors(&self) -> &[f32] {
        &self.input
    }

    pub fn output_vectors(&self) -> &[f32] {
        &self.output
    }

    /// Mean loss per target over each training epoch.
    pub fn epoch_loss(&self) -> &[f64] {
        &self.epoch_loss
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.vocab.get(token).map(|id| self.row(id))
    }

    fn row(&self, id: u32) -> &[f32] {
        &self.input[id as usize * self.dim..][..self.dim]
    }

    /// Token ids with out-of-vocabulary tokens removed.
    fn known_ids(&self, tokens: &[String]) -> Vec<u32> {
        tokens
            .iter()
            .filter_map(|t| self.vocab.get(t))
            .collect()
    }

    fn draw_targets(&self, center: u32, k: usize, rng: &mut ChaCha8Rng, out: &mut Vec<(u32, bool)>) {
        out.clear();
        out.push((center, true));
        for _ in 0..k {
            let n = self.sampler.sample(rng);
            if n != center {
                out.push((n, false));
            }
        }
    }

    /// Writes the text vectors format: a `count dim` header, then one
    /// `token v1 ... vd` line per vocabulary token in id order.
    pub fn to_text(&self) -> String {
        let rows = self.vocab.iter().map(|(id, tok)| (tok, self.row(id)));
        vectors_text(self.vocab.size() - 1, self.dim, rows)
    }

    pub fn save_text(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn vectors_text<'a>(
    count: usize,
    dim: usize,
    rows: impl Iterator<Item = (&'a str, &'a [f32])>,
) -> String {
    let mut out = format!("{count} {dim}\n");
    for (key, row) in rows {
        out.push_str(key);
        for v in row {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Keyed vectors read back from the text vectors format.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedVectors {
    pub keys: Vec<String>,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl KeyedVectors {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::format("text vectors", reason);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let mut parts = header.split_whitespace().map(str::parse::<usize>);
        let (Some(Ok(count)), Some(Ok(dim)), None) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(bad(format!("bad header {header:?}")));
        };
        let mut keys = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (n, line) in lines.enumerate() {
            let mut fields = line.split(' ');
            let key = fields.next().unwrap_or_default();
            let before = data.len();
            for f in fields {
                data.push(
                    f.parse::<f32>()
                        .map_err(|_| bad(format!("line {}: bad value {f:?}", n + 2)))?,
                );
            }
            if data.len() - before != dim {
                return Err(bad(format!("line {}: expected {dim} values", n + 2)));
            }
            keys.push(key.to_string());
        }
        if keys.len() != count {
            return Err(bad(format!("header says {count} rows, found {}", keys.len())));
        }
        Ok(KeyedVectors { keys, dim, data })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        let i = self.keys.iter().position(|k| k == key)?;
        Some(&self.data[i * self.dim..][..self.dim])
    }
}

fn lr_at(cfg: &TrainConfig, step: usize, total: usize) -> f32 {
    let frac = if total == 0 { 0.0 } else { step as f64 / total as f64 };
    (cfg.lr_start - (cfg.lr_start - cfg.lr_end) * frac) as f32
}

/// Context ids for position `i`: a symmetric window clipped at the
/// document boundary.
fn window(ids: &[u32], i: usize, w: usize, out: &mut Vec<u32>) {
    out.clear();
    let lo = i.saturating_sub(w);
    let hi = (i + w + 1).min(ids.len());
    out.extend(ids[lo..i].iter().chain(&ids[i + 1..hi]));
}

fn add_scaled(dst: &mut [f32], src: &[f32], a: f32) {
    dst.iter_mut().zip(src).for_each(|(d, &s)| *d += a * s);
}

/// Applies the step left in the scratch by [`ns_core`]. Output rows take
/// a plain gradient step; every context row, and the document vector,
/// receives the whole error `dh` rather than its `1/n` share, i.e. a step
/// of `-lr * n * gradient`.
fn apply_step(
    table: &mut EmbeddingTable,
    context: &[u32],
    doc: Option<&mut [f32]>,
    targets: &[(u32, bool)],
    s: &Scratch<f32>,
    lr: f32,
) {
    let dim = table.dim;
    for (&(t, _), &g) in targets.iter().zip(&s.g) {
        add_scaled(&mut table.output[t as usize * dim..][..dim], &s.h, lr * g);
    }
    for &c in context {
        add_scaled(&mut table.input[c as usize * dim..][..dim], &s.dh, lr);
    }
    if let Some(d) = doc {
        add_scaled(d, &s.dh, lr);
    }
}

fn build_vocab(docs: &[TokenList], cfg: &TrainConfig) -> Result<Vocabulary> {
    cfg.validate()?;
    if docs.iter().all(|d| d.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    Vocabulary::build_with_min_count(docs, None, cfg.min_count)
}

/// Trains CBOW word vectors.
pub fn train_word2vec(docs: &[TokenList], cfg: &TrainConfig) -> Result<EmbeddingTable> {
    let vocab = build_vocab(docs, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = EmbeddingTable::init(vocab, cfg.dim, &mut rng)?;
    let sentences: Vec<Vec<u32>> = docs.iter().map(|d| table.known_ids(d)).collect();
    let positions: usize = sentences.iter().map(Vec::len).sum();
    let total = positions * cfg.epochs;

    let mut s = Scratch::default();
    let (mut ctx, mut targets) = (Vec::new(), Vec::new());
    let mut step = 0;
    for _ in 0..cfg.epochs {
        let (mut loss, mut pairs) = (0.0f64, 0usize);
        for ids in &sentences {
            for (i, &center) in ids.iter().enumerate() {
                let lr = lr_at(cfg, step, total);
                step += 1;
                window(ids, i, cfg.window, &mut ctx);
                if ctx.is_empty() {
                    continue;
                }
                table.draw_targets(center, cfg.negative_k, &mut rng, &mut targets);
                let l = ns_core(&table.input, &table.output, cfg.dim, &ctx, None, &targets, &mut s)
                    .expect("non-empty context");
                loss += l as f64;
                pairs += targets.len();
                apply_step(&mut table, &ctx, None, &targets, &s, lr);
            }
        }
        table
            .epoch_loss
            .push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
    }
    Ok(table)
}

fn mean_rows<'a>(rows: impl Iterator<Item = &'a [f32]>, dim: usize) -> FeatureVector {
    let mut acc = vec![0.0f64; dim];
    let mut n = 0usize;
    for row in rows {
        acc.iter_mut().zip(row).for_each(|(a, &v)| *a += v as f64);
        n += 1;
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    FeatureVector::Dense(acc)
}

/// Mean of the word vectors of the in-vocabulary tokens; zero when none
/// are known.
pub fn doc_vector_avg(tokens: &[String], table: &EmbeddingTable) -> FeatureVector {
    let ids = table.known_ids(tokens);
    mean_rows(ids.iter().map(|&id| table.row(id)), table.dim)
}

/// PV-DM model: word tables plus one vector per training document.
#[derive(Debug, Clone)]
pub struct DocEmbeddingModel {
    words: EmbeddingTable,
    doc_ids: Vec<String>,
    docs: Vec<f32>,
    cfg: TrainConfig,
}

impl DocEmbeddingModel {
    pub fn words(&self) -> &EmbeddingTable {
        &self.words
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.words.dim
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Replaces the default positional ids (`"0"`, `"1"`, ...).
    pub fn set_doc_ids(&mut self, ids: Vec<String>) -> Result<()> {
        if ids.len() != self.doc_ids.len() {
            return Err(Error::InvalidArgument(format!(
                "{} ids for {} documents",
                ids.len(),
                self.doc_ids.len()
            )));
        }
        self.doc_ids = ids;
        Ok(())
    }

    /// Stored vector of training document `index`.
    pub fn doc_vector(&self, index: usize) -> &[f32] {
        &self.docs[index * self.dim()..][..self.dim()]
    }

    pub fn epoch_loss(&self) -> &[f64] {
        &self.words.epoch_loss
    }

    fn fresh_vector(&self, rng: &mut ChaCha8Rng) -> Vec<f32> {
        let bound = 0.5 / self.dim() as f32;
        let dist = Uniform::new_inclusive(-bound, bound).unwrap();
        (0..self.dim()).map(|_| dist.sample(rng)).collect()
    }

    /// Embeds an unseen document by gradient steps on a fresh document
    /// vector, leaving every word and output parameter untouched. The
    /// initial vector and the negatives are seeded from the model seed and
    /// the tokens, so repeated calls agree.
    pub fn infer(&self, tokens: &[String], epochs: usize) -> FeatureVector {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_tokens(self.cfg.seed, tokens));
        let mut doc = self.fresh_vector(&mut rng);
        let ids = self.words.known_ids(tokens);
        let total = ids.len() * epochs;
        let dim = self.dim();
        let mut s = Scratch::default();
        let (mut ctx, mut targets) = (Vec::new(), Vec::new());
        let mut step = 0;
        for _ in 0..epochs {
            for (i, &center) in ids.iter().enumerate() {
                let lr = lr_at(&self.cfg, step, total);
                step += 1;
                window(&ids, i, self.cfg.window, &mut ctx);
                self.words
                    .draw_targets(center, self.cfg.negative_k, &mut rng, &mut targets);
                ns_core(
                    &self.words.input,
                    &self.words.output,
                    dim,
                    &ctx,
                    Some(&doc),
                    &targets,
                    &mut s,
                );
                add_scaled(&mut doc, &s.dh, lr);
            }
        }
        FeatureVector::Dense(doc.into_iter().map(f64::from).collect())
    }

    /// Text vectors format keyed by document id.
    pub fn doc_vectors_text(&self) -> String {
        let rows = (0..self.len()).map(|i| (self.doc_ids[i].as_str(), self.doc_vector(i)));
        vectors_text(self.len(), self.dim(), rows)
    }

    pub fn save_doc_vectors(&self, path: &Path) -> Result<()> {
        fs::write(path, self.doc_vectors_text()).map_err(|e| Error::io(path, e))
    }
}

/// Trains PV-DM paragraph vectors; document vectors are index-aligned with
/// `docs`.
pub fn train_doc2vec(docs: &[TokenList], cfg: &TrainConfig) -> Result<DocEmbeddingModel> {
    let vocab = build_vocab(docs, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let words = EmbeddingTable::init(vocab, cfg.dim, &mut rng)?;
    let mut model = DocEmbeddingModel {
        words,
        doc_ids: (0..docs.len()).map(|i| i.to_string()).collect(),
        docs: Vec::new(),
        cfg: *cfg,
    };
    let dim = cfg.dim;
    model.docs = (0..docs.len())
        .flat_map(|_| model.fresh_vector(&mut rng))
        .collect();

    let sentences: Vec<Vec<u32>> = docs.iter().map(|d| model.words.known_ids(d)).collect();
    let positions: usize = sentences.iter().map(Vec::len).sum();
    let total = positions * cfg.epochs;

    let mut s = Scratch::default();
    let (mut ctx, mut targets) = (Vec::new(), Vec::new());
    let mut step = 0;
    for _ in 0..cfg.epochs {
        let (mut loss, mut pairs) = (0.0f64, 0usize);
        for (d, ids) in sentences.iter().enumerate() {
            for (i, &center) in ids.iter().enumerate() {
                let lr = lr_at(cfg, step, total);
                step += 1;
                window(ids, i, cfg.window, &mut ctx);
                model
                    .words
                    .draw_targets(center, cfg.negative_k, &mut rng, &mut targets);
                let doc = &mut model.docs[d * dim..][..dim];
                let l = ns_core(
                    &model.words.input,
                    &model.words.output,
                    dim,
                    &ctx,
                    Some(doc),
                    &targets,
                    &mut s,
                )
                .expect("document vector is always in context");
                loss += l as f64;
                pairs += targets.len();
                apply_step(&mut model.words, &ctx, Some(doc), &targets, &s, lr);
            }
        }
        model
            .words
            .epoch_loss
            .push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
    }
    Ok(model)
}

/// Out-of-vocabulary id is never drawn or trained.
const _: () = assert!(OOV_ID == 0);
