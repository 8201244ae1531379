//! The three classifier architectures and the adapters that feed each
//! representation into them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{LayerSpec, LossKind, Network, Real, Tensor};
use crate::vectorizers::{FeatureVector, IdSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Onehot,
    Tfidf,
    W2vAvg,
    D2v,
}

impl Representation {
    pub const ALL: [Representation; 4] = [
        Representation::Onehot,
        Representation::Tfidf,
        Representation::W2vAvg,
        Representation::D2v,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Onehot => "onehot",
            Representation::Tfidf => "tfidf",
            Representation::W2vAvg => "w2v_avg",
            Representation::D2v => "d2v",
        }
    }

    /// Column heading used in markdown tables.
    pub fn title(self) -> &'static str {
        match self {
            Representation::Onehot => "One-hot",
            Representation::Tfidf => "TFIDF",
            Representation::W2vAvg => "Word2Vec",
            Representation::D2v => "Doc2Vec",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Representation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown representation {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Ann,
    Cnn,
    Rnn,
    /// Majority-class predictor; has no network.
    Baseline,
}

impl Architecture {
    pub const NEURAL: [Architecture; 3] = [Architecture::Ann, Architecture::Cnn, Architecture::Rnn];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Ann => "ann",
            Architecture::Cnn => "cnn",
            Architecture::Rnn => "rnn",
            Architecture::Baseline => "baseline",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Architecture::Ann => "ANN",
            Architecture::Cnn => "CNN",
            Architecture::Rnn => "Bi-LSTM",
            Architecture::Baseline => "Majority baseline",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Architecture::Ann,
            Architecture::Cnn,
            Architecture::Rnn,
            Architecture::Baseline,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown architecture {s:?}")))
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelOptions {
    pub ann_max_width: usize,
    pub ann_min_width: usize,
    pub kernel: usize,
    pub cnn_filters: [usize; 2],
    pub cnn_dropout: f64,
    pub rnn_hidden: usize,
    pub rnn_dropout: f64,
    pub embed_dim: usize,
    pub frame_size: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            ann_max_width: 1024,
            ann_min_width: 16,
            kernel: 5,
            cnn_filters: [128, 64],
            cnn_dropout: 0.5,
            rnn_hidden: 100,
            rnn_dropout: 0.3,
            embed_dim: 64,
            frame_size: 10,
        }
    }
}

/// Hidden widths for the feed-forward net: half the input (capped), then
/// halving until the next width would drop below the minimum.
pub fn ann_widths(input_dim: usize) -> Vec<usize> {
    let opts = ModelOptions::default();
    ann_widths_with(input_dim, opts.ann_max_width, opts.ann_min_width)
}

pub fn ann_widths_with(input_dim: usize, max_width: usize, min_width: usize) -> Vec<usize> {
    let mut widths = Vec::new();
    let mut w = input_dim.div_ceil(2).min(max_width);
    while w >= min_width && w > 0 {
        widths.push(w);
        w = w.div_ceil(2);
        if widths.last() == Some(&w) {
            break;
        }
    }
    widths
}

pub fn build_ann(input_dim: usize, opts: &ModelOptions) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    let mut prev = input_dim;
    for w in ann_widths_with(input_dim, opts.ann_max_width, opts.ann_min_width) {
        layers.push(LayerSpec::Dense { inputs: prev, outputs: w });
        layers.push(LayerSpec::Relu);
        prev = w;
    }
    layers.push(LayerSpec::Dense { inputs: prev, outputs: 1 });
    layers.push(LayerSpec::Sigmoid);
    layers
}

pub fn build_cnn(seq_len: usize, in_channels: usize, opts: &ModelOptions) -> Result<Vec<LayerSpec>> {
    let k = opts.kernel;
    let min_len = 2 * k - 1;
    if seq_len < min_len {
        return Err(Error::LayerConfig {
            layer: "cnn".into(),
            reason: format!(
                "sequence length {seq_len} is too short for two kernel-{k} convolutions; need at least {min_len}"
            ),
        });
    }
    let [f1, f2] = opts.cnn_filters;
    Ok(vec![
        LayerSpec::Conv1d { kernel: k, in_channels, filters: f1 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: opts.cnn_dropout },
        LayerSpec::Conv1d { kernel: k, in_channels: f1, filters: f2 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: opts.cnn_dropout },
        LayerSpec::GlobalMaxPool,
        LayerSpec::Dense { inputs: f2, outputs: 2 },
    ])
}

pub fn build_rnn(seq_len: usize, in_channels: usize, opts: &ModelOptions) -> Result<Vec<LayerSpec>> {
    if seq_len == 0 {
        return Err(Error::LayerConfig {
            layer: "rnn".into(),
            reason: "sequence length must be at least 1".into(),
        });
    }
    Ok(vec![
        LayerSpec::BiLstm { inputs: in_channels, hidden: opts.rnn_hidden },
        LayerSpec::Dropout { rate: opts.rnn_dropout },
        LayerSpec::Dense { inputs: 2 * opts.rnn_hidden, outputs: 1 },
        LayerSpec::Sigmoid,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetForm {
    Flat,
    IdSequence,
    Framed,
}

pub fn target_form(representation: Representation, architecture: Architecture) -> Result<TargetForm> {
    use Architecture::*;
    match (representation, architecture) {
        (_, Baseline) => Err(Error::InvalidArgument("the baseline takes no network input".into())),
        (_, Ann) => Ok(TargetForm::Flat),
        (Representation::Onehot, Cnn | Rnn) => Ok(TargetForm::IdSequence),
        (_, Cnn | Rnn) => Ok(TargetForm::Framed),
    }
}

/// How one representation's output becomes one network input example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterDescriptor {
    pub representation: Representation,
    pub form: TargetForm,
    /// Vector dimension, or sequence length for id sequences.
    pub source_dim: usize,
    pub frame_size: Option<usize>,
}

impl AdapterDescriptor {
    /// The adapter table. `source_dim` is the k-hot bag dimension for
    /// one-hot into the ANN, the sequence length for one-hot into the CNN
    /// or RNN, and the vector dimension otherwise.
    pub fn new(
        representation: Representation,
        architecture: Architecture,
        source_dim: usize,
        opts: &ModelOptions,
    ) -> Result<Self> {
        let form = target_form(representation, architecture)?;
        let frame_size = match (form, architecture) {
            (TargetForm::Framed, Architecture::Cnn) => Some(1),
            (TargetForm::Framed, _) => Some(opts.frame_size),
            _ => None,
        };
        if source_dim == 0 || frame_size == Some(0) {
            return Err(Error::InvalidArgument("adapter dimensions must be positive".into()));
        }
        Ok(AdapterDescriptor {
            representation,
            form,
            source_dim,
            frame_size,
        })
    }

    /// Shape of one example.
    pub fn input_shape(&self) -> Vec<usize> {
        match (self.form, self.frame_size) {
            (TargetForm::Framed, Some(f)) => vec![self.source_dim.div_ceil(f), f],
            _ => vec![self.source_dim],
        }
    }

    fn example_len(&self) -> usize {
        self.input_shape().iter().product()
    }

    /// Writes one example into `out`, which must be zeroed and of
    /// [`input_shape`](Self::input_shape) size.
    pub fn write_example<T: Real>(&self, encoded: &Encoded, out: &mut [T]) -> Result<()> {
        let mismatch = |what: String| Err(Error::Shape(format!("adapter {:?}: {what}", self.form)));
        match (self.form, encoded) {
            (TargetForm::IdSequence, Encoded::Ids(seq)) => {
                if seq.len() != self.source_dim {
                    return mismatch(format!("sequence of {} ids, expected {}", seq.len(), self.source_dim));
                }
                for (o, &id) in out.iter_mut().zip(&seq.ids) {
                    *o = T::of(id as f64);
                }
            }
            (TargetForm::Flat | TargetForm::Framed, Encoded::Vector(v)) => {
                if v.dim() != self.source_dim {
                    return mismatch(format!("vector of dim {}, expected {}", v.dim(), self.source_dim));
                }
                v.write_into(&mut out[..self.source_dim]);
            }
            _ => return mismatch("wrong encoding kind".into()),
        }
        Ok(())
    }
}

/// A document after representation, before adaptation.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoded {
    Ids(IdSequence),
    Vector(FeatureVector),
}

/// Stacks examples into a `[B, ...input_shape]` batch.
pub fn adapt<T: Real>(examples: &[&Encoded], adapter: &AdapterDescriptor) -> Result<Tensor<T>> {
    let len = adapter.example_len();
    let mut shape = vec![examples.len()];
    shape.extend(adapter.input_shape());
    let mut data = vec![T::zero(); examples.len() * len];
    for (e, out) in examples.iter().zip(data.chunks_exact_mut(len)) {
        adapter.write_example(e, out)?;
    }
    Tensor::new(shape, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputConvention {
    SigmoidScalar,
    Softmax2,
}

/// Everything needed to rebuild a classifier's parameter shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub adapter: AdapterDescriptor,
    pub layers: Vec<LayerSpec>,
    pub loss: LossKind,
    pub output: OutputConvention,
}

impl ModelSpec {
    /// `vocab_size` is required when the adapter produces id sequences.
    pub fn new(
        architecture: Architecture,
        adapter: AdapterDescriptor,
        vocab_size: Option<usize>,
        opts: &ModelOptions,
    ) -> Result<Self> {
        let mut layers = Vec::new();
        let shape = adapter.input_shape();
        let (seq_len, channels) = match adapter.form {
            TargetForm::IdSequence => {
                let vocab = vocab_size.ok_or_else(|| {
                    Error::InvalidArgument("id-sequence input needs a vocabulary size".into())
                })?;
                layers.push(LayerSpec::Embedding { vocab, dim: opts.embed_dim });
                (shape[0], opts.embed_dim)
            }
            TargetForm::Framed => (shape[0], shape[1]),
            TargetForm::Flat => (0, shape[0]),
        };
        let (body, loss, output) = match architecture {
            Architecture::Ann if adapter.form == TargetForm::Flat => (
                build_ann(channels, opts),
                LossKind::Bce,
                OutputConvention::SigmoidScalar,
            ),
            Architecture::Cnn if adapter.form != TargetForm::Flat => (
                build_cnn(seq_len, channels, opts)?,
                LossKind::SoftmaxCe,
                OutputConvention::Softmax2,
            ),
            Architecture::Rnn if adapter.form != TargetForm::Flat => (
                build_rnn(seq_len, channels, opts)?,
                LossKind::Bce,
                OutputConvention::SigmoidScalar,
            ),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "no model for {architecture} with {:?} input",
                    adapter.form
                )))
            }
        };
        layers.extend(body);
        Ok(ModelSpec {
            architecture,
            adapter,
            layers,
            loss,
            output,
        })
    }

    pub fn build<T: Real>(&self, seed: u64) -> Result<Network<T>> {
        Network::build(&self.layers, seed)
    }

    /// Output shape for a batch of `batch` examples.
    pub fn output_shape<T: Real>(&self, net: &Network<T>, batch: usize) -> Result<Vec<usize>> {
        let mut shape = vec![batch];
        shape.extend(self.adapter.input_shape());
        net.output_shape(&shape)
    }
}
