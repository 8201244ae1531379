use std::fmt;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::BiLstm;
use super::tensor::{gemm, Mat, Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense,
    Conv1D,
    GlobalMaxPool1D,
    Dropout,
    EmbeddingLookup,
    BiLstm,
    Activation,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: &'static str,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Real> Param<T> {
    pub fn new(name: &'static str, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { name, value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// One stage of a feed-forward stack with an analytic backward pass.
///
/// `backward` consumes the state cached by the most recent `forward`,
/// accumulates parameter gradients into [`Param::grad`] and returns the
/// gradient with respect to the layer input.
pub trait Layer<T: Real>: Send {
    fn kind(&self) -> LayerKind;

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>>;

    /// `forward` on an owned input, which the layer may overwrite or keep.
    fn forward_owned(&mut self, x: Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.forward(&x, mode)
    }

    /// `backward` on an owned gradient, which the layer may overwrite.
    fn backward_owned(&mut self, grad_out: Tensor<T>) -> Result<Tensor<T>> {
        self.backward(&grad_out)
    }

    /// Accumulates parameter gradients without forming the input gradient.
    fn backward_params(&mut self, grad_out: &Tensor<T>) -> Result<()> {
        self.backward(grad_out).map(drop)
    }

    fn params(&self) -> &[Param<T>] {
        &[]
    }

    fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut []
    }

    /// Output shape for an input of the given shape (batch included).
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    /// Resets any internal random stream.
    fn reseed(&mut self, _seed: u64) {}

    /// While frozen, stochastic layers replay their last random draw.
    fn freeze_randomness(&mut self, _frozen: bool) {}
}

fn no_cache(kind: LayerKind) -> Error {
    Error::InvalidArgument(format!("{kind}: backward called before forward"))
}

fn xavier<T: Real>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(shape, limit, rng)
}

fn bias_rows<T: Real>(shape: &[usize], bias: &[T]) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    while data.len() < n {
        data.extend_from_slice(bias);
    }
    Tensor::new(shape.to_vec(), data).expect("bias rows tile the shape")
}

pub(crate) fn uniform<T: Real>(shape: &[usize], limit: f64, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
    Tensor::from_fn(shape, |_| T::of(dist.sample(rng)))
}

/// Serializable description of a layer; enough to rebuild its parameter
/// shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    Conv1d { kernel: usize, in_channels: usize, filters: usize },
    GlobalMaxPool,
    Dropout { rate: f64 },
    Embedding { vocab: usize, dim: usize },
    BiLstm { inputs: usize, hidden: usize },
    Relu,
    Sigmoid,
}

impl LayerSpec {
    pub fn build<T: Real>(&self, rng: &mut ChaCha8Rng) -> Result<Box<dyn Layer<T>>> {
        Ok(match *self {
            LayerSpec::Dense { inputs, outputs } => Box::new(Dense::new(inputs, outputs, rng)),
            LayerSpec::Conv1d {
                kernel,
                in_channels,
                filters,
            } => Box::new(Conv1d::new(kernel, in_channels, filters, rng)?),
            LayerSpec::GlobalMaxPool => Box::new(GlobalMaxPool::default()),
            LayerSpec::Dropout { rate } => Box::new(Dropout::new(rate, rng.random())?),
            LayerSpec::Embedding { vocab, dim } => Box::new(EmbeddingLookup::new(vocab, dim, rng)),
            LayerSpec::BiLstm { inputs, hidden } => Box::new(BiLstm::new(inputs, hidden, rng)),
            LayerSpec::Relu => Box::new(Activation::new(ActivationKind::Relu)),
            LayerSpec::Sigmoid => Box::new(Activation::new(ActivationKind::Sigmoid)),
        })
    }
}

/// Fully connected layer `y = xW + b` on `[B, in]` inputs.
pub struct Dense<T> {
    inputs: usize,
    outputs: usize,
    params: [Param<T>; 2],
    input: Option<Tensor<T>>,
}

impl<T: Real> Dense<T> {
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = xavier(&[inputs, outputs], inputs, outputs, rng);
        Self::from_params(w, Tensor::zeros(&[outputs]))
    }

    pub fn from_params(w: Tensor<T>, b: Tensor<T>) -> Self {
        let (inputs, outputs) = (w.shape()[0], w.shape()[1]);
        Dense {
            inputs,
            outputs,
            params: [Param::new("weight", w), Param::new("bias", b)],
            input: None,
        }
    }
}

impl<T: Real> Layer<T> for Dense<T> {
    fn kind(&self) -> LayerKind {
        LayerKind::Dense
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [b, d] if *d == self.inputs => Ok(vec![*b, self.outputs]),
            _ => Err(Error::Shape(format!(
                "Dense expects [B, {}], got {input:?}",
                self.inputs
            ))),
        }
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.forward_owned(x.clone(), mode)
    }

    fn forward_owned(&mut self, x: Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let out_shape = self.output_shape(x.shape())?;
        let batch = out_shape[0];
        let bias = self.params[1].value.data();
        let mut y = bias_rows(&out_shape, bias);
        gemm(
            Mat::rm(x.data(), batch, self.inputs),
            Mat::rm(self.params[0].value.data(), self.inputs, self.outputs),
            T::one(),
            y.data_mut(),
            self.outputs,
        );
        self.input = Some(x);
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        self.backward_params(g)?;
        let batch = g.shape()[0];
        let mut dx = Tensor::zeros(&[batch, self.inputs]);
        gemm(
            Mat::rm(g.data(), batch, self.outputs),
            Mat::rm(self.params[0].value.data(), self.inputs, self.outputs).t(),
            T::zero(),
            dx.data_mut(),
            self.inputs,
        );
        Ok(dx)
    }

    fn backward_params(&mut self, g: &Tensor<T>) -> Result<()> {
        let x = self.input.as_ref().ok_or_else(|| no_cache(LayerKind::Dense))?;
        let batch = x.shape()[0];
        g.expect_shape("Dense gradient", &[batch, self.outputs])?;
        let [w, b] = &mut self.params;
        gemm(
            Mat::rm(x.data(), batch, self.inputs).t(),
            Mat::rm(g.data(), batch, self.outputs),
            T::one(),
            w.grad.data_mut(),
            self.outputs,
        );
        let db = b.grad.data_mut();
        for row in g.data().chunks_exact(self.outputs) {
            for (acc, v) in db.iter_mut().zip(row) {
                *acc += *v;
            }
        }
        Ok(())
    }

    fn params(&self) -> &[Param<T>] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }
}

/// Valid (unpadded) stride-1 cross-correlation over `[B, L, C_in]`.
///
/// Kernels are stored `[K, C_in, C_out]`, so a length-`K` window of the
/// input is one contiguous run of `K·C_in` values and the whole layer is a
/// strided matrix product with no copy.
pub struct Conv1d<T> {
    kernel: usize,
    in_channels: usize,
    filters: usize,
    params: [Param<T>; 2],
    input: Option<Tensor<T>>,
}

impl<T: Real> Conv1d<T> {
    pub fn new(kernel: usize, in_channels: usize, filters: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let w = xavier(
            &[kernel, in_channels, filters],
            kernel * in_channels,
            kernel * filters,
            rng,
        );
        Self::from_params(w, Tensor::zeros(&[filters]))
    }

    pub fn from_params(w: Tensor<T>, b: Tensor<T>) -> Result<Self> {
        let &[kernel, in_channels, filters] = w.shape() else {
            return Err(Error::Shape(format!("Conv1D kernel must be rank 3, got {:?}", w.shape())));
        };
        if kernel == 0 {
            return Err(Error::LayerConfig {
                layer: "Conv1D".into(),
                reason: "kernel length must be positive".into(),
            });
        }
        b.expect_shape("Conv1D bias", &[filters])?;
        Ok(Conv1d {
            kernel,
            in_channels,
            filters,
            params: [Param::new("kernel", w), Param::new("bias", b)],
            input: None,
        })
    }

    /// Rows of the output gradient that are entirely zero contribute
    /// nothing, so when most are zero (as behind a max pool) only the live
    /// rows are gathered and multiplied.
    fn gradients(&mut self, g: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>> {
        let x = self.input.as_ref().ok_or_else(|| no_cache(LayerKind::Conv1D))?;
        let (batch, len) = (x.shape()[0], x.shape()[1]);
        let out_len = len - self.kernel + 1;
        let (cin, cout) = (self.in_channels, self.filters);
        g.expect_shape("Conv1D gradient", &[batch, out_len, cout])?;
        let window = self.kernel * cin;
        let [w, bias] = &mut self.params;
        let mut dx = input_grad.then(|| Tensor::zeros(x.shape()));
        for b in 0..batch {
            let xb = &x.data()[b * len * cin..(b + 1) * len * cin];
            let gb = &g.data()[b * out_len * cout..(b + 1) * out_len * cout];
            for row in gb.chunks_exact(cout) {
                for (acc, v) in bias.grad.data_mut().iter_mut().zip(row) {
                    *acc += *v;
                }
            }
            let live: Vec<usize> = gb
                .chunks_exact(cout)
                .enumerate()
                .filter(|(_, row)| row.iter().any(|v| *v != T::zero()))
                .map(|(t, _)| t)
                .collect();
            let mut dxb = dx.as_mut().map(|dx| &mut dx.data_mut()[b * len * cin..(b + 1) * len * cin]);
            if live.len() * 2 <= out_len {
                if live.is_empty() {
                    continue;
                }
                let r = live.len();
                let mut gs = Vec::with_capacity(r * cout);
                let mut xs = Vec::with_capacity(r * window);
                for &t in &live {
                    gs.extend_from_slice(&gb[t * cout..(t + 1) * cout]);
                    xs.extend_from_slice(&xb[t * cin..t * cin + window]);
                }
                gemm(Mat::rm(&xs, r, window).t(), Mat::rm(&gs, r, cout), T::one(), w.grad.data_mut(), cout);
                let Some(dxb) = dxb.as_mut() else { continue };
                let mut dwin = vec![T::zero(); r * window];
                gemm(
                    Mat::rm(&gs, r, cout),
                    Mat::rm(w.value.data(), window, cout).t(),
                    T::zero(),
                    &mut dwin,
                    window,
                );
                for (&t, src) in live.iter().zip(dwin.chunks_exact(window)) {
                    for (d, v) in dxb[t * cin..t * cin + window].iter_mut().zip(src) {
                        *d += *v;
                    }
                }
                continue;
            }
            let windows = Mat {
                data: xb,
                rows: out_len,
                cols: window,
                rs: cin,
                cs: 1,
            };
            gemm(windows.t(), Mat::rm(gb, out_len, cout), T::one(), w.grad.data_mut(), cout);
            let Some(dxb) = dxb.as_mut() else { continue };
            for k in 0..self.kernel {
                let wk = &w.value.data()[k * cin * cout..(k + 1) * cin * cout];
                gemm(
                    Mat::rm(gb, out_len, cout),
                    Mat::rm(wk, cin, cout).t(),
                    T::one(),
                    &mut dxb[k * cin..],
                    cin,
                );
            }
        }
        Ok(dx)
    }
}

impl<T: Real> Layer<T> for Conv1d<T> {
    fn kind(&self) -> LayerKind {
        LayerKind::Conv1D
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let &[b, len, c] = input else {
            return Err(Error::Shape(format!("Conv1D expects [B, L, C], got {input:?}")));
        };
        if c != self.in_channels {
            return Err(Error::Shape(format!(
                "Conv1D expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        if len < self.kernel {
            return Err(Error::LayerConfig {
                layer: format!("Conv1D(filters={}, kernel={})", self.filters, self.kernel),
                reason: format!("sequence length {len} is shorter than the kernel"),
            });
        }
        Ok(vec![b, len - self.kernel + 1, self.filters])
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.forward_owned(x.clone(), mode)
    }

    fn forward_owned(&mut self, x: Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let out_shape = self.output_shape(x.shape())?;
        let (batch, len, out_len) = (x.shape()[0], x.shape()[1], out_shape[1]);
        let window = self.kernel * self.in_channels;
        let bias = self.params[1].value.data();
        let mut y = bias_rows(&out_shape, bias);
        let w = Mat::rm(self.params[0].value.data(), window, self.filters);
        for b in 0..batch {
            let xb = &x.data()[b * len * self.in_channels..(b + 1) * len * self.in_channels];
            let windows = Mat {
                data: xb,
                rows: out_len,
                cols: window,
                rs: self.in_channels,
                cs: 1,
            };
            let yb = &mut y.data_mut()[b * out_len * self.filters..(b + 1) * out_len * self.filters];
            gemm(windows, w, T::one(), yb, self.filters);
        }
        self.input = Some(x);
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.gradients(g, true)?.expect("input gradient requested"))
    }

    fn backward_params(&mut self, g: &Tensor<T>) -> Result<()> {
        self.gradients(g, false).map(drop)
    }

    fn params(&self) -> &[Param<T>] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }
}

/// Max over the length axis: `[B, L, C] → [B, C]`. Gradient goes to the first
/// position attaining the maximum.
#[derive(Default)]
pub struct GlobalMaxPool {
    argmax: Option<(Vec<usize>, Vec<usize>)>,
}

impl<T: Real> Layer<T> for GlobalMaxPool {
    fn kind(&self) -> LayerKind {
        LayerKind::GlobalMaxPool1D
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [b, len, c] if *len > 0 => Ok(vec![*b, *c]),
            _ => Err(Error::Shape(format!(
                "GlobalMaxPool expects non-empty [B, L, C], got {input:?}"
            ))),
        }
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let out_shape = <Self as Layer<T>>::output_shape(self, x.shape())?;
        let (batch, len, ch) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let mut y = Tensor::zeros(&out_shape);
        let mut arg = vec![0usize; batch * ch];
        for b in 0..batch {
            let xb = &x.data()[b * len * ch..(b + 1) * len * ch];
            let best = &mut y.data_mut()[b * ch..(b + 1) * ch];
            let at = &mut arg[b * ch..(b + 1) * ch];
            best.copy_from_slice(&xb[..ch]);
            for (t, row) in xb.chunks_exact(ch).enumerate().skip(1) {
                for c in 0..ch {
                    if row[c] > best[c] {
                        best[c] = row[c];
                        at[c] = t;
                    }
                }
            }
        }
        self.argmax = Some((x.shape().to_vec(), arg));
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let (shape, arg) = self
            .argmax
            .as_ref()
            .ok_or_else(|| no_cache(LayerKind::GlobalMaxPool1D))?;
        let (batch, len, ch) = (shape[0], shape[1], shape[2]);
        g.expect_shape("GlobalMaxPool gradient", &[batch, ch])?;
        let mut dx = Tensor::zeros(shape);
        for b in 0..batch {
            for c in 0..ch {
                let t = arg[b * ch + c];
                dx.data_mut()[b * len * ch + t * ch + c] = g.data()[b * ch + c];
            }
        }
        Ok(dx)
    }
}

/// One bit per element.
struct Bits {
    len: usize,
    words: Vec<u64>,
}

impl Bits {
    fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut words = Vec::with_capacity(len.div_ceil(64));
        for start in (0..len).step_by(64) {
            let mut word = 0u64;
            for i in start..(start + 64).min(len) {
                word |= u64::from(f(i)) << (i - start);
            }
            words.push(word);
        }
        Bits { len, words }
    }

    /// `data[i] = pick(data[i], bit i)` over 64-element runs.
    fn apply<T: Copy>(&self, data: &mut [T], pick: impl Fn(T, bool) -> T) {
        for (chunk, word) in data.chunks_mut(64).zip(&self.words) {
            for (j, v) in chunk.iter_mut().enumerate() {
                *v = pick(*v, (word >> j) & 1 == 1);
            }
        }
    }
}

/// Inverted dropout: in training, zero each element with probability `rate`
/// and scale survivors by `1 / (1 - rate)`. Identity in evaluation.
pub struct Dropout<T> {
    rate: f64,
    rng: ChaCha8Rng,
    kept: Option<Bits>,
    frozen: bool,
    _real: std::marker::PhantomData<fn() -> T>,
}

impl<T: Real> Dropout<T> {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::LayerConfig {
                layer: "Dropout".into(),
                reason: format!("rate must be in [0, 1), got {rate}"),
            });
        }
        Ok(Dropout {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            kept: None,
            frozen: false,
            _real: std::marker::PhantomData,
        })
    }

    fn scale(&self) -> [T; 2] {
        [T::zero(), T::of(1.0 / (1.0 - self.rate))]
    }
}

impl<T: Real> Layer<T> for Dropout<T> {
    fn kind(&self) -> LayerKind {
        LayerKind::Dropout
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Reuse the current mask on later training passes instead of drawing a
    /// new one. Used for gradient checks in training mode.
    fn freeze_randomness(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.forward_owned(x.clone(), mode)
    }

    fn forward_owned(&mut self, mut x: Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if mode == Mode::Eval {
            self.kept = None;
            return Ok(x);
        }
        let reuse = self.frozen && self.kept.as_ref().is_some_and(|m| m.len == x.len());
        if !reuse {
            // drop when a uniform u32 falls below rate * 2^32
            let threshold = (self.rate * 4_294_967_296.0) as u32;
            let rng = &mut self.rng;
            self.kept = Some(Bits::from_fn(x.len(), |_| rng.next_u32() >= threshold));
        }
        let scale = self.scale();
        let kept = self.kept.as_ref().unwrap();
        kept.apply(x.data_mut(), |v, k| v * scale[usize::from(k)]);
        Ok(x)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        self.backward_owned(g.clone())
    }

    fn backward_owned(&mut self, mut g: Tensor<T>) -> Result<Tensor<T>> {
        if let Some(kept) = &self.kept {
            if kept.len != g.len() {
                return Err(Error::Shape("Dropout gradient size".into()));
            }
            let scale = self.scale();
            kept.apply(g.data_mut(), |v, k| v * scale[usize::from(k)]);
        }
        Ok(g)
    }
}

/// Table lookup `[B, L]` ids → `[B, L, dim]`. Ids are carried as tensor
/// values. Row 0 is the padding row: it stays zero and receives no gradient.
pub struct EmbeddingLookup<T> {
    vocab: usize,
    dim: usize,
    params: [Param<T>; 1],
    ids: Option<(Vec<usize>, Vec<usize>)>,
}

impl<T: Real> EmbeddingLookup<T> {
    pub fn new(vocab: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut table = uniform(&[vocab, dim], 0.05, rng);
        table.data_mut()[..dim].iter_mut().for_each(|v| *v = T::zero());
        Self::from_table(table)
    }

    pub fn from_table(table: Tensor<T>) -> Self {
        let (vocab, dim) = (table.shape()[0], table.shape()[1]);
        EmbeddingLookup {
            vocab,
            dim,
            params: [Param::new("table", table)],
            ids: None,
        }
    }
}

impl<T: Real> Layer<T> for EmbeddingLookup<T> {
    fn kind(&self) -> LayerKind {
        LayerKind::EmbeddingLookup
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [b, len] => Ok(vec![*b, *len, self.dim]),
            _ => Err(Error::Shape(format!("EmbeddingLookup expects [B, L], got {input:?}"))),
        }
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let out_shape = self.output_shape(x.shape())?;
        let ids = x
            .data()
            .iter()
            .map(|v| {
                let id = v.to_f64().unwrap_or(-1.0);
                if id >= 0.0 && id.fract() == 0.0 && (id as usize) < self.vocab {
                    Ok(id as usize)
                } else {
                    Err(Error::Shape(format!("token id {id} outside vocabulary of {}", self.vocab)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let table = self.params[0].value.data();
        let mut y = Vec::with_capacity(ids.len() * self.dim);
        for &id in &ids {
            if id == 0 {
                y.extend(std::iter::repeat_n(T::zero(), self.dim));
            } else {
                y.extend_from_slice(&table[id * self.dim..(id + 1) * self.dim]);
            }
        }
        self.ids = Some((x.shape().to_vec(), ids));
        Tensor::new(out_shape, y)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let (shape, ids) = self
            .ids
            .as_ref()
            .ok_or_else(|| no_cache(LayerKind::EmbeddingLookup))?;
        g.expect_shape("EmbeddingLookup gradient", &[shape[0], shape[1], self.dim])?;
        let grad = self.params[0].grad.data_mut();
        for (pos, &id) in ids.iter().enumerate() {
            if id == 0 {
                continue;
            }
            let src = &g.data()[pos * self.dim..(pos + 1) * self.dim];
            for (acc, v) in grad[id * self.dim..(id + 1) * self.dim].iter_mut().zip(src) {
                *acc += *v;
            }
        }
        Ok(Tensor::zeros(shape))
    }

    fn params(&self) -> &[Param<T>] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Sigmoid,
}

enum ActivationCache<T> {
    Positive(Bits),
    Output(Tensor<T>),
}

pub struct Activation<T> {
    kind: ActivationKind,
    cache: Option<ActivationCache<T>>,
}

impl<T: Real> Activation<T> {
    pub fn new(kind: ActivationKind) -> Self {
        Activation { kind, cache: None }
    }
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Layer<T> for Activation<T> {
    fn kind(&self) -> LayerKind {
        LayerKind::Activation
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.forward_owned(x.clone(), mode)
    }

    fn forward_owned(&mut self, mut x: Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        match self.kind {
            ActivationKind::Relu => {
                let data = x.data_mut();
                let positive = Bits::from_fn(data.len(), |i| data[i] > T::zero());
                for v in data.iter_mut() {
                    *v = v.max(T::zero());
                }
                self.cache = Some(ActivationCache::Positive(positive));
            }
            ActivationKind::Sigmoid => {
                for v in x.data_mut() {
                    *v = sigmoid(*v);
                }
                self.cache = Some(ActivationCache::Output(x.clone()));
            }
        }
        Ok(x)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        self.backward_owned(g.clone())
    }

    fn backward_owned(&mut self, mut g: Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| no_cache(LayerKind::Activation))?;
        match cache {
            ActivationCache::Positive(positive) => {
                if positive.len != g.len() {
                    return Err(Error::Shape(format!(
                        "Activation gradient has {} values, expected {}",
                        g.len(),
                        positive.len
                    )));
                }
                positive.apply(g.data_mut(), |v, p| [T::zero(), v][usize::from(p)]);
            }
            ActivationCache::Output(y) => {
                g.expect_shape("Activation gradient", y.shape())?;
                for (g, y) in g.data_mut().iter_mut().zip(y.data()) {
                    *g = *g * *y * (T::one() - *y);
                }
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn dense_identity_and_bias() {
        let mut d = Dense::from_params(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]), t(&[2], &[0.0, 0.0]));
        let y = d.forward(&t(&[1, 2], &[1.0, 2.0]), Mode::Eval).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);

        let mut d = Dense::from_params(t(&[2, 2], &[3.0, 1.0, 4.0, 1.0]), t(&[2], &[0.5, -2.0]));
        let y = d.forward(&Tensor::zeros(&[3, 2]), Mode::Eval).unwrap();
        assert_eq!(y.data(), &[0.5, -2.0, 0.5, -2.0, 0.5, -2.0]);
        assert!(d.forward(&Tensor::zeros(&[3, 5]), Mode::Eval).is_err());
    }

    #[test]
    fn conv_window_sum_and_delta() {
        let mut c = Conv1d::from_params(Tensor::from_fn(&[5, 1, 1], |_| 1.0), t(&[1], &[0.0])).unwrap();
        let y = c.forward(&t(&[1, 5, 1], &[1.0; 5]), Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[5.0]);

        let mut delta = Tensor::zeros(&[5, 1, 1]);
        delta.data_mut()[0] = 1.0;
        let mut c = Conv1d::from_params(delta, t(&[1], &[0.0])).unwrap();
        let x = t(&[1, 8, 1], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(c.forward(&x, Mode::Eval).unwrap().data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn conv_backward_matches_direct_sums() {
        let (batch, len, k, cin, cout) = (2, 12, 3, 2, 4);
        let out_len = len - k + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Tensor<f64> = uniform(&[batch, len, cin], 1.0, &mut rng);
        let w: Tensor<f64> = uniform(&[k, cin, cout], 1.0, &mut rng);
        let dense: Tensor<f64> = uniform(&[batch, out_len, cout], 1.0, &mut rng);
        let mut sparse = Tensor::zeros(&[batch, out_len, cout]);
        sparse.data_mut()[3 * cout + 1] = 0.7;
        sparse.data_mut()[(out_len + 8) * cout + 2] = -1.3;
        for g in [dense, sparse] {
            let mut dw = vec![0.0; k * cin * cout];
            let mut dx = vec![0.0; batch * len * cin];
            for b in 0..batch {
                for t in 0..out_len {
                    for f in 0..cout {
                        let gv = g.data()[(b * out_len + t) * cout + f];
                        for j in 0..k {
                            for c in 0..cin {
                                let xi = (b * len + t + j) * cin + c;
                                let wi = (j * cin + c) * cout + f;
                                dw[wi] += x.data()[xi] * gv;
                                dx[xi] += w.data()[wi] * gv;
                            }
                        }
                    }
                }
            }
            let mut conv = Conv1d::from_params(w.clone(), Tensor::zeros(&[cout])).unwrap();
            conv.forward(&x, Mode::Train).unwrap();
            let got = conv.backward(&g).unwrap();
            for (a, b) in got.data().iter().zip(&dx) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in conv.params()[0].grad.data().iter().zip(&dw) {
                assert!((a - b).abs() < 1e-12);
            }
            let mut params_only = Conv1d::from_params(w.clone(), Tensor::zeros(&[cout])).unwrap();
            params_only.forward(&x, Mode::Train).unwrap();
            params_only.backward_params(&g).unwrap();
            assert_eq!(params_only.params()[0].grad, conv.params()[0].grad);
        }
    }

    #[test]
    fn conv_too_short_names_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = Conv1d::<f64>::new(5, 2, 3, &mut rng).unwrap();
        let err = c.forward(&Tensor::zeros(&[1, 4, 2]), Mode::Eval).unwrap_err();
        assert!(matches!(err, Error::LayerConfig { .. }));
        assert!(err.to_string().contains("Conv1D"));
    }

    #[test]
    fn max_pool_values_and_ties() {
        let mut p = GlobalMaxPool::default();
        let y = Layer::<f64>::forward(&mut p, &t(&[1, 2, 2], &[1.0, 3.0, 2.0, 0.0]), Mode::Eval).unwrap();
        assert_eq!(y.data(), &[2.0, 3.0]);

        let y = Layer::<f64>::forward(&mut p, &t(&[1, 3, 1], &[4.0, 4.0, 4.0]), Mode::Eval).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let dx = p.backward(&t(&[1, 1], &[1.0])).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn dropout_modes() {
        let x = Tensor::from_fn(&[4, 5], |i| i as f64);
        let mut d = Dropout::new(0.5, 1).unwrap();
        assert_eq!(d.forward(&x, Mode::Eval).unwrap(), x);
        let mut d0 = Dropout::new(0.0, 1).unwrap();
        assert_eq!(d0.forward(&x, Mode::Train).unwrap(), x);
        assert_eq!(d0.forward(&x, Mode::Eval).unwrap(), x);
        assert!(Dropout::<f64>::new(1.0, 1).is_err());
    }

    #[test]
    fn dropout_statistics() {
        let n = 1_000_000;
        let x = Tensor::from_fn(&[n], |_| 1.0f64);
        let mut d = Dropout::new(0.5, 42).unwrap();
        let y = d.forward(&x, Mode::Train).unwrap();
        let survivors = y.data().iter().filter(|v| **v != 0.0).count() as f64 / n as f64;
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((survivors - 0.5).abs() < 0.01, "{survivors}");
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn embedding_rows_and_padding() {
        let table = t(&[3, 2], &[0.0, 0.0, 2.0, 3.0, 5.0, 7.0]);
        let mut e = EmbeddingLookup::from_table(table);
        let y = e.forward(&t(&[1, 1], &[1.0]), Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2]);
        assert_eq!(y.data(), &[2.0, 3.0]);

        let y = e.forward(&t(&[1, 2], &[0.0, 2.0]), Mode::Eval).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 5.0, 7.0]);
        e.backward(&t(&[1, 2, 2], &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(e.params()[0].grad.data(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        assert!(e.forward(&t(&[1, 1], &[3.0]), Mode::Eval).is_err());
    }

    #[test]
    fn forward_does_not_mutate_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = uniform::<f64>(&[2, 9, 3], 1.0, &mut rng);
        let snapshot = x.clone();
        let mut conv = Conv1d::<f64>::new(5, 3, 4, &mut rng).unwrap();
        conv.forward(&x, Mode::Train).unwrap();
        let mut drop = Dropout::<f64>::new(0.5, 3).unwrap();
        drop.forward(&x, Mode::Train).unwrap();
        let mut act = Activation::<f64>::new(ActivationKind::Relu);
        act.forward(&x, Mode::Train).unwrap();
        assert_eq!(x, snapshot);
    }

    #[test]
    fn backward_requires_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut d = Dense::<f64>::new(2, 2, &mut rng);
        assert!(d.backward(&Tensor::zeros(&[1, 2])).is_err());
    }
}
