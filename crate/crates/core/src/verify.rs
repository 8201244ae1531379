//! Finite-difference verification of every hand-written gradient: the
//! network layers, both losses and the two embedding objectives.

use std::fmt;

use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::ns_loss_grad;
use crate::error::Result;
use crate::neural::gradcheck::{
    check_function, check_layer, randomize_params, GradReport, DEFAULT_EPS,
};
use crate::neural::loss::{bce, softmax_ce};
use crate::neural::{
    Activation, ActivationKind, BiLstm, Conv1d, Dense, Dropout, EmbeddingLookup, GlobalMaxPool,
    Layer, Mode, Tensor,
};

pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub shapes: usize,
    pub max_rel_err: f64,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.max_rel_err < TOLERANCE
    }
}

impl fmt::Display for SuiteEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} {:>3} shapes  max rel err {:.3e}  {}",
            self.name,
            self.shapes,
            self.max_rel_err,
            if self.passed() { "ok" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(SuiteEntry::passed)
    }
}

fn uniform_tensor(shape: &[usize], scale: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let dist = Uniform::new_inclusive(-scale, scale).unwrap();
    Tensor::from_fn(shape, |_| dist.sample(rng))
}

fn layer_entry(
    name: &'static str,
    shapes: usize,
    rng: &mut ChaCha8Rng,
    mut case: impl FnMut(&mut ChaCha8Rng) -> Result<GradReport>,
) -> Result<SuiteEntry> {
    let mut worst = 0.0f64;
    for _ in 0..shapes {
        worst = worst.max(case(rng)?.max_rel_err());
    }
    Ok(SuiteEntry {
        name,
        shapes,
        max_rel_err: worst,
    })
}

fn run_layer(
    layer: &mut dyn Layer<f64>,
    x: &Tensor<f64>,
    mode: Mode,
    wrt_input: bool,
    rng: &mut ChaCha8Rng,
) -> Result<GradReport> {
    randomize_params(layer.params_mut(), 0.5, rng);
    check_layer(layer, x, mode, wrt_input, rng, DEFAULT_EPS)
}

/// Values for a `[B, L, C]` tensor whose entries along each column are at
/// least 0.1 apart, so no perturbation can change an argmax.
fn separated_tensor(b: usize, l: usize, c: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let mut data = vec![0.0; b * l * c];
    for bi in 0..b {
        for ci in 0..c {
            let mut ranks: Vec<usize> = (0..l).collect();
            ranks.shuffle(rng);
            for (li, r) in ranks.into_iter().enumerate() {
                data[(bi * l + li) * c + ci] = r as f64 * 0.1 - 0.5 + rng.random_range(0.0..0.02);
            }
        }
    }
    Tensor::new(vec![b, l, c], data).unwrap()
}

fn ns_case(doc: bool, rng: &mut ChaCha8Rng) -> GradReport {
    let rows = rng.random_range(6..14);
    let dim = rng.random_range(1..9);
    let dist = Uniform::new_inclusive(-0.8, 0.8).unwrap();
    let input: Vec<f64> = (0..rows * dim).map(|_| dist.sample(rng)).collect();
    let output: Vec<f64> = (0..rows * dim).map(|_| dist.sample(rng)).collect();
    let min_ctx = if doc { 0 } else { 1 };
    let ctx: Vec<u32> = (0..rng.random_range(min_ctx..6))
        .map(|_| rng.random_range(1..rows as u32))
        .collect();
    let mut ids: Vec<u32> = (1..rows as u32).collect();
    ids.shuffle(rng);
    let k = rng.random_range(1..5);
    let mut targets = vec![(ids[0], true)];
    targets.extend(ids[1..=k].iter().map(|&i| (i, false)));
    let dvec: Option<Vec<f64>> = doc.then(|| (0..dim).map(|_| dist.sample(rng)).collect());
    let d = dvec.as_deref();
    let g = ns_loss_grad(&input, &output, dim, &ctx, d, &targets);
    let loss = |i: &[f64], o: &[f64], d: Option<&[f64]>| ns_loss_grad(i, o, dim, &ctx, d, &targets).loss;
    let mut groups = vec![
        check_function("input", |v| loss(v, &output, d), &input, &g.d_input, DEFAULT_EPS),
        check_function("output", |v| loss(&input, v, d), &output, &g.d_output, DEFAULT_EPS),
    ];
    if let (Some(dv), Some(dd)) = (d, g.d_doc.as_ref()) {
        groups.push(check_function("doc", |v| loss(&input, &output, Some(v)), dv, dd, DEFAULT_EPS));
    }
    GradReport { groups }
}

/// Runs every check on `shapes` random configurations per component.
pub fn run_suite(shapes: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    let mut entries = Vec::new();

    entries.push(layer_entry("dense", shapes, rng, |rng| {
        let (b, i, o) = (rng.random_range(1..5), rng.random_range(1..9), rng.random_range(1..7));
        let mut layer = Dense::new(i, o, rng);
        let x = uniform_tensor(&[b, i], 1.0, rng);
        run_layer(&mut layer, &x, Mode::Eval, true, rng)
    })?);

    entries.push(layer_entry("conv1d", shapes, rng, |rng| {
        let k = rng.random_range(1..6);
        let (b, l) = (rng.random_range(1..4), k + rng.random_range(0..7));
        let (cin, cout) = (rng.random_range(1..5), rng.random_range(1..5));
        let mut layer = Conv1d::new(k, cin, cout, rng)?;
        let x = uniform_tensor(&[b, l, cin], 1.0, rng);
        run_layer(&mut layer, &x, Mode::Eval, true, rng)
    })?);

    entries.push(layer_entry("global_max_pool", shapes, rng, |rng| {
        let (b, l, c) = (rng.random_range(1..4), rng.random_range(1..9), rng.random_range(1..5));
        let x = separated_tensor(b, l, c, rng);
        run_layer(&mut GlobalMaxPool::default(), &x, Mode::Eval, true, rng)
    })?);

    entries.push(layer_entry("dropout_eval", shapes, rng, |rng| {
        let rate = rng.random_range(0.0..0.9);
        let mut layer = Dropout::new(rate, rng.random())?;
        let shape = [rng.random_range(1..5), rng.random_range(1..9)];
        let x = uniform_tensor(&shape, 1.0, rng);
        run_layer(&mut layer, &x, Mode::Eval, true, rng)
    })?);

    entries.push(layer_entry("dropout_train", shapes, rng, |rng| {
        let rate = rng.random_range(0.0..0.9);
        let mut layer = Dropout::new(rate, rng.random())?;
        let shape = [rng.random_range(1..5), rng.random_range(1..9)];
        let x = uniform_tensor(&shape, 1.0, rng);
        run_layer(&mut layer, &x, Mode::Train, true, rng)
    })?);

    entries.push(layer_entry("embedding_lookup", shapes, rng, |rng| {
        let (vocab, dim) = (rng.random_range(2..12), rng.random_range(1..6));
        let (b, l) = (rng.random_range(1..4), rng.random_range(1..7));
        let mut layer = EmbeddingLookup::new(vocab, dim, rng);
        let x = Tensor::from_fn(&[b, l], |_| rng.random_range(0..vocab) as f64);
        run_layer(&mut layer, &x, Mode::Eval, false, rng)
    })?);

    entries.push(layer_entry("bilstm", shapes, rng, |rng| {
        let (b, t) = (rng.random_range(1..4), rng.random_range(1..6));
        let (i, h) = (rng.random_range(1..5), rng.random_range(1..6));
        let mut layer = BiLstm::new(i, h, rng);
        let x = uniform_tensor(&[b, t, i], 1.0, rng);
        run_layer(&mut layer, &x, Mode::Eval, true, rng)
    })?);

    entries.push(layer_entry("relu", shapes, rng, |rng| {
        let shape = [rng.random_range(1..5), rng.random_range(1..9)];
        // keep inputs away from the kink at zero
        let mut x = uniform_tensor(&shape, 1.0, rng);
        x.data_mut().iter_mut().filter(|v| v.abs() < 0.01).for_each(|v| *v = 0.5);
        run_layer(&mut Activation::new(ActivationKind::Relu), &x, Mode::Eval, true, rng)
    })?);

    entries.push(layer_entry("sigmoid", shapes, rng, |rng| {
        let shape = [rng.random_range(1..5), rng.random_range(1..9)];
        let x = uniform_tensor(&shape, 3.0, rng);
        run_layer(&mut Activation::new(ActivationKind::Sigmoid), &x, Mode::Eval, true, rng)
    })?);

    entries.push(layer_entry("bce", shapes, rng, |rng| {
        let b = rng.random_range(1..9);
        let probs: Vec<f64> = (0..b).map(|_| rng.random_range(0.05..0.95)).collect();
        let targets: Vec<f64> = (0..b).map(|_| rng.random_range(0..2) as f64).collect();
        let p = Tensor::new(vec![b, 1], probs.clone())?;
        let (_, grad) = bce(&p, &targets)?;
        let f = |v: &[f64]| bce(&Tensor::new(vec![b, 1], v.to_vec()).unwrap(), &targets).unwrap().0;
        Ok(GradReport {
            groups: vec![check_function("bce", f, &probs, grad.data(), DEFAULT_EPS)],
        })
    })?);

    entries.push(layer_entry("softmax_ce", shapes, rng, |rng| {
        let (b, c) = (rng.random_range(1..6), rng.random_range(2..6));
        let logits = uniform_tensor(&[b, c], 3.0, rng);
        let targets: Vec<usize> = (0..b).map(|_| rng.random_range(0..c)).collect();
        let (_, grad) = softmax_ce(&logits, &targets)?;
        let f = |v: &[f64]| {
            softmax_ce(&Tensor::new(vec![b, c], v.to_vec()).unwrap(), &targets)
                .unwrap()
                .0
        };
        Ok(GradReport {
            groups: vec![check_function("softmax_ce", f, logits.data(), grad.data(), DEFAULT_EPS)],
        })
    })?);

    entries.push(layer_entry("cbow", shapes, rng, |rng| Ok(ns_case(false, rng)))?);
    entries.push(layer_entry("pv_dm", shapes, rng, |rng| Ok(ns_case(true, rng)))?);

    Ok(SuiteReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_twenty_shapes() {
        let report = run_suite(20, 1).unwrap();
        for e in &report.entries {
            assert!(e.passed(), "{e}");
        }
        assert!(report.passed());
        assert_eq!(report.entries.len(), 13);
    }
}
