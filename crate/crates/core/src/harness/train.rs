use std::path::Path;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainParams;
use crate::error::{Error, Result};
use crate::models::{adapt, Encoded, ModelSpec};
use crate::neural::{checkpoint, Mode, Network, Optimizer, OptimizerState, Tensor};
use crate::seed::derive_seed;

/// Accuracy with confusion counts; label 1 is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Metrics {
    pub fn new(predictions: &[u8], labels: &[u8]) -> Result<Metrics> {
        if predictions.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        let mut m = Metrics::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p, y) {
                (1, 1) => m.tp += 1,
                (1, _) => m.fp += 1,
                (_, 1) => m.fn_ += 1,
                _ => m.tn += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }

    /// `correct / total`; zero for an empty evaluation.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }
}

/// Outcome of training and evaluating one model.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Metrics,
    pub divergent: bool,
    pub epoch_loss: Vec<f64>,
}

/// The most frequent training label; ties go to label 1.
pub fn majority_label(labels: &[u8]) -> u8 {
    let ones = labels.iter().filter(|&&y| y == 1).count();
    u8::from(2 * ones >= labels.len())
}

pub fn predict(
    net: &mut Network<f32>,
    spec: &ModelSpec,
    examples: &[Encoded],
    batch: usize,
) -> Result<Vec<u8>> {
    let mut preds = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(batch) {
        let refs: Vec<&Encoded> = chunk.iter().collect();
        let x: Tensor<f32> = adapt(&refs, &spec.adapter)?;
        let y = net.forward(&x, Mode::Eval)?;
        preds.extend(spec.loss.predict(&y));
    }
    Ok(preds)
}

/// Trains with Adam on shuffled mini-batches, then evaluates on the test
/// side. A non-finite loss or activation stops training; the parameters
/// from the last finished epoch (or initialization) are restored and
/// evaluated, and the outcome is flagged divergent.
#[allow(clippy::too_many_arguments)]
pub fn train_and_evaluate(
    spec: &ModelSpec,
    train: &[Encoded],
    train_labels: &[u8],
    test: &[Encoded],
    test_labels: &[u8],
    params: &TrainParams,
    seed: u64,
    checkpoint_path: Option<&Path>,
) -> Result<TrainOutcome> {
    if train.is_empty() || train.len() != train_labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} training examples for {} labels",
            train.len(),
            train_labels.len()
        )));
    }
    let mut net = spec.build::<f32>(derive_seed(seed, "init"))?;
    net.reseed(derive_seed(seed, "dropout"));
    let mut opt = OptimizerState::new(Optimizer::adam(params.lr));
    let mut shuffle = ChaCha8Rng::seed_from_u64(derive_seed(seed, "shuffle"));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut last_good = net.snapshot();
    let mut divergent = false;
    let mut epoch_loss = Vec::with_capacity(params.epochs);

    'epochs: for epoch in 0..params.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0f64;
        for chunk in order.chunks(params.batch) {
            let refs: Vec<&Encoded> = chunk.iter().map(|&i| &train[i]).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| train_labels[i]).collect();
            let x: Tensor<f32> = adapt(&refs, &spec.adapter)?;
            let step = net.forward(&x, Mode::Train).and_then(|y| spec.loss.evaluate(&y, &labels));
            let (loss, grad) = match step {
                Ok((loss, grad)) if loss.is_finite() => (loss, grad),
                Ok(_) | Err(Error::Divergence(_)) => {
                    warn!("training diverged in epoch {}; restoring last finite parameters", epoch + 1);
                    divergent = true;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            total += loss as f64 * chunk.len() as f64;
            net.zero_grad();
            net.backward_params(&grad)?;
            opt.step(net.params_mut());
        }
        let mean = total / train.len() as f64;
        debug!("epoch {} loss {mean:.6}", epoch + 1);
        epoch_loss.push(mean);
        last_good = net.snapshot();
    }
    if divergent {
        net.restore(&last_good)?;
    }

    if let Some(path) = checkpoint_path {
        checkpoint::save(&net, serde_json::to_value(spec)?, path)?;
    }
    let preds = predict(&mut net, spec, test, params.batch)?;
    Ok(TrainOutcome {
        metrics: Metrics::new(&preds, test_labels)?,
        divergent,
        epoch_loss,
    })
}
