//! Central-difference gradient verification at `f64`.

use rand::distr::{Distribution, Uniform};
use rand_chacha::ChaCha8Rng;

use super::layer::{Layer, Mode, Param};
use super::loss::LossKind;
use super::network::Network;
use super::tensor::Tensor;
use crate::error::Result;

pub const DEFAULT_EPS: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone)]
pub struct GroupError {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradReport {
    pub groups: Vec<GroupError>,
}

impl GradReport {
    pub fn max_rel_err(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_err).fold(0.0, f64::max)
    }

    pub fn merge(&mut self, other: GradReport) {
        self.groups.extend(other.groups);
    }
}

/// Compares an analytic gradient of `f` at `point` against central
/// differences, element by element.
pub fn check_function(
    name: &str,
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
    eps: f64,
) -> GroupError {
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = f(&x);
        x[i] = orig - eps;
        let minus = f(&x);
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    GroupError {
        name: name.to_string(),
        checked: x.len(),
        max_rel_err: worst,
    }
}

/// Redraws every parameter from `U(-scale, scale)`, moving the check away
/// from initial points where gradients can be vanishingly small.
pub fn randomize_params<'a>(
    params: impl IntoIterator<Item = &'a mut Param<f64>>,
    scale: f64,
    rng: &mut ChaCha8Rng,
) {
    let dist = Uniform::new_inclusive(-scale, scale).unwrap();
    for p in params {
        p.value.data_mut().iter_mut().for_each(|v| *v = dist.sample(rng));
    }
}

fn projected(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Checks a single layer against the scalar `Σ y ⊙ R` for a random `R`.
///
/// Parameter gradients are always checked; the input gradient only when
/// `wrt_input` is set (it is meaningless for id inputs).
pub fn check_layer(
    layer: &mut dyn Layer<f64>,
    x: &Tensor<f64>,
    mode: Mode,
    wrt_input: bool,
    rng: &mut ChaCha8Rng,
    eps: f64,
) -> Result<GradReport> {
    layer.freeze_randomness(false);
    let y = layer.forward(x, mode)?;
    layer.freeze_randomness(true);
    let dist = Uniform::new_inclusive(-1.0, 1.0).unwrap();
    let r = Tensor::from_fn(y.shape(), |_| dist.sample(rng));
    for p in layer.params_mut() {
        p.zero_grad();
    }
    let dx = layer.backward(&r)?;

    let mut report = GradReport::default();
    let n_params = layer.params().len();
    for pi in 0..n_params {
        let analytic = layer.params()[pi].grad.data().to_vec();
        let point = layer.params()[pi].value.data().to_vec();
        let name = format!("{}.{}", layer.kind(), layer.params()[pi].name);
        let group = check_function(
            &name,
            |v| {
                layer.params_mut()[pi].value.data_mut().copy_from_slice(v);
                let out = layer.forward(x, mode).expect("forward during check");
                projected(&out, &r)
            },
            &point,
            &analytic,
            eps,
        );
        layer.params_mut()[pi].value.data_mut().copy_from_slice(&point);
        report.groups.push(group);
    }
    if wrt_input {
        let shape = x.shape().to_vec();
        let group = check_function(
            &format!("{}.input", layer.kind()),
            |v| {
                let xi = Tensor::new(shape.clone(), v.to_vec()).unwrap();
                let out = layer.forward(&xi, mode).expect("forward during check");
                projected(&out, &r)
            },
            x.data(),
            dx.data(),
            eps,
        );
        report.groups.push(group);
    }
    layer.freeze_randomness(false);
    Ok(report)
}

/// Checks a whole network under its real training loss.
pub fn check_network(
    net: &mut Network<f64>,
    x: &Tensor<f64>,
    labels: &[u8],
    loss: LossKind,
    mode: Mode,
    wrt_input: bool,
    eps: f64,
) -> Result<GradReport> {
    net.freeze_randomness(false);
    let out = net.forward(x, mode)?;
    net.freeze_randomness(true);
    let (_, grad) = loss.evaluate(&out, labels)?;
    net.zero_grad();
    let dx = net.backward(&grad)?;

    let eval = |net: &mut Network<f64>, input: &Tensor<f64>| -> f64 {
        let out = net.forward(input, mode).expect("forward during check");
        loss.evaluate(&out, labels).expect("loss during check").0
    };

    let mut report = GradReport::default();
    let n_params = net.params().count();
    for pi in 0..n_params {
        let (name, point, analytic) = {
            let p = net.params().nth(pi).unwrap();
            (p.name, p.value.data().to_vec(), p.grad.data().to_vec())
        };
        let group = check_function(
            &format!("param{pi}.{name}"),
            |v| {
                net.params_mut()
                    .nth(pi)
                    .unwrap()
                    .value
                    .data_mut()
                    .copy_from_slice(v);
                eval(net, x)
            },
            &point,
            &analytic,
            eps,
        );
        net.params_mut().nth(pi).unwrap().value.data_mut().copy_from_slice(&point);
        report.groups.push(group);
    }
    if wrt_input {
        let shape = x.shape().to_vec();
        let group = check_function(
            "input",
            |v| eval(net, &Tensor::new(shape.clone(), v.to_vec()).unwrap()),
            x.data(),
            dx.data(),
            eps,
        );
        report.groups.push(group);
    }
    net.freeze_randomness(false);
    Ok(report)
}
