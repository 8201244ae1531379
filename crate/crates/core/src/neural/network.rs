use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layer::{Layer, LayerSpec, Mode, Param};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// A sequential stack of layers built from [`LayerSpec`]s.
pub struct Network<T: Real> {
    specs: Vec<LayerSpec>,
    layers: Vec<Box<dyn Layer<T>>>,
}

impl<T: Real> Network<T> {
    /// Builds every layer, drawing initial weights from a generator seeded
    /// with `seed`.
    pub fn build(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|s| s.build::<T>(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Network {
            specs: specs.to_vec(),
            layers,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Box<dyn Layer<T>>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Box<dyn Layer<T>>] {
        &mut self.layers
    }

    /// Runs the stack; any non-finite activation is reported as divergence.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut current = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            current = layer.forward_owned(current, mode)?;
            if !current.all_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite output from layer {i} ({})",
                    layer.kind()
                )));
            }
        }
        Ok(current)
    }

    /// Backward pass that skips the gradient with respect to the network
    /// input. Parameter gradients match [`Network::backward`].
    pub fn backward_params(&mut self, grad: &Tensor<T>) -> Result<()> {
        let Some((first, rest)) = self.layers.split_first_mut() else {
            return Ok(());
        };
        let mut current = grad.clone();
        for layer in rest.iter_mut().rev() {
            current = layer.backward_owned(current)?;
        }
        first.backward_params(&current)
    }

    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mut current = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            current = layer.backward_owned(current)?;
        }
        Ok(current)
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut shape = input.to_vec();
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
        }
        Ok(shape)
    }

    pub fn params(&self) -> impl Iterator<Item = &Param<T>> {
        self.layers.iter().flat_map(|l| l.params().iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut().iter_mut())
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().for_each(Param::zero_grad);
    }

    pub fn param_count(&self) -> usize {
        self.params().map(|p| p.value.len()).sum()
    }

    /// Snapshot of all parameter values in declaration order.
    pub fn snapshot(&self) -> Vec<Tensor<T>> {
        self.params().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Tensor<T>]) -> Result<()> {
        let count = self.params().count();
        if values.len() != count {
            return Err(Error::Shape(format!(
                "expected {count} parameter tensors, got {}",
                values.len()
            )));
        }
        for (p, v) in self.params_mut().zip(values) {
            v.expect_shape(p.name, p.value.shape())?;
            p.value = v.clone();
        }
        Ok(())
    }

    /// Reseeds every dropout layer from one seed.
    pub fn reseed(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut self.layers {
            layer.reseed(rand::Rng::random(&mut rng));
        }
    }

    pub fn freeze_randomness(&mut self, frozen: bool) {
        for layer in &mut self.layers {
            layer.freeze_randomness(frozen);
        }
    }
}
