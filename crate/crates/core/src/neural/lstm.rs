//! Bidirectional LSTM returning the two final hidden states.

use rand_chacha::ChaCha8Rng;

use super::layer::{sigmoid, uniform, Layer, LayerKind, Mode, Param};
use super::tensor::{gemm, Mat, Real, Tensor};
use crate::error::{Error, Result};

const INIT_RANGE: f64 = 0.08;

/// Per-step activations of one direction, all `[B, ·]` row-major.
struct StepCache<T> {
    /// i, f, g, o gate activations, `[B, 4h]`.
    gates: Vec<T>,
    cell: Vec<T>,
    cell_tanh: Vec<T>,
    hidden: Vec<T>,
}

/// Subnormal values are replaced by zero; long sequences otherwise decay
/// gradients into the subnormal range, where arithmetic is very slow.
fn flush<T: Real>(v: T) -> T {
    if v.abs() < T::min_positive_value() {
        T::zero()
    } else {
        v
    }
}

struct DirectionCache<T> {
    steps: Vec<StepCache<T>>,
}

/// `[B, L, in] → [B, 2h]`: forward final state followed by backward final
/// state. Gate order inside the packed `4h` axis is input, forget, cell,
/// output. Parameters per direction: `w_x [in, 4h]`, `w_h [h, 4h]`, `b [4h]`.
pub struct BiLstm<T> {
    inputs: usize,
    hidden: usize,
    params: [Param<T>; 6],
    cache: Option<(Tensor<T>, [DirectionCache<T>; 2])>,
}

impl<T: Real> BiLstm<T> {
    pub fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut make = |prefix: usize| {
            let wx = uniform(&[inputs, 4 * hidden], INIT_RANGE, rng);
            let wh = uniform(&[hidden, 4 * hidden], INIT_RANGE, rng);
            let mut b = Tensor::zeros(&[4 * hidden]);
            b.data_mut()[hidden..2 * hidden].iter_mut().for_each(|v| *v = T::one());
            let names = [["fwd_w_x", "fwd_w_h", "fwd_b"], ["bwd_w_x", "bwd_w_h", "bwd_b"]][prefix];
            [
                Param::new(names[0], wx),
                Param::new(names[1], wh),
                Param::new(names[2], b),
            ]
        };
        let [a, b, c] = make(0);
        let [d, e, f] = make(1);
        BiLstm {
            inputs,
            hidden,
            params: [a, b, c, d, e, f],
            cache: None,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn run_direction(&self, x: &Tensor<T>, dir: usize) -> DirectionCache<T> {
        let (batch, len) = (x.shape()[0], x.shape()[1]);
        let h = self.hidden;
        let [wx, wh, bias] = &self.params[3 * dir..3 * dir + 3] else {
            unreachable!()
        };
        let mut proj = vec![T::zero(); batch * len * 4 * h];
        gemm(
            Mat::rm(x.data(), batch * len, self.inputs),
            Mat::rm(wx.value.data(), self.inputs, 4 * h),
            T::zero(),
            &mut proj,
            4 * h,
        );

        let mut steps: Vec<StepCache<T>> = Vec::with_capacity(len);
        for s in 0..len {
            let t = if dir == 0 { s } else { len - 1 - s };
            let mut z = vec![T::zero(); batch * 4 * h];
            for b in 0..batch {
                let src = &proj[(b * len + t) * 4 * h..(b * len + t + 1) * 4 * h];
                for ((zv, p), bv) in z[b * 4 * h..(b + 1) * 4 * h]
                    .iter_mut()
                    .zip(src)
                    .zip(bias.value.data())
                {
                    *zv = *p + *bv;
                }
            }
            if let Some(prev) = steps.last() {
                gemm(
                    Mat::rm(&prev.hidden, batch, h),
                    Mat::rm(wh.value.data(), h, 4 * h),
                    T::one(),
                    &mut z,
                    4 * h,
                );
            }
            let mut cell = vec![T::zero(); batch * h];
            let mut cell_tanh = vec![T::zero(); batch * h];
            let mut hidden = vec![T::zero(); batch * h];
            for b in 0..batch {
                let zb = &mut z[b * 4 * h..(b + 1) * 4 * h];
                for j in 0..h {
                    zb[j] = sigmoid(zb[j]);
                    zb[h + j] = sigmoid(zb[h + j]);
                    zb[2 * h + j] = zb[2 * h + j].tanh();
                    zb[3 * h + j] = sigmoid(zb[3 * h + j]);
                    let c_prev = steps.last().map_or(T::zero(), |p| p.cell[b * h + j]);
                    let c = zb[h + j] * c_prev + zb[j] * zb[2 * h + j];
                    let tc = c.tanh();
                    cell[b * h + j] = c;
                    cell_tanh[b * h + j] = tc;
                    hidden[b * h + j] = zb[3 * h + j] * tc;
                }
            }
            steps.push(StepCache {
                gates: z,
                cell,
                cell_tanh,
                hidden,
            });
        }
        DirectionCache { steps }
    }

    fn backprop_direction(
        &mut self,
        x: &Tensor<T>,
        cache: &DirectionCache<T>,
        dir: usize,
        dh_final: Vec<T>,
        dx: &mut Tensor<T>,
    ) {
        let (batch, len) = (x.shape()[0], x.shape()[1]);
        let h = self.hidden;
        let [wx, wh, bias] = &mut self.params[3 * dir..3 * dir + 3] else {
            unreachable!()
        };
        let mut dproj = vec![T::zero(); batch * len * 4 * h];
        let mut hprev = vec![T::zero(); batch * len * h];
        let mut dh = dh_final;
        let mut dc = vec![T::zero(); batch * h];
        let mut dz = vec![T::zero(); batch * 4 * h];
        let one = T::one();

        for s in (0..len).rev() {
            let t = if dir == 0 { s } else { len - 1 - s };
            let step = &cache.steps[s];
            let prev = s.checked_sub(1).map(|p| &cache.steps[p]);
            for b in 0..batch {
                let gates = &step.gates[b * 4 * h..(b + 1) * 4 * h];
                let dzb = &mut dz[b * 4 * h..(b + 1) * 4 * h];
                for j in 0..h {
                    let k = b * h + j;
                    let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                    let tc = step.cell_tanh[k];
                    let d_o = dh[k] * tc;
                    let dck = dc[k] + dh[k] * o * (one - tc * tc);
                    let c_prev = prev.map_or(T::zero(), |p| p.cell[k]);
                    dzb[j] = flush(dck * g * i * (one - i));
                    dzb[h + j] = flush(dck * c_prev * f * (one - f));
                    dzb[2 * h + j] = flush(dck * i * (one - g * g));
                    dzb[3 * h + j] = flush(d_o * o * (one - o));
                    dc[k] = flush(dck * f);
                }
                dproj[(b * len + t) * 4 * h..(b * len + t + 1) * 4 * h].copy_from_slice(dzb);
                for (acc, v) in bias.grad.data_mut().iter_mut().zip(dzb.iter()) {
                    *acc += *v;
                }
            }
            match prev {
                Some(p) => {
                    gemm(
                        Mat::rm(&dz, batch, 4 * h),
                        Mat::rm(wh.value.data(), h, 4 * h).t(),
                        T::zero(),
                        &mut dh,
                        h,
                    );
                    dh.iter_mut().for_each(|v| *v = flush(*v));
                    for b in 0..batch {
                        hprev[(b * len + t) * h..(b * len + t + 1) * h]
                            .copy_from_slice(&p.hidden[b * h..(b + 1) * h]);
                    }
                }
                None => dh.iter_mut().for_each(|v| *v = T::zero()),
            }
        }

        // row (b, t) of hprev holds the state fed into step t, zero at the first step
        gemm(
            Mat::rm(&hprev, batch * len, h).t(),
            Mat::rm(&dproj, batch * len, 4 * h),
            T::one(),
            wh.grad.data_mut(),
            4 * h,
        );

        gemm(
            Mat::rm(x.data(), batch * len, self.inputs).t(),
            Mat::rm(&dproj, batch * len, 4 * h),
            T::one(),
            wx.grad.data_mut(),
            4 * h,
        );
        gemm(
            Mat::rm(&dproj, batch * len, 4 * h),
            Mat::rm(wx.value.data(), self.inputs, 4 * h).t(),
            T::one(),
            dx.data_mut(),
            self.inputs,
        );
    }
}

impl<T: Real> Layer<T> for BiLstm<T> {
    fn kind(&self) -> LayerKind {
        LayerKind::BiLstm
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [b, len, d] if *d == self.inputs && *len > 0 => Ok(vec![*b, 2 * self.hidden]),
            _ => Err(Error::Shape(format!(
                "BiLSTM expects [B, L>0, {}], got {input:?}",
                self.inputs
            ))),
        }
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let out_shape = self.output_shape(x.shape())?;
        let batch = x.shape()[0];
        let h = self.hidden;
        let fwd = self.run_direction(x, 0);
        let bwd = self.run_direction(x, 1);
        let mut y = Tensor::zeros(&out_shape);
        let (hf, hb) = (&fwd.steps.last().unwrap().hidden, &bwd.steps.last().unwrap().hidden);
        for b in 0..batch {
            let row = &mut y.data_mut()[b * 2 * h..(b + 1) * 2 * h];
            row[..h].copy_from_slice(&hf[b * h..(b + 1) * h]);
            row[h..].copy_from_slice(&hb[b * h..(b + 1) * h]);
        }
        self.cache = Some((x.clone(), [fwd, bwd]));
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let (x, caches) = self.cache.take().ok_or_else(|| {
            Error::InvalidArgument("BiLstm: backward called before forward".into())
        })?;
        let batch = x.shape()[0];
        let h = self.hidden;
        g.expect_shape("BiLSTM gradient", &[batch, 2 * h])?;
        let mut dx = Tensor::zeros(x.shape());
        for (dir, cache) in caches.iter().enumerate() {
            let dh: Vec<T> = g
                .data()
                .chunks_exact(2 * h)
                .flat_map(|row| row[dir * h..(dir + 1) * h].iter().copied())
                .collect();
            self.backprop_direction(&x, cache, dir, dh, &mut dx);
        }
        self.cache = Some((x, caches));
        Ok(dx)
    }

    fn params(&self) -> &[Param<T>] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }
}
