//! Forward and reverse passes over a flat parameter vector.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;

use super::layers::{LayerPlan, LayerSpec, ModelSpec, CONV_KERNEL, CONV_STRIDE};
use crate::error::{Error, Result};
use crate::noise::RngStream;

/// Samples per gradient work unit. Fixed so the reduction order, and hence
/// the result, does not depend on the thread count.
pub const GRADIENT_CHUNK: usize = 4;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `x / (1 + e^{−x})`.
#[inline]
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub fn swish_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: ModelSpec,
    pub params: Vec<f64>,
    plan: Vec<LayerPlan>,
}

/// Source of dropout masks for one training sample.
pub struct DropoutSource {
    rng: ChaCha8Rng,
}

impl DropoutSource {
    pub fn new(stream: RngStream) -> Self {
        Self { rng: stream.rng() }
    }
}

struct Tape {
    acts: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl Network {
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        let plan = spec.plan()?;
        let n = plan.iter().map(|l| l.n_params).sum();
        Ok(Self { spec, params: vec![0.0; n], plan })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for l in &net.plan {
            if let Some((fan_in, fan_out)) = l.spec.fans(l.input) {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).map_err(|e| Error::Bug(e.to_string()))?;
                let n_weights = l.n_params - bias_count(l);
                for w in &mut net.params[l.offset..l.offset + n_weights] {
                    *w = dist.sample(rng);
                }
            }
        }
        Ok(net)
    }

    pub fn from_params(spec: ModelSpec, params: Vec<f64>) -> Result<Self> {
        let plan = spec.plan()?;
        let n: usize = plan.iter().map(|l| l.n_params).sum();
        if params.len() != n {
            return Err(Error::Format(format!("model expects {n} parameters, got {}", params.len())));
        }
        Ok(Self { spec, params, plan })
    }

    pub fn plan(&self) -> &[LayerPlan] {
        &self.plan
    }

    pub fn input_size(&self) -> usize {
        self.spec.input.size()
    }

    pub fn output_size(&self) -> usize {
        self.plan.last().map_or(self.input_size(), |l| l.output.size())
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn run(&self, x: &[f64], mut dropout: Option<&mut DropoutSource>) -> Result<Tape> {
        if x.len() != self.input_size() {
            return Err(Error::ShapeMismatch { layer: 0, expected: self.input_size(), got: x.len() });
        }
        let mut acts = Vec::with_capacity(self.plan.len() + 1);
        let mut masks = Vec::with_capacity(self.plan.len());
        acts.push(x.to_vec());
        for l in &self.plan {
            let input = acts.last().unwrap();
            let w = &self.params[l.offset..l.offset + l.n_params];
            let mut mask = None;
            let out = match l.spec {
                LayerSpec::Dense(_) | LayerSpec::LinearOutput(_) => dense_forward(w, input, l.output.size()),
                LayerSpec::Conv1D(_) => conv_forward(w, input, l),
                LayerSpec::AvgPool1D => pool_forward(input, l),
                LayerSpec::Swish => input.iter().map(|&v| swish(v)).collect(),
                LayerSpec::Flatten => input.clone(),
                LayerSpec::Dropout(rate) => match dropout.as_deref_mut() {
                    Some(src) if rate > 0.0 => {
                        let keep = 1.0 - rate;
                        let m: Vec<f64> = (0..input.len())
                            .map(|_| if src.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect();
                        let out = input.iter().zip(&m).map(|(a, b)| a * b).collect();
                        mask = Some(m);
                        out
                    }
                    _ => input.clone(),
                },
            };
            masks.push(mask);
            acts.push(out);
        }
        Ok(Tape { acts, masks })
    }

    /// Output for one sample.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(x, None)?.acts.pop().unwrap())
    }

    /// Row-major outputs for row-major inputs.
    pub fn forward_batch(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let n_in = self.input_size();
        if !rows.len().is_multiple_of(n_in) {
            return Err(Error::ShapeMismatch { layer: 0, expected: n_in, got: rows.len() % n_in });
        }
        let outs = rows.par_chunks(n_in).map(|x| self.forward(x)).collect::<Result<Vec<_>>>()?;
        Ok(outs.concat())
    }

    /// Accumulate `∂(½Σ g·out)/∂params` into `grad` for one recorded sample.
    fn backward(&self, tape: &Tape, grad_out: Vec<f64>, grad: &mut [f64]) {
        let mut g = grad_out;
        for (i, l) in self.plan.iter().enumerate().rev() {
            let input = &tape.acts[i];
            let w = &self.params[l.offset..l.offset + l.n_params];
            let gw = &mut grad[l.offset..l.offset + l.n_params];
            g = match l.spec {
                LayerSpec::Dense(_) | LayerSpec::LinearOutput(_) => dense_backward(w, input, &g, gw),
                LayerSpec::Conv1D(_) => conv_backward(w, input, &g, gw, l),
                LayerSpec::AvgPool1D => pool_backward(&g, l),
                LayerSpec::Swish => g.iter().zip(input).map(|(gi, &x)| gi * swish_derivative(x)).collect(),
                LayerSpec::Flatten => g,
                LayerSpec::Dropout(_) => match &tape.masks[i] {
                    Some(m) => g.iter().zip(m).map(|(a, b)| a * b).collect(),
                    None => g,
                },
            };
        }
    }

    /// Mean squared error over all samples and outputs, and its gradient.
    /// `dropout` gives the `(seed, first stream id)` for per-sample masks.
    pub fn loss_and_gradient(
        &self,
        x_rows: &[f64],
        y_rows: &[f64],
        dropout: Option<(u64, u64)>,
    ) -> Result<(f64, Vec<f64>)> {
        let (n_in, n_out) = (self.input_size(), self.output_size());
        let n = x_rows.len() / n_in;
        if n == 0 || x_rows.len() != n * n_in {
            return Err(Error::ShapeMismatch { layer: 0, expected: n_in, got: x_rows.len() });
        }
        if y_rows.len() != n * n_out {
            return Err(Error::ShapeMismatch { layer: self.plan.len(), expected: n * n_out, got: y_rows.len() });
        }
        let scale = 1.0 / (n * n_out) as f64;
        let n_chunks = n.div_ceil(GRADIENT_CHUNK);
        let partials = (0..n_chunks)
            .into_par_iter()
            .map(|c| -> Result<(f64, Vec<f64>)> {
                let mut grad = vec![0.0; self.params.len()];
                let mut loss = 0.0;
                for i in c * GRADIENT_CHUNK..((c + 1) * GRADIENT_CHUNK).min(n) {
                    let mut src = dropout.map(|(seed, base)| DropoutSource::new(RngStream::new(seed, base + i as u64)));
                    let tape = self.run(&x_rows[i * n_in..(i + 1) * n_in], src.as_mut())?;
                    let out = tape.acts.last().unwrap();
                    let y = &y_rows[i * n_out..(i + 1) * n_out];
                    let g: Vec<f64> = out.iter().zip(y).map(|(o, t)| 2.0 * scale * (o - t)).collect();
                    loss += out.iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
                    self.backward(&tape, g, &mut grad);
                }
                Ok((loss, grad))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.params.len()];
        for (l, g) in partials {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((loss * scale, grad))
    }

    pub fn mse(&self, x_rows: &[f64], y_rows: &[f64]) -> Result<f64> {
        let out = self.forward_batch(x_rows)?;
        if out.len() != y_rows.len() || out.is_empty() {
            return Err(Error::ShapeMismatch { layer: self.plan.len(), expected: out.len(), got: y_rows.len() });
        }
        Ok(out.iter().zip(y_rows).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / out.len() as f64)
    }
}

fn bias_count(l: &LayerPlan) -> usize {
    match l.spec {
        LayerSpec::Dense(u) | LayerSpec::LinearOutput(u) => u,
        LayerSpec::Conv1D(f) => f,
        _ => 0,
    }
}

/// Weights `W[u][i]` row-major, then biases.
fn dense_forward(w: &[f64], x: &[f64], units: usize) -> Vec<f64> {
    let n = x.len();
    let (wm, b) = w.split_at(units * n);
    (0..units).map(|u| b[u] + wm[u * n..(u + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).collect()
}

fn dense_backward(w: &[f64], x: &[f64], g: &[f64], gw: &mut [f64]) -> Vec<f64> {
    let (n, units) = (x.len(), g.len());
    let (gwm, gb) = gw.split_at_mut(units * n);
    let wm = &w[..units * n];
    let mut gx = vec![0.0; n];
    for u in 0..units {
        let gu = g[u];
        gb[u] += gu;
        let row = &wm[u * n..(u + 1) * n];
        let grow = &mut gwm[u * n..(u + 1) * n];
        for i in 0..n {
            grow[i] += gu * x[i];
            gx[i] += row[i] * gu;
        }
    }
    gx
}

/// Weights `W[f][c][k]`, then biases.
fn conv_forward(w: &[f64], x: &[f64], l: &LayerPlan) -> Vec<f64> {
    let (c_in, len) = (l.input.channels, l.input.len);
    let (f_out, len_out) = (l.output.channels, l.output.len);
    let (wk, b) = w.split_at(f_out * c_in * CONV_KERNEL);
    let mut out = vec![0.0; f_out * len_out];
    for f in 0..f_out {
        let o = &mut out[f * len_out..(f + 1) * len_out];
        o.iter_mut().for_each(|v| *v = b[f]);
        for c in 0..c_in {
            let k = &wk[(f * c_in + c) * CONV_KERNEL..(f * c_in + c + 1) * CONV_KERNEL];
            let xc = &x[c * len..(c + 1) * len];
            for (t, ot) in o.iter_mut().enumerate() {
                let s = CONV_STRIDE * t;
                *ot += k[0] * xc[s] + k[1] * xc[s + 1] + k[2] * xc[s + 2];
            }
        }
    }
    out
}

fn conv_backward(w: &[f64], x: &[f64], g: &[f64], gw: &mut [f64], l: &LayerPlan) -> Vec<f64> {
    let (c_in, len) = (l.input.channels, l.input.len);
    let (f_out, len_out) = (l.output.channels, l.output.len);
    let (gwk, gb) = gw.split_at_mut(f_out * c_in * CONV_KERNEL);
    let wk = &w[..f_out * c_in * CONV_KERNEL];
    let mut gx = vec![0.0; c_in * len];
    for f in 0..f_out {
        let gf = &g[f * len_out..(f + 1) * len_out];
        gb[f] += gf.iter().sum::<f64>();
        for c in 0..c_in {
            let base = (f * c_in + c) * CONV_KERNEL;
            let k = &wk[base..base + CONV_KERNEL];
            let xc = &x[c * len..(c + 1) * len];
            let gxc = &mut gx[c * len..(c + 1) * len];
            let (mut d0, mut d1, mut d2) = (0.0, 0.0, 0.0);
            for (t, &gt) in gf.iter().enumerate() {
                let s = CONV_STRIDE * t;
                d0 += gt * xc[s];
                d1 += gt * xc[s + 1];
                d2 += gt * xc[s + 2];
                gxc[s] += k[0] * gt;
                gxc[s + 1] += k[1] * gt;
                gxc[s + 2] += k[2] * gt;
            }
            gwk[base] += d0;
            gwk[base + 1] += d1;
            gwk[base + 2] += d2;
        }
    }
    gx
}

fn pool_forward(x: &[f64], l: &LayerPlan) -> Vec<f64> {
    let (len, len_out) = (l.input.len, l.output.len);
    let mut out = Vec::with_capacity(l.output.size());
    for c in 0..l.input.channels {
        let xc = &x[c * len..(c + 1) * len];
        out.extend((0..len_out).map(|t| 0.5 * (xc[2 * t] + xc[2 * t + 1])));
    }
    out
}

fn pool_backward(g: &[f64], l: &LayerPlan) -> Vec<f64> {
    let (len, len_out) = (l.input.len, l.output.len);
    let mut gx = vec![0.0; l.input.size()];
    for c in 0..l.input.channels {
        for t in 0..len_out {
            let v = 0.5 * g[c * len_out + t];
            gx[c * len + 2 * t] = v;
            gx[c * len + 2 * t + 1] = v;
        }
    }
    gx
}
