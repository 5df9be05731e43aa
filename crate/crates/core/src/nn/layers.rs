//! Layer kinds, shape algebra, and the two architecture builders.

use crate::error::{Error, Result};

pub const CONV_KERNEL: usize = 3;
pub const CONV_STRIDE: usize = 2;
pub const POOL_SIZE: usize = 2;

/// Activations are `(channels, len)`, stored channel-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub len: usize,
}

impl Shape {
    pub const fn new(channels: usize, len: usize) -> Self {
        Self { channels, len }
    }

    pub fn size(&self) -> usize {
        self.channels * self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    /// Affine map of the flattened input to `units` outputs.
    Dense(usize),
    /// Valid convolution with kernel 3, stride 2.
    Conv1D(usize),
    /// Average pooling with window 2, stride 2; a trailing odd element is dropped.
    AvgPool1D,
    Swish,
    Flatten,
    /// Inverted dropout; identity at inference.
    Dropout(f64),
    /// Final affine layer without activation.
    LinearOutput(usize),
}

impl LayerSpec {
    pub fn output_shape(&self, s: Shape) -> Result<Shape> {
        Ok(match *self {
            LayerSpec::Dense(u) | LayerSpec::LinearOutput(u) => Shape::new(1, u),
            LayerSpec::Conv1D(f) => {
                if s.len < CONV_KERNEL {
                    return Err(Error::Config(format!("convolution input length {} below kernel size", s.len)));
                }
                Shape::new(f, (s.len - CONV_KERNEL) / CONV_STRIDE + 1)
            }
            LayerSpec::AvgPool1D => {
                if s.len < POOL_SIZE {
                    return Err(Error::Config(format!("pooling input length {} below window", s.len)));
                }
                Shape::new(s.channels, s.len / POOL_SIZE)
            }
            LayerSpec::Swish | LayerSpec::Dropout(_) => s,
            LayerSpec::Flatten => Shape::new(1, s.size()),
        })
    }

    pub fn param_count(&self, s: Shape) -> usize {
        match *self {
            LayerSpec::Dense(u) | LayerSpec::LinearOutput(u) => u * s.size() + u,
            LayerSpec::Conv1D(f) => f * s.channels * CONV_KERNEL + f,
            _ => 0,
        }
    }

    /// Glorot fans `(fan_in, fan_out)` for layers with weights.
    pub fn fans(&self, s: Shape) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Dense(u) | LayerSpec::LinearOutput(u) => Some((s.size(), u)),
            LayerSpec::Conv1D(f) => Some((s.channels * CONV_KERNEL, f * CONV_KERNEL)),
            _ => None,
        }
    }

    pub fn to_token(&self) -> String {
        match *self {
            LayerSpec::Dense(u) => format!("dense:{u}"),
            LayerSpec::Conv1D(f) => format!("conv1d:{f}"),
            LayerSpec::AvgPool1D => "avgpool".into(),
            LayerSpec::Swish => "swish".into(),
            LayerSpec::Flatten => "flatten".into(),
            LayerSpec::Dropout(r) => format!("dropout:{r:?}"),
            LayerSpec::LinearOutput(p) => format!("linear:{p}"),
        }
    }

    pub fn from_token(t: &str) -> Result<Self> {
        let (name, arg) = t.split_once(':').map_or((t, None), |(a, b)| (a, Some(b)));
        let int = || -> Result<usize> {
            arg.and_then(|a| a.parse().ok()).ok_or_else(|| Error::Format(format!("bad layer token '{t}'")))
        };
        Ok(match name {
            "dense" => LayerSpec::Dense(int()?),
            "conv1d" => LayerSpec::Conv1D(int()?),
            "avgpool" => LayerSpec::AvgPool1D,
            "swish" => LayerSpec::Swish,
            "flatten" => LayerSpec::Flatten,
            "dropout" => LayerSpec::Dropout(
                arg.and_then(|a| a.parse().ok()).ok_or_else(|| Error::Format(format!("bad layer token '{t}'")))?,
            ),
            "linear" => LayerSpec::LinearOutput(int()?),
            _ => return Err(Error::Format(format!("unknown layer '{t}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

/// Resolved per-layer shapes and parameter offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    pub spec: LayerSpec,
    pub input: Shape,
    pub output: Shape,
    pub offset: usize,
    pub n_params: usize,
}

impl ModelSpec {
    pub fn plan(&self) -> Result<Vec<LayerPlan>> {
        let mut shape = self.input;
        if shape.size() == 0 {
            return Err(Error::Config("empty model input".into()));
        }
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.layers.len());
        for spec in &self.layers {
            if let LayerSpec::Dropout(r) = spec {
                if !(0.0..1.0).contains(r) {
                    return Err(Error::Config(format!("dropout rate {r} outside [0, 1)")));
                }
            }
            let output = spec.output_shape(shape)?;
            let n_params = spec.param_count(shape);
            out.push(LayerPlan { spec: *spec, input: shape, output, offset, n_params });
            offset += n_params;
            shape = output;
        }
        Ok(out)
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self.plan()?.iter().map(|l| l.n_params).sum())
    }

    pub fn output_shape(&self) -> Result<Shape> {
        Ok(self.plan()?.last().map_or(self.input, |l| l.output))
    }

    pub fn output_size(&self) -> Result<usize> {
        Ok(self.output_shape()?.size())
    }

    pub fn layers_token(&self) -> String {
        self.layers.iter().map(LayerSpec::to_token).collect::<Vec<_>>().join(",")
    }
}

/// `n_layers` blocks of `Dense(n_units) + Swish`, then `LinearOutput(p)`.
pub fn dnn(input: usize, n_layers: usize, n_units: usize, p: usize) -> ModelSpec {
    let mut layers = Vec::with_capacity(2 * n_layers + 1);
    for _ in 0..n_layers {
        layers.extend([LayerSpec::Dense(n_units), LayerSpec::Swish]);
    }
    layers.push(LayerSpec::LinearOutput(p));
    ModelSpec { input: Shape::new(1, input), layers }
}

/// `n_layers` blocks of `Conv1D(n_f·2^l) + Swish + AvgPool1D`, then `Flatten`,
/// two `Dense(32) + Swish`, and `LinearOutput(p)`.
pub fn cnn(input: Shape, n_layers: usize, n_f: usize, p: usize) -> ModelSpec {
    let mut layers = Vec::new();
    for l in 0..n_layers {
        layers.extend([LayerSpec::Conv1D(n_f << l), LayerSpec::Swish, LayerSpec::AvgPool1D]);
    }
    layers.push(LayerSpec::Flatten);
    for _ in 0..2 {
        layers.extend([LayerSpec::Dense(32), LayerSpec::Swish]);
    }
    layers.push(LayerSpec::LinearOutput(p));
    ModelSpec { input, layers }
}
