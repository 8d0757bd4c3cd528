//! Compact convolutional softmax classifier with exact backpropagation.
//!
//! A network is an ordered stack of [`LayerSpec`]s ending in a single
//! softmax. Samples are processed one at a time in `channels x height x width`
//! layout; batches are plain loops whose gradients are reduced in sample
//! order, which keeps training bit-for-bit reproducible.

mod checkpoint;
mod layers;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use layers::{backward, forward, ForwardCache};
pub use train::{
    batch_gradient, cross_entropy, predict_probs, sgd_step, softmax, train, train_with_validation, Dataset,
    TargetMatrix,
    TrainConfig, TrainReport, CE_LOG_FLOOR,
};

/// Dense row-major array of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite tensor value at index {i}")));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            values: vec![0.0; n],
        }
    }

    pub fn vector(values: Vec<f64>) -> Result<Self> {
        Self::new(vec![values.len()], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    Relu,
    /// Non-overlapping max pooling with a `size x size` window.
    MaxPool2d { size: usize },
    GlobalAvgPool,
    /// Fully connected layer; flattens its input.
    Dense { units: usize },
    Softmax,
}

fn one() -> usize {
    1
}

impl LayerSpec {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let need_chw = |name: &str| -> Result<(usize, usize, usize)> {
            match *input {
                [c, h, w] => Ok((c, h, w)),
                _ => Err(Error::Shape(format!("{name} needs a 3-d input, got {input:?}"))),
            }
        };
        match *self {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let (_, h, w) = need_chw("conv2d")?;
                if out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err(Error::InvalidConfig(
                        "conv2d needs positive channels, kernel and stride".into(),
                    ));
                }
                if h + 2 * padding < kernel || w + 2 * padding < kernel {
                    return Err(Error::Shape(format!(
                        "conv2d kernel {kernel} does not fit padded input {input:?}"
                    )));
                }
                Ok(vec![
                    out_channels,
                    (h + 2 * padding - kernel) / stride + 1,
                    (w + 2 * padding - kernel) / stride + 1,
                ])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::MaxPool2d { size } => {
                let (c, h, w) = need_chw("maxpool2d")?;
                if size == 0 || h < size || w < size {
                    return Err(Error::Shape(format!("maxpool {size} does not fit input {input:?}")));
                }
                Ok(vec![c, h / size, w / size])
            }
            LayerSpec::GlobalAvgPool => {
                let (c, _, _) = need_chw("global_avg_pool")?;
                Ok(vec![c])
            }
            LayerSpec::Dense { units } => {
                if units == 0 {
                    return Err(Error::InvalidConfig("dense layer needs at least one unit".into()));
                }
                Ok(vec![units])
            }
            LayerSpec::Softmax => match *input {
                [_] => Ok(input.to_vec()),
                _ => Err(Error::Shape(format!("softmax needs a vector input, got {input:?}"))),
            },
        }
    }

    /// `(weight shape, bias shape)` for layers that carry parameters.
    fn param_shapes(&self, input: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                ..
            } => Some((vec![out_channels, input[0], kernel, kernel], vec![out_channels])),
            LayerSpec::Dense { units } => {
                Some((vec![units, input.iter().product()], vec![units]))
            }
            _ => None,
        }
    }
}

/// Architecture: input geometry, layer stack and class count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
}

impl NetworkSpec {
    /// `conv3x3 -> relu -> maxpool2` per entry of `widths`, then global
    /// average pooling, a dense class layer and softmax.
    pub fn compact(input_shape: [usize; 3], num_classes: usize, widths: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(widths.len() * 3 + 3);
        for &w in widths {
            layers.push(LayerSpec::Conv2d {
                out_channels: w,
                kernel: 3,
                stride: 1,
                padding: 1,
            });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::MaxPool2d { size: 2 });
        }
        layers.extend([
            LayerSpec::GlobalAvgPool,
            LayerSpec::Dense { units: num_classes },
            LayerSpec::Softmax,
        ]);
        Self {
            input_shape: input_shape.to_vec(),
            layers,
            num_classes,
        }
    }

    /// Shapes flowing through the stack: entry `l` is the input of layer `l`,
    /// the last entry is the softmax output.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.layers.len() < 2 {
            return Err(Error::InvalidConfig("a network needs at least two layers".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("a classifier needs at least two classes".into()));
        }
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "input shape {:?} must be non-empty and positive",
                self.input_shape
            )));
        }
        let softmax_count = self.layers.iter().filter(|l| **l == LayerSpec::Softmax).count();
        if softmax_count != 1 || self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(Error::InvalidConfig(
                "the stack must end in exactly one softmax layer".into(),
            ));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer
                .output_shape(shapes.last().unwrap())
                .map_err(|e| e.context(format!("layer {i} ({layer:?})")))?;
            shapes.push(next);
        }
        let out = shapes.last().unwrap();
        if out != &[self.num_classes] {
            return Err(Error::Shape(format!(
                "network produces {out:?} but there are {} classes",
                self.num_classes
            )));
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    pub fn num_params(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .zip(&shapes)
            .filter_map(|(l, s)| l.param_shapes(s))
            .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .sum())
    }
}

/// Weight and bias of one layer; both empty for parameter-free layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LayerParams {
    fn empty() -> Self {
        Self {
            weight: Tensor::zeros(vec![0]),
            bias: Tensor::zeros(vec![0]),
        }
    }

    pub fn has_params(&self) -> bool {
        !self.weight.is_empty()
    }
}

/// Trainable parameters, one entry per layer of the owning [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    layers: Vec<LayerParams>,
}

impl ParamSet {
    /// All-zero parameters shaped for `spec`.
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let layers = spec
            .layers
            .iter()
            .zip(&shapes)
            .map(|(l, s)| match l.param_shapes(s) {
                Some((w, b)) => LayerParams {
                    weight: Tensor::zeros(w),
                    bias: Tensor::zeros(b),
                },
                None => LayerParams::empty(),
            })
            .collect();
        Ok(Self { layers })
    }

    /// Glorot-uniform weights `U(-s, s)`, `s = scale * sqrt(6 / (fan_in + fan_out))`,
    /// zero biases.
    pub fn init(spec: &NetworkSpec, rng: &mut impl rand::Rng, scale: f64) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        for (layer, p) in spec.layers.iter().zip(params.layers.iter_mut()) {
            let (fan_in, fan_out) = match (*layer, p.weight.shape()) {
                (LayerSpec::Conv2d { .. }, &[o, c, k, _]) => (c * k * k, o * k * k),
                (LayerSpec::Dense { .. }, &[o, i]) => (i, o),
                _ => continue,
            };
            let bound = scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in p.weight.values_mut() {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(params)
    }

    pub fn from_layers(spec: &NetworkSpec, layers: Vec<LayerParams>) -> Result<Self> {
        let template = Self::zeros(spec)?;
        if template.layers.len() != layers.len() {
            return Err(Error::Shape(format!(
                "{} parameter layers for a {}-layer network",
                layers.len(),
                template.layers.len()
            )));
        }
        for (i, (want, got)) in template.layers.iter().zip(&layers).enumerate() {
            if want.weight.shape() != got.weight.shape() || want.bias.shape() != got.bias.shape() {
                return Err(Error::Shape(format!(
                    "layer {i}: expected weight {:?} / bias {:?}, got {:?} / {:?}",
                    want.weight.shape(),
                    want.bias.shape(),
                    got.weight.shape(),
                    got.bias.shape()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn num_values(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Every parameter in layer order, weights before biases.
    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.values().iter().chain(l.bias.values()).copied())
    }

    /// Mutable access to the flat parameter `index` in [`iter_values`] order.
    ///
    /// [`iter_values`]: ParamSet::iter_values
    pub fn value_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for layer in &mut self.layers {
            let wl = layer.weight.len();
            if index < wl {
                return Some(&mut layer.weight.values_mut()[index]);
            }
            index -= wl;
            let bl = layer.bias.len();
            if index < bl {
                return Some(&mut layer.bias.values_mut()[index]);
            }
            index -= bl;
        }
        None
    }

    pub(crate) fn same_shape(&self, other: &ParamSet) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weight.shape() == b.weight.shape() && a.bias.shape() == b.bias.shape()
            })
    }

    /// FNV-1a over the bit patterns of every value; lets a forward cache
    /// detect that it was produced with different parameters.
    pub(crate) fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.iter_values() {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// Rounds every value to the nearest `f32`, matching what a checkpoint
    /// stores.
    pub fn round_to_f32(&mut self) {
        for layer in &mut self.layers {
            for v in layer.weight.values_mut().iter_mut().chain(layer.bias.values_mut()) {
                *v = *v as f32 as f64;
            }
        }
    }

    pub(crate) fn scale_in_place(&mut self, k: f64) {
        for layer in &mut self.layers {
            for v in layer.weight.values_mut().iter_mut().chain(layer.bias.values_mut()) {
                *v *= k;
            }
        }
    }

    pub(crate) fn add_assign(&mut self, other: &ParamSet) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.values_mut().iter_mut().zip(b.weight.values()) {
                *x += y;
            }
            for (x, y) in a.bias.values_mut().iter_mut().zip(b.bias.values()) {
                *x += y;
            }
        }
    }
}
