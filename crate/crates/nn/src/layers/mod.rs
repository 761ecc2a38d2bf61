//! Layer specifications, shape inference and the forward/backward kernels.
//!
//! Every layer sees batched tensors `[batch, ...sample_shape]`. Sequence
//! layers use `[length, channels]` sample shapes (channels last).

mod conv;
mod dense;
mod embedding;
mod lstm;
mod pool;
mod reshape;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{NnError, Result};
use crate::tensor::Tensor;
use crate::SeedRng;

pub(crate) use lstm::LstmCache;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    #[default]
    Valid,
    Same,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Kernel `[kernel_size, in_channels, filters]`, bias `[filters]`.
    Conv1d {
        filters: usize,
        kernel_size: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: Padding,
        activation: Activation,
    },
    /// Kernel `[in_channels, kernel_size, filters]`, bias `[filters]`.
    Conv1dTranspose {
        filters: usize,
        kernel_size: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: Padding,
        activation: Activation,
    },
    /// Non-overlapping windows (stride = pool_size), remainder dropped.
    MaxPool1d { pool_size: usize },
    /// Inverted dropout; identity outside training.
    Dropout { rate: f64 },
    Flatten,
    /// Returns the last hidden state. A rank-1 input is one time step.
    /// Kernel `[features, 4 * units]`, recurrent `[units, 4 * units]`,
    /// bias `[4 * units]`, gate order input, forget, cell, output.
    Lstm { units: usize, activation: Activation },
    /// Kernel `[in, units]`, bias `[units]`; rank-1 input only.
    Dense { units: usize, activation: Activation },
    /// Integer class index `[1]` to a learned vector `[dim]`.
    Embedding { num_classes: usize, dim: usize },
    /// Concatenate along the last axis.
    Concat,
    Reshape { shape: Vec<usize> },
    /// Keep the first `len` positions of the leading sample axis.
    Crop { len: usize },
}

impl LayerSpec {
    pub fn conv1d(filters: usize, kernel_size: usize, padding: Padding, activation: Activation) -> Self {
        LayerSpec::Conv1d { filters, kernel_size, stride: 1, padding, activation }
    }

    pub fn conv1d_transpose(
        filters: usize,
        kernel_size: usize,
        stride: usize,
        padding: Padding,
        activation: Activation,
    ) -> Self {
        LayerSpec::Conv1dTranspose { filters, kernel_size, stride, padding, activation }
    }

    pub fn max_pool1d(pool_size: usize) -> Self {
        LayerSpec::MaxPool1d { pool_size }
    }

    pub fn dropout(rate: f64) -> Self {
        LayerSpec::Dropout { rate }
    }

    pub fn lstm(units: usize, activation: Activation) -> Self {
        LayerSpec::Lstm { units, activation }
    }

    pub fn dense(units: usize, activation: Activation) -> Self {
        LayerSpec::Dense { units, activation }
    }

    pub fn embedding(num_classes: usize, dim: usize) -> Self {
        LayerSpec::Embedding { num_classes, dim }
    }

    pub fn reshape(shape: Vec<usize>) -> Self {
        LayerSpec::Reshape { shape }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Conv1dTranspose { .. } => "conv1d_transpose",
            LayerSpec::MaxPool1d { .. } => "max_pool1d",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Embedding { .. } => "embedding",
            LayerSpec::Concat => "concat",
            LayerSpec::Reshape { .. } => "reshape",
            LayerSpec::Crop { .. } => "crop",
        }
    }

    fn expected_inputs(&self) -> Option<usize> {
        match self {
            LayerSpec::Concat => None,
            _ => Some(1),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match self {
            LayerSpec::Conv1d { filters, kernel_size, stride, activation, .. }
            | LayerSpec::Conv1dTranspose { filters, kernel_size, stride, activation, .. } => {
                if *filters == 0 || *kernel_size == 0 || *stride == 0 {
                    return Err("filters, kernel_size and stride must be >= 1".into());
                }
                activation.validate()
            }
            LayerSpec::MaxPool1d { pool_size } if *pool_size == 0 => Err("pool_size must be >= 1".into()),
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(rate) => {
                Err(format!("dropout rate must lie in [0, 1), got {rate}"))
            }
            LayerSpec::Lstm { units, activation } => {
                if *units == 0 {
                    return Err("lstm units must be >= 1".into());
                }
                if !activation.is_pointwise() {
                    return Err("lstm activation must be pointwise".into());
                }
                activation.validate()
            }
            LayerSpec::Dense { units, activation } => {
                if *units == 0 {
                    return Err("dense units must be >= 1".into());
                }
                activation.validate()
            }
            LayerSpec::Embedding { num_classes, dim } if *num_classes == 0 || *dim == 0 => {
                Err("embedding needs num_classes >= 1 and dim >= 1".into())
            }
            LayerSpec::Crop { len } if *len == 0 => Err("crop length must be >= 1".into()),
            _ => Ok(()),
        }
    }
}

/// A layer spec bound to concrete input shapes.
#[derive(Clone, Debug)]
pub(crate) struct Layer {
    pub spec: LayerSpec,
    pub in_shapes: Vec<Vec<usize>>,
    pub out_shape: Vec<usize>,
}

/// Per-layer state recorded by a training/trace forward pass.
#[derive(Clone, Debug)]
pub(crate) enum Cache {
    None,
    Cols(Vec<f64>),
    Argmax(Vec<usize>),
    Mask(Vec<f64>),
    Lstm(Box<LstmCache>),
}

/// Output geometry of a 1-D convolution: (output length, left padding).
pub(crate) fn conv_geometry(len: usize, kernel: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Valid => {
            if len < kernel {
                None
            } else {
                Some(((len - kernel) / stride + 1, 0))
            }
        }
        Padding::Same => {
            let out = len.div_ceil(stride);
            let needed = ((out - 1) * stride + kernel).saturating_sub(len);
            Some((out, needed / 2))
        }
    }
}

/// Output geometry of a transposed 1-D convolution: (output length, crop offset).
pub(crate) fn conv_transpose_geometry(len: usize, kernel: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Valid => ((len - 1) * stride + kernel, 0),
        Padding::Same => (len * stride, kernel.saturating_sub(stride) / 2),
    }
}

fn seq_shape(shape: &[usize], what: &str) -> std::result::Result<(usize, usize), String> {
    match shape {
        [l, c] => Ok((*l, *c)),
        _ => Err(format!("{what} expects a [length, channels] input, got {shape:?}")),
    }
}

impl Layer {
    pub fn build(spec: &LayerSpec, in_shapes: Vec<Vec<usize>>) -> Result<Layer> {
        spec.validate().map_err(|m| NnError::spec(None, m))?;
        if let Some(n) = spec.expected_inputs() {
            if in_shapes.len() != n {
                return Err(NnError::spec(None, format!("{} takes {n} input(s), got {}", spec.kind_name(), in_shapes.len())));
            }
        } else if in_shapes.is_empty() {
            return Err(NnError::spec(None, "concat needs at least one input"));
        }
        let out_shape = Self::infer(spec, &in_shapes).map_err(|m| NnError::shape(None, m))?;
        if out_shape.contains(&0) {
            return Err(NnError::shape(None, format!("{} produces an empty output {out_shape:?}", spec.kind_name())));
        }
        Ok(Layer { spec: spec.clone(), in_shapes, out_shape })
    }

    fn infer(spec: &LayerSpec, ins: &[Vec<usize>]) -> std::result::Result<Vec<usize>, String> {
        let x = &ins[0];
        Ok(match spec {
            LayerSpec::Conv1d { filters, kernel_size, stride, padding, .. } => {
                let (l, _) = seq_shape(x, "conv1d")?;
                let (lo, _) = conv_geometry(l, *kernel_size, *stride, *padding)
                    .ok_or_else(|| format!("conv1d kernel {kernel_size} longer than input {l}"))?;
                vec![lo, *filters]
            }
            LayerSpec::Conv1dTranspose { filters, kernel_size, stride, padding, .. } => {
                let (l, _) = seq_shape(x, "conv1d_transpose")?;
                let (lo, _) = conv_transpose_geometry(l, *kernel_size, *stride, *padding);
                vec![lo, *filters]
            }
            LayerSpec::MaxPool1d { pool_size } => {
                let (l, c) = seq_shape(x, "max_pool1d")?;
                if l < *pool_size {
                    return Err(format!("pool_size {pool_size} longer than input {l}"));
                }
                vec![l / pool_size, c]
            }
            LayerSpec::Dropout { .. } => x.clone(),
            LayerSpec::Flatten => vec![x.iter().product()],
            LayerSpec::Lstm { units, .. } => {
                match x.as_slice() {
                    [_] | [_, _] => {}
                    _ => return Err(format!("lstm expects [features] or [time, features], got {x:?}")),
                }
                vec![*units]
            }
            LayerSpec::Dense { units, .. } => {
                if x.len() != 1 {
                    return Err(format!("dense expects a rank-1 input, got {x:?}"));
                }
                vec![*units]
            }
            LayerSpec::Embedding { dim, .. } => {
                if x.as_slice() != [1] {
                    return Err(format!("embedding expects a [1] class-index input, got {x:?}"));
                }
                vec![*dim]
            }
            LayerSpec::Concat => {
                let lead = &x[..x.len().saturating_sub(1)];
                if x.is_empty() {
                    return Err("concat inputs must have rank >= 1".into());
                }
                let mut last = 0;
                for s in ins {
                    if s.len() != x.len() || &s[..s.len() - 1] != lead {
                        return Err(format!("concat inputs disagree: {s:?} vs {x:?}"));
                    }
                    last += s[s.len() - 1];
                }
                let mut out = lead.to_vec();
                out.push(last);
                out
            }
            LayerSpec::Reshape { shape } => {
                let a: usize = x.iter().product();
                let b: usize = shape.iter().product();
                if a != b {
                    return Err(format!("cannot reshape {x:?} into {shape:?}"));
                }
                shape.clone()
            }
            LayerSpec::Crop { len } => {
                if x.is_empty() || x[0] < *len {
                    return Err(format!("cannot crop {x:?} to length {len}"));
                }
                let mut out = x.clone();
                out[0] = *len;
                out
            }
        })
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let x = &self.in_shapes[0];
        match &self.spec {
            LayerSpec::Conv1d { filters, kernel_size, .. } => {
                vec![vec![*kernel_size, x[1], *filters], vec![*filters]]
            }
            LayerSpec::Conv1dTranspose { filters, kernel_size, .. } => {
                vec![vec![x[1], *kernel_size, *filters], vec![*filters]]
            }
            LayerSpec::Lstm { units, .. } => {
                let features = *x.last().unwrap();
                vec![vec![features, 4 * units], vec![*units, 4 * units], vec![4 * units]]
            }
            LayerSpec::Dense { units, .. } => vec![vec![x[0], *units], vec![*units]],
            LayerSpec::Embedding { num_classes, dim } => vec![vec![*num_classes, *dim]],
            _ => Vec::new(),
        }
    }

    /// Glorot-uniform kernels, zero biases, small uniform embeddings.
    pub fn init_params(&self, rng: &mut SeedRng) -> Vec<Tensor> {
        let shapes = self.param_shapes();
        let glorot = |shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut SeedRng| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let len = shape.iter().product();
            let data = (0..len).map(|_| rng.random_range(-limit..limit)).collect();
            Tensor::new(shape.to_vec(), data).expect("shape matches data")
        };
        match &self.spec {
            LayerSpec::Conv1d { filters, kernel_size, .. } | LayerSpec::Conv1dTranspose { filters, kernel_size, .. } => {
                let c = self.in_shapes[0][1];
                vec![
                    glorot(&shapes[0], kernel_size * c, kernel_size * filters, rng),
                    Tensor::zeros(shapes[1].clone()),
                ]
            }
            LayerSpec::Dense { units, .. } => vec![
                glorot(&shapes[0], self.in_shapes[0][0], *units, rng),
                Tensor::zeros(shapes[1].clone()),
            ],
            LayerSpec::Lstm { units, .. } => {
                let features = shapes[0][0];
                vec![
                    glorot(&shapes[0], features, 4 * units, rng),
                    glorot(&shapes[1], *units, 4 * units, rng),
                    Tensor::zeros(shapes[2].clone()),
                ]
            }
            LayerSpec::Embedding { .. } => {
                let len = shapes[0].iter().product();
                let data = (0..len).map(|_| rng.random_range(-0.05..0.05)).collect();
                vec![Tensor::new(shapes[0].clone(), data).expect("shape matches data")]
            }
            _ => Vec::new(),
        }
    }

    pub fn forward(
        &self,
        params: &[Tensor],
        inputs: &[&Tensor],
        rng: Option<&mut SeedRng>,
        keep_cache: bool,
    ) -> Result<(Tensor, Cache)> {
        let x = inputs[0];
        let batch = x.batch();
        match &self.spec {
            LayerSpec::Conv1d { kernel_size, stride, padding, activation, .. } => {
                conv::conv1d_forward(self, params, x, *kernel_size, *stride, *padding, *activation, keep_cache)
            }
            LayerSpec::Conv1dTranspose { kernel_size, stride, padding, activation, .. } => {
                conv::conv1d_transpose_forward(self, params, x, *kernel_size, *stride, *padding, *activation)
            }
            LayerSpec::MaxPool1d { pool_size } => Ok(pool::max_pool_forward(self, x, *pool_size)),
            LayerSpec::Dropout { rate } => match rng {
                Some(rng) if *rate > 0.0 => {
                    let keep = 1.0 / (1.0 - rate);
                    let mask: Vec<f64> =
                        (0..x.len()).map(|_| if rng.random::<f64>() < *rate { 0.0 } else { keep }).collect();
                    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
                    Ok((Tensor::new(x.shape().to_vec(), data)?, Cache::Mask(mask)))
                }
                _ => Ok((x.clone(), Cache::None)),
            },
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
                Ok((reshape::rebatch(x.clone(), batch, &self.out_shape)?, Cache::None))
            }
            LayerSpec::Lstm { units, activation } => lstm::forward(self, params, x, *units, *activation, keep_cache),
            LayerSpec::Dense { units, activation } => Ok((dense::forward(params, x, *units, *activation), Cache::None)),
            LayerSpec::Embedding { num_classes, dim } => {
                Ok((embedding::forward(params, x, *num_classes, *dim)?, Cache::None))
            }
            LayerSpec::Concat => Ok((reshape::concat_forward(self, inputs), Cache::None)),
            LayerSpec::Crop { len } => Ok((reshape::crop_forward(self, x, *len), Cache::None)),
        }
    }

    /// Returns (input gradients, parameter gradients). Input gradients are
    /// `None` for inputs that are not differentiable (embedding indices).
    pub fn backward(
        &self,
        params: &[Tensor],
        inputs: &[&Tensor],
        output: &Tensor,
        cache: &Cache,
        grad_out: &Tensor,
    ) -> Result<(Vec<Option<Tensor>>, Vec<Tensor>)> {
        let x = inputs[0];
        match &self.spec {
            LayerSpec::Conv1d { kernel_size, stride, padding, activation, .. } => {
                let (dx, g) =
                    conv::conv1d_backward(self, params, x, output, cache, grad_out, *kernel_size, *stride, *padding, *activation);
                Ok((vec![Some(dx)], g))
            }
            LayerSpec::Conv1dTranspose { kernel_size, stride, padding, activation, .. } => {
                let (dx, g) = conv::conv1d_transpose_backward(
                    self, params, x, output, grad_out, *kernel_size, *stride, *padding, *activation,
                );
                Ok((vec![Some(dx)], g))
            }
            LayerSpec::MaxPool1d { .. } => {
                let Cache::Argmax(arg) = cache else {
                    return Err(NnError::shape(None, "max_pool1d backward without a trace"));
                };
                Ok((vec![Some(pool::max_pool_backward(x, arg, grad_out))], Vec::new()))
            }
            LayerSpec::Dropout { .. } => {
                let dx = match cache {
                    Cache::Mask(mask) => {
                        let data = grad_out.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                        Tensor::new(x.shape().to_vec(), data)?
                    }
                    _ => grad_out.clone(),
                };
                Ok((vec![Some(dx)], Vec::new()))
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
                Ok((vec![Some(grad_out.clone().reshape(x.shape().to_vec())?)], Vec::new()))
            }
            LayerSpec::Lstm { units, activation } => {
                let Cache::Lstm(c) = cache else {
                    return Err(NnError::shape(None, "lstm backward without a trace"));
                };
                let (dx, g) = lstm::backward(params, x, c, grad_out, *units, *activation);
                Ok((vec![Some(dx)], g))
            }
            LayerSpec::Dense { units, activation } => {
                let (dx, g) = dense::backward(params, x, output, grad_out, *units, *activation);
                Ok((vec![Some(dx)], g))
            }
            LayerSpec::Embedding { num_classes, dim } => {
                Ok((vec![None], vec![embedding::backward(x, grad_out, *num_classes, *dim)]))
            }
            LayerSpec::Concat => Ok((reshape::concat_backward(self, inputs, grad_out).into_iter().map(Some).collect(), Vec::new())),
            LayerSpec::Crop { .. } => Ok((vec![Some(reshape::crop_backward(x, grad_out))], Vec::new())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_keeps_length_at_stride_one() {
        for k in 1..6 {
            let (lo, pad) = conv_geometry(10, k, 1, Padding::Same).unwrap();
            assert_eq!(lo, 10);
            assert_eq!(pad, (k - 1) / 2);
        }
    }

    #[test]
    fn transpose_same_multiplies_length_by_stride() {
        assert_eq!(conv_transpose_geometry(4, 3, 2, Padding::Same), (8, 0));
        assert_eq!(conv_transpose_geometry(4, 3, 2, Padding::Valid), (9, 0));
        assert_eq!(conv_transpose_geometry(5, 5, 1, Padding::Same), (5, 2));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(Layer::build(&LayerSpec::dropout(1.0), vec![vec![3]]).is_err());
        assert!(Layer::build(&LayerSpec::conv1d(4, 0, Padding::Valid, Activation::Relu), vec![vec![5, 1]]).is_err());
        assert!(Layer::build(&LayerSpec::conv1d(4, 6, Padding::Valid, Activation::Relu), vec![vec![5, 1]]).is_err());
        assert!(Layer::build(&LayerSpec::dense(3, Activation::Relu), vec![vec![5, 1]]).is_err());
        assert!(Layer::build(&LayerSpec::lstm(3, Activation::Softmax), vec![vec![5]]).is_err());
    }

    #[test]
    fn spec_json_is_tagged_by_kind() {
        let spec = LayerSpec::conv1d(8, 1, Padding::Same, Activation::elu());
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"conv1d\""), "{json}");
        let back: LayerSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
