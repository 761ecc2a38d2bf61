use super::Layer;
use crate::error::Result;
use crate::tensor::Tensor;

pub(super) fn rebatch(x: Tensor, batch: usize, sample: &[usize]) -> Result<Tensor> {
    let mut shape = Vec::with_capacity(sample.len() + 1);
    shape.push(batch);
    shape.extend_from_slice(sample);
    x.reshape(shape)
}

/// Sizes of the last axis for each input, and the number of leading rows per sample.
fn concat_layout(layer: &Layer) -> (Vec<usize>, usize) {
    let widths: Vec<usize> = layer.in_shapes.iter().map(|s| *s.last().unwrap()).collect();
    let s = &layer.in_shapes[0];
    let lead: usize = s[..s.len() - 1].iter().product();
    (widths, lead)
}

pub(super) fn concat_forward(layer: &Layer, inputs: &[&Tensor]) -> Tensor {
    let batch = inputs[0].batch();
    let (widths, lead) = concat_layout(layer);
    let total: usize = widths.iter().sum();
    let mut out = Vec::with_capacity(batch * lead * total);
    for r in 0..batch * lead {
        for (t, &w) in inputs.iter().zip(&widths) {
            out.extend_from_slice(&t.data()[r * w..(r + 1) * w]);
        }
    }
    let mut shape = vec![batch];
    shape.extend_from_slice(&layer.out_shape);
    Tensor::new(shape, out).expect("concat shape")
}

pub(super) fn concat_backward(layer: &Layer, inputs: &[&Tensor], grad_out: &Tensor) -> Vec<Tensor> {
    let batch = inputs[0].batch();
    let (widths, lead) = concat_layout(layer);
    let total: usize = widths.iter().sum();
    let mut grads: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(batch * lead * w)).collect();
    let g = grad_out.data();
    for r in 0..batch * lead {
        let mut off = r * total;
        for (dst, &w) in grads.iter_mut().zip(&widths) {
            dst.extend_from_slice(&g[off..off + w]);
            off += w;
        }
    }
    grads
        .into_iter()
        .zip(inputs)
        .map(|(d, t)| Tensor::new(t.shape().to_vec(), d).expect("concat grad shape"))
        .collect()
}

pub(super) fn crop_forward(layer: &Layer, x: &Tensor, len: usize) -> Tensor {
    let batch = x.batch();
    let in_row = x.row_len();
    let inner: usize = layer.in_shapes[0][1..].iter().product();
    let keep = len * inner;
    let mut out = Vec::with_capacity(batch * keep);
    for b in 0..batch {
        out.extend_from_slice(&x.data()[b * in_row..b * in_row + keep]);
    }
    let mut shape = vec![batch];
    shape.extend_from_slice(&layer.out_shape);
    Tensor::new(shape, out).expect("crop shape")
}

pub(super) fn crop_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    let batch = x.batch();
    let in_row = x.row_len();
    let keep = grad_out.row_len();
    let mut dx = Tensor::zeros(x.shape().to_vec());
    let d = dx.data_mut();
    for b in 0..batch {
        d[b * in_row..b * in_row + keep].copy_from_slice(grad_out.row(b));
    }
    dx
}
