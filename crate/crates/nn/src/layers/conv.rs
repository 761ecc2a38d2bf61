//! 1-D convolution and transposed convolution via im2col + GEMM.

use super::{conv_geometry, conv_transpose_geometry, Cache, Layer, Padding};
use crate::activation::Activation;
use crate::error::Result;
use crate::gemm::gemm;
use crate::tensor::Tensor;

/// Unfold `x` (`[batch, len, ch]`) into `[batch * out_len, kernel * ch]`.
fn im2col(x: &[f64], batch: usize, len: usize, ch: usize, out_len: usize, kernel: usize, stride: usize, pad: usize) -> Vec<f64> {
    let width = kernel * ch;
    let mut cols = vec![0.0; batch * out_len * width];
    for b in 0..batch {
        let xb = &x[b * len * ch..(b + 1) * len * ch];
        for o in 0..out_len {
            let row = &mut cols[(b * out_len + o) * width..(b * out_len + o + 1) * width];
            for k in 0..kernel {
                let pos = (o * stride + k) as isize - pad as isize;
                if pos < 0 || pos as usize >= len {
                    continue;
                }
                let pos = pos as usize;
                row[k * ch..(k + 1) * ch].copy_from_slice(&xb[pos * ch..(pos + 1) * ch]);
            }
        }
    }
    cols
}

/// Adjoint of `im2col`: scatter-add columns back into `[batch, len, ch]`.
#[allow(clippy::too_many_arguments)]
fn col2im(cols: &[f64], batch: usize, len: usize, ch: usize, out_len: usize, kernel: usize, stride: usize, pad: usize) -> Vec<f64> {
    let width = kernel * ch;
    let mut x = vec![0.0; batch * len * ch];
    for b in 0..batch {
        let xb = &mut x[b * len * ch..(b + 1) * len * ch];
        for o in 0..out_len {
            let row = &cols[(b * out_len + o) * width..(b * out_len + o + 1) * width];
            for k in 0..kernel {
                let pos = (o * stride + k) as isize - pad as isize;
                if pos < 0 || pos as usize >= len {
                    continue;
                }
                let pos = pos as usize;
                for (dst, src) in xb[pos * ch..(pos + 1) * ch].iter_mut().zip(&row[k * ch..(k + 1) * ch]) {
                    *dst += src;
                }
            }
        }
    }
    x
}

fn add_bias(z: &mut [f64], bias: &[f64]) {
    for row in z.chunks_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn bias_grad(dz: &[f64], filters: usize) -> Vec<f64> {
    let mut db = vec![0.0; filters];
    for row in dz.chunks(filters) {
        for (d, v) in db.iter_mut().zip(row) {
            *d += v;
        }
    }
    db
}

#[allow(clippy::too_many_arguments)]
pub(super) fn conv1d_forward(
    layer: &Layer,
    params: &[Tensor],
    x: &Tensor,
    kernel: usize,
    stride: usize,
    padding: Padding,
    act: Activation,
    keep_cache: bool,
) -> Result<(Tensor, Cache)> {
    let batch = x.batch();
    let (len, ch) = (layer.in_shapes[0][0], layer.in_shapes[0][1]);
    let (out_len, pad) = conv_geometry(len, kernel, stride, padding).expect("validated at build");
    let filters = layer.out_shape[1];
    let cols = im2col(x.data(), batch, len, ch, out_len, kernel, stride, pad);
    let mut z = vec![0.0; batch * out_len * filters];
    gemm(batch * out_len, kernel * ch, filters, &cols, false, params[0].data(), false, 0.0, &mut z);
    add_bias(&mut z, params[1].data());
    act.apply(&mut z, filters);
    let cache = if keep_cache { Cache::Cols(cols) } else { Cache::None };
    Ok((Tensor::new(vec![batch, out_len, filters], z)?, cache))
}

#[allow(clippy::too_many_arguments)]
pub(super) fn conv1d_backward(
    layer: &Layer,
    params: &[Tensor],
    x: &Tensor,
    y: &Tensor,
    cache: &Cache,
    grad_out: &Tensor,
    kernel: usize,
    stride: usize,
    padding: Padding,
    act: Activation,
) -> (Tensor, Vec<Tensor>) {
    let batch = x.batch();
    let (len, ch) = (layer.in_shapes[0][0], layer.in_shapes[0][1]);
    let (out_len, pad) = conv_geometry(len, kernel, stride, padding).expect("validated at build");
    let filters = layer.out_shape[1];

    let mut dz = grad_out.data().to_vec();
    act.backward(y.data(), &mut dz, filters);

    let recomputed;
    let cols = match cache {
        Cache::Cols(c) => c.as_slice(),
        _ => {
            recomputed = im2col(x.data(), batch, len, ch, out_len, kernel, stride, pad);
            recomputed.as_slice()
        }
    };
    let rows = batch * out_len;
    let width = kernel * ch;
    let mut dw = vec![0.0; width * filters];
    gemm(width, rows, filters, cols, true, &dz, false, 0.0, &mut dw);
    let db = bias_grad(&dz, filters);
    let mut dcols = vec![0.0; rows * width];
    gemm(rows, filters, width, &dz, false, params[0].data(), true, 0.0, &mut dcols);
    let dx = col2im(&dcols, batch, len, ch, out_len, kernel, stride, pad);

    (
        Tensor::new(x.shape().to_vec(), dx).expect("input shape"),
        vec![
            Tensor::new(params[0].shape().to_vec(), dw).expect("kernel shape"),
            Tensor::new(vec![filters], db).expect("bias shape"),
        ],
    )
}

#[allow(clippy::too_many_arguments)]
pub(super) fn conv1d_transpose_forward(
    layer: &Layer,
    params: &[Tensor],
    x: &Tensor,
    kernel: usize,
    stride: usize,
    padding: Padding,
    act: Activation,
) -> Result<(Tensor, Cache)> {
    let batch = x.batch();
    let (len, ch) = (layer.in_shapes[0][0], layer.in_shapes[0][1]);
    let (out_len, crop) = conv_transpose_geometry(len, kernel, stride, padding);
    let filters = layer.out_shape[1];
    // Every input position contributes kernel * filters values; scatter them.
    let mut contrib = vec![0.0; batch * len * kernel * filters];
    gemm(batch * len, ch, kernel * filters, x.data(), false, params[0].data(), false, 0.0, &mut contrib);
    // The scatter is col2im over the output with the roles of input/output swapped.
    let mut z = col2im(&contrib, batch, out_len, filters, len, kernel, stride, crop);
    add_bias(&mut z, params[1].data());
    act.apply(&mut z, filters);
    Ok((Tensor::new(vec![batch, out_len, filters], z)?, Cache::None))
}

#[allow(clippy::too_many_arguments)]
pub(super) fn conv1d_transpose_backward(
    layer: &Layer,
    params: &[Tensor],
    x: &Tensor,
    y: &Tensor,
    grad_out: &Tensor,
    kernel: usize,
    stride: usize,
    padding: Padding,
    act: Activation,
) -> (Tensor, Vec<Tensor>) {
    let batch = x.batch();
    let (len, ch) = (layer.in_shapes[0][0], layer.in_shapes[0][1]);
    let (out_len, crop) = conv_transpose_geometry(len, kernel, stride, padding);
    let filters = layer.out_shape[1];

    let mut dz = grad_out.data().to_vec();
    act.backward(y.data(), &mut dz, filters);
    let db = bias_grad(&dz, filters);

    let dcontrib = im2col(&dz, batch, out_len, filters, len, kernel, stride, crop);
    let width = kernel * filters;
    let mut dw = vec![0.0; ch * width];
    gemm(ch, batch * len, width, x.data(), true, &dcontrib, false, 0.0, &mut dw);
    let mut dx = vec![0.0; batch * len * ch];
    gemm(batch * len, width, ch, &dcontrib, false, params[0].data(), true, 0.0, &mut dx);

    (
        Tensor::new(x.shape().to_vec(), dx).expect("input shape"),
        vec![
            Tensor::new(params[0].shape().to_vec(), dw).expect("kernel shape"),
            Tensor::new(vec![filters], db).expect("bias shape"),
        ],
    )
}
