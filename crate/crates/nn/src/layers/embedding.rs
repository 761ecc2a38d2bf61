use crate::error::{NnError, Result};
use crate::tensor::Tensor;

fn class_index(v: f64, num_classes: usize) -> Result<usize> {
    if v.fract() != 0.0 || v < 0.0 || v >= num_classes as f64 {
        return Err(NnError::Domain(format!("embedding index {v} outside [0, {num_classes})")));
    }
    Ok(v as usize)
}

pub(super) fn forward(params: &[Tensor], x: &Tensor, num_classes: usize, dim: usize) -> Result<Tensor> {
    let table = params[0].data();
    let mut out = Vec::with_capacity(x.batch() * dim);
    for &v in x.data() {
        let c = class_index(v, num_classes)?;
        out.extend_from_slice(&table[c * dim..(c + 1) * dim]);
    }
    Tensor::new(vec![x.batch(), dim], out)
}

pub(super) fn backward(x: &Tensor, grad_out: &Tensor, num_classes: usize, dim: usize) -> Tensor {
    let mut dt = Tensor::zeros(vec![num_classes, dim]);
    let d = dt.data_mut();
    for (row, &v) in grad_out.data().chunks(dim).zip(x.data()) {
        // Indices were validated by the forward pass.
        let c = v as usize;
        for (a, g) in d[c * dim..(c + 1) * dim].iter_mut().zip(row) {
            *a += g;
        }
    }
    dt
}
