use super::{Cache, Layer};
use crate::tensor::Tensor;

/// Non-overlapping max pooling. Ties go to the first position in the window.
pub(super) fn max_pool_forward(layer: &Layer, x: &Tensor, pool: usize) -> (Tensor, Cache) {
    let batch = x.batch();
    let (len, ch) = (layer.in_shapes[0][0], layer.in_shapes[0][1]);
    let out_len = len / pool;
    let xd = x.data();
    let mut out = vec![0.0; batch * out_len * ch];
    let mut arg = vec![0usize; batch * out_len * ch];
    for b in 0..batch {
        for o in 0..out_len {
            for c in 0..ch {
                let mut best_idx = (b * len + o * pool) * ch + c;
                let mut best = xd[best_idx];
                for j in 1..pool {
                    let idx = (b * len + o * pool + j) * ch + c;
                    if xd[idx] > best {
                        best = xd[idx];
                        best_idx = idx;
                    }
                }
                let dst = (b * out_len + o) * ch + c;
                out[dst] = best;
                arg[dst] = best_idx;
            }
        }
    }
    (Tensor::new(vec![batch, out_len, ch], out).expect("pool shape"), Cache::Argmax(arg))
}

pub(super) fn max_pool_backward(x: &Tensor, arg: &[usize], grad_out: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(x.shape().to_vec());
    let d = dx.data_mut();
    for (&src, &g) in arg.iter().zip(grad_out.data()) {
        d[src] += g;
    }
    dx
}
