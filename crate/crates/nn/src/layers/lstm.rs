//! LSTM returning the final hidden state, with backpropagation through time.

use super::{Cache, Layer};
use crate::activation::{sigmoid, Activation};
use crate::error::Result;
use crate::gemm::gemm;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub(crate) struct LstmCache {
    steps: usize,
    features: usize,
    /// Post-activation gates `[i, f, g, o]` per step, `[batch, 4 * units]`.
    gates: Vec<Vec<f64>>,
    /// Cell state per step.
    cells: Vec<Vec<f64>>,
    /// Activated cell state per step.
    cell_act: Vec<Vec<f64>>,
    /// Hidden state per step.
    hidden: Vec<Vec<f64>>,
}

fn steps_and_features(layer: &Layer) -> (usize, usize) {
    match layer.in_shapes[0].as_slice() {
        [f] => (1, *f),
        [t, f] => (*t, *f),
        _ => unreachable!("validated at build"),
    }
}

/// Copy time step `t` of `[batch, steps, features]` into `[batch, features]`.
fn step_input(x: &[f64], batch: usize, steps: usize, features: usize, t: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * features);
    for b in 0..batch {
        let start = (b * steps + t) * features;
        out.extend_from_slice(&x[start..start + features]);
    }
    out
}

pub(super) fn forward(
    layer: &Layer,
    params: &[Tensor],
    x: &Tensor,
    units: usize,
    act: Activation,
    keep_cache: bool,
) -> Result<(Tensor, Cache)> {
    let batch = x.batch();
    let (steps, features) = steps_and_features(layer);
    let (w, u, bias) = (params[0].data(), params[1].data(), params[2].data());
    let g4 = 4 * units;

    let mut cache = LstmCache {
        steps,
        features,
        gates: Vec::with_capacity(steps),
        cells: Vec::with_capacity(steps),
        cell_act: Vec::with_capacity(steps),
        hidden: Vec::with_capacity(steps),
    };
    let mut h = vec![0.0; batch * units];
    let mut c = vec![0.0; batch * units];
    for t in 0..steps {
        let mut z = vec![0.0; batch * g4];
        if steps == 1 {
            gemm(batch, features, g4, x.data(), false, w, false, 0.0, &mut z);
        } else {
            let xt = step_input(x.data(), batch, steps, features, t);
            gemm(batch, features, g4, &xt, false, w, false, 0.0, &mut z);
        }
        // h_{-1} = 0, so the recurrent term only matters from the second step.
        if t > 0 {
            gemm(batch, units, g4, &h, false, u, false, 1.0, &mut z);
        }
        let mut c_new = vec![0.0; batch * units];
        let mut a_new = vec![0.0; batch * units];
        let mut h_new = vec![0.0; batch * units];
        for b in 0..batch {
            let zr = &mut z[b * g4..(b + 1) * g4];
            for (v, bb) in zr.iter_mut().zip(bias) {
                *v += bb;
            }
            for j in 0..units {
                let i_g = sigmoid(zr[j]);
                let f_g = sigmoid(zr[units + j]);
                let g_g = act.eval(zr[2 * units + j]);
                let o_g = sigmoid(zr[3 * units + j]);
                zr[j] = i_g;
                zr[units + j] = f_g;
                zr[2 * units + j] = g_g;
                zr[3 * units + j] = o_g;
                let idx = b * units + j;
                let cell = f_g * c[idx] + i_g * g_g;
                let a = act.eval(cell);
                c_new[idx] = cell;
                a_new[idx] = a;
                h_new[idx] = o_g * a;
            }
        }
        if keep_cache {
            cache.gates.push(z);
            cache.cells.push(c_new.clone());
            cache.cell_act.push(a_new);
            cache.hidden.push(h_new.clone());
        }
        c = c_new;
        h = h_new;
    }
    let out = Tensor::new(vec![batch, units], h)?;
    let cache = if keep_cache { Cache::Lstm(Box::new(cache)) } else { Cache::None };
    Ok((out, cache))
}

pub(super) fn backward(
    params: &[Tensor],
    x: &Tensor,
    cache: &LstmCache,
    grad_out: &Tensor,
    units: usize,
    act: Activation,
) -> (Tensor, Vec<Tensor>) {
    let batch = x.batch();
    let (steps, features) = (cache.steps, cache.features);
    let (w, u) = (params[0].data(), params[1].data());
    let g4 = 4 * units;

    let mut dw = vec![0.0; features * g4];
    let mut du = vec![0.0; units * g4];
    let mut db = vec![0.0; g4];
    let mut dx = vec![0.0; batch * steps * features];

    let mut dh = grad_out.data().to_vec();
    let mut dc_next = vec![0.0; batch * units];
    for t in (0..steps).rev() {
        let gates = &cache.gates[t];
        let a = &cache.cell_act[t];
        let mut dz = vec![0.0; batch * g4];
        for b in 0..batch {
            for j in 0..units {
                let idx = b * units + j;
                let gi = b * g4;
                let (i_g, f_g, g_g, o_g) =
                    (gates[gi + j], gates[gi + units + j], gates[gi + 2 * units + j], gates[gi + 3 * units + j]);
                let c_prev = if t > 0 { cache.cells[t - 1][idx] } else { 0.0 };
                let d_o = dh[idx] * a[idx];
                let dc = dc_next[idx] + dh[idx] * o_g * act.derivative_from_output(a[idx]);
                let d_i = dc * g_g;
                let d_g = dc * i_g;
                let d_f = dc * c_prev;
                dc_next[idx] = dc * f_g;
                dz[gi + j] = d_i * i_g * (1.0 - i_g);
                dz[gi + units + j] = d_f * f_g * (1.0 - f_g);
                dz[gi + 2 * units + j] = d_g * act.derivative_from_output(g_g);
                dz[gi + 3 * units + j] = d_o * o_g * (1.0 - o_g);
            }
        }
        for row in dz.chunks(g4) {
            for (acc, v) in db.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut dxt = vec![0.0; batch * features];
        if steps == 1 {
            gemm(features, batch, g4, x.data(), true, &dz, false, 1.0, &mut dw);
        } else {
            let xt = step_input(x.data(), batch, steps, features, t);
            gemm(features, batch, g4, &xt, true, &dz, false, 1.0, &mut dw);
        }
        gemm(batch, g4, features, &dz, false, w, true, 0.0, &mut dxt);
        for b in 0..batch {
            let dst = (b * steps + t) * features;
            dx[dst..dst + features].copy_from_slice(&dxt[b * features..(b + 1) * features]);
        }
        if t > 0 {
            gemm(units, batch, g4, &cache.hidden[t - 1], true, &dz, false, 1.0, &mut du);
            let mut dh_prev = vec![0.0; batch * units];
            gemm(batch, g4, units, &dz, false, u, true, 0.0, &mut dh_prev);
            dh = dh_prev;
        }
    }

    (
        Tensor::new(x.shape().to_vec(), dx).expect("input shape"),
        vec![
            Tensor::new(vec![features, g4], dw).expect("kernel shape"),
            Tensor::new(vec![units, g4], du).expect("recurrent shape"),
            Tensor::new(vec![g4], db).expect("bias shape"),
        ],
    )
}
