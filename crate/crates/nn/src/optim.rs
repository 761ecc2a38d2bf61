//! Adam with bias correction.

use crate::error::{NnError, Result};
use crate::network::check_same_shapes;
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates shaped like the parameters they track.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<Tensor>>,
    v: Vec<Vec<Tensor>>,
}

impl AdamState {
    pub fn new(params: &[Vec<Tensor>]) -> Self {
        let zeros = || params.iter().map(|ps| ps.iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect()).collect();
        AdamState { beta1: ADAM_BETA1, beta2: ADAM_BETA2, eps: ADAM_EPS, step: 0, m: zeros(), v: zeros() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [Vec<Tensor>], grads: &[Vec<Tensor>], lr: f64) -> Result<()> {
        check_same_shapes(params, grads)?;
        check_same_shapes(params, &self.m)
            .map_err(|_| NnError::shape(None, "optimizer state does not match parameters"))?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for ((pg, gg), (mg, vg)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for ((p, g), (m, v)) in pg.iter_mut().zip(gg).zip(mg.iter_mut().zip(vg.iter_mut())) {
                for (((pv, &gv), mv), vv) in
                    p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut()).zip(v.data_mut().iter_mut())
                {
                    *mv = b1 * *mv + (1.0 - b1) * gv;
                    *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                    let m_hat = *mv / c1;
                    let v_hat = *vv / c2;
                    *pv -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(params: &mut [Vec<Tensor>], grads: &[Vec<Tensor>], state: &mut AdamState, lr: f64) -> Result<()> {
    state.step(params, grads, lr)
}
