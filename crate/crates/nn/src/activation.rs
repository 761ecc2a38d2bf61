//! Pointwise activations and row-wise softmax.

use serde::{Deserialize, Serialize};

/// Default divisor for the negative branch of leaky ReLU (slope 0.2).
pub const DEFAULT_LEAKY_A: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    /// `x` for `x > 0`, `alpha * (e^x - 1)` otherwise.
    Elu { alpha: f64 },
    /// `x` for `x >= 0`, `x / a` otherwise, with `a` in `[1, inf)`.
    LeakyRelu { a: f64 },
    Sigmoid,
    Tanh,
    /// Softmax over the last axis.
    Softmax,
}

impl Activation {
    pub fn elu() -> Self {
        Activation::Elu { alpha: 1.0 }
    }

    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu { a: DEFAULT_LEAKY_A }
    }

    pub fn is_pointwise(&self) -> bool {
        !matches!(self, Activation::Softmax)
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match *self {
            Activation::Elu { alpha } if !(alpha.is_finite() && alpha > 0.0) => {
                Err(format!("elu alpha must be positive, got {alpha}"))
            }
            Activation::LeakyRelu { a } if !(a.is_finite() && a >= 1.0) => {
                Err(format!("leaky_relu a must lie in [1, inf), got {a}"))
            }
            _ => Ok(()),
        }
    }

    /// Scalar evaluation; not defined for softmax.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Elu { alpha } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x.exp_m1()
                }
            }
            Activation::LeakyRelu { a } => {
                if x >= 0.0 {
                    x
                } else {
                    x / a
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Softmax => panic!("softmax is not a pointwise activation"),
        }
    }

    /// Derivative expressed through the activation's output `y = f(x)`.
    ///
    /// Every pointwise activation here is monotone, so the branch can be read
    /// off the output sign.
    pub fn derivative_from_output(&self, y: f64) -> f64 {
        match *self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu { alpha } => {
                if y > 0.0 {
                    1.0
                } else {
                    y + alpha
                }
            }
            Activation::LeakyRelu { a } => {
                if y >= 0.0 {
                    1.0
                } else {
                    1.0 / a
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Softmax => panic!("softmax has no pointwise derivative"),
        }
    }

    /// Apply in place; softmax normalizes each run of `width` values.
    pub fn apply(&self, data: &mut [f64], width: usize) {
        match self {
            Activation::Linear => {}
            Activation::Softmax => {
                for row in data.chunks_mut(width) {
                    softmax(row);
                }
            }
            act => {
                for v in data.iter_mut() {
                    *v = act.eval(*v);
                }
            }
        }
    }

    /// Turn `grad` (w.r.t. the output `y`) into the gradient w.r.t. the input.
    pub fn backward(&self, y: &[f64], grad: &mut [f64], width: usize) {
        match self {
            Activation::Linear => {}
            Activation::Softmax => {
                for (yr, gr) in y.chunks(width).zip(grad.chunks_mut(width)) {
                    let dot: f64 = yr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
                    for (g, &p) in gr.iter_mut().zip(yr) {
                        *g = p * (*g - dot);
                    }
                }
            }
            act => {
                for (g, &out) in grad.iter_mut().zip(y) {
                    *g *= act.derivative_from_output(out);
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
