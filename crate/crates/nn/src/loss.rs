//! Scalar losses averaged over the batch.

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside logarithms.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Mean of squared errors over every output element.
    Mse,
    /// Mean over samples of `-sum_j t_j ln p_j`.
    CategoricalCe,
    /// Mean over every element of `-(t ln p + (1 - t) ln(1 - p))`.
    BinaryCe,
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

impl Loss {
    fn check(pred: &Tensor, target: &Tensor) -> Result<()> {
        if pred.shape() != target.shape() {
            return Err(NnError::shape(
                None,
                format!("prediction {:?} and target {:?} differ", pred.shape(), target.shape()),
            ));
        }
        if pred.is_empty() {
            return Err(NnError::Domain("loss over an empty batch".into()));
        }
        Ok(())
    }

    pub fn value(&self, pred: &Tensor, target: &Tensor) -> Result<f64> {
        Self::check(pred, target)?;
        let (p, t) = (pred.data(), target.data());
        let v = match self {
            Loss::Mse => p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64,
            Loss::CategoricalCe => {
                let s: f64 = p
                    .iter()
                    .zip(t)
                    .filter(|(_, &ti)| ti != 0.0)
                    .map(|(&pi, &ti)| -ti * clamp_prob(pi).ln())
                    .sum();
                s / pred.batch() as f64
            }
            Loss::BinaryCe => {
                let s: f64 = p.iter().zip(t).map(|(&pi, &ti)| bce_term(pi, ti)).sum();
                s / p.len() as f64
            }
        };
        Ok(v)
    }

    /// Gradient of `value` with respect to `pred`.
    pub fn gradient(&self, pred: &Tensor, target: &Tensor) -> Result<Tensor> {
        Self::check(pred, target)?;
        let (p, t) = (pred.data(), target.data());
        let data: Vec<f64> = match self {
            Loss::Mse => {
                let scale = 2.0 / p.len() as f64;
                p.iter().zip(t).map(|(a, b)| scale * (a - b)).collect()
            }
            Loss::CategoricalCe => {
                let scale = 1.0 / pred.batch() as f64;
                p.iter()
                    .zip(t)
                    .map(|(&pi, &ti)| if ti == 0.0 { 0.0 } else { -scale * ti / clamp_prob(pi) })
                    .collect()
            }
            Loss::BinaryCe => {
                let scale = 1.0 / p.len() as f64;
                p.iter()
                    .zip(t)
                    .map(|(&pi, &ti)| {
                        let q = clamp_prob(pi);
                        let mut g = 0.0;
                        if ti != 0.0 {
                            g -= ti / q;
                        }
                        if ti != 1.0 {
                            g += (1.0 - ti) / (1.0 - q);
                        }
                        scale * g
                    })
                    .collect()
            }
        };
        Tensor::new(pred.shape().to_vec(), data)
    }
}

fn bce_term(p: f64, t: f64) -> f64 {
    // Exact zero for a perfect hard prediction; the clamp would leave ~1e-12.
    if (t == 1.0 && p == 1.0) || (t == 0.0 && p == 0.0) {
        return 0.0;
    }
    let q = clamp_prob(p);
    let mut v = 0.0;
    if t != 0.0 {
        v -= t * q.ln();
    }
    if t != 1.0 {
        v -= (1.0 - t) * (1.0 - q).ln();
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: Vec<f64>) -> Tensor {
        let n = v.len();
        Tensor::new(vec![1, n], v).unwrap()
    }

    #[test]
    fn bce_is_zero_only_for_exact_hard_predictions() {
        let loss = Loss::BinaryCe;
        assert_eq!(loss.value(&t(vec![1.0]), &t(vec![1.0])).unwrap(), 0.0);
        assert_eq!(loss.value(&t(vec![0.0]), &t(vec![0.0])).unwrap(), 0.0);
        for (p, y) in [(0.5, 0.5), (0.3, 1.0), (0.9, 0.0), (1e-9, 1.0)] {
            assert!(loss.value(&t(vec![p]), &t(vec![y])).unwrap() > 0.0, "p={p} y={y}");
        }
    }

    #[test]
    fn cce_of_one_hot_selects_target_probability() {
        let p = t(vec![0.2, 0.5, 0.3]);
        let y = t(vec![0.0, 0.0, 1.0]);
        let v = Loss::CategoricalCe.value(&p, &y).unwrap();
        assert!((v - (-(0.3f64).ln())).abs() < 1e-15);
    }

    #[test]
    fn mse_averages_over_elements() {
        let p = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = Tensor::zeros(vec![2, 2]);
        assert_eq!(Loss::Mse.value(&p, &y).unwrap(), 30.0 / 4.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(Loss::Mse.value(&t(vec![1.0]), &t(vec![1.0, 2.0])).is_err());
    }
}
