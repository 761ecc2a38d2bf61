//! Powed representation, min-max label scaling and one-hot encoding.

use serde::{Deserialize, Serialize};

use super::{LabelSet, PowedInfo, RadioMap, Representation};
use crate::error::{CoreError, Result};

pub const DEFAULT_BETA: f64 = std::f64::consts::E;

/// Map one detected reading into [0, 1]. The flag reports a clamp from above.
///
/// Readings weaker than `min` (possible on a test split) clamp to 0.
pub fn powed_value(rss: f64, min: f64, beta: f64) -> (f64, bool) {
    if rss > 0.0 {
        return (1.0, true);
    }
    if rss <= min {
        return (0.0, false);
    }
    (((rss - min) / -min).powf(beta), false)
}

/// Powed transform using the minimum detected value of `rm` itself.
pub fn to_powed(rm: &RadioMap, beta: f64) -> Result<RadioMap> {
    if rm.representation() != Representation::RawDbm {
        return Err(CoreError::InvalidState("radio map is already powed".into()));
    }
    let min = rm
        .rss()
        .iter()
        .copied()
        .filter(|v| rm.is_detected(*v))
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(CoreError::Domain("no detected RSS values".into()));
    }
    to_powed_with_min(rm, beta, min)
}

/// Powed transform against a given minimum (the training split's).
pub fn to_powed_with_min(rm: &RadioMap, beta: f64, min: f64) -> Result<RadioMap> {
    if rm.representation() != Representation::RawDbm {
        return Err(CoreError::InvalidState("radio map is already powed".into()));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(CoreError::Domain(format!("beta must be positive, got {beta}")));
    }
    if !(min < 0.0) {
        return Err(CoreError::Domain(format!("minimum detected RSS must be negative, got {min} dBm")));
    }
    let mut clamped = 0usize;
    let values = rm
        .rss()
        .iter()
        .map(|&v| {
            if !rm.is_detected(v) {
                return 0.0;
            }
            let (p, hi) = powed_value(v, min, beta);
            clamped += hi as usize;
            p
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} RSS readings above 0 dBm were clamped to 1");
    }
    rm.clone().set_powed(values, PowedInfo { beta, min_dbm: min })
}

/// Per-axis min-max scaling of (x, y, z).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelScaler {
    pub mins: [f64; 3],
    pub maxs: [f64; 3],
}

impl LabelScaler {
    pub fn fit(labels: &LabelSet) -> Result<Self> {
        if labels.is_empty() {
            return Err(CoreError::Domain("cannot fit a scaler on no labels".into()));
        }
        let mut mins = [f64::INFINITY; 3];
        let mut maxs = [f64::NEG_INFINITY; 3];
        for i in 0..labels.len() {
            for (k, v) in labels.position(i).into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(CoreError::Domain(format!("non-finite label {v} in row {i}")));
                }
                mins[k] = mins[k].min(v);
                maxs[k] = maxs[k].max(v);
            }
        }
        Ok(LabelScaler { mins, maxs })
    }

    pub fn scale(&self, p: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|k| {
            let span = self.maxs[k] - self.mins[k];
            if span == 0.0 {
                0.0
            } else {
                (p[k] - self.mins[k]) / span
            }
        })
    }

    pub fn unscale(&self, s: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|k| {
            let span = self.maxs[k] - self.mins[k];
            if span == 0.0 {
                self.mins[k]
            } else {
                s[k] * span + self.mins[k]
            }
        })
    }

    /// Row-major `[m, 3]` scaled targets.
    pub fn scale_all(&self, labels: &LabelSet) -> Vec<f64> {
        (0..labels.len()).flat_map(|i| self.scale(labels.position(i))).collect()
    }
}

pub fn one_hot(index: usize, num_classes: usize) -> Result<Vec<f64>> {
    if index >= num_classes {
        return Err(CoreError::Domain(format!("class {index} out of range for {num_classes} classes")));
    }
    let mut v = vec![0.0; num_classes];
    v[index] = 1.0;
    Ok(v)
}

/// Row-major `[indices.len(), num_classes]` one-hot matrix.
pub fn one_hot_matrix(indices: &[usize], num_classes: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(indices.len() * num_classes);
    for &i in indices {
        out.extend(one_hot(i, num_classes)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiomap::LabelMapping;

    fn raw(values: Vec<f64>, n: usize) -> RadioMap {
        let m = values.len() / n;
        let mut labels = LabelSet::default();
        for i in 0..m {
            labels.push([i as f64, 0.0, 0.0], 0, 0);
        }
        let ids = (0..n).map(|i| format!("AP{i}")).collect();
        RadioMap::new(values, ids, labels, Representation::RawDbm, 100.0, LabelMapping { floors: vec![0], buildings: vec![0] })
            .unwrap()
    }

    #[test]
    fn endpoints_and_sentinel() {
        let p = to_powed(&raw(vec![-100.0, 100.0, -50.0, 0.0], 2), DEFAULT_BETA).unwrap();
        assert_eq!(p.rss()[0], 0.0);
        assert_eq!(p.rss()[1], 0.0);
        assert_eq!(p.rss()[3], 1.0);
        assert_eq!(p.powed().unwrap().min_dbm, -100.0);
        assert_eq!(p.representation(), Representation::Powed);
    }

    #[test]
    fn half_way_is_half_to_the_e() {
        // 0.5^e evaluated at 30 significant digits: 0.151955223257912965548...
        let (v, _) = powed_value(-50.0, -100.0, DEFAULT_BETA);
        assert!((v - 0.151_955_223_257_912_97).abs() < 1e-15, "{v}");
    }

    #[test]
    fn positive_readings_clamp_to_one() {
        let (v, clamped) = powed_value(3.0, -100.0, DEFAULT_BETA);
        assert_eq!((v, clamped), (1.0, true));
        let p = to_powed(&raw(vec![-90.0, 3.0], 2), DEFAULT_BETA).unwrap();
        assert_eq!(p.rss()[1], 1.0);
    }

    #[test]
    fn readings_below_training_min_clamp_to_zero() {
        assert_eq!(powed_value(-120.0, -100.0, DEFAULT_BETA), (0.0, false));
    }

    #[test]
    fn state_and_domain_errors() {
        let p = to_powed(&raw(vec![-90.0], 1), DEFAULT_BETA).unwrap();
        assert!(matches!(to_powed(&p, DEFAULT_BETA), Err(CoreError::InvalidState(_))));
        assert!(matches!(to_powed(&raw(vec![100.0], 1), DEFAULT_BETA), Err(CoreError::Domain(_))));
        assert!(matches!(to_powed(&raw(vec![0.0, 5.0], 2), DEFAULT_BETA), Err(CoreError::Domain(_))));
    }

    #[test]
    fn scaler_endpoints_and_degenerate_axis() {
        let mut l = LabelSet::default();
        l.push([0.0, 3.0, 7.0], 0, 0);
        l.push([10.0, 5.0, 7.0], 0, 0);
        let s = LabelScaler::fit(&l).unwrap();
        assert_eq!(s.scale([0.0, 3.0, 7.0]), [0.0, 0.0, 0.0]);
        assert_eq!(s.scale([10.0, 5.0, 7.0]), [1.0, 1.0, 0.0]);
        assert_eq!(s.scale([5.0, 4.0, 7.0])[0], 0.5);
        assert_eq!(s.unscale([0.3, 0.5, 0.9])[2], 7.0);
    }

    #[test]
    fn scaler_rejects_non_finite() {
        let mut l = LabelSet::default();
        l.push([f64::NAN, 0.0, 0.0], 0, 0);
        assert!(matches!(LabelScaler::fit(&l), Err(CoreError::Domain(_))));
    }

    #[test]
    fn one_hot_cases() {
        assert_eq!(one_hot(0, 3).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(one_hot(2, 3).unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(one_hot(3, 3).is_err());
        assert_eq!(one_hot_matrix(&[1, 0], 2).unwrap(), vec![0.0, 1.0, 1.0, 0.0]);
    }
}
