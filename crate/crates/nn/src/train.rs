//! Mini-batch training with Adam and validation-based early stopping.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::loss::Loss;
use crate::network::Network;
use crate::optim::AdamState;
use crate::tensor::Tensor;
use crate::seeded_rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
}

fn default_validation_fraction() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    pub loss: Loss,
    #[serde(default)]
    pub early_stopping_patience: Option<usize>,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NnError::Domain("epochs and batch_size must be >= 1".into()));
        }
        if self.early_stopping_patience == Some(0) {
            return Err(NnError::Domain("patience must be >= 1 when set".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(NnError::Domain(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NnError::Domain(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned, when early stopping is active.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl History {
    /// `epoch,train_loss,val_loss` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, val));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Waiting,
    Stop,
}

/// Stops once the monitored loss has not strictly improved for `patience`
/// consecutive epochs.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, wait: 0 }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            StopDecision::Improved
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Waiting
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// Mean loss of `net` in inference mode, computed in chunks.
pub fn evaluate_loss(net: &Network, inputs: &[Tensor], targets: &Tensor, loss: Loss) -> Result<f64> {
    const CHUNK: usize = 1024;
    let m = targets.batch();
    let mut total = 0.0;
    for start in (0..m).step_by(CHUNK) {
        let end = (start + CHUNK).min(m);
        let xs: Vec<Tensor> = inputs.iter().map(|t| t.slice_rows(start, end)).collect();
        let refs: Vec<&Tensor> = xs.iter().collect();
        let pred = net.predict(&refs)?;
        total += loss.value(&pred, &targets.slice_rows(start, end))? * (end - start) as f64;
    }
    Ok(total / m as f64)
}

fn check_rows(inputs: &[Tensor], targets: &Tensor) -> Result<usize> {
    let m = targets.batch();
    if m == 0 || inputs.iter().any(|t| t.batch() == 0) {
        return Err(NnError::Domain("empty training set".into()));
    }
    if inputs.iter().any(|t| t.batch() != m) {
        return Err(NnError::shape(None, "inputs and targets are not row-aligned"));
    }
    Ok(m)
}

/// Train with a validation split carved from the tail of a seeded shuffle.
///
/// The split is made only when `validation_fraction > 0`; early stopping
/// requires a non-empty split.
pub fn train(net: Network, inputs: &[Tensor], targets: &Tensor, cfg: &TrainConfig) -> Result<(Network, History)> {
    cfg.validate()?;
    let m = check_rows(inputs, targets)?;
    let n_val = (m as f64 * cfg.validation_fraction).floor() as usize;
    if n_val == 0 {
        if cfg.early_stopping_patience.is_some() {
            return Err(NnError::Domain(format!(
                "early stopping needs a validation split, but {m} rows x {} gives none",
                cfg.validation_fraction
            )));
        }
        return train_with_validation(net, inputs, targets, None, cfg);
    }
    if n_val >= m {
        return Err(NnError::Domain("validation split leaves no training rows".into()));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut seeded_rng(cfg.seed));
    let (train_idx, val_idx) = order.split_at(m - n_val);
    let tr_in: Vec<Tensor> = inputs.iter().map(|t| t.select_rows(train_idx)).collect();
    let va_in: Vec<Tensor> = inputs.iter().map(|t| t.select_rows(val_idx)).collect();
    let tr_t = targets.select_rows(train_idx);
    let va_t = targets.select_rows(val_idx);
    train_with_validation(net, &tr_in, &tr_t, Some((&va_in, &va_t)), cfg)
}

/// Train on an explicit train/validation pair.
pub fn train_with_validation(
    mut net: Network,
    inputs: &[Tensor],
    targets: &Tensor,
    validation: Option<(&[Tensor], &Tensor)>,
    cfg: &TrainConfig,
) -> Result<(Network, History)> {
    cfg.validate()?;
    let m = check_rows(inputs, targets)?;
    if let Some((vi, vt)) = validation {
        check_rows(vi, vt)?;
    }
    let mut early = match (cfg.early_stopping_patience, validation) {
        (Some(p), Some(_)) => Some(EarlyStopping::new(p)),
        (Some(_), None) => return Err(NnError::Domain("early stopping needs validation data".into())),
        (None, _) => None,
    };

    let mut rng = seeded_rng(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = AdamState::new(net.params());
    let mut history = History::default();
    let mut best_params = None;
    let mut order: Vec<usize> = (0..m).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<Tensor> = inputs.iter().map(|t| t.select_rows(batch)).collect();
            let refs: Vec<&Tensor> = xs.iter().collect();
            let y = targets.select_rows(batch);
            let trace = net.forward_trace(&refs, Some(&mut rng))?;
            let loss = cfg.loss.value(trace.output(), &y)?;
            if !loss.is_finite() {
                return Err(NnError::NonFiniteLoss { epoch, layer: trace.first_non_finite() });
            }
            let grad = cfg.loss.gradient(trace.output(), &y)?;
            let grads = net.backward(&refs, &trace, &grad)?;
            adam.step(net.params_mut(), &grads.params, cfg.learning_rate)?;
            total += loss * batch.len() as f64;
        }
        let train_loss = total / m as f64;
        let val_loss = match validation {
            Some((vi, vt)) => {
                let v = evaluate_loss(&net, vi, vt, cfg.loss)?;
                if !v.is_finite() {
                    return Err(NnError::NonFiniteLoss { epoch, layer: None });
                }
                Some(v)
            }
            None => None,
        };
        history.epochs.push(EpochRecord { epoch, train_loss, val_loss });

        if let (Some(es), Some(v)) = (early.as_mut(), val_loss) {
            match es.observe(epoch, v) {
                StopDecision::Improved => best_params = Some(net.params().to_vec()),
                StopDecision::Waiting => {}
                StopDecision::Stop => {
                    log::info!("early stopping at epoch {epoch}; restoring epoch {}", es.best_epoch());
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }

    if let Some(es) = &early {
        history.best_epoch = Some(es.best_epoch());
        if let Some(p) = best_params {
            net.set_params(p)?;
        }
    }
    Ok((net, history))
}
