//! CNN-LSTM estimators for position, floor and building.

use std::path::Path;

use fpgan_nn::{
    load_archive, save_archive, train, Activation, History, LayerSpec, Loss, Network, NetworkSpec, Padding, Tensor,
    TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::radiomap::{one_hot_matrix, LabelMapping, LabelScaler, RadioMap, Representation};
use crate::seed::derive;

/// Optimizer settings of one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetTraining {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: Option<usize>,
    pub validation_fraction: f64,
}

impl NetTraining {
    fn with_rate(learning_rate: f64, batch_size: usize) -> Self {
        NetTraining { learning_rate, epochs: 100, batch_size, patience: Some(5), validation_fraction: 0.1 }
    }

    fn train_config(&self, loss: Loss, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: Default::default(),
            loss,
            early_stopping_patience: self.patience,
            validation_fraction: self.validation_fraction,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositioningConfig {
    pub position: NetTraining,
    pub floor: NetTraining,
    pub building: NetTraining,
}

impl Default for PositioningConfig {
    fn default() -> Self {
        PositioningConfig {
            position: NetTraining::with_rate(0.0005, 256),
            floor: NetTraining::with_rate(0.0001, 100),
            building: NetTraining::with_rate(0.0001, 100),
        }
    }
}

impl PositioningConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("position", &self.position), ("floor", &self.floor), ("building", &self.building)] {
            t.train_config(Loss::Mse, 0).validate().map_err(|e| CoreError::Config(format!("{name} net: {e}")))?;
        }
        Ok(())
    }
}

const DROPOUT: f64 = 0.5;

pub fn position_net_spec(n: usize) -> NetworkSpec {
    NetworkSpec::sequential(
        vec![n, 1],
        vec![
            LayerSpec::conv1d(8, 1, Padding::Valid, Activation::elu()),
            LayerSpec::max_pool1d(1),
            LayerSpec::dropout(DROPOUT),
            LayerSpec::conv1d(8, 1, Padding::Same, Activation::elu()),
            LayerSpec::max_pool1d(1),
            LayerSpec::dropout(DROPOUT),
            LayerSpec::Flatten,
            LayerSpec::lstm(40, Activation::elu()),
            LayerSpec::dense(3, Activation::elu()),
        ],
    )
}

pub fn floor_net_spec(n: usize, floors: usize) -> NetworkSpec {
    NetworkSpec::sequential(
        vec![n, 1],
        vec![
            LayerSpec::conv1d(16, 1, Padding::Valid, Activation::Relu),
            LayerSpec::max_pool1d(2),
            LayerSpec::dropout(DROPOUT),
            LayerSpec::conv1d(32, 1, Padding::Same, Activation::Relu),
            LayerSpec::max_pool1d(1),
            LayerSpec::dropout(DROPOUT),
            LayerSpec::Flatten,
            LayerSpec::lstm(50, Activation::Relu),
            LayerSpec::dense(floors, Activation::Softmax),
        ],
    )
}

pub fn building_net_spec(n: usize, buildings: usize) -> NetworkSpec {
    NetworkSpec::sequential(
        vec![n, 1],
        vec![
            LayerSpec::conv1d(16, 1, Padding::Valid, Activation::Relu),
            LayerSpec::max_pool1d(2),
            LayerSpec::dropout(DROPOUT),
            LayerSpec::Flatten,
            LayerSpec::lstm(40, Activation::Relu),
            LayerSpec::dense(buildings, Activation::Softmax),
        ],
    )
}

/// Untrained position, floor and (when `buildings > 1`) building nets.
pub fn build_models(n: usize, floors: usize, buildings: usize, seed: u64) -> Result<(Network, Network, Option<Network>)> {
    if n == 0 || floors == 0 || buildings == 0 {
        return Err(CoreError::Domain("AP count and class counts must be >= 1".into()));
    }
    if n < 2 {
        return Err(CoreError::Domain("the floor and building nets pool by 2 and need at least 2 APs".into()));
    }
    let position = Network::new(position_net_spec(n), derive(seed, "position/init"))?;
    let floor = Network::new(floor_net_spec(n, floors), derive(seed, "floor/init"))?;
    let building = if buildings > 1 {
        Some(Network::new(building_net_spec(n, buildings), derive(seed, "building/init"))?)
    } else {
        None
    };
    Ok((position, floor, building))
}

/// Estimate for one fingerprint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedLabels {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub floor: usize,
    pub building: usize,
    pub floor_probs: Vec<f64>,
    pub building_probs: Vec<f64>,
}

impl PredictedLabels {
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct PositioningModel {
    pub position: Network,
    pub floor: Network,
    pub building: Option<Network>,
    pub scaler: LabelScaler,
    pub n_aps: usize,
    pub floor_classes: usize,
    pub building_classes: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistories {
    pub position: History,
    pub floor: History,
    pub building: Option<History>,
}

fn input_tensor(rss: &[f64], n: usize) -> Result<Tensor> {
    let m = rss.len() / n;
    Ok(Tensor::new(vec![m, n, 1], rss.to_vec())?)
}

/// Train all estimators on a powed map.
pub fn train_positioning(rm: &RadioMap, cfg: &PositioningConfig, seed: u64) -> Result<(PositioningModel, TrainingHistories)> {
    if rm.representation() != Representation::Powed {
        return Err(CoreError::InvalidState("positioning models train on powed radio maps".into()));
    }
    let (n, cf, cb) = (rm.n(), rm.floor_classes(), rm.building_classes());
    let labels = rm.labels();
    let (position, floor, building) = build_models(n, cf, cb, seed)?;
    let scaler = LabelScaler::fit(labels)?;
    let x = input_tensor(rm.rss(), n)?;
    let m = rm.m();

    let pos_t = Tensor::new(vec![m, 3], scaler.scale_all(labels))?;
    let (position, h_pos) = train(position, std::slice::from_ref(&x), &pos_t, &cfg.position.train_config(Loss::Mse, derive(seed, "position/train")))?;
    log_history("position", &h_pos);

    let floor_t = Tensor::new(vec![m, cf], one_hot_matrix(&labels.floor, cf).map_err(as_label)?)?;
    let (floor, h_floor) =
        train(floor, std::slice::from_ref(&x), &floor_t, &cfg.floor.train_config(Loss::CategoricalCe, derive(seed, "floor/train")))?;
    log_history("floor", &h_floor);

    let (building, h_building) = match building {
        Some(net) => {
            let t = Tensor::new(vec![m, cb], one_hot_matrix(&labels.building, cb).map_err(as_label)?)?;
            let (net, h) =
                train(net, &[x], &t, &cfg.building.train_config(Loss::CategoricalCe, derive(seed, "building/train")))?;
            log_history("building", &h);
            (Some(net), Some(h))
        }
        None => (None, None),
    };
    let model = PositioningModel { position, floor, building, scaler, n_aps: n, floor_classes: cf, building_classes: cb };
    Ok((model, TrainingHistories { position: h_pos, floor: h_floor, building: h_building }))
}

fn as_label(e: CoreError) -> CoreError {
    CoreError::Label(e.to_string())
}

fn log_history(name: &str, h: &History) {
    match (h.stopped_early, h.best_epoch) {
        (true, Some(best)) => {
            log::info!("{name} net: early stop after epoch {}, best epoch {best}", h.epochs.len())
        }
        _ => log::info!("{name} net: trained {} epochs", h.epochs.len()),
    }
}

const PREDICT_CHUNK: usize = 2048;

impl PositioningModel {
    /// Predict labels for row-major powed fingerprints of width `n_aps`.
    pub fn predict(&self, rss: &[f64]) -> Result<Vec<PredictedLabels>> {
        if !rss.len().is_multiple_of(self.n_aps) {
            return Err(CoreError::InvalidState(format!("fingerprints are not rows of width {}", self.n_aps)));
        }
        let x = input_tensor(rss, self.n_aps)?;
        let pos = self.position.predict_chunked(&[&x], PREDICT_CHUNK)?;
        let floor = self.floor.predict_chunked(&[&x], PREDICT_CHUNK)?;
        let building = match &self.building {
            Some(net) => Some(net.predict_chunked(&[&x], PREDICT_CHUNK)?),
            None => None,
        };
        let m = x.batch();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let p = pos.row(i);
            let [x, y, z] = self.scaler.unscale([p[0], p[1], p[2]]);
            let floor_probs = floor.row(i).to_vec();
            let building_probs = building.as_ref().map(|b| b.row(i).to_vec()).unwrap_or_else(|| vec![1.0]);
            out.push(PredictedLabels {
                x,
                y,
                z,
                floor: argmax(&floor_probs),
                building: argmax(&building_probs),
                floor_probs,
                building_probs,
            });
        }
        Ok(out)
    }

    pub fn predict_map(&self, rm: &RadioMap) -> Result<Vec<PredictedLabels>> {
        if rm.representation() != Representation::Powed {
            return Err(CoreError::InvalidState("prediction needs a powed radio map".into()));
        }
        if rm.n() != self.n_aps {
            return Err(CoreError::InvalidState(format!("model expects {} APs, map has {}", self.n_aps, rm.n())));
        }
        self.predict(rm.rss())
    }
}

/// Contents of `bundle.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleInfo {
    pub n_aps: usize,
    pub floor_classes: usize,
    pub building_classes: usize,
    /// Content hash of the training map.
    pub dataset_hash: String,
    pub mapping: LabelMapping,
    #[serde(default)]
    pub ap_ids: Vec<String>,
    /// Powed parameters of the training map, reused for test splits.
    pub beta: f64,
    /// `None` when the input was already powed.
    pub min_dbm: Option<f64>,
    pub seed: u64,
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| CoreError::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_bundle(model: &PositioningModel, info: &BundleInfo, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    save_archive(&model.position, serde_json::json!({"role": "position"}), dir, "position")?;
    save_archive(&model.floor, serde_json::json!({"role": "floor"}), dir, "floor")?;
    if let Some(b) = &model.building {
        save_archive(b, serde_json::json!({"role": "building"}), dir, "building")?;
    }
    write_json(&dir.join("scaler.json"), &model.scaler)?;
    write_json(&dir.join("bundle.json"), info)
}

pub fn load_bundle(dir: &Path) -> Result<(PositioningModel, BundleInfo)> {
    let info: BundleInfo = read_json(&dir.join("bundle.json"))?;
    let scaler: LabelScaler = read_json(&dir.join("scaler.json"))?;
    let (position, _) = load_archive(dir, "position")?;
    let (floor, _) = load_archive(dir, "floor")?;
    let building = if info.building_classes > 1 { Some(load_archive(dir, "building")?.0) } else { None };
    let check = |net: &Network, width: usize, what: &str| -> Result<()> {
        if net.input_shapes()[0] != [info.n_aps, 1] || net.output_shape() != [width] {
            return Err(CoreError::Provenance(format!("{what} net in {} does not match bundle.json", dir.display())));
        }
        Ok(())
    };
    check(&position, 3, "position")?;
    check(&floor, info.floor_classes, "floor")?;
    if let Some(b) = &building {
        check(b, info.building_classes, "building")?;
    }
    let model = PositioningModel {
        position,
        floor,
        building,
        scaler,
        n_aps: info.n_aps,
        floor_classes: info.floor_classes,
        building_classes: info.building_classes,
    };
    Ok((model, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_widths_for_uji_shape() {
        let (p, f, b) = build_models(520, 5, 3, 0).unwrap();
        assert_eq!(p.output_shape(), [3]);
        assert_eq!(f.output_shape(), [5]);
        assert_eq!(b.unwrap().output_shape(), [3]);
    }

    #[test]
    fn single_building_has_no_building_net() {
        let (_, _, b) = build_models(16, 3, 1, 0).unwrap();
        assert!(b.is_none());
    }

    #[test]
    fn position_net_parameter_tally_n4() {
        // conv(1->8, k1): 8 + 8; conv(8->8, k1): 64 + 8; flatten 4*8 = 32;
        // lstm(32 -> 40): 4*40*(32 + 40 + 1); dense(40 -> 3): 120 + 3.
        let want = (8 + 8) + (64 + 8) + 4 * 40 * (32 + 40 + 1) + (40 * 3 + 3);
        let (p, _, _) = build_models(4, 2, 1, 0).unwrap();
        assert_eq!(p.param_count(), want);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }
}
