//! Seeded log-distance radio maps for fixtures and end-to-end checks.
//!
//! RSS = tx − 10·exponent·log10(max(d, 1 m)) − floor_att·|Δfloor| + N(0, σ),
//! with readings below the detection threshold replaced by the sentinel.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::radiomap::{write_csv, LabelMapping, LabelSet, RadioMap, Representation};
use crate::seed::derive;
use fpgan_nn::seeded_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_aps: usize,
    pub floors: usize,
    pub buildings: usize,
    /// Width and depth of one building, meters.
    pub area: [f64; 2],
    pub floor_height: f64,
    pub train_points: usize,
    pub test_points: usize,
    pub tx_power_dbm: f64,
    pub path_loss_exponent: f64,
    pub floor_attenuation_db: f64,
    pub noise_std_db: f64,
    pub detection_threshold_dbm: f64,
    pub non_detected: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_aps: 16,
            floors: 3,
            buildings: 1,
            area: [40.0, 30.0],
            floor_height: 4.0,
            train_points: 600,
            test_points: 150,
            tx_power_dbm: 0.0,
            path_loss_exponent: 3.0,
            floor_attenuation_db: 20.0,
            noise_std_db: 8.0,
            detection_threshold_dbm: -95.0,
            non_detected: 100.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::Config(format!("synth: {m}")));
        if self.n_aps == 0 || self.floors == 0 || self.buildings == 0 || self.train_points == 0 || self.test_points == 0 {
            return bad("all counts must be >= 1");
        }
        if !(self.noise_std_db >= 0.0) {
            return bad("noise_std_db must be >= 0");
        }
        if !(self.detection_threshold_dbm < self.tx_power_dbm) {
            return bad("detection threshold must be below the transmit power");
        }
        if !(self.area[0] > 0.0 && self.area[1] > 0.0 && self.floor_height >= 0.0) {
            return bad("area must be positive and floor_height non-negative");
        }
        if self.non_detected >= self.detection_threshold_dbm && self.non_detected <= self.tx_power_dbm {
            return bad("the non-detected sentinel must lie outside the reachable RSS range");
        }
        if !(self.path_loss_exponent > 0.0 && self.floor_attenuation_db >= 0.0) {
            return bad("path_loss_exponent must be positive and floor_attenuation_db non-negative");
        }
        Ok(())
    }

    fn building_offset(&self, b: usize) -> f64 {
        b as f64 * self.area[0] * 1.25
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApSite {
    pub id: String,
    pub building: usize,
    pub floor: usize,
    pub position: [f64; 3],
}

/// Generator parameters and AP placements, written next to the CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub config: SynthConfig,
    pub aps: Vec<ApSite>,
}

/// Noise-free received power, before thresholding.
pub fn path_loss_rss(cfg: &SynthConfig, ap: &ApSite, pos: [f64; 3], floor: usize) -> f64 {
    let d = ap.position.iter().zip(pos).map(|(a, p)| (a - p).powi(2)).sum::<f64>().sqrt();
    let floors_apart = (ap.floor as f64 - floor as f64).abs();
    cfg.tx_power_dbm - 10.0 * cfg.path_loss_exponent * d.max(1.0).log10() - cfg.floor_attenuation_db * floors_apart
}

fn place_aps(cfg: &SynthConfig) -> Vec<ApSite> {
    let mut rng = seeded_rng(derive(cfg.seed, "synth/aps"));
    let cells = cfg.floors * cfg.buildings;
    (0..cfg.n_aps)
        .map(|i| {
            let cell = i % cells;
            let (building, floor) = (cell / cfg.floors, cell % cfg.floors);
            let x = cfg.building_offset(building) + rng.random_range(0.0..cfg.area[0]);
            let y = rng.random_range(0.0..cfg.area[1]);
            ApSite { id: format!("AP{:03}", i + 1), building, floor, position: [x, y, floor as f64 * cfg.floor_height] }
        })
        .collect()
}

fn sample_points(cfg: &SynthConfig, aps: &[ApSite], count: usize, label: &str) -> Result<RadioMap> {
    let mut rng = seeded_rng(derive(cfg.seed, label));
    let noise = Normal::new(0.0, cfg.noise_std_db).map_err(|e| CoreError::Config(format!("synth noise: {e}")))?;
    let mut rss = Vec::with_capacity(count * aps.len());
    let mut labels = LabelSet::default();
    for _ in 0..count {
        let building = rng.random_range(0..cfg.buildings);
        let floor = rng.random_range(0..cfg.floors);
        let x = cfg.building_offset(building) + rng.random_range(0.0..cfg.area[0]);
        let y = rng.random_range(0.0..cfg.area[1]);
        let pos = [x, y, floor as f64 * cfg.floor_height];
        for ap in aps {
            let eps = if cfg.noise_std_db > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let v = path_loss_rss(cfg, ap, pos, floor) + eps;
            rss.push(if v < cfg.detection_threshold_dbm { cfg.non_detected } else { v });
        }
        labels.push(pos, floor, building);
    }
    let mapping = LabelMapping {
        floors: (0..cfg.floors as i64).collect(),
        buildings: (0..cfg.buildings as i64).collect(),
    };
    RadioMap::new(
        rss,
        aps.iter().map(|a| a.id.clone()).collect(),
        labels,
        Representation::RawDbm,
        cfg.non_detected,
        mapping,
    )
}

/// Raw-dBm train and test maps. Train and test use separate RNG streams.
pub fn generate(cfg: &SynthConfig) -> Result<(RadioMap, RadioMap, SynthTruth)> {
    cfg.validate()?;
    let aps = place_aps(cfg);
    let train = sample_points(cfg, &aps, cfg.train_points, "synth/train")?;
    let test = sample_points(cfg, &aps, cfg.test_points, "synth/test")?;
    Ok((train, test, SynthTruth { config: cfg.clone(), aps }))
}

/// Write `train.csv`, `test.csv` and `truth.json` into `dir`.
pub fn write_fixture(cfg: &SynthConfig, dir: &Path) -> Result<SynthTruth> {
    let (train, test, truth) = generate(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    write_csv(&train, &dir.join("train.csv"))?;
    write_csv(&test, &dir.join("test.csv"))?;
    let path = dir.join("truth.json");
    std::fs::write(&path, serde_json::to_string_pretty(&truth)?).map_err(|e| CoreError::io(&path, e))?;
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(floor: usize) -> ApSite {
        ApSite { id: "AP001".into(), building: 0, floor, position: [0.0, 0.0, 0.0] }
    }

    #[test]
    fn one_meter_gives_tx_power() {
        let cfg = SynthConfig { noise_std_db: 0.0, tx_power_dbm: -30.0, ..Default::default() };
        assert_eq!(path_loss_rss(&cfg, &site(0), [1.0, 0.0, 0.0], 0), cfg.tx_power_dbm);
        assert_eq!(path_loss_rss(&cfg, &site(0), [0.3, 0.0, 0.0], 0), cfg.tx_power_dbm);
    }

    #[test]
    fn ten_meters_exponent_two() {
        let cfg = SynthConfig { noise_std_db: 0.0, path_loss_exponent: 2.0, tx_power_dbm: -30.0, ..Default::default() };
        assert_eq!(path_loss_rss(&cfg, &site(0), [10.0, 0.0, 0.0], 0), -50.0);
    }

    #[test]
    fn floors_attenuate() {
        let cfg = SynthConfig::default();
        let same = path_loss_rss(&cfg, &site(0), [5.0, 0.0, 0.0], 0);
        let other = path_loss_rss(&cfg, &site(1), [5.0, 0.0, 0.0], 0);
        assert!((same - other - cfg.floor_attenuation_db).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_streams_are_independent() {
        let cfg = SynthConfig { train_points: 30, test_points: 10, ..Default::default() };
        let (a, ta, _) = generate(&cfg).unwrap();
        let (b, tb, _) = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let more_test = SynthConfig { test_points: 20, ..cfg.clone() };
        let (c, _, _) = generate(&more_test).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn below_threshold_becomes_sentinel() {
        let cfg = SynthConfig { train_points: 50, test_points: 1, ..Default::default() };
        let (train, _, _) = generate(&cfg).unwrap();
        assert!(train.rss().iter().all(|&v| v == cfg.non_detected || (v >= cfg.detection_threshold_dbm && v.is_finite())));
        assert!(train.rss().contains(&cfg.non_detected));
    }

    #[test]
    fn invalid_configs() {
        assert!(SynthConfig { n_aps: 0, ..Default::default() }.validate().is_err());
        assert!(SynthConfig { noise_std_db: -1.0, ..Default::default() }.validate().is_err());
        assert!(SynthConfig { detection_threshold_dbm: 5.0, ..Default::default() }.validate().is_err());
    }
}
