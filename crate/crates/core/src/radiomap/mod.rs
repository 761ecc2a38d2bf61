//! Radio maps: RSS matrices with per-fingerprint position labels.

pub(crate) mod csvio;
mod transform;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::seed::sha256_hex;

pub use csvio::{
    load_dataset, load_with_mapping, read_radiomap, to_csv_bytes, write_csv, ApCount, DatasetSchema, PROVENANCE_COLUMNS,
};
pub use transform::{one_hot, one_hot_matrix, powed_value, to_powed, to_powed_with_min, LabelScaler, DEFAULT_BETA};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    #[default]
    RawDbm,
    Powed,
}

/// Ground truth per fingerprint. Coordinates in meters; floor and building
/// are dense 0-based indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub floor: Vec<usize>,
    pub building: Vec<usize>,
}

impl LabelSet {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        [self.x[i], self.y[i], self.z[i]]
    }

    pub fn push(&mut self, pos: [f64; 3], floor: usize, building: usize) {
        self.x.push(pos[0]);
        self.y.push(pos[1]);
        self.z.push(pos[2]);
        self.floor.push(floor);
        self.building.push(building);
    }

    pub fn select(&self, rows: &[usize]) -> LabelSet {
        let mut out = LabelSet::default();
        for &r in rows {
            out.push(self.position(r), self.floor[r], self.building[r]);
        }
        out
    }

    pub fn extend(&mut self, other: &LabelSet) {
        self.x.extend(&other.x);
        self.y.extend(&other.y);
        self.z.extend(&other.z);
        self.floor.extend(&other.floor);
        self.building.extend(&other.building);
    }

    fn check_aligned(&self) -> bool {
        let m = self.x.len();
        self.y.len() == m && self.z.len() == m && self.floor.len() == m && self.building.len() == m
    }
}

/// Dense index ↔ source label, for floors and buildings. Both lists are
/// sorted ascending; dense index `i` stands for `floors[i]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapping {
    pub floors: Vec<i64>,
    pub buildings: Vec<i64>,
}

impl LabelMapping {
    pub fn from_values(floors: &[i64], buildings: &[i64]) -> Self {
        let uniq = |v: &[i64]| {
            let mut u = v.to_vec();
            u.sort_unstable();
            u.dedup();
            u
        };
        LabelMapping { floors: uniq(floors), buildings: uniq(buildings) }
    }

    pub fn floor_classes(&self) -> usize {
        self.floors.len()
    }

    pub fn building_classes(&self) -> usize {
        self.buildings.len()
    }

    pub fn dense_floor(&self, source: i64) -> Option<usize> {
        self.floors.binary_search(&source).ok()
    }

    pub fn dense_building(&self, source: i64) -> Option<usize> {
        self.buildings.binary_search(&source).ok()
    }
}

/// Parameters of the powed transform a map was produced with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowedInfo {
    pub beta: f64,
    /// Minimum detected RSS (dBm) of the training map.
    pub min_dbm: f64,
}

/// `m` fingerprints over `n` APs, row-major, with labels.
///
/// Immutable once built. In the powed representation every value is in
/// [0, 1] and non-detected entries are 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RadioMap {
    rss: Vec<f64>,
    n: usize,
    labels: LabelSet,
    ap_ids: Vec<String>,
    representation: Representation,
    non_detected: f64,
    mapping: LabelMapping,
    powed: Option<PowedInfo>,
    /// The last `synthetic_rows` rows were generated, not measured.
    synthetic_rows: usize,
}

impl RadioMap {
    pub fn new(
        rss: Vec<f64>,
        ap_ids: Vec<String>,
        labels: LabelSet,
        representation: Representation,
        non_detected: f64,
        mapping: LabelMapping,
    ) -> Result<Self> {
        let rm = RadioMap {
            n: ap_ids.len(),
            rss,
            labels,
            ap_ids,
            representation,
            non_detected,
            mapping,
            powed: None,
            synthetic_rows: 0,
        };
        rm.validate()?;
        Ok(rm)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CoreError::Schema("a radio map needs at least one AP".into()));
        }
        if !self.labels.check_aligned() {
            return Err(CoreError::InvalidState("label columns have different lengths".into()));
        }
        let m = self.labels.len();
        if m == 0 {
            return Err(CoreError::EmptyDataset("no fingerprints".into()));
        }
        if self.rss.len() != m * self.n {
            return Err(CoreError::InvalidState(format!(
                "{} RSS values for {m} fingerprints x {} APs",
                self.rss.len(),
                self.n
            )));
        }
        let mut seen = HashSet::new();
        for id in &self.ap_ids {
            if !seen.insert(id.as_str()) {
                return Err(CoreError::Schema(format!("duplicate AP column {id}")));
            }
        }
        if self.representation == Representation::Powed {
            if let Some(v) = self.rss.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(CoreError::Domain(format!("powed value {v} outside [0, 1]")));
            }
        } else if let Some(v) = self.rss.iter().find(|v| !v.is_finite()) {
            return Err(CoreError::Domain(format!("non-finite RSS value {v}")));
        }
        let (cf, cb) = (self.mapping.floor_classes(), self.mapping.building_classes());
        if self.labels.floor.iter().any(|&f| f >= cf) || self.labels.building.iter().any(|&b| b >= cb) {
            return Err(CoreError::Label("floor or building index outside the label mapping".into()));
        }
        let l = &self.labels;
        if l.x.iter().chain(&l.y).chain(&l.z).any(|v| !v.is_finite()) {
            return Err(CoreError::Domain("non-finite coordinate label".into()));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major `m × n` values.
    pub fn rss(&self) -> &[f64] {
        &self.rss
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rss[i * self.n..(i + 1) * self.n]
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn ap_ids(&self) -> &[String] {
        &self.ap_ids
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn non_detected(&self) -> f64 {
        self.non_detected
    }

    pub fn mapping(&self) -> &LabelMapping {
        &self.mapping
    }

    pub fn powed(&self) -> Option<PowedInfo> {
        self.powed
    }

    pub fn synthetic_rows(&self) -> usize {
        self.synthetic_rows
    }

    pub fn real_rows(&self) -> usize {
        self.m() - self.synthetic_rows
    }

    pub fn floor_classes(&self) -> usize {
        self.mapping.floor_classes()
    }

    pub fn building_classes(&self) -> usize {
        self.mapping.building_classes()
    }

    /// Whether a raw value is an actual reading rather than the sentinel.
    pub fn is_detected(&self, v: f64) -> bool {
        match self.representation {
            Representation::RawDbm => v != self.non_detected,
            Representation::Powed => v != 0.0,
        }
    }

    /// Sub-map of the given rows, in the given order. Synthetic flags are dropped.
    pub fn select_rows(&self, rows: &[usize]) -> Result<RadioMap> {
        let mut rss = Vec::with_capacity(rows.len() * self.n);
        for &r in rows {
            rss.extend_from_slice(self.row(r));
        }
        let mut out = RadioMap { rss, labels: self.labels.select(rows), synthetic_rows: 0, ..self.clone_header() };
        out.powed = self.powed;
        out.validate()?;
        Ok(out)
    }

    fn clone_header(&self) -> RadioMap {
        RadioMap {
            rss: Vec::new(),
            n: self.n,
            labels: LabelSet::default(),
            ap_ids: self.ap_ids.clone(),
            representation: self.representation,
            non_detected: self.non_detected,
            mapping: self.mapping.clone(),
            powed: self.powed,
            synthetic_rows: 0,
        }
    }

    /// Append generated rows after the existing ones.
    pub fn with_synthetic(&self, rss: &[f64], labels: &LabelSet) -> Result<RadioMap> {
        if rss.len() != labels.len() * self.n {
            return Err(CoreError::InvalidState(format!("synthetic rows do not have width {}", self.n)));
        }
        let mut out = self.clone();
        out.rss.extend_from_slice(rss);
        out.labels.extend(labels);
        out.synthetic_rows += labels.len();
        out.validate()?;
        Ok(out)
    }

    pub(crate) fn set_powed(mut self, rss: Vec<f64>, info: PowedInfo) -> Result<RadioMap> {
        self.rss = rss;
        self.representation = Representation::Powed;
        self.powed = Some(info);
        self.validate()?;
        Ok(self)
    }

    /// SHA-256 over the shape, AP ids, values and labels. Identifies a split.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::with_capacity(self.rss.len() * 8 + self.m() * 40);
        bytes.extend_from_slice(&(self.m() as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.n as u64).to_le_bytes());
        for id in &self.ap_ids {
            bytes.extend_from_slice(id.as_bytes());
            bytes.push(0);
        }
        for v in &self.rss {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        let l = &self.labels;
        for i in 0..self.m() {
            for v in [l.x[i], l.y[i], l.z[i]] {
                bytes.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            bytes.extend_from_slice(&self.mapping.floors[l.floor[i]].to_le_bytes());
            bytes.extend_from_slice(&self.mapping.buildings[l.building[i]].to_le_bytes());
        }
        sha256_hex(&bytes)
    }
}
