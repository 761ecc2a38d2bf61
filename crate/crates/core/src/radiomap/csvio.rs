//! Canonical CSV ingestion and emission.
//!
//! Columns: AP columns sharing a prefix, then LONGITUDE, LATITUDE, optional
//! ALTITUDE, FLOOR, BUILDINGID. Floor and building hold source labels; they
//! are re-indexed densely on load.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabelMapping, LabelSet, RadioMap, Representation};
use crate::error::{CoreError, Result};

/// Columns emitted with augmented maps. Plain loads skip them.
pub const PROVENANCE_COLUMNS: [&str; 4] = ["SOURCE", "CONDLABEL", "SEEDIDX", "DIST"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApCount {
    Auto,
    Fixed(usize),
}

impl Serialize for ApCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ApCount::Auto => s.serialize_str("auto"),
            ApCount::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for ApCount {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => Ok(ApCount::Fixed(n)),
            Raw::Str(s) if s == "auto" => Ok(ApCount::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("n_aps must be a number or \"auto\", got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSchema {
    pub ap_prefix: String,
    pub n_aps: ApCount,
    /// Sentinel for "AP not heard", in dBm.
    pub non_detected: f64,
    /// Used for z when there is no altitude column.
    pub floor_height: f64,
    /// `None` detects the column.
    pub has_altitude: Option<bool>,
    pub representation: Representation,
    /// Extra columns to skip (UJIIndoorLoc carries SPACEID, USERID, ...).
    pub ignore_columns: Vec<String>,
    pub longitude_column: String,
    pub latitude_column: String,
    pub altitude_column: String,
    pub floor_column: String,
    pub building_column: String,
}

impl Default for DatasetSchema {
    fn default() -> Self {
        DatasetSchema {
            ap_prefix: "AP".into(),
            n_aps: ApCount::Auto,
            non_detected: 100.0,
            floor_height: 4.0,
            has_altitude: None,
            representation: Representation::RawDbm,
            ignore_columns: Vec::new(),
            longitude_column: "LONGITUDE".into(),
            latitude_column: "LATITUDE".into(),
            altitude_column: "ALTITUDE".into(),
            floor_column: "FLOOR".into(),
            building_column: "BUILDINGID".into(),
        }
    }
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        if self.ap_prefix.is_empty() {
            return Err(CoreError::Schema("ap_prefix must not be empty".into()));
        }
        if !(self.floor_height.is_finite() && self.floor_height >= 0.0) {
            return Err(CoreError::Schema(format!("floor_height must be a non-negative number, got {}", self.floor_height)));
        }
        if !self.non_detected.is_finite() {
            return Err(CoreError::Schema("non_detected must be finite".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let schema: DatasetSchema =
            serde_json::from_str(&text).map_err(|e| CoreError::Schema(format!("{}: {e}", path.display())))?;
        schema.validate()?;
        Ok(schema)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CoreError::io(path, e))
}

/// Load a CSV and build the floor/building mapping from its labels.
pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<RadioMap> {
    read_radiomap(open(path)?, schema, None).map_err(|e| with_origin(e, path))
}

/// Load a CSV reusing an existing mapping (a test split against its training split).
pub fn load_with_mapping(path: &Path, schema: &DatasetSchema, mapping: &LabelMapping) -> Result<RadioMap> {
    read_radiomap(open(path)?, schema, Some(mapping)).map_err(|e| with_origin(e, path))
}

fn with_origin(e: CoreError, path: &Path) -> CoreError {
    match e {
        CoreError::EmptyDataset(msg) => CoreError::EmptyDataset(format!("{}: {msg}", path.display())),
        CoreError::Schema(msg) => CoreError::Schema(format!("{}: {msg}", path.display())),
        other => other,
    }
}

enum Column {
    Ap,
    Longitude,
    Latitude,
    Altitude,
    Floor,
    Building,
    Skip,
}

fn parse_num(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| CoreError::Parse {
        row,
        column: column.to_string(),
        msg: format!("{cell:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(CoreError::Parse { row, column: column.to_string(), msg: format!("{cell:?} is not finite") });
    }
    Ok(v)
}

fn parse_label(cell: &str, row: usize, column: &str) -> Result<i64> {
    let v = parse_num(cell, row, column)?;
    if v.fract() != 0.0 || v.abs() > 1e15 {
        return Err(CoreError::Parse { row, column: column.to_string(), msg: format!("{cell:?} is not an integer label") });
    }
    Ok(v as i64)
}

pub fn read_radiomap<R: Read>(reader: R, schema: &DatasetSchema, mapping: Option<&LabelMapping>) -> Result<RadioMap> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(CoreError::EmptyDataset("no header row".into()));
    }

    let mut kinds = Vec::with_capacity(headers.len());
    let mut ap_ids = Vec::new();
    let mut found = [false; 5];
    for name in headers.iter() {
        let name = name.trim();
        let kind = if name == schema.longitude_column {
            found[0] = true;
            Column::Longitude
        } else if name == schema.latitude_column {
            found[1] = true;
            Column::Latitude
        } else if name == schema.altitude_column {
            if schema.has_altitude == Some(false) {
                Column::Skip
            } else {
                found[2] = true;
                Column::Altitude
            }
        } else if name == schema.floor_column {
            found[3] = true;
            Column::Floor
        } else if name == schema.building_column {
            found[4] = true;
            Column::Building
        } else if name.len() > schema.ap_prefix.len() && name.starts_with(&schema.ap_prefix) {
            ap_ids.push(name.to_string());
            Column::Ap
        } else if schema.ignore_columns.iter().any(|c| c == name) || PROVENANCE_COLUMNS.contains(&name) {
            Column::Skip
        } else {
            return Err(CoreError::Schema(format!("unexpected column {name:?}")));
        };
        kinds.push(kind);
    }
    let required = [
        (0, &schema.longitude_column),
        (1, &schema.latitude_column),
        (3, &schema.floor_column),
        (4, &schema.building_column),
    ];
    for (i, name) in required {
        if !found[i] {
            return Err(CoreError::Schema(format!("missing column {name:?}")));
        }
    }
    if schema.has_altitude == Some(true) && !found[2] {
        return Err(CoreError::Schema(format!("missing column {:?}", schema.altitude_column)));
    }
    let has_altitude = found[2];
    if ap_ids.is_empty() {
        return Err(CoreError::Schema(format!("no AP columns with prefix {:?}", schema.ap_prefix)));
    }
    if let ApCount::Fixed(n) = schema.n_aps {
        if n != ap_ids.len() {
            return Err(CoreError::Schema(format!(
                "expected {n} AP columns with prefix {:?}, found {}",
                schema.ap_prefix,
                ap_ids.len()
            )));
        }
    }

    let n = ap_ids.len();
    let mut rss = Vec::new();
    let (mut xs, mut ys, mut zs) = (Vec::new(), Vec::new(), Vec::new());
    let (mut floors, mut buildings) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => CoreError::Schema(format!(
                "row {}: expected {expected_len} fields, found {len}",
                pos.as_ref().map(|p| p.line()).unwrap_or(0)
            )),
            _ => CoreError::Csv(e),
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut z = None;
        for ((cell, kind), name) in record.iter().zip(&kinds).zip(headers.iter()) {
            match kind {
                Column::Ap => rss.push(parse_num(cell, row, name)?),
                Column::Longitude => xs.push(parse_num(cell, row, name)?),
                Column::Latitude => ys.push(parse_num(cell, row, name)?),
                Column::Altitude => z = Some(parse_num(cell, row, name)?),
                Column::Floor => floors.push(parse_label(cell, row, name)?),
                Column::Building => buildings.push(parse_label(cell, row, name)?),
                Column::Skip => {}
            }
        }
        zs.push(z);
    }
    if xs.is_empty() {
        return Err(CoreError::EmptyDataset("no data rows".into()));
    }

    let mapping = match mapping {
        Some(m) => m.clone(),
        None => LabelMapping::from_values(&floors, &buildings),
    };
    let mut labels = LabelSet::default();
    for i in 0..xs.len() {
        let f = mapping
            .dense_floor(floors[i])
            .ok_or_else(|| CoreError::Label(format!("floor {} is not in the training mapping", floors[i])))?;
        let b = mapping
            .dense_building(buildings[i])
            .ok_or_else(|| CoreError::Label(format!("building {} is not in the training mapping", buildings[i])))?;
        let z = if has_altitude { zs[i].expect("altitude column present") } else { f as f64 * schema.floor_height };
        labels.push([xs[i], ys[i], z], f, b);
    }
    RadioMap::new(rss, ap_ids, labels, schema.representation, schema.non_detected, mapping).inspect(|rm| {
        debug_assert_eq!(rm.n(), n);
    })
}

fn header(rm: &RadioMap, extra: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = rm.ap_ids().to_vec();
    h.extend(["LONGITUDE", "LATITUDE", "ALTITUDE", "FLOOR", "BUILDINGID"].map(String::from));
    h.extend(extra.iter().map(|s| s.to_string()));
    h
}

/// Canonical CSV bytes, with optional trailing columns per row.
pub(crate) fn csv_bytes_with(rm: &RadioMap, extra_header: &[&str], extra: impl Fn(usize) -> Vec<String>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header(rm, extra_header))?;
    let l = rm.labels();
    let map = rm.mapping();
    for i in 0..rm.m() {
        let mut rec: Vec<String> = rm.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(l.x[i].to_string());
        rec.push(l.y[i].to_string());
        rec.push(l.z[i].to_string());
        rec.push(map.floors[l.floor[i]].to_string());
        rec.push(map.buildings[l.building[i]].to_string());
        rec.extend(extra(i));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| CoreError::InvalidState(format!("csv buffer: {e}")))
}

pub fn to_csv_bytes(rm: &RadioMap) -> Result<Vec<u8>> {
    csv_bytes_with(rm, &[], |_| Vec::new())
}

pub fn write_csv(rm: &RadioMap, path: &Path) -> Result<()> {
    let bytes = to_csv_bytes(rm)?;
    std::fs::write(path, bytes).map_err(|e| CoreError::io(path, e))
}
