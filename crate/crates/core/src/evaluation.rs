//! Positioning metrics, the k-NN baseline and comparison reports.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::positioning::PredictedLabels;
use crate::radiomap::{LabelSet, RadioMap};

/// Majority vote over neighbor classes, neighbors ordered nearest first.
/// Ties go to the class of the nearest neighbor among the tied classes.
fn vote(classes: &[usize], num_classes: usize) -> (usize, Vec<f64>) {
    let mut counts = vec![0usize; num_classes];
    for &c in classes {
        counts[c] += 1;
    }
    let top = *counts.iter().max().expect("at least one class");
    let winner = *classes.iter().find(|&&c| counts[c] == top).expect("some neighbor holds the top count");
    let k = classes.len() as f64;
    (winner, counts.iter().map(|&c| c as f64 / k).collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row indices of the `k` nearest training rows, nearest first, ties by index.
pub fn nearest_rows(train: &RadioMap, query: &[f64], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..train.m()).map(|i| (sq_dist(train.row(i), query), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

/// k-NN in feature space: centroid position, majority-vote floor and building.
pub fn knn_predict(train: &RadioMap, test: &RadioMap, k: usize) -> Result<Vec<PredictedLabels>> {
    if train.representation() != test.representation() {
        return Err(CoreError::InvalidState("k-NN needs both maps in the same representation".into()));
    }
    if train.n() != test.n() {
        return Err(CoreError::InvalidState(format!("train has {} APs, test has {}", train.n(), test.n())));
    }
    if k == 0 || k > train.m() {
        return Err(CoreError::Domain(format!("k must lie in [1, {}], got {k}", train.m())));
    }
    let l = train.labels();
    let mut out = Vec::with_capacity(test.m());
    for t in 0..test.m() {
        let nn = nearest_rows(train, test.row(t), k);
        let mut pos = [0.0; 3];
        for &i in &nn {
            for (acc, v) in pos.iter_mut().zip(l.position(i)) {
                *acc += v;
            }
        }
        let kf = nn.len() as f64;
        let floors: Vec<usize> = nn.iter().map(|&i| l.floor[i]).collect();
        let buildings: Vec<usize> = nn.iter().map(|&i| l.building[i]).collect();
        let (floor, floor_probs) = vote(&floors, train.floor_classes());
        let (building, building_probs) = vote(&buildings, train.building_classes());
        out.push(PredictedLabels {
            x: pos[0] / kf,
            y: pos[1] / kf,
            z: pos[2] / kf,
            floor,
            building,
            floor_probs,
            building_probs,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// Mean horizontal error, meters.
    pub eps_2d: f64,
    /// Mean 3D error, meters.
    pub eps_3d: f64,
    /// Percent of fingerprints with the right floor.
    pub floor_hit: f64,
    pub building_hit: f64,
    pub count: usize,
}

pub fn positioning_errors(pred: &[PredictedLabels], truth: &LabelSet) -> Result<ErrorSummary> {
    if pred.is_empty() {
        return Err(CoreError::Domain("no predictions to evaluate".into()));
    }
    if pred.len() != truth.len() {
        return Err(CoreError::InvalidState(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    let (mut e2, mut e3, mut floors, mut buildings) = (0.0, 0.0, 0usize, 0usize);
    for (i, p) in pred.iter().enumerate() {
        let dx = p.x - truth.x[i];
        let dy = p.y - truth.y[i];
        let dz = p.z - truth.z[i];
        e2 += (dx * dx + dy * dy).sqrt();
        e3 += (dx * dx + dy * dy + dz * dz).sqrt();
        floors += (p.floor == truth.floor[i]) as usize;
        buildings += (p.building == truth.building[i]) as usize;
    }
    let m = pred.len() as f64;
    Ok(ErrorSummary {
        eps_2d: e2 / m,
        eps_3d: e3 / m,
        floor_hit: 100.0 * floors as f64 / m,
        building_hit: 100.0 * buildings as f64 / m,
        count: pred.len(),
    })
}

/// `system / baseline`, or `None` when the baseline error is zero.
pub fn normalize(system: f64, baseline: f64) -> Option<f64> {
    if baseline == 0.0 {
        None
    } else {
        Some(system / baseline)
    }
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One evaluated system before normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemResult {
    pub name: String,
    pub summary: ErrorSummary,
    /// Synthetic fingerprints added to its radio map.
    pub phi: usize,
    pub test_split_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemRecord {
    pub name: String,
    pub eps_2d: f64,
    pub eps_3d: f64,
    pub norm_2d: Option<f64>,
    pub norm_3d: Option<f64>,
    pub floor_hit: f64,
    pub building_hit: f64,
    pub phi: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub dataset: String,
    pub train_size: usize,
    pub n_aps: usize,
    pub test_size: usize,
    pub test_split_hash: String,
    pub seed: u64,
    #[serde(default)]
    pub config: serde_json::Value,
    /// Baseline first.
    pub systems: Vec<SystemRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportContext {
    pub dataset: String,
    pub train_size: usize,
    pub n_aps: usize,
    pub seed: u64,
    pub config: serde_json::Value,
}

/// Normalize every system by the baseline. All must share one test split.
pub fn build_report(ctx: ReportContext, baseline: SystemResult, systems: Vec<SystemResult>) -> Result<EvalReport> {
    for s in &systems {
        if s.test_split_hash != baseline.test_split_hash {
            return Err(CoreError::Provenance(format!(
                "system {} was evaluated on a different test split than {}",
                s.name, baseline.name
            )));
        }
        if s.summary.count != baseline.summary.count {
            return Err(CoreError::Provenance(format!("system {} has a different test size", s.name)));
        }
    }
    let b = baseline.summary;
    let record = |s: &SystemResult| SystemRecord {
        name: s.name.clone(),
        eps_2d: s.summary.eps_2d,
        eps_3d: s.summary.eps_3d,
        norm_2d: normalize(s.summary.eps_2d, b.eps_2d),
        norm_3d: normalize(s.summary.eps_3d, b.eps_3d),
        floor_hit: s.summary.floor_hit,
        building_hit: s.summary.building_hit,
        phi: s.phi,
    };
    let mut records = vec![record(&baseline)];
    records.extend(systems.iter().map(record));
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: ctx.dataset,
        train_size: ctx.train_size,
        n_aps: ctx.n_aps,
        test_size: b.count,
        test_split_hash: baseline.test_split_hash,
        seed: ctx.seed,
        config: ctx.config,
        systems: records,
    })
}

/// Per-system means over the datasets that report it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageRecord {
    pub name: String,
    pub datasets: usize,
    pub eps_2d: f64,
    pub eps_3d: f64,
    pub norm_2d: Option<f64>,
    pub norm_3d: Option<f64>,
    pub floor_hit: f64,
    pub building_hit: f64,
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedReport {
    pub schema_version: u32,
    pub reports: Vec<EvalReport>,
    pub average: Vec<AverageRecord>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_opt(v: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = v.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| mean(&present))
}

pub fn merge_reports(reports: Vec<EvalReport>) -> Result<MergedReport> {
    if reports.is_empty() {
        return Err(CoreError::Domain("no reports to merge".into()));
    }
    let mut names: Vec<String> = Vec::new();
    for r in &reports {
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(CoreError::Schema(format!("report schema version {} is not supported", r.schema_version)));
        }
        for s in &r.systems {
            if !names.contains(&s.name) {
                names.push(s.name.clone());
            }
        }
    }
    let average = names
        .into_iter()
        .map(|name| {
            let recs: Vec<&SystemRecord> = reports.iter().flat_map(|r| r.systems.iter().filter(|s| s.name == name)).collect();
            let col = |f: fn(&SystemRecord) -> f64| mean(&recs.iter().map(|r| f(r)).collect::<Vec<_>>());
            AverageRecord {
                datasets: recs.len(),
                eps_2d: col(|r| r.eps_2d),
                eps_3d: col(|r| r.eps_3d),
                norm_2d: mean_opt(&recs.iter().map(|r| r.norm_2d).collect::<Vec<_>>()),
                norm_3d: mean_opt(&recs.iter().map(|r| r.norm_3d).collect::<Vec<_>>()),
                floor_hit: col(|r| r.floor_hit),
                building_hit: col(|r| r.building_hit),
                phi: col(|r| r.phi as f64),
                name,
            }
        })
        .collect();
    Ok(MergedReport { schema_version: REPORT_SCHEMA_VERSION, reports, average })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(text)?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(CoreError::Schema(format!("report schema version {} is not supported", r.schema_version)));
        }
        Ok(r)
    }
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt2).unwrap_or_else(|| "-".into())
}

/// Aligned comparison table: dataset size, then the baseline's
/// absolute and normalized errors and floor hit, then per system the
/// synthetic count (augmented systems), normalized errors and floor hit.
pub fn report_table(reports: &[EvalReport], average: Option<&[AverageRecord]>) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let names: Vec<&str> = first.systems.iter().map(|s| s.name.as_str()).collect();
    let with_phi: Vec<bool> =
        names.iter().map(|n| reports.iter().any(|r| r.systems.iter().any(|s| s.name == *n && s.phi > 0))).collect();

    let mut header = vec!["Database".to_string(), "|T|".into(), "|A|".into()];
    for (i, name) in names.iter().enumerate() {
        if i == 0 {
            header.extend([format!("{name} e2D[m]"), format!("{name} e3D[m]")]);
        } else if with_phi[i] {
            header.push(format!("{name} phi"));
        }
        header.extend([format!("{name} ~e2D"), format!("{name} ~e3D"), format!("{name} floor[%]")]);
    }

    let mut rows = Vec::new();
    for r in reports {
        let mut row = vec![r.dataset.clone(), r.train_size.to_string(), r.n_aps.to_string()];
        for (i, name) in names.iter().enumerate() {
            let s = r.systems.iter().find(|s| s.name == *name);
            if i == 0 {
                row.push(s.map(|s| fmt2(s.eps_2d)).unwrap_or_else(|| "-".into()));
                row.push(s.map(|s| fmt2(s.eps_3d)).unwrap_or_else(|| "-".into()));
            } else if with_phi[i] {
                row.push(s.map(|s| s.phi.to_string()).unwrap_or_else(|| "-".into()));
            }
            row.push(s.map(|s| fmt_opt(s.norm_2d)).unwrap_or_else(|| "-".into()));
            row.push(s.map(|s| fmt_opt(s.norm_3d)).unwrap_or_else(|| "-".into()));
            row.push(s.map(|s| fmt2(s.floor_hit)).unwrap_or_else(|| "-".into()));
        }
        rows.push(row);
    }
    if let Some(avg) = average {
        let mut row = vec!["Avg.".to_string(), String::new(), String::new()];
        for (i, name) in names.iter().enumerate() {
            let a = avg.iter().find(|a| a.name == *name);
            if i == 0 {
                row.extend([String::new(), String::new()]);
            } else if with_phi[i] {
                row.push(String::new());
            }
            row.push(a.map(|a| fmt_opt(a.norm_2d)).unwrap_or_else(|| "-".into()));
            row.push(a.map(|a| fmt_opt(a.norm_3d)).unwrap_or_else(|| "-".into()));
            row.push(a.map(|a| fmt2(a.floor_hit)).unwrap_or_else(|| "-".into()));
        }
        rows.push(row);
    }

    let widths: Vec<usize> =
        (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0)).collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&header) + "\n";
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for r in &rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}
