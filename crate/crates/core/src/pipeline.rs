//! Run configuration and the train / augment / evaluate stages.
//!
//! Every stage writes under `out` and records its artifacts with SHA-256
//! digests in `out/manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augmentation::{
    augment_radiomap, augmented_csv_bytes, check_soundness, gan_history_csv, select_fingerprints, train_cgan, GanConfig,
    Method, Partition, SelectionConfig, SelectionStats,
};
use crate::error::{CoreError, Result};
use crate::evaluation::{build_report, knn_predict, positioning_errors, report_table, EvalReport, ReportContext, SystemResult};
use crate::positioning::{load_bundle, read_json, save_bundle, train_positioning, write_json, BundleInfo, PositioningConfig, TrainingHistories};
use crate::radiomap::{load_dataset, load_with_mapping, to_powed, to_powed_with_min, DatasetSchema, RadioMap, Representation, DEFAULT_BETA};
use crate::seed::{derive, sha256_hex};

pub const BASELINE_NAME: &str = "1-NN";
pub const ESTIMATOR_NAME: &str = "CNN-LSTM";

/// Name of the augmented system in reports, e.g. `CNN-LSTM+cGAN-M2`.
pub fn augmented_name(method: Method) -> String {
    format!("{ESTIMATOR_NAME}+cGAN-{method}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CganSettings {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for CganSettings {
    fn default() -> Self {
        let g = GanConfig::default();
        CganSettings { method: Method::M2, epochs: g.epochs, batch_size: g.batch_size, learning_rate: g.learning_rate }
    }
}

impl CganSettings {
    pub fn gan_config(&self) -> GanConfig {
        GanConfig { epochs: self.epochs, batch_size: self.batch_size, learning_rate: self.learning_rate }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    /// Neighbors of the baseline.
    pub k: usize,
    /// Feature space of the baseline: `powed` or `raw_dbm`.
    pub knn_space: Representation,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings { k: 1, knn_space: Representation::Powed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: PathBuf,
    pub test: Option<PathBuf>,
    /// Report label; defaults to the training file stem.
    pub dataset_name: Option<String>,
    pub schema: DatasetSchema,
    pub beta: f64,
    pub positioning: PositioningConfig,
    pub cgan: CganSettings,
    pub selection: SelectionConfig,
    pub evaluation: EvaluationSettings,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: PathBuf::new(),
            test: None,
            dataset_name: None,
            schema: DatasetSchema::default(),
            beta: DEFAULT_BETA,
            positioning: PositioningConfig::default(),
            cgan: CganSettings::default(),
            selection: SelectionConfig::default(),
            evaluation: EvaluationSettings::default(),
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// The path-free part of a run configuration, recorded in reports and hashed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub schema: DatasetSchema,
    pub beta: f64,
    pub positioning: PositioningConfig,
    pub cgan: CganSettings,
    pub selection: SelectionConfig,
    pub evaluation: EvaluationSettings,
    pub seed: u64,
}

impl RunConfig {
    /// Parse a JSON config. Relative paths resolve against the file's directory.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.train);
        if let Some(t) = cfg.test.as_mut() {
            resolve(t);
        }
        resolve(&mut cfg.out);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.as_os_str().is_empty() {
            return Err(CoreError::Config("config needs a training dataset path".into()));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(CoreError::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.evaluation.k == 0 {
            return Err(CoreError::Config("evaluation.k must be >= 1".into()));
        }
        self.schema.validate()?;
        self.positioning.validate()?;
        self.cgan.gan_config().validate()?;
        self.selection.validate()
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            schema: self.schema.clone(),
            beta: self.beta,
            positioning: self.positioning.clone(),
            cgan: self.cgan.clone(),
            selection: self.selection.clone(),
            evaluation: self.evaluation.clone(),
            seed: self.seed,
        }
    }

    pub fn config_hash(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(&self.hyperparameters())?.as_bytes()))
    }

    pub fn dataset_label(&self) -> String {
        self.dataset_name
            .clone()
            .unwrap_or_else(|| self.train.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
    }

    pub fn bundle_dir(&self) -> PathBuf {
        self.out.join("bundle")
    }

    pub fn augmented_bundle_dir(&self) -> PathBuf {
        self.out.join("augmented_bundle")
    }
}

/// Training data in both representations.
#[derive(Clone, Debug)]
pub struct TrainData {
    /// `None` when the input file was already powed.
    pub raw: Option<RadioMap>,
    pub powed: RadioMap,
    pub min_dbm: Option<f64>,
}

pub fn load_train(cfg: &RunConfig) -> Result<TrainData> {
    let rm = load_dataset(&cfg.train, &cfg.schema)?;
    match rm.representation() {
        Representation::RawDbm => {
            let powed = to_powed(&rm, cfg.beta)?;
            let min = powed.powed().map(|p| p.min_dbm);
            Ok(TrainData { raw: Some(rm), powed, min_dbm: min })
        }
        Representation::Powed => Ok(TrainData { raw: None, powed: rm, min_dbm: None }),
    }
}

/// Test split in the training label space, powed with the training minimum.
/// An empty or unreadable-as-a-split test file is a provenance error.
pub fn load_test(cfg: &RunConfig, train: &TrainData) -> Result<(Option<RadioMap>, RadioMap)> {
    let path = cfg.test.as_ref().ok_or_else(|| CoreError::Config("evaluation needs a test dataset path".into()))?;
    let rm = load_with_mapping(path, &cfg.schema, train.powed.mapping()).map_err(|e| match e {
        CoreError::EmptyDataset(msg) => CoreError::Provenance(format!("empty test split: {msg}")),
        other => other,
    })?;
    if rm.ap_ids() != train.powed.ap_ids() {
        return Err(CoreError::Provenance(format!("{}: test APs differ from the training APs", path.display())));
    }
    match (rm.representation(), train.min_dbm) {
        (Representation::RawDbm, Some(min)) => {
            let powed = to_powed_with_min(&rm, cfg.beta, min)?;
            Ok((Some(rm), powed))
        }
        (Representation::Powed, None) => Ok((None, rm)),
        _ => Err(CoreError::Config("train and test must both be raw dBm or both be powed".into())),
    }
}

/// Convert one raw dataset into its powed CSV. With a reference split the
/// minimum comes from the reference, so a test split matches its training split.
pub fn convert(input: &Path, schema: &DatasetSchema, beta: f64, reference: Option<&Path>) -> Result<RadioMap> {
    let rm = load_dataset(input, schema)?;
    match reference {
        None => to_powed(&rm, beta),
        Some(r) => {
            let refmap = to_powed(&load_dataset(r, schema)?, beta)?;
            let min = refmap.powed().expect("just transformed").min_dbm;
            to_powed_with_min(&rm, beta, min)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_sha256: String,
    /// Relative path → SHA-256 of the bytes written.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub formats: BTreeMap<String, u32>,
    pub stages: BTreeMap<String, StageRecord>,
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| CoreError::io(path, e))?))
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CoreError::io(dir, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| CoreError::io(dir, e))?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            out.insert(rel, hash_file(&p)?);
        }
    }
    Ok(())
}

/// Record `paths` (files or directories under `out`) as the artifacts of `stage`.
pub fn record_stage(out: &Path, stage: &str, config_sha256: &str, paths: &[PathBuf]) -> Result<()> {
    let mpath = out.join("manifest.json");
    let mut m: Manifest = if mpath.exists() { read_json(&mpath)? } else { Manifest::default() };
    m.tool = "fpgan".into();
    m.version = env!("CARGO_PKG_VERSION").into();
    m.formats.insert("archive".into(), fpgan_nn::archive::ARCHIVE_FORMAT_VERSION);
    m.formats.insert("report".into(), crate::evaluation::REPORT_SCHEMA_VERSION);
    let mut artifacts = BTreeMap::new();
    for p in paths {
        if p.is_dir() {
            collect_files(out, p, &mut artifacts)?;
        } else {
            let rel = p.strip_prefix(out).unwrap_or(p).to_string_lossy().replace('\\', "/");
            artifacts.insert(rel, hash_file(p)?);
        }
    }
    m.stages.insert(stage.into(), StageRecord { config_sha256: config_sha256.into(), artifacts });
    write_json(&mpath, &m)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CoreError::io(path, e))
}

fn write_histories(dir: &Path, h: &TrainingHistories) -> Result<Vec<PathBuf>> {
    let mut written = vec![dir.join("position.csv"), dir.join("floor.csv")];
    write_bytes(&written[0], h.position.to_csv().as_bytes())?;
    write_bytes(&written[1], h.floor.to_csv().as_bytes())?;
    if let Some(b) = &h.building {
        let p = dir.join("building.csv");
        write_bytes(&p, b.to_csv().as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

fn bundle_info(rm: &RadioMap, beta: f64, min_dbm: Option<f64>, seed: u64) -> BundleInfo {
    BundleInfo {
        n_aps: rm.n(),
        floor_classes: rm.floor_classes(),
        building_classes: rm.building_classes(),
        dataset_hash: rm.content_hash(),
        mapping: rm.mapping().clone(),
        ap_ids: rm.ap_ids().to_vec(),
        beta,
        min_dbm,
        seed,
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub histories: TrainingHistories,
    pub train_rows: usize,
}

/// Train the three estimators and write `bundle/` and `history/`.
pub fn run_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = load_train(cfg)?;
    let seed = derive(cfg.seed, "positioning");
    let (model, histories) = train_positioning(&data.powed, &cfg.positioning, seed)?;
    let dir = cfg.bundle_dir();
    save_bundle(&model, &bundle_info(&data.powed, cfg.beta, data.min_dbm, seed), &dir)?;
    let mut written = vec![dir];
    written.extend(write_histories(&cfg.out.join("history"), &histories)?);
    record_stage(&cfg.out, "train", &cfg.config_hash()?, &written)?;
    Ok(TrainOutcome { histories, train_rows: data.powed.m() })
}

/// Contents of `selection.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub method: Method,
    pub partitions: Vec<PartitionSummary>,
    pub stats: SelectionStats,
    /// Content hash of the real training map the synthetic rows extend.
    pub base_dataset_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub name: String,
    pub rows: usize,
    pub present_classes: Vec<usize>,
}

impl From<&Partition> for PartitionSummary {
    fn from(p: &Partition) -> Self {
        PartitionSummary { name: p.name.clone(), rows: p.rows.len(), present_classes: p.present_classes.clone() }
    }
}

#[derive(Clone, Debug)]
pub struct AugmentOutcome {
    pub summary: SelectionSummary,
    pub histories: TrainingHistories,
}

fn check_bundle_matches(info: &BundleInfo, rm: &RadioMap, dir: &Path) -> Result<()> {
    if info.dataset_hash != rm.content_hash() {
        return Err(CoreError::Provenance(format!("{} was trained on a different radio map", dir.display())));
    }
    Ok(())
}

/// Train the cGANs, select synthetic fingerprints and retrain on the enlarged map.
pub fn run_augment(cfg: &RunConfig) -> Result<AugmentOutcome> {
    cfg.validate()?;
    let data = load_train(cfg)?;
    let rm = &data.powed;
    if cfg.cgan.method == Method::M1 && rm.building_classes() < 2 {
        return Err(CoreError::Config("method M1 trains per building and needs a multi-building dataset".into()));
    }
    let bdir = cfg.bundle_dir();
    let (model, info) = load_bundle(&bdir)?;
    check_bundle_matches(&info, rm, &bdir)?;

    let gan_seed = derive(cfg.seed, "cgan");
    let cgans = train_cgan(rm, cfg.cgan.method, &cfg.cgan.gan_config(), gan_seed)?;
    let cdir = cfg.out.join("cgan");
    std::fs::create_dir_all(&cdir).map_err(|e| CoreError::io(&cdir, e))?;
    for tc in &cgans {
        let meta = |role: &str| {
            serde_json::json!({
                "role": role,
                "partition": tc.partition.name,
                "method": cfg.cgan.method,
                "conditional": tc.conditional,
                "conditional_classes": tc.cgan.conditional_classes,
            })
        };
        let name = &tc.partition.name;
        fpgan_nn::save_archive(&tc.cgan.generator, meta("generator"), &cdir, &format!("generator-{name}"))?;
        fpgan_nn::save_archive(&tc.cgan.discriminator, meta("discriminator"), &cdir, &format!("discriminator-{name}"))?;
        write_bytes(&cdir.join(format!("history-{name}.csv")), gan_history_csv(&tc.history).as_bytes())?;
    }

    let aug = select_fingerprints(&cgans, &model, rm, &cfg.selection, derive(cfg.seed, "selection"))?;
    check_soundness(&aug, rm)?;
    let summary = SelectionSummary {
        method: cfg.cgan.method,
        partitions: cgans.iter().map(|c| PartitionSummary::from(&c.partition)).collect(),
        stats: aug.stats.clone(),
        base_dataset_hash: rm.content_hash(),
    };
    let spath = cfg.out.join("selection.json");
    write_json(&spath, &summary)?;
    log::info!(
        "selection accepted {} of {} candidates ({} before dedupe)",
        summary.stats.accepted,
        summary.stats.candidates,
        summary.stats.accepted_before_dedupe
    );
    for t in &summary.stats.per_threshold {
        log::info!("  within {} m: {} accepted", t.distance, t.accepted);
    }
    if aug.is_empty() {
        record_stage(&cfg.out, "augment", &cfg.config_hash()?, &[cdir, spath])?;
        return Err(CoreError::ZeroAccepted);
    }

    let augmented = augment_radiomap(rm, &aug)?;
    let apath = cfg.out.join("augmented.csv");
    write_bytes(&apath, &augmented_csv_bytes(&augmented, &aug)?)?;
    let seed = derive(cfg.seed, "positioning/augmented");
    let (model2, histories) = train_positioning(&augmented, &cfg.positioning, seed)?;
    let adir = cfg.augmented_bundle_dir();
    save_bundle(&model2, &bundle_info(&augmented, cfg.beta, data.min_dbm, seed), &adir)?;
    let mut written = vec![cdir, spath, apath, adir];
    written.extend(write_histories(&cfg.out.join("history/augmented"), &histories)?);
    record_stage(&cfg.out, "augment", &cfg.config_hash()?, &written)?;
    Ok(AugmentOutcome { summary, histories })
}

/// Evaluate the baseline and every trained bundle on the test split and
/// write `report.json` and `report.txt`.
pub fn run_evaluate(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let data = load_train(cfg)?;
    let (raw_test, test) = load_test(cfg, &data)?;
    if test.m() == 0 {
        return Err(CoreError::Provenance("empty test split".into()));
    }
    let split_hash = test.content_hash();
    let result = |name: String, pred: &[crate::positioning::PredictedLabels], phi: usize| -> Result<SystemResult> {
        Ok(SystemResult { name, summary: positioning_errors(pred, test.labels())?, phi, test_split_hash: split_hash.clone() })
    };

    let k = cfg.evaluation.k;
    let knn = match cfg.evaluation.knn_space {
        Representation::Powed => knn_predict(&data.powed, &test, k)?,
        Representation::RawDbm => {
            let (Some(tr), Some(te)) = (&data.raw, &raw_test) else {
                return Err(CoreError::Config("raw-dBm k-NN needs raw-dBm input files".into()));
            };
            knn_predict(tr, te, k)?
        }
    };
    let baseline = result(BASELINE_NAME.into(), &knn, 0)?;

    let mut systems = Vec::new();
    let bdir = cfg.bundle_dir();
    let (model, info) = load_bundle(&bdir)?;
    check_bundle_matches(&info, &data.powed, &bdir)?;
    systems.push(result(ESTIMATOR_NAME.into(), &model.predict_map(&test)?, 0)?);

    let adir = cfg.augmented_bundle_dir();
    if adir.join("bundle.json").exists() {
        let summary: SelectionSummary = read_json(&cfg.out.join("selection.json"))?;
        if summary.base_dataset_hash != data.powed.content_hash() {
            return Err(CoreError::Provenance(format!("{} extends a different radio map", adir.display())));
        }
        let (amodel, _) = load_bundle(&adir)?;
        systems.push(result(augmented_name(summary.method), &amodel.predict_map(&test)?, summary.stats.accepted)?);
    }

    let ctx = ReportContext {
        dataset: cfg.dataset_label(),
        train_size: data.powed.m(),
        n_aps: data.powed.n(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg.hyperparameters())?,
    };
    let report = build_report(ctx, baseline, systems)?;
    let jpath = cfg.out.join("report.json");
    let tpath = cfg.out.join("report.txt");
    write_bytes(&jpath, report.to_json()?.as_bytes())?;
    write_bytes(&tpath, report_table(std::slice::from_ref(&report), None).as_bytes())?;
    record_stage(&cfg.out, "evaluate", &cfg.config_hash()?, &[jpath, tpath])?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"train": "t.csv"}"#).unwrap();
        assert_eq!(cfg.cgan.epochs, 14);
        assert_eq!(cfg.cgan.batch_size, 64);
        assert_eq!(cfg.selection.distances, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(cfg.positioning.position.learning_rate, 5e-4);
        assert_eq!(cfg.beta, std::f64::consts::E);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"train": "t.csv", "epochs": 3}"#).is_err());
    }

    #[test]
    fn config_hash_ignores_paths() {
        let a = RunConfig { train: "a.csv".into(), out: "x".into(), ..Default::default() };
        let b = RunConfig { train: "b.csv".into(), out: "y".into(), ..Default::default() };
        assert_eq!(a.config_hash().unwrap(), b.config_hash().unwrap());
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_ne!(a.config_hash().unwrap(), c.config_hash().unwrap());
    }

    #[test]
    fn augmented_system_name() {
        assert_eq!(augmented_name(Method::M2), "CNN-LSTM+cGAN-M2");
    }
}
