//! Conditional GAN over fingerprints, the M1/M2/M3 training scopes and
//! distance-gated selection of generated fingerprints.

use std::collections::HashSet;
use std::path::Path;

use fpgan_nn::{seeded_rng, Activation, AdamState, GraphBuilder, LayerSpec, Loss, Network, NetworkSpec, NnError, Padding, SeedRng, Tensor};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::positioning::PositioningModel;
use crate::radiomap::csvio::csv_bytes_with;
use crate::radiomap::{LabelSet, RadioMap, Representation};
use crate::seed::derive_path;

pub const LABEL_EMBEDDING_DIM: usize = 50;
pub const CONV_FILTERS: usize = 64;
pub const DISCRIMINATOR_DROPOUT: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// One model per building, conditioned on floor.
    M1,
    /// One model per floor, conditioned on building.
    M2,
    /// One model for the whole map, conditioned on floor.
    M3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditional {
    Floor,
    Building,
}

impl Method {
    pub fn conditional(self) -> Conditional {
        match self {
            Method::M1 | Method::M3 => Conditional::Floor,
            Method::M2 => Conditional::Building,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Method {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "M1" => Ok(Method::M1),
            "M2" => Ok(Method::M2),
            "M3" => Ok(Method::M3),
            _ => Err(CoreError::Config(format!("unknown method {s:?}, expected M1, M2 or M3"))),
        }
    }
}

fn conditional_labels(labels: &LabelSet, c: Conditional) -> &[usize] {
    match c {
        Conditional::Floor => &labels.floor,
        Conditional::Building => &labels.building,
    }
}

/// Rows of the training map one cGAN learns from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// `building-<id>`, `floor-<id>` or `all`, using source label ids.
    pub name: String,
    pub rows: Vec<usize>,
    /// Width of the label embedding: every class of the conditional kind.
    pub conditional_classes: usize,
    /// Conditional classes that occur in `rows`, ascending.
    pub present_classes: Vec<usize>,
}

/// Split the map by `method`. Classes with no rows produce no partition.
pub fn partitions(rm: &RadioMap, method: Method) -> Result<Vec<Partition>> {
    if rm.m() == 0 {
        return Err(CoreError::EmptyDataset("no rows to partition".into()));
    }
    let l = rm.labels();
    let cond = method.conditional();
    let classes = match cond {
        Conditional::Floor => rm.floor_classes(),
        Conditional::Building => rm.building_classes(),
    };
    let make = |name: String, rows: Vec<usize>| {
        let mut present: Vec<usize> = rows.iter().map(|&r| conditional_labels(l, cond)[r]).collect();
        present.sort_unstable();
        present.dedup();
        Partition { name, rows, conditional_classes: classes, present_classes: present }
    };
    let split = |key: &[usize], count: usize, kind: &str, ids: &[i64]| {
        (0..count)
            .filter_map(|k| {
                let rows: Vec<usize> = (0..rm.m()).filter(|&r| key[r] == k).collect();
                (!rows.is_empty()).then(|| make(format!("{kind}-{}", ids[k]), rows))
            })
            .collect::<Vec<_>>()
    };
    Ok(match method {
        Method::M1 => split(&l.building, rm.building_classes(), "building", &rm.mapping().buildings),
        Method::M2 => split(&l.floor, rm.floor_classes(), "floor", &rm.mapping().floors),
        Method::M3 => vec![make("all".into(), (0..rm.m()).collect())],
    })
}

/// Generator and discriminator for fingerprints of width `n`.
#[derive(Clone, Debug)]
pub struct CGan {
    pub generator: Network,
    pub discriminator: Network,
    pub n: usize,
    pub conditional_classes: usize,
}

pub fn discriminator_spec(n: usize, classes: usize) -> NetworkSpec {
    let mut d = GraphBuilder::new();
    let fp = d.input(vec![n]);
    let lab = d.input(vec![1]);
    let l = d.chain(
        lab,
        vec![
            LayerSpec::embedding(classes, LABEL_EMBEDDING_DIM),
            LayerSpec::dense(n, Activation::Linear),
            LayerSpec::reshape(vec![n, 1]),
        ],
    );
    let f = d.add(LayerSpec::reshape(vec![n, 1]), &[fp]);
    let c = d.add(LayerSpec::Concat, &[f, l]);
    d.chain(
        c,
        vec![
            LayerSpec::conv1d(CONV_FILTERS, 3, Padding::Same, Activation::leaky_relu()),
            LayerSpec::dropout(DISCRIMINATOR_DROPOUT),
            LayerSpec::conv1d(CONV_FILTERS, 3, Padding::Same, Activation::leaky_relu()),
            LayerSpec::dropout(DISCRIMINATOR_DROPOUT),
            LayerSpec::Flatten,
            LayerSpec::dense(1, Activation::Sigmoid),
        ],
    );
    d.build()
}

pub fn generator_spec(n: usize, classes: usize) -> NetworkSpec {
    let w = n.div_ceil(4);
    let mut g = GraphBuilder::new();
    let z = g.input(vec![n]);
    let lab = g.input(vec![1]);
    let zl = g.chain(z, vec![LayerSpec::dense(w, Activation::leaky_relu()), LayerSpec::reshape(vec![w, 1])]);
    let ll = g.chain(
        lab,
        vec![
            LayerSpec::embedding(classes, LABEL_EMBEDDING_DIM),
            LayerSpec::dense(w, Activation::Linear),
            LayerSpec::reshape(vec![w, 1]),
        ],
    );
    let c = g.add(LayerSpec::Concat, &[zl, ll]);
    let mut layers = vec![
        LayerSpec::conv1d_transpose(CONV_FILTERS, 3, 2, Padding::Same, Activation::leaky_relu()),
        LayerSpec::conv1d_transpose(CONV_FILTERS, 3, 2, Padding::Same, Activation::leaky_relu()),
        LayerSpec::conv1d(1, 3, Padding::Same, Activation::Sigmoid),
    ];
    if 4 * w > n {
        layers.push(LayerSpec::Crop { len: n });
    }
    layers.push(LayerSpec::Flatten);
    g.chain(c, layers);
    g.build()
}

pub fn build_cgan(n: usize, classes: usize, seed: u64) -> Result<CGan> {
    if n < 4 {
        return Err(CoreError::Domain(format!("the generator needs at least 4 APs, got {n}")));
    }
    if classes == 0 {
        return Err(CoreError::Domain("a cGAN needs at least one conditional class".into()));
    }
    Ok(CGan {
        generator: Network::new(generator_spec(n, classes), derive_path(seed, &["generator", "init"]))?,
        discriminator: Network::new(discriminator_spec(n, classes), derive_path(seed, &["discriminator", "init"]))?,
        n,
        conditional_classes: classes,
    })
}

fn label_tensor(labels: &[usize]) -> Tensor {
    Tensor::new(vec![labels.len(), 1], labels.iter().map(|&c| c as f64).collect()).expect("one index per row")
}

fn draw_latent(rng: &mut SeedRng, count: usize, n: usize, classes: &[usize]) -> (Tensor, Vec<usize>) {
    let z: Vec<f64> = (0..count * n).map(|_| StandardNormal.sample(rng)).collect();
    let labels = (0..count).map(|_| classes[rng.random_range(0..classes.len())]).collect();
    (Tensor::new(vec![count, n], z).expect("count x n"), labels)
}

/// `count × n` standard normal latents and labels drawn uniformly from `classes`.
pub fn sample_latent(count: usize, n: usize, classes: &[usize], seed: u64) -> Result<(Tensor, Vec<usize>)> {
    if count == 0 || n == 0 || classes.is_empty() {
        return Err(CoreError::Domain("latent sampling needs count, n and classes >= 1".into()));
    }
    Ok(draw_latent(&mut seeded_rng(seed), count, n, classes))
}

impl CGan {
    /// Generated fingerprints, `[count, n]`, each entry in [0, 1].
    pub fn generate(&self, z: &Tensor, labels: &[usize]) -> Result<Tensor> {
        Ok(self.generator.predict(&[z, &label_tensor(labels)])?)
    }

    /// Discriminator probabilities that each row is real, inference mode.
    pub fn discriminate(&self, x: &Tensor, labels: &[usize]) -> Result<Vec<f64>> {
        Ok(self.discriminator.predict(&[x, &label_tensor(labels)])?.data().to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig { epochs: 14, batch_size: 64, learning_rate: 2e-4 }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(CoreError::Config("cgan epochs and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(CoreError::Config("cgan learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanEpoch {
    pub epoch: usize,
    /// Mean discriminator loss on real half-batches.
    pub d_loss_real: f64,
    pub d_loss_fake: f64,
    pub g_loss: f64,
}

pub fn gan_history_csv(h: &[GanEpoch]) -> String {
    let mut s = String::from("epoch,d_loss_real,d_loss_fake,g_loss\n");
    for e in h {
        s.push_str(&format!("{},{},{},{}\n", e.epoch, e.d_loss_real, e.d_loss_fake, e.g_loss));
    }
    s
}

#[derive(Clone, Debug)]
pub struct TrainedCGan {
    pub cgan: CGan,
    pub partition: Partition,
    pub conditional: Conditional,
    pub history: Vec<GanEpoch>,
}

fn non_finite(epoch: usize, trace: &fpgan_nn::Trace) -> CoreError {
    CoreError::Nn(NnError::NonFiniteLoss { epoch, layer: trace.first_non_finite() })
}

/// One Adam step of the discriminator on a labeled batch. Returns the loss before the step.
pub fn discriminator_step(
    cgan: &mut CGan,
    adam: &mut AdamState,
    x: &Tensor,
    labels: &[usize],
    target: f64,
    lr: f64,
    rng: &mut SeedRng,
    epoch: usize,
) -> Result<f64> {
    let lab = label_tensor(labels);
    let d = &mut cgan.discriminator;
    let trace = d.forward_trace(&[x, &lab], Some(rng))?;
    let t = Tensor::filled(vec![x.batch(), 1], target);
    let loss = Loss::BinaryCe.value(trace.output(), &t)?;
    if !loss.is_finite() {
        return Err(non_finite(epoch, &trace));
    }
    let grad = Loss::BinaryCe.gradient(trace.output(), &t)?;
    let grads = d.backward(&[x, &lab], &trace, &grad)?;
    adam.step(d.params_mut(), &grads.params, lr)?;
    Ok(loss)
}

/// One generator step through the discriminator with target 1. The
/// discriminator's own parameter gradients are discarded.
pub fn generator_step(
    cgan: &mut CGan,
    adam: &mut AdamState,
    z: &Tensor,
    labels: &[usize],
    lr: f64,
    rng: &mut SeedRng,
    epoch: usize,
) -> Result<f64> {
    let lab = label_tensor(labels);
    let g_trace = cgan.generator.forward_trace(&[z, &lab], Some(rng))?;
    let fake = g_trace.output();
    let d_trace = cgan.discriminator.forward_trace(&[fake, &lab], Some(rng))?;
    let t = Tensor::filled(vec![z.batch(), 1], 1.0);
    let loss = Loss::BinaryCe.value(d_trace.output(), &t)?;
    if !loss.is_finite() {
        return Err(non_finite(epoch, &d_trace));
    }
    let grad = Loss::BinaryCe.gradient(d_trace.output(), &t)?;
    let d_grads = cgan.discriminator.backward(&[fake, &lab], &d_trace, &grad)?;
    let d_fake = d_grads.inputs[0].as_ref().ok_or_else(|| CoreError::InvalidState("no gradient reached the fingerprint input".into()))?;
    let g_grads = cgan.generator.backward(&[z, &lab], &g_trace, d_fake)?;
    adam.step(cgan.generator.params_mut(), &g_grads.params, lr)?;
    Ok(loss)
}

/// Adversarial training on one partition: per batch a real half-batch
/// (labeled 1), a generated half-batch (labeled 0), then a full generator batch.
pub fn train_partition(rm: &RadioMap, part: &Partition, cond: Conditional, cfg: &GanConfig, seed: u64) -> Result<TrainedCGan> {
    cfg.validate()?;
    if part.rows.is_empty() {
        return Err(CoreError::EmptyDataset(format!("partition {} has no rows", part.name)));
    }
    let m = part.rows.len();
    let mut batch = cfg.batch_size;
    if m < batch {
        log::warn!("partition {} has {m} rows, fewer than batch size {batch}; training with one batch of {m}", part.name);
        batch = m;
    }
    let half = (batch / 2).max(1);
    let batches_per_epoch = (m / batch).max(1);
    let n = rm.n();
    let mut cgan = build_cgan(n, part.conditional_classes, derive_path(seed, &["cgan", &part.name]))?;
    let mut d_adam = AdamState::new(cgan.discriminator.params());
    let mut g_adam = AdamState::new(cgan.generator.params());
    let mut rng = seeded_rng(derive_path(seed, &["cgan", &part.name, "train"]));
    let cond_of = conditional_labels(rm.labels(), cond);

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let (mut lr_sum, mut lf_sum, mut lg_sum) = (0.0, 0.0, 0.0);
        for _ in 0..batches_per_epoch {
            let picks: Vec<usize> = (0..half).map(|_| part.rows[rng.random_range(0..m)]).collect();
            let mut real = Vec::with_capacity(half * n);
            for &r in &picks {
                real.extend_from_slice(rm.row(r));
            }
            let real = Tensor::new(vec![half, n], real)?;
            let real_labels: Vec<usize> = picks.iter().map(|&r| cond_of[r]).collect();
            lr_sum += discriminator_step(&mut cgan, &mut d_adam, &real, &real_labels, 1.0, cfg.learning_rate, &mut rng, epoch)?;

            let (z, fake_labels) = draw_latent(&mut rng, half, n, &part.present_classes);
            let fake = cgan.generate(&z, &fake_labels)?;
            lf_sum += discriminator_step(&mut cgan, &mut d_adam, &fake, &fake_labels, 0.0, cfg.learning_rate, &mut rng, epoch)?;

            let (z, g_labels) = draw_latent(&mut rng, batch, n, &part.present_classes);
            lg_sum += generator_step(&mut cgan, &mut g_adam, &z, &g_labels, cfg.learning_rate, &mut rng, epoch)?;
        }
        let k = batches_per_epoch as f64;
        let rec = GanEpoch { epoch, d_loss_real: lr_sum / k, d_loss_fake: lf_sum / k, g_loss: lg_sum / k };
        log::debug!("cgan {} epoch {epoch}: d_real {:.4} d_fake {:.4} g {:.4}", part.name, rec.d_loss_real, rec.d_loss_fake, rec.g_loss);
        history.push(rec);
    }
    Ok(TrainedCGan { cgan, partition: part.clone(), conditional: cond, history })
}

/// One trained cGAN per partition of `method`.
pub fn train_cgan(rm: &RadioMap, method: Method, cfg: &GanConfig, seed: u64) -> Result<Vec<TrainedCGan>> {
    if rm.representation() != Representation::Powed {
        return Err(CoreError::InvalidState("the cGAN trains on powed radio maps".into()));
    }
    partitions(rm, method)?
        .iter()
        .map(|p| {
            log::info!("training cgan {} on {} rows", p.name, p.rows.len());
            train_partition(rm, p, method.conditional(), cfg, seed)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Ascending acceptance radii in meters.
    pub distances: Vec<f64>,
    pub candidates_per_iteration: usize,
    pub iterations: usize,
    pub dedupe: bool,
    /// Compare candidates against every training row instead of the cGAN's partition.
    pub whole_dataset: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            distances: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            candidates_per_iteration: 200,
            iterations: 10,
            dedupe: true,
            whole_dataset: false,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() {
            return Err(CoreError::Config("selection needs at least one distance".into()));
        }
        if self.distances.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(CoreError::Config("selection distances must be positive".into()));
        }
        if self.distances.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::Config("selection distances must be strictly ascending".into()));
        }
        if self.candidates_per_iteration == 0 || self.iterations == 0 {
            return Err(CoreError::Config("candidates_per_iteration and iterations must be >= 1".into()));
        }
        Ok(())
    }
}

fn euclid(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Nearest point and its distance; the lowest index wins ties.
pub fn nearest_point(c: [f64; 3], points: &[[f64; 3]]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in points.iter().enumerate() {
        let d = euclid(c, p);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best
}

/// For each candidate, the nearest point index if that point lies within `dist`.
pub fn accept_within(candidates: &[[f64; 3]], points: &[[f64; 3]], dist: f64) -> Vec<Option<usize>> {
    candidates
        .iter()
        .map(|&c| nearest_point(c, points).and_then(|(i, d)| (d <= dist).then_some(i)))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCount {
    pub distance: f64,
    pub accepted_before_dedupe: usize,
    pub accepted: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionStats {
    pub candidates: usize,
    pub accepted_before_dedupe: usize,
    /// φ: rows kept in the set.
    pub accepted: usize,
    pub per_threshold: Vec<ThresholdCount>,
    pub disagreements: usize,
}

/// Accepted generated fingerprints with their provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedSet {
    pub n: usize,
    pub rss: Vec<f64>,
    /// Predicted by the positioning model.
    pub labels: LabelSet,
    pub conditional: Conditional,
    pub conditional_label: Vec<usize>,
    pub accepted_distance: Vec<f64>,
    /// Row of the nearest real training fingerprint.
    pub seed_index: Vec<usize>,
    pub cgan_index: Vec<usize>,
    /// Predicted class differs from the conditional label.
    pub disagreement: Vec<bool>,
    pub stats: SelectionStats,
}

impl AugmentedSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rss[i * self.n..(i + 1) * self.n]
    }
}

/// Generate, locate and keep candidates that land near a real fingerprint.
/// Output order is (cGAN, distance, iteration, candidate).
pub fn select_fingerprints(
    cgans: &[TrainedCGan],
    model: &PositioningModel,
    rm_train: &RadioMap,
    cfg: &SelectionConfig,
    seed: u64,
) -> Result<AugmentedSet> {
    cfg.validate()?;
    if rm_train.m() == 0 {
        return Err(CoreError::Domain("selection needs a non-empty training map".into()));
    }
    if cgans.is_empty() {
        return Err(CoreError::InvalidState("no trained cGAN to sample from".into()));
    }
    let cond = cgans[0].conditional;
    let n = rm_train.n();
    let labels = rm_train.labels();
    let mut out = AugmentedSet {
        n,
        rss: Vec::new(),
        labels: LabelSet::default(),
        conditional: cond,
        conditional_label: Vec::new(),
        accepted_distance: Vec::new(),
        seed_index: Vec::new(),
        cgan_index: Vec::new(),
        disagreement: Vec::new(),
        stats: SelectionStats {
            per_threshold: cfg.distances.iter().map(|&d| ThresholdCount { distance: d, ..Default::default() }).collect(),
            ..Default::default()
        },
    };
    let mut seen: HashSet<Vec<u64>> = HashSet::new();

    for (ci, tc) in cgans.iter().enumerate() {
        if tc.cgan.n != n {
            return Err(CoreError::InvalidState(format!("cgan {ci} generates width {}, map has {n}", tc.cgan.n)));
        }
        let rows: Vec<usize> = if cfg.whole_dataset { (0..rm_train.m()).collect() } else { tc.partition.rows.clone() };
        let points: Vec<[f64; 3]> = rows.iter().map(|&r| labels.position(r)).collect();
        for (di, &dist) in cfg.distances.iter().enumerate() {
            for it in 0..cfg.iterations {
                let s = derive_path(seed, &["select", &ci.to_string(), &di.to_string(), &it.to_string()]);
                let (z, cond_labels) = sample_latent(cfg.candidates_per_iteration, n, &tc.partition.present_classes, s)?;
                let fake = tc.cgan.generate(&z, &cond_labels)?;
                let pred = model.predict(fake.data())?;
                let positions: Vec<[f64; 3]> = pred.iter().map(|p| p.position()).collect();
                out.stats.candidates += positions.len();
                for (k, hit) in accept_within(&positions, &points, dist).into_iter().enumerate() {
                    let Some(pi) = hit else { continue };
                    out.stats.accepted_before_dedupe += 1;
                    out.stats.per_threshold[di].accepted_before_dedupe += 1;
                    let row = fake.row(k);
                    if cfg.dedupe && !seen.insert(row.iter().map(|v| v.to_bits()).collect()) {
                        continue;
                    }
                    let p = &pred[k];
                    let predicted_class = match cond {
                        Conditional::Floor => p.floor,
                        Conditional::Building => p.building,
                    };
                    let disagree = predicted_class != cond_labels[k];
                    out.rss.extend_from_slice(row);
                    out.labels.push(p.position(), p.floor, p.building);
                    out.conditional_label.push(cond_labels[k]);
                    out.accepted_distance.push(dist);
                    out.seed_index.push(rows[pi]);
                    out.cgan_index.push(ci);
                    out.disagreement.push(disagree);
                    out.stats.accepted += 1;
                    out.stats.per_threshold[di].accepted += 1;
                    out.stats.disagreements += disagree as usize;
                }
            }
        }
    }
    Ok(out)
}

/// Every accepted row must lie within its accepted distance of its seed row.
pub fn check_soundness(aug: &AugmentedSet, rm_train: &RadioMap) -> Result<()> {
    let l = rm_train.labels();
    for i in 0..aug.len() {
        let s = aug.seed_index[i];
        if s >= l.len() {
            return Err(CoreError::InvalidState(format!("synthetic row {i} refers to missing training row {s}")));
        }
        let d = euclid(aug.labels.position(i), l.position(s));
        if d > aug.accepted_distance[i] {
            return Err(CoreError::InvalidState(format!(
                "synthetic row {i} is {d} m from training row {s}, beyond {} m",
                aug.accepted_distance[i]
            )));
        }
    }
    Ok(())
}

/// Real rows followed by the accepted synthetic rows.
pub fn augment_radiomap(rm_train: &RadioMap, aug: &AugmentedSet) -> Result<RadioMap> {
    if rm_train.representation() != Representation::Powed {
        return Err(CoreError::InvalidState("synthetic fingerprints are powed; the radio map is raw dBm".into()));
    }
    if aug.n != rm_train.n() {
        return Err(CoreError::InvalidState(format!("synthetic width {} does not match {} APs", aug.n, rm_train.n())));
    }
    if aug.is_empty() {
        return Ok(rm_train.clone());
    }
    rm_train.with_synthetic(&aug.rss, &aug.labels)
}

/// Canonical CSV of an augmented map with SOURCE, CONDLABEL, SEEDIDX and DIST columns.
pub fn augmented_csv_bytes(augmented: &RadioMap, aug: &AugmentedSet) -> Result<Vec<u8>> {
    let real = augmented.real_rows();
    if augmented.synthetic_rows() != aug.len() {
        return Err(CoreError::InvalidState("augmented map and set disagree on the synthetic count".into()));
    }
    let map = augmented.mapping();
    csv_bytes_with(augmented, &["SOURCE", "CONDLABEL", "SEEDIDX", "DIST"], |i| {
        if i < real {
            return vec!["real".into(), String::new(), String::new(), String::new()];
        }
        let j = i - real;
        let c = aug.conditional_label[j];
        let cond = match aug.conditional {
            Conditional::Floor => map.floors[c],
            Conditional::Building => map.buildings[c],
        };
        vec!["synthetic".into(), cond.to_string(), aug.seed_index[j].to_string(), aug.accepted_distance[j].to_string()]
    })
}

/// One plot point of `export-coords`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordRow {
    pub x: f64,
    pub y: f64,
    pub floor: i64,
    pub building: i64,
    pub source: String,
}

/// Read positions and sources back from an augmented CSV, in file order.
/// Rows without a SOURCE column count as real.
pub fn read_coords(path: &Path, building: Option<i64>, floor: Option<i64>) -> Result<Vec<CoordRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CoreError::io(path, io),
        other => CoreError::Schema(format!("{}: {other:?}", path.display())),
    })?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| CoreError::Schema(format!("{}: missing column {name}", path.display())));
    let (cx, cy, cf, cb) = (need("LONGITUDE")?, need("LATITUDE")?, need("FLOOR")?, need("BUILDINGID")?);
    let cs = col("SOURCE");
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |c: usize| -> Result<f64> {
            rec[c].trim().parse::<f64>().map_err(|_| CoreError::Parse { row: line, column: headers[c].to_string(), msg: format!("not a number: {:?}", &rec[c]) })
        };
        let int = |c: usize| -> Result<i64> {
            rec[c].trim().parse::<i64>().map_err(|_| CoreError::Parse { row: line, column: headers[c].to_string(), msg: format!("not an integer: {:?}", &rec[c]) })
        };
        let row = CoordRow {
            x: num(cx)?,
            y: num(cy)?,
            floor: int(cf)?,
            building: int(cb)?,
            source: cs.map(|c| rec[c].to_string()).unwrap_or_else(|| "real".into()),
        };
        if building.is_some_and(|b| b != row.building) || floor.is_some_and(|f| f != row.floor) {
            continue;
        }
        out.push(row);
    }
    Ok(out)
}

pub fn coords_csv(rows: &[CoordRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["x", "y", "floor", "building", "source"])?;
    for r in rows {
        w.write_record([r.x.to_string(), r.y.to_string(), r.floor.to_string(), r.building.to_string(), r.source.clone()])?;
    }
    w.into_inner().map_err(|e| CoreError::InvalidState(format!("csv buffer: {e}")))
}
