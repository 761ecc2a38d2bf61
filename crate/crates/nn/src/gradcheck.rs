//! Central-difference gradient checks.
//!
//! [`Check`] compares every analytic parameter and input gradient of a
//! network against `(f(x + h) - f(x - h)) / 2h`. [`run_suite`] runs the fixed
//! battery of configurations covering each layer kind, activation and loss.

use rand::Rng;

use crate::{seeded_rng, Activation, GraphBuilder, LayerSpec, Loss, Network, NetworkSpec, Padding, Tensor};

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
/// A check whose gradients are all below this is treated as vacuous.
pub const MIN_LARGEST_GRAD: f64 = 1e-4;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

pub fn random_tensor(shape: Vec<usize>, seed: u64, scale: f64) -> Tensor {
    let mut rng = seeded_rng(seed);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(shape, data).expect("shape matches data")
}

/// Outcome of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub label: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub largest_grad: f64,
    /// First element over tolerance, if any.
    pub worst: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_err < TOL && self.largest_grad > MIN_LARGEST_GRAD
    }
}

enum Objective {
    /// sum(w * y) with fixed random weights.
    Linear,
    Loss(Loss, Tensor),
}

pub struct Check {
    net: Network,
    inputs: Vec<Tensor>,
    /// Which inputs take a gradient (embedding indices do not).
    differentiable: Vec<bool>,
    dropout_seed: Option<u64>,
    objective: Objective,
}

#[derive(Default)]
struct Tally {
    checked: usize,
    max_rel_err: f64,
    largest: f64,
    worst: Option<String>,
}

impl Tally {
    fn add(&mut self, analytic: f64, numeric: f64, what: impl FnOnce() -> String) {
        let err = rel_err(analytic, numeric);
        self.largest = self.largest.max(analytic.abs());
        if err > self.max_rel_err {
            self.max_rel_err = err;
            if err >= TOL {
                self.worst = Some(format!("{}: analytic {analytic} numeric {numeric} rel {err}", what()));
            }
        }
        self.checked += 1;
    }

    fn finish(self, label: &str) -> CheckResult {
        CheckResult {
            label: label.to_string(),
            checked: self.checked,
            max_rel_err: self.max_rel_err,
            largest_grad: self.largest,
            worst: self.worst,
        }
    }
}

impl Check {
    pub fn new(spec: NetworkSpec, inputs: Vec<Tensor>, seed: u64) -> Self {
        let differentiable = vec![true; inputs.len()];
        let net = Network::new(spec, seed).expect("valid check network");
        Check { net, inputs, differentiable, dropout_seed: None, objective: Objective::Linear }
    }

    pub fn frozen_input(mut self, i: usize) -> Self {
        self.differentiable[i] = false;
        self
    }

    /// Replay the same dropout mask in every evaluation.
    pub fn with_dropout(mut self, seed: u64) -> Self {
        self.dropout_seed = Some(seed);
        self
    }

    pub fn with_loss(mut self, loss: Loss, target: Tensor) -> Self {
        self.objective = Objective::Loss(loss, target);
        self
    }

    fn weights(&self, shape: &[usize]) -> Tensor {
        random_tensor(shape.to_vec(), 0xfeed, 1.0)
    }

    fn value(&self, net: &Network, inputs: &[Tensor]) -> f64 {
        let refs: Vec<&Tensor> = inputs.iter().collect();
        let mut rng = self.dropout_seed.map(seeded_rng);
        let y = net.forward(&refs, rng.as_mut()).expect("forward pass");
        match &self.objective {
            Objective::Linear => y.data().iter().zip(self.weights(y.shape()).data()).map(|(a, b)| a * b).sum(),
            Objective::Loss(loss, t) => loss.value(&y, t).expect("loss"),
        }
    }

    pub fn evaluate(self, label: &str) -> CheckResult {
        let refs: Vec<&Tensor> = self.inputs.iter().collect();
        let mut rng = self.dropout_seed.map(seeded_rng);
        let trace = self.net.forward_trace(&refs, rng.as_mut()).expect("forward pass");
        let grad_out = match &self.objective {
            Objective::Linear => self.weights(trace.output().shape()),
            Objective::Loss(loss, t) => loss.gradient(trace.output(), t).expect("loss gradient"),
        };
        let grads = self.net.backward(&refs, &trace, &grad_out).expect("backward pass");

        let mut tally = Tally::default();
        for (node, group) in self.net.params().iter().enumerate() {
            for (p, tensor) in group.iter().enumerate() {
                for e in 0..tensor.len() {
                    let mut plus = self.net.clone();
                    plus.params_mut()[node][p].data_mut()[e] += H;
                    let mut minus = self.net.clone();
                    minus.params_mut()[node][p].data_mut()[e] -= H;
                    let numeric = (self.value(&plus, &self.inputs) - self.value(&minus, &self.inputs)) / (2.0 * H);
                    tally.add(grads.params[node][p].data()[e], numeric, || format!("node {node} param {p} elem {e}"));
                }
            }
        }
        for (i, x) in self.inputs.iter().enumerate() {
            if !self.differentiable[i] {
                continue;
            }
            let Some(g) = grads.inputs[i].as_ref() else {
                tally.max_rel_err = f64::INFINITY;
                tally.worst = Some(format!("input {i} has no gradient"));
                continue;
            };
            for e in 0..x.len() {
                let mut plus = self.inputs.clone();
                plus[i].data_mut()[e] += H;
                let mut minus = self.inputs.clone();
                minus[i].data_mut()[e] -= H;
                let numeric = (self.value(&self.net, &plus) - self.value(&self.net, &minus)) / (2.0 * H);
                tally.add(g.data()[e], numeric, || format!("input {i} elem {e}"));
            }
        }
        tally.finish(label)
    }

    fn run(self, label: &str, out: &mut Vec<CheckResult>) {
        out.push(self.evaluate(label));
    }
}

/// What a group of configurations exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    DenseActivations,
    Conv1d,
    Conv1dTranspose,
    MaxPool1d,
    Lstm,
    Embedding,
    Dropout,
    Reshape,
    Concat,
    Crop,
    LossesDirect,
    LossesThroughNetworks,
    EstimatorStack,
    GanGraphs,
}

pub const GROUPS: [Group; 14] = [
    Group::DenseActivations,
    Group::Conv1d,
    Group::Conv1dTranspose,
    Group::MaxPool1d,
    Group::Lstm,
    Group::Embedding,
    Group::Dropout,
    Group::Reshape,
    Group::Concat,
    Group::Crop,
    Group::LossesDirect,
    Group::LossesThroughNetworks,
    Group::EstimatorStack,
    Group::GanGraphs,
];

/// Run every configuration of one group.
pub fn run_group(group: Group) -> Vec<CheckResult> {
    let mut out = Vec::new();
    match group {
        Group::DenseActivations => dense_every_activation(&mut out),
        Group::Conv1d => conv1d_configs(&mut out),
        Group::Conv1dTranspose => conv1d_transpose_configs(&mut out),
        Group::MaxPool1d => max_pool_configs(&mut out),
        Group::Lstm => lstm_configs(&mut out),
        Group::Embedding => embedding_configs(&mut out),
        Group::Dropout => dropout_configs(&mut out),
        Group::Reshape => flatten_and_reshape_configs(&mut out),
        Group::Concat => concat_configs(&mut out),
        Group::Crop => crop_configs(&mut out),
        Group::LossesDirect => loss_gradients_direct(&mut out),
        Group::LossesThroughNetworks => losses_through_networks(&mut out),
        Group::EstimatorStack => estimator_shaped_stack(&mut out),
        Group::GanGraphs => gan_shaped_graphs(&mut out),
    }
    out
}

pub fn run_suite() -> Vec<(Group, Vec<CheckResult>)> {
    GROUPS.iter().map(|&g| (g, run_group(g))).collect()
}

fn all_activations() -> Vec<Activation> {
    vec![
        Activation::Linear,
        Activation::Relu,
        Activation::elu(),
        Activation::Elu { alpha: 0.5 },
        Activation::leaky_relu(),
        Activation::LeakyRelu { a: 3.0 },
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Softmax,
    ]
}

fn dense_every_activation(out: &mut Vec<CheckResult>) {
    for (ai, act) in all_activations().into_iter().enumerate() {
        for cfg in 0..5u64 {
            let (d_in, units, batch) = (2 + cfg as usize, 2 + (cfg as usize * 2) % 4, 1 + cfg as usize % 3);
            let spec = NetworkSpec::sequential(vec![d_in], vec![LayerSpec::dense(units, act)]);
            let x = random_tensor(vec![batch, d_in], 100 + cfg, 1.0);
            Check::new(spec, vec![x], ai as u64 * 10 + cfg).run(&format!("dense {act:?} cfg {cfg}"), out);
        }
    }
}

fn conv1d_configs(out: &mut Vec<CheckResult>) {
    // (len, channels, filters, kernel, stride, padding)
    let configs = [
        (5, 1, 3, 1, 1, Padding::Valid),
        (6, 2, 4, 3, 1, Padding::Valid),
        (7, 2, 3, 3, 1, Padding::Same),
        (8, 3, 2, 2, 2, Padding::Valid),
        (9, 1, 2, 4, 2, Padding::Same),
        (4, 2, 5, 5, 1, Padding::Same),
        (10, 2, 2, 3, 3, Padding::Same),
    ];
    let acts = all_activations();
    for (ci, &(len, ch, filters, k, stride, padding)) in configs.iter().enumerate() {
        let act = acts[ci % acts.len()];
        let spec = NetworkSpec::sequential(
            vec![len, ch],
            vec![LayerSpec::Conv1d { filters, kernel_size: k, stride, padding, activation: act }],
        );
        let x = random_tensor(vec![2, len, ch], 200 + ci as u64, 1.0);
        Check::new(spec, vec![x], ci as u64).run(&format!("conv1d cfg {ci}"), out);
    }
}

fn conv1d_transpose_configs(out: &mut Vec<CheckResult>) {
    let configs = [
        (3, 1, 2, 3, 2, Padding::Same),
        (4, 2, 3, 3, 2, Padding::Valid),
        (2, 2, 4, 1, 1, Padding::Same),
        (5, 1, 2, 4, 3, Padding::Same),
        (3, 3, 2, 2, 2, Padding::Valid),
        (2, 2, 2, 5, 2, Padding::Same),
    ];
    let acts = all_activations();
    for (ci, &(len, ch, filters, k, stride, padding)) in configs.iter().enumerate() {
        let act = acts[(ci + 3) % acts.len()];
        let spec = NetworkSpec::sequential(
            vec![len, ch],
            vec![LayerSpec::Conv1dTranspose { filters, kernel_size: k, stride, padding, activation: act }],
        );
        let x = random_tensor(vec![2, len, ch], 300 + ci as u64, 1.0);
        Check::new(spec, vec![x], 10 + ci as u64).run(&format!("conv1d_transpose cfg {ci}"), out);
    }
}

/// Inputs whose values in any window differ by far more than the step.
fn separated(shape: Vec<usize>, seed: u64) -> Tensor {
    let n: usize = shape.iter().product();
    let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 0.1 - 0.5 * n as f64 * 0.1).collect();
    let mut rng = seeded_rng(seed);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        vals.swap(i, j);
    }
    Tensor::new(shape, vals).unwrap()
}

fn max_pool_configs(out: &mut Vec<CheckResult>) {
    let configs = [(4, 1, 2), (6, 2, 3), (7, 2, 2), (5, 3, 1), (9, 1, 4)];
    for (ci, &(len, ch, pool)) in configs.iter().enumerate() {
        let spec = NetworkSpec::sequential(vec![len, ch], vec![LayerSpec::max_pool1d(pool)]);
        let x = separated(vec![3, len, ch], ci as u64);
        Check::new(spec, vec![x], 0).run(&format!("max_pool cfg {ci}"), out);
    }
}

fn lstm_configs(out: &mut Vec<CheckResult>) {
    let configs: [(Vec<usize>, usize, Activation); 6] = [
        (vec![3], 2, Activation::Tanh),
        (vec![5], 4, Activation::Relu),
        (vec![2, 3], 3, Activation::Tanh),
        (vec![4, 2], 2, Activation::elu()),
        (vec![3, 1], 5, Activation::Relu),
        (vec![6], 3, Activation::Sigmoid),
    ];
    for (ci, (shape, units, act)) in configs.into_iter().enumerate() {
        let mut full = vec![2];
        full.extend(&shape);
        let spec = NetworkSpec::sequential(shape, vec![LayerSpec::lstm(units, act)]);
        let x = random_tensor(full, 400 + ci as u64, 1.0);
        Check::new(spec, vec![x], 20 + ci as u64).run(&format!("lstm cfg {ci}"), out);
    }
}

fn embedding_configs(out: &mut Vec<CheckResult>) {
    let configs = [(2, 3), (3, 1), (5, 4), (4, 2), (7, 5)];
    for (ci, &(classes, dim)) in configs.iter().enumerate() {
        let spec = NetworkSpec::sequential(
            vec![1],
            vec![LayerSpec::embedding(classes, dim), LayerSpec::dense(2, Activation::Tanh)],
        );
        let labels: Vec<f64> = (0..4).map(|i| ((i * 3 + ci) % classes) as f64).collect();
        let x = Tensor::new(vec![4, 1], labels).unwrap();
        Check::new(spec, vec![x], 30 + ci as u64).frozen_input(0).run(&format!("embedding cfg {ci}"), out);
    }
}

fn dropout_configs(out: &mut Vec<CheckResult>) {
    for (ci, rate) in [0.1, 0.25, 0.4, 0.5, 0.7].into_iter().enumerate() {
        let spec = NetworkSpec::sequential(
            vec![6],
            vec![LayerSpec::dense(5, Activation::Tanh), LayerSpec::dropout(rate), LayerSpec::dense(2, Activation::Linear)],
        );
        let x = random_tensor(vec![3, 6], 500 + ci as u64, 1.0);
        Check::new(spec, vec![x], 40 + ci as u64).with_dropout(77 + ci as u64).run(&format!("dropout {rate}"), out);
    }
}

fn flatten_and_reshape_configs(out: &mut Vec<CheckResult>) {
    let configs = [(vec![3, 2], vec![6]), (vec![4, 1], vec![2, 2]), (vec![2, 3], vec![3, 2]), (vec![6], vec![6, 1]), (vec![2, 4], vec![8])];
    for (ci, (shape, target)) in configs.into_iter().enumerate() {
        let mut full = vec![2];
        full.extend(&shape);
        let flat: usize = shape.iter().product();
        let mut layers = vec![LayerSpec::reshape(target), LayerSpec::Flatten];
        layers.push(LayerSpec::dense(3, Activation::Sigmoid));
        let spec = NetworkSpec::sequential(shape, layers);
        let x = random_tensor(full, 600 + ci as u64, 1.0);
        debug_assert!(flat > 0);
        Check::new(spec, vec![x], 50 + ci as u64).run(&format!("reshape cfg {ci}"), out);
    }
}

fn concat_configs(out: &mut Vec<CheckResult>) {
    let configs = [(vec![3, 1], vec![3, 1]), (vec![4, 2], vec![4, 1]), (vec![5], vec![2]), (vec![2, 3], vec![2, 3]), (vec![1], vec![4])];
    for (ci, (a, b)) in configs.into_iter().enumerate() {
        let mut g = GraphBuilder::new();
        let ia = g.input(a.clone());
        let ib = g.input(b.clone());
        let ta = g.add(LayerSpec::Flatten, &[ia]);
        let tb = g.add(LayerSpec::Flatten, &[ib]);
        // Concatenate both raw and flattened forms so the multi-axis path is exercised too.
        let raw = if a.len() == b.len() && a[..a.len() - 1] == b[..b.len() - 1] { Some(g.add(LayerSpec::Concat, &[ia, ib])) } else { None };
        let mut tail = vec![g.add(LayerSpec::Concat, &[ta, tb])];
        if let Some(r) = raw {
            tail.push(g.add(LayerSpec::Flatten, &[r]));
        }
        let joined = if tail.len() > 1 { g.add(LayerSpec::Concat, &tail) } else { tail[0] };
        g.add(LayerSpec::dense(2, Activation::Tanh), &[joined]);
        let mut sa = vec![2];
        sa.extend(&a);
        let mut sb = vec![2];
        sb.extend(&b);
        let xs = vec![random_tensor(sa, 700 + ci as u64, 1.0), random_tensor(sb, 710 + ci as u64, 1.0)];
        Check::new(g.build(), xs, 60 + ci as u64).run(&format!("concat cfg {ci}"), out);
    }
}

fn crop_configs(out: &mut Vec<CheckResult>) {
    let configs = [(4, 1, 3), (6, 2, 5), (5, 3, 1), (8, 1, 8), (7, 2, 4)];
    for (ci, &(len, ch, keep)) in configs.iter().enumerate() {
        let spec = NetworkSpec::sequential(
            vec![len, ch],
            vec![LayerSpec::Crop { len: keep }, LayerSpec::Flatten, LayerSpec::dense(2, Activation::Linear)],
        );
        let x = random_tensor(vec![2, len, ch], 800 + ci as u64, 1.0);
        Check::new(spec, vec![x], 70 + ci as u64).run(&format!("crop cfg {ci}"), out);
    }
}

fn one_hot(batch: usize, classes: usize, seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed);
    let mut data = vec![0.0; batch * classes];
    for b in 0..batch {
        data[b * classes + rng.random_range(0..classes)] = 1.0;
    }
    Tensor::new(vec![batch, classes], data).unwrap()
}

fn loss_gradients_direct(out: &mut Vec<CheckResult>) {
    for cfg in 0..5u64 {
        let (batch, width) = (1 + cfg as usize, 2 + cfg as usize);
        let pred = random_tensor(vec![batch, width], 900 + cfg, 2.0);
        let target = random_tensor(vec![batch, width], 910 + cfg, 2.0);
        let probs = Tensor::new(pred.shape().to_vec(), pred.data().iter().map(|v| 0.05 + 0.9 * (v + 2.0) / 4.0).collect()).unwrap();
        let bin_t = Tensor::new(target.shape().to_vec(), target.data().iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect()).unwrap();
        let soft_t = Tensor::new(target.shape().to_vec(), target.data().iter().map(|v| (v + 2.0) / 4.0).collect()).unwrap();
        let cases = [
            (Loss::Mse, pred.clone(), target.clone()),
            (Loss::CategoricalCe, probs.clone(), one_hot(batch, width, cfg)),
            (Loss::CategoricalCe, probs.clone(), soft_t.clone()),
            (Loss::BinaryCe, probs.clone(), bin_t),
            (Loss::BinaryCe, probs, soft_t),
        ];
        for (li, (loss, p, t)) in cases.into_iter().enumerate() {
            let g = loss.gradient(&p, &t).unwrap();
            let mut tally = Tally::default();
            for e in 0..p.len() {
                let mut plus = p.clone();
                plus.data_mut()[e] += H;
                let mut minus = p.clone();
                minus.data_mut()[e] -= H;
                let numeric = (loss.value(&plus, &t).unwrap() - loss.value(&minus, &t).unwrap()) / (2.0 * H);
                tally.add(g.data()[e], numeric, || format!("elem {e}"));
            }
            out.push(tally.finish(&format!("{loss:?} case {li} cfg {cfg}")));
        }
    }
}

fn losses_through_networks(out: &mut Vec<CheckResult>) {
    for cfg in 0..5u64 {
        let batch = 2 + cfg as usize % 3;
        let d_in = 3 + cfg as usize;
        let x = random_tensor(vec![batch, d_in], 1000 + cfg, 1.0);

        let mse = NetworkSpec::sequential(vec![d_in], vec![LayerSpec::dense(3, Activation::elu())]);
        Check::new(mse, vec![x.clone()], cfg).with_loss(Loss::Mse, random_tensor(vec![batch, 3], 1100 + cfg, 1.0)).run("mse net", out);

        let classes = 2 + cfg as usize;
        let cce = NetworkSpec::sequential(
            vec![d_in],
            vec![LayerSpec::dense(4, Activation::Relu), LayerSpec::dense(classes, Activation::Softmax)],
        );
        Check::new(cce, vec![x.clone()], cfg + 5).with_loss(Loss::CategoricalCe, one_hot(batch, classes, cfg)).run("cce net", out);

        let bce = NetworkSpec::sequential(vec![d_in], vec![LayerSpec::dense(1, Activation::Sigmoid)]);
        let t = Tensor::new(vec![batch, 1], (0..batch).map(|i| (i % 2) as f64).collect()).unwrap();
        Check::new(bce, vec![x], cfg + 9).with_loss(Loss::BinaryCe, t).run("bce net", out);
    }
}

fn estimator_shaped_stack(out: &mut Vec<CheckResult>) {
    for cfg in 0..3u64 {
        let n = 6 + cfg as usize;
        let spec = NetworkSpec::sequential(
            vec![n, 1],
            vec![
                LayerSpec::conv1d(4, 1, Padding::Valid, Activation::elu()),
                LayerSpec::max_pool1d(1),
                LayerSpec::dropout(0.5),
                LayerSpec::conv1d(3, 1, Padding::Same, Activation::Tanh),
                LayerSpec::max_pool1d(2),
                LayerSpec::Flatten,
                LayerSpec::lstm(5, Activation::Tanh),
                LayerSpec::dense(3, Activation::Softmax),
            ],
        );
        let x = random_tensor(vec![3, n, 1], 1200 + cfg, 1.0);
        let t = one_hot(3, 3, cfg);
        Check::new(spec, vec![x], 90 + cfg)
            .with_dropout(5 + cfg)
            .with_loss(Loss::CategoricalCe, t)
            .run(&format!("stack cfg {cfg}"), out);
    }
}

fn gan_shaped_graphs(out: &mut Vec<CheckResult>) {
    for cfg in 0..3u64 {
        let n = 5 + cfg as usize;
        let classes = 3;
        let w = n.div_ceil(4);

        // Discriminator: fingerprint and label joined along channels.
        let mut d = GraphBuilder::new();
        let fp = d.input(vec![n]);
        let lab = d.input(vec![1]);
        let l = d.chain(lab, vec![LayerSpec::embedding(classes, 4), LayerSpec::dense(n, Activation::Linear), LayerSpec::reshape(vec![n, 1])]);
        let f = d.add(LayerSpec::reshape(vec![n, 1]), &[fp]);
        let c = d.add(LayerSpec::Concat, &[f, l]);
        d.chain(
            c,
            vec![
                LayerSpec::conv1d(3, 3, Padding::Same, Activation::Tanh),
                LayerSpec::dropout(0.4),
                LayerSpec::Flatten,
                LayerSpec::dense(1, Activation::Sigmoid),
            ],
        );
        let fp_x = random_tensor(vec![4, n], 1300 + cfg, 1.0);
        let lab_x = Tensor::new(vec![4, 1], vec![0.0, 1.0, 2.0, 1.0]).unwrap();
        let t = Tensor::new(vec![4, 1], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        Check::new(d.build(), vec![fp_x, lab_x.clone()], 100 + cfg)
            .frozen_input(1)
            .with_dropout(3)
            .with_loss(Loss::BinaryCe, t)
            .run(&format!("discriminator cfg {cfg}"), out);

        // Generator: latent and label upsampled with strided transposed convs.
        let mut g = GraphBuilder::new();
        let z = g.input(vec![n]);
        let lab = g.input(vec![1]);
        let zl = g.chain(z, vec![LayerSpec::dense(w, Activation::Tanh), LayerSpec::reshape(vec![w, 1])]);
        let ll = g.chain(lab, vec![LayerSpec::embedding(classes, 3), LayerSpec::dense(w, Activation::Linear), LayerSpec::reshape(vec![w, 1])]);
        let c = g.add(LayerSpec::Concat, &[zl, ll]);
        let mut layers = vec![
            LayerSpec::conv1d_transpose(3, 3, 2, Padding::Same, Activation::Tanh),
            LayerSpec::conv1d_transpose(2, 3, 2, Padding::Same, Activation::Tanh),
            LayerSpec::conv1d(1, 3, Padding::Same, Activation::Sigmoid),
        ];
        if 4 * w > n {
            layers.push(LayerSpec::Crop { len: n });
        }
        layers.push(LayerSpec::Flatten);
        g.chain(c, layers);
        let z_x = random_tensor(vec![4, n], 1400 + cfg, 1.0);
        Check::new(g.build(), vec![z_x, lab_x], 110 + cfg).frozen_input(1).run(&format!("generator cfg {cfg}"), out);
    }
}
