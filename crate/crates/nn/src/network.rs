//! Layer graphs: construction, inference, traced forward and backward passes.

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::layers::{Cache, Layer, LayerSpec};
use crate::tensor::Tensor;
use crate::{seeded_rng, SeedRng};

/// One layer and the values it consumes.
///
/// Value indices count the network inputs first, then node outputs in order:
/// node `i` produces value `num_inputs + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub layer: LayerSpec,
    pub inputs: Vec<usize>,
}

/// Serializable description of a network. The last node is the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Per-sample shapes of the network inputs.
    pub inputs: Vec<Vec<usize>>,
    pub nodes: Vec<NodeSpec>,
}

impl NetworkSpec {
    /// A chain of layers over a single input.
    pub fn sequential(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Self {
        let nodes = layers
            .into_iter()
            .enumerate()
            .map(|(i, layer)| NodeSpec { layer, inputs: vec![i] })
            .collect();
        NetworkSpec { inputs: vec![input_shape], nodes }
    }
}

/// Incremental construction of a [`NetworkSpec`] with branches.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    inputs: Vec<Vec<usize>>,
    nodes: Vec<NodeSpec>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declare an input. All inputs must be declared before any node.
    pub fn input(&mut self, shape: Vec<usize>) -> usize {
        assert!(self.nodes.is_empty(), "inputs must be declared before nodes");
        self.inputs.push(shape);
        self.inputs.len() - 1
    }

    pub fn add(&mut self, layer: LayerSpec, inputs: &[usize]) -> usize {
        self.nodes.push(NodeSpec { layer, inputs: inputs.to_vec() });
        self.inputs.len() + self.nodes.len() - 1
    }

    /// Chain `layers` after value `from`, returning the last value index.
    pub fn chain(&mut self, from: usize, layers: Vec<LayerSpec>) -> usize {
        layers.into_iter().fold(from, |prev, layer| self.add(layer, &[prev]))
    }

    pub fn build(self) -> NetworkSpec {
        NetworkSpec { inputs: self.inputs, nodes: self.nodes }
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    params: Vec<Vec<Tensor>>,
    seed: u64,
}

/// Node outputs and layer caches from a forward pass, consumed by `backward`.
#[derive(Clone, Debug)]
pub struct Trace {
    outputs: Vec<Tensor>,
    caches: Vec<Cache>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.outputs.last().expect("networks have at least one node")
    }

    pub fn into_output(mut self) -> Tensor {
        self.outputs.pop().expect("networks have at least one node")
    }

    /// Index of the first node whose output contains a non-finite value.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.outputs.iter().position(|t| !t.all_finite())
    }
}

/// Gradients of a scalar loss w.r.t. every parameter and every input.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub params: Vec<Vec<Tensor>>,
    /// `None` for inputs with no gradient path (embedding indices).
    pub inputs: Vec<Option<Tensor>>,
}

impl Network {
    /// Resolve shapes and initialize parameters from `seed`.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        if spec.nodes.is_empty() {
            return Err(NnError::spec(None, "network has no nodes"));
        }
        if spec.inputs.is_empty() {
            return Err(NnError::spec(None, "network has no inputs"));
        }
        let n_in = spec.inputs.len();
        let mut shapes: Vec<Vec<usize>> = spec.inputs.clone();
        let mut layers = Vec::with_capacity(spec.nodes.len());
        for (i, node) in spec.nodes.iter().enumerate() {
            if node.inputs.is_empty() {
                return Err(NnError::spec(i, "node has no inputs"));
            }
            let mut in_shapes = Vec::with_capacity(node.inputs.len());
            for &v in &node.inputs {
                if v >= n_in + i {
                    return Err(NnError::spec(i, format!("input value {v} is not defined before this node")));
                }
                in_shapes.push(shapes[v].clone());
            }
            let layer = Layer::build(&node.layer, in_shapes).map_err(|e| e.at_layer(i))?;
            shapes.push(layer.out_shape.clone());
            layers.push(layer);
        }
        let mut rng = seeded_rng(seed);
        let params = layers.iter().map(|l| l.init_params(&mut rng)).collect();
        Ok(Network { spec, layers, params, seed })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_shapes(&self) -> &[Vec<usize>] {
        &self.spec.inputs
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.layers.last().unwrap().out_shape
    }

    pub fn params(&self) -> &[Vec<Tensor>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<Tensor>] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<Vec<Tensor>>) -> Result<()> {
        check_same_shapes(&self.params, &params)?;
        self.params = params;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(|t| t.len()).sum()
    }

    pub fn param_shapes(&self) -> Vec<Vec<Vec<usize>>> {
        self.params.iter().map(|ps| ps.iter().map(|t| t.shape().to_vec()).collect()).collect()
    }

    fn check_inputs(&self, inputs: &[&Tensor]) -> Result<usize> {
        if inputs.len() != self.spec.inputs.len() {
            return Err(NnError::shape(
                None,
                format!("expected {} input tensor(s), got {}", self.spec.inputs.len(), inputs.len()),
            ));
        }
        let batch = inputs[0].batch();
        for (i, (t, want)) in inputs.iter().zip(&self.spec.inputs).enumerate() {
            if t.shape().is_empty() || t.sample_shape() != want.as_slice() || t.batch() != batch {
                return Err(NnError::shape(
                    None,
                    format!("input {i} has shape {:?}, expected [{batch}] + {want:?}", t.shape()),
                ));
            }
        }
        if batch == 0 {
            return Err(NnError::shape(None, "empty batch"));
        }
        Ok(batch)
    }

    fn run(&self, inputs: &[&Tensor], mut rng: Option<&mut SeedRng>, keep_cache: bool) -> Result<Trace> {
        self.check_inputs(inputs)?;
        let n_in = inputs.len();
        let mut outputs: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, (layer, node)) in self.layers.iter().zip(&self.spec.nodes).enumerate() {
            let args: Vec<&Tensor> =
                node.inputs.iter().map(|&v| if v < n_in { inputs[v] } else { &outputs[v - n_in] }).collect();
            let (out, cache) = layer
                .forward(&self.params[i], &args, rng.as_deref_mut(), keep_cache)
                .map_err(|e| e.at_layer(i))?;
            debug_assert!(out.all_finite() || args.iter().any(|a| !a.all_finite()), "layer {i} produced non-finite output");
            outputs.push(out);
            caches.push(cache);
        }
        Ok(Trace { outputs, caches })
    }

    /// Forward pass. Dropout is active only when an RNG is supplied.
    pub fn forward(&self, inputs: &[&Tensor], rng: Option<&mut SeedRng>) -> Result<Tensor> {
        Ok(self.run(inputs, rng, false)?.into_output())
    }

    /// Inference-mode forward pass.
    pub fn predict(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        self.forward(inputs, None)
    }

    /// Inference over large inputs in chunks of `chunk` rows.
    pub fn predict_chunked(&self, inputs: &[&Tensor], chunk: usize) -> Result<Tensor> {
        let batch = self.check_inputs(inputs)?;
        let chunk = chunk.max(1);
        if batch <= chunk {
            return self.predict(inputs);
        }
        let mut parts = Vec::new();
        for start in (0..batch).step_by(chunk) {
            let end = (start + chunk).min(batch);
            let sliced: Vec<Tensor> = inputs.iter().map(|t| t.slice_rows(start, end)).collect();
            let refs: Vec<&Tensor> = sliced.iter().collect();
            parts.push(self.predict(&refs)?);
        }
        Tensor::concat_rows(&parts.iter().collect::<Vec<_>>())
    }

    /// Forward pass that records what `backward` needs.
    pub fn forward_trace(&self, inputs: &[&Tensor], rng: Option<&mut SeedRng>) -> Result<Trace> {
        self.run(inputs, rng, true)
    }

    /// Backpropagate `grad_out` (d loss / d output) through a recorded trace.
    pub fn backward(&self, inputs: &[&Tensor], trace: &Trace, grad_out: &Tensor) -> Result<Gradients> {
        self.check_inputs(inputs)?;
        if grad_out.shape() != trace.output().shape() {
            return Err(NnError::shape(
                self.layers.len() - 1,
                format!("output gradient {:?} does not match output {:?}", grad_out.shape(), trace.output().shape()),
            ));
        }
        let n_in = inputs.len();
        let mut value_grads: Vec<Option<Tensor>> = vec![None; n_in + self.layers.len()];
        value_grads[n_in + self.layers.len() - 1] = Some(grad_out.clone());
        let mut param_grads: Vec<Vec<Tensor>> =
            self.params.iter().map(|ps| ps.iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect()).collect();

        for i in (0..self.layers.len()).rev() {
            let Some(g) = value_grads[n_in + i].take() else {
                continue;
            };
            let node = &self.spec.nodes[i];
            let args: Vec<&Tensor> =
                node.inputs.iter().map(|&v| if v < n_in { inputs[v] } else { &trace.outputs[v - n_in] }).collect();
            let (dins, dparams) = self.layers[i]
                .backward(&self.params[i], &args, &trace.outputs[i], &trace.caches[i], &g)
                .map_err(|e| e.at_layer(i))?;
            debug_assert!(dparams.iter().all(|t| t.all_finite()), "layer {i} produced non-finite gradients");
            param_grads[i] = dparams;
            for (&v, din) in node.inputs.iter().zip(dins) {
                let Some(din) = din else { continue };
                match &mut value_grads[v] {
                    Some(acc) => acc.add_assign(&din),
                    slot => *slot = Some(din),
                }
            }
        }
        let inputs = value_grads.into_iter().take(n_in).collect();
        Ok(Gradients { params: param_grads, inputs })
    }
}

pub(crate) fn check_same_shapes(a: &[Vec<Tensor>], b: &[Vec<Tensor>]) -> Result<()> {
    if a.len() != b.len() {
        return Err(NnError::shape(None, format!("expected {} parameter groups, got {}", a.len(), b.len())));
    }
    for (i, (pa, pb)) in a.iter().zip(b).enumerate() {
        if pa.len() != pb.len() || pa.iter().zip(pb).any(|(x, y)| x.shape() != y.shape()) {
            return Err(NnError::shape(i, "parameter shapes differ"));
        }
    }
    Ok(())
}
