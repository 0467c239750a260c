//! Three-layer graph convolutional network with exact reverse-mode
//! gradients.
//!
//! Each layer computes `H_k = ReLU(Â H_{k-1} W_k + b_k)` with
//! `Â = D̃^{-1/2} (A_w + I) D̃^{-1/2}`, where `A_w` carries the (possibly
//! masked) edge weights and `D̃` is the weighted in-degree of `A_w + I`.
//! Self-loops always have weight one. A node readout applies a dense layer
//! and softmax to one row of `H_3`; a graph readout sums the rows first.
//!
//! The model is a pure function of `(edge weights, features)`: there is no
//! hidden state, so substituting masked inputs is exactly an intervention on
//! those inputs.

use std::hash::{Hash, Hasher};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SparseGraph, TaskKind};

/// Hidden widths of the three graph-convolution layers.
pub const HIDDEN_DIMS: [usize; 3] = [16, 32, 16];
pub const NUM_LAYERS: usize = 3;

/// Which output the model produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    /// Class distribution of one node.
    Node(usize),
    /// Class distribution of the whole graph (sum pooling).
    Graph,
}

/// Dense affine layer `x W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// Glorot-uniform weights and biases uniform in `±1/sqrt(fan_in)`.
    ///
    /// Zero biases would make every layer rank one on constant input
    /// features (each row is a multiple of the same vector), which stalls
    /// training on the synthetic benchmarks.
    fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let weight = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit));
        let b = 1.0 / (rows.max(1) as f64).sqrt();
        let bias = Array1::from_shape_fn(cols, |_| rng.gen_range(-b..b));
        Self { weight, bias }
    }

    fn zeros_like(&self) -> Self {
        Self { weight: Array2::zeros(self.weight.raw_dim()), bias: Array1::zeros(self.bias.len()) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub task: TaskKind,
    pub classes: usize,
    pub feature_dim: usize,
    pub seed: u64,
}

/// Weights of the three convolution layers and the output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams {
    layers: [Dense; NUM_LAYERS],
    readout: Dense,
    meta: ModelMeta,
}

impl GcnParams {
    /// Randomly initialised parameters with the default hidden widths.
    pub fn init(feature_dim: usize, classes: usize, task: TaskKind, seed: u64) -> Self {
        Self::init_with_dims(feature_dim, HIDDEN_DIMS, classes, task, seed)
    }

    pub fn init_with_dims(
        feature_dim: usize,
        hidden: [usize; NUM_LAYERS],
        classes: usize,
        task: TaskKind,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = Dense::glorot(feature_dim, hidden[0], &mut rng);
        let l2 = Dense::glorot(hidden[0], hidden[1], &mut rng);
        let l3 = Dense::glorot(hidden[1], hidden[2], &mut rng);
        let readout = Dense::glorot(hidden[2], classes, &mut rng);
        Self {
            layers: [l1, l2, l3],
            readout,
            meta: ModelMeta { task, classes, feature_dim, seed },
        }
    }

    /// Assembles parameters from explicit matrices, checking the chain of
    /// shapes.
    pub fn from_parts(layers: [Dense; NUM_LAYERS], readout: Dense, meta: ModelMeta) -> Result<Self> {
        let mut width = meta.feature_dim;
        for (i, l) in layers.iter().chain(std::iter::once(&readout)).enumerate() {
            if l.weight.nrows() != width || l.bias.len() != l.weight.ncols() {
                return Err(Error::Dimension(format!(
                    "layer {i}: weight {:?}, bias {}, expected {width} input rows",
                    l.weight.dim(),
                    l.bias.len()
                )));
            }
            if l.weight.iter().chain(l.bias.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("model parameters"));
            }
            width = l.weight.ncols();
        }
        if width != meta.classes {
            return Err(Error::Dimension(format!("readout width {width} != {} classes", meta.classes)));
        }
        Ok(Self { layers, readout, meta })
    }

    pub fn input_dim(&self) -> usize {
        self.meta.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.meta.classes
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn layers(&self) -> &[Dense; NUM_LAYERS] {
        &self.layers
    }

    pub fn readout_layer(&self) -> &Dense {
        &self.readout
    }

    /// Hash of every parameter bit pattern; used to detect stale tapes.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for d in self.layers.iter().chain(std::iter::once(&self.readout)) {
            d.weight.dim().hash(&mut h);
            for x in d.weight.iter().chain(d.bias.iter()) {
                x.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Mutable flat views of every parameter tensor, in a fixed order that
    /// matches [`ParamGrads::slices`].
    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(8);
        for d in self.layers.iter_mut().chain(std::iter::once(&mut self.readout)) {
            out.push(d.weight.as_slice_mut().expect("standard layout"));
            out.push(d.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    /// Class probabilities only.
    pub fn predict(
        &self,
        graph: &SparseGraph,
        edge_weights: &[f64],
        features: ArrayView2<'_, f64>,
        readout: Readout,
    ) -> Result<Vec<f64>> {
        Ok(self.forward(graph, edge_weights, features, readout)?.0)
    }

    /// Forward pass for one explicand. `edge_weights` holds one value per
    /// logical edge.
    pub fn forward(
        &self,
        graph: &SparseGraph,
        edge_weights: &[f64],
        features: ArrayView2<'_, f64>,
        readout: Readout,
    ) -> Result<(Vec<f64>, ForwardTape)> {
        self.check_inputs(graph, edge_weights, features)?;
        if let Readout::Node(t) = readout {
            if t >= graph.num_nodes() {
                return Err(Error::NodeOutOfRange { node: t, num_nodes: graph.num_nodes() });
            }
        }
        let adj = normalize_adjacency(graph, edge_weights);
        let hidden = self.propagate::<ChaCha8Rng>(adj, features, None);
        let pooled = match readout {
            Readout::Node(t) => hidden.h3.row(t).to_owned(),
            Readout::Graph => hidden.h3.sum_axis(Axis(0)),
        };
        let logits = pooled.dot(&self.readout.weight) + &self.readout.bias;
        let probs = softmax(logits.as_slice().unwrap());
        let tape = ForwardTape {
            hidden,
            head: Head::Single { readout, pooled, probs: probs.clone() },
            fingerprint: self.fingerprint(),
        };
        Ok((probs, tape))
    }

    /// Forward pass producing logits for every node at once (training path).
    /// `dropout` applies inverted dropout after each ReLU.
    pub fn forward_all_nodes<R: Rng>(
        &self,
        graph: &SparseGraph,
        edge_weights: &[f64],
        features: ArrayView2<'_, f64>,
        dropout: Option<(f64, &mut R)>,
    ) -> Result<(Array2<f64>, ForwardTape)> {
        self.check_inputs(graph, edge_weights, features)?;
        let adj = normalize_adjacency(graph, edge_weights);
        let hidden = self.propagate(adj, features, dropout);
        let logits = hidden.h3.dot(&self.readout.weight) + &self.readout.bias;
        let tape = ForwardTape { hidden, head: Head::AllNodes, fingerprint: self.fingerprint() };
        Ok((logits, tape))
    }

    /// Graph-readout logits with optional dropout (training path).
    pub fn forward_graph_logits<R: Rng>(
        &self,
        graph: &SparseGraph,
        edge_weights: &[f64],
        features: ArrayView2<'_, f64>,
        dropout: Option<(f64, &mut R)>,
    ) -> Result<(Vec<f64>, ForwardTape)> {
        self.check_inputs(graph, edge_weights, features)?;
        let adj = normalize_adjacency(graph, edge_weights);
        let hidden = self.propagate(adj, features, dropout);
        let pooled = hidden.h3.sum_axis(Axis(0));
        let logits = pooled.dot(&self.readout.weight) + &self.readout.bias;
        let probs = softmax(logits.as_slice().unwrap());
        let tape = ForwardTape {
            hidden,
            head: Head::Single { readout: Readout::Graph, pooled, probs },
            fingerprint: self.fingerprint(),
        };
        Ok((logits.to_vec(), tape))
    }

    fn check_inputs(&self, graph: &SparseGraph, edge_weights: &[f64], features: ArrayView2<'_, f64>) -> Result<()> {
        if edge_weights.len() != graph.num_edges() {
            return Err(Error::Dimension(format!(
                "{} edge weights for {} edges",
                edge_weights.len(),
                graph.num_edges()
            )));
        }
        if features.nrows() != graph.num_nodes() || features.ncols() != self.meta.feature_dim {
            return Err(Error::Dimension(format!(
                "features {:?}, expected ({}, {})",
                features.dim(),
                graph.num_nodes(),
                self.meta.feature_dim
            )));
        }
        Ok(())
    }

    fn propagate<R: Rng>(
        &self,
        adj: NormalizedAdjacency,
        features: ArrayView2<'_, f64>,
        mut dropout: Option<(f64, &mut R)>,
    ) -> Hidden {
        let mut inputs = Vec::with_capacity(NUM_LAYERS);
        let mut propagated = Vec::with_capacity(NUM_LAYERS);
        let mut active = Vec::with_capacity(NUM_LAYERS);
        let mut h = features.to_owned();
        for layer in &self.layers {
            let p = adj.apply(&h);
            let mut z = p.dot(&layer.weight) + &layer.bias;
            // `z` becomes the local derivative of the activation (and dropout).
            let mut out = z.clone();
            match dropout.as_mut() {
                Some((rate, rng)) if *rate > 0.0 => {
                    let keep = 1.0 / (1.0 - *rate);
                    for (o, d) in out.iter_mut().zip(z.iter_mut()) {
                        let scale = if rng.gen::<f64>() < *rate { 0.0 } else { keep };
                        if *o > 0.0 {
                            *o *= scale;
                            *d = scale;
                        } else {
                            *o = 0.0;
                            *d = 0.0;
                        }
                    }
                }
                _ => {
                    for (o, d) in out.iter_mut().zip(z.iter_mut()) {
                        if *o > 0.0 {
                            *d = 1.0;
                        } else {
                            *o = 0.0;
                            *d = 0.0;
                        }
                    }
                }
            }
            inputs.push(h);
            propagated.push(p);
            active.push(z);
            h = out;
        }
        Hidden { adj, inputs, propagated, active, h3: h }
    }

    /// Gradient of a scalar of the class probabilities with respect to every
    /// logical edge weight and every feature entry.
    pub fn backward_inputs(&self, tape: &ForwardTape, upstream: &[f64]) -> Result<InputGrads> {
        let d_h3 = self.head_backward(tape, upstream, None)?;
        let (inputs, _) = self.backprop(tape, d_h3, true, false);
        Ok(inputs.expect("requested"))
    }

    /// Gradient of a scalar of the class probabilities with respect to every
    /// parameter.
    pub fn backward_params(&self, tape: &ForwardTape, upstream: &[f64]) -> Result<ParamGrads> {
        let mut grads = ParamGrads::zeros(self);
        let d_h3 = self.head_backward(tape, upstream, Some(&mut grads.readout))?;
        let (_, layers) = self.backprop(tape, d_h3, false, true);
        grads.layers = layers.expect("requested");
        Ok(grads)
    }

    /// Parameter gradients given the gradient with respect to the logits.
    /// For an all-nodes tape `d_logits` is `num_nodes x classes`; for a
    /// single readout it is `1 x classes`.
    pub fn backward_params_from_logits(&self, tape: &ForwardTape, d_logits: &Array2<f64>) -> Result<ParamGrads> {
        if tape.fingerprint != self.fingerprint() {
            return Err(Error::StaleTape);
        }
        let mut grads = ParamGrads::zeros(self);
        let d_h3 = match &tape.head {
            Head::AllNodes => {
                grads.readout.weight = standard(tape.hidden.h3.t().dot(d_logits));
                grads.readout.bias = d_logits.sum_axis(Axis(0));
                d_logits.dot(&self.readout.weight.t())
            }
            Head::Single { readout, pooled, .. } => {
                let g = d_logits.row(0);
                self.single_head_backward(*readout, pooled, g.to_owned(), tape, Some(&mut grads.readout))
            }
        };
        let (_, layers) = self.backprop(tape, d_h3, false, true);
        grads.layers = layers.expect("requested");
        Ok(grads)
    }

    fn head_backward(&self, tape: &ForwardTape, upstream: &[f64], readout_grad: Option<&mut Dense>) -> Result<Array2<f64>> {
        if tape.fingerprint != self.fingerprint() {
            return Err(Error::StaleTape);
        }
        let Head::Single { readout, pooled, probs } = &tape.head else {
            return Err(Error::Config("probability upstream needs a single-readout tape".into()));
        };
        if upstream.len() != probs.len() {
            return Err(Error::Dimension(format!("upstream has {} entries for {} classes", upstream.len(), probs.len())));
        }
        // softmax Jacobian: d logit_i = p_i (g_i - Σ_j g_j p_j)
        let dot: f64 = upstream.iter().zip(probs).map(|(g, p)| g * p).sum();
        let d_logits = Array1::from_iter(probs.iter().zip(upstream).map(|(p, g)| p * (g - dot)));
        Ok(self.single_head_backward(*readout, pooled, d_logits, tape, readout_grad))
    }

    fn single_head_backward(
        &self,
        readout: Readout,
        pooled: &Array1<f64>,
        d_logits: Array1<f64>,
        tape: &ForwardTape,
        readout_grad: Option<&mut Dense>,
    ) -> Array2<f64> {
        if let Some(rg) = readout_grad {
            let col = pooled.view().insert_axis(Axis(1));
            let row = d_logits.view().insert_axis(Axis(0));
            rg.weight = standard(col.dot(&row));
            rg.bias = d_logits.clone();
        }
        let d_pooled = self.readout.weight.dot(&d_logits);
        let mut d_h3 = Array2::zeros(tape.hidden.h3.raw_dim());
        match readout {
            Readout::Node(t) => d_h3.row_mut(t).assign(&d_pooled),
            Readout::Graph => {
                for mut row in d_h3.outer_iter_mut() {
                    row.assign(&d_pooled);
                }
            }
        }
        d_h3
    }

    fn backprop(
        &self,
        tape: &ForwardTape,
        mut d_h: Array2<f64>,
        want_inputs: bool,
        want_params: bool,
    ) -> (Option<InputGrads>, Option<[Dense; NUM_LAYERS]>) {
        let hid = &tape.hidden;
        let adj = &hid.adj;
        let mut g_arc = vec![0.0; adj.arcs.len()];
        let mut g_self = vec![0.0; adj.self_loop.len()];
        let mut layer_grads: [Dense; NUM_LAYERS] = [
            self.layers[0].zeros_like(),
            self.layers[1].zeros_like(),
            self.layers[2].zeros_like(),
        ];
        for k in (0..NUM_LAYERS).rev() {
            let d_z = &d_h * &hid.active[k];
            if want_params {
                layer_grads[k].weight = standard(hid.propagated[k].t().dot(&d_z));
                layer_grads[k].bias = d_z.sum_axis(Axis(0));
            }
            if k == 0 && !want_inputs {
                break;
            }
            let d_p = d_z.dot(&self.layers[k].weight.t());
            if want_inputs {
                let h_in = &hid.inputs[k];
                for (a, g) in adj.arcs.iter().zip(g_arc.iter_mut()) {
                    *g += d_p.row(a.dst).dot(&h_in.row(a.src));
                }
                for (v, g) in g_self.iter_mut().enumerate() {
                    *g += d_p.row(v).dot(&h_in.row(v));
                }
            }
            d_h = adj.apply_transpose(&d_p);
        }
        let inputs = want_inputs.then(|| {
            let d_edges = adj.weight_gradient(&g_arc, &g_self);
            InputGrads { edge_weights: d_edges, features: d_h }
        });
        (inputs, want_params.then_some(layer_grads))
    }
}

/// Gradients with respect to the model inputs.
#[derive(Clone, Debug)]
pub struct InputGrads {
    /// One entry per logical edge (sum over its arcs).
    pub edge_weights: Vec<f64>,
    pub features: Array2<f64>,
}

/// Gradients with respect to every parameter, shaped like [`GcnParams`].
#[derive(Clone, Debug)]
pub struct ParamGrads {
    pub layers: [Dense; NUM_LAYERS],
    pub readout: Dense,
}

impl ParamGrads {
    pub fn zeros(params: &GcnParams) -> Self {
        Self {
            layers: [
                params.layers[0].zeros_like(),
                params.layers[1].zeros_like(),
                params.layers[2].zeros_like(),
            ],
            readout: params.readout.zeros_like(),
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.layers.iter_mut().chain(std::iter::once(&mut self.readout)).zip(
            other.layers.iter().chain(std::iter::once(&other.readout)),
        ) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for d in self.layers.iter_mut().chain(std::iter::once(&mut self.readout)) {
            d.weight *= factor;
            d.bias *= factor;
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(8);
        for d in self.layers.iter().chain(std::iter::once(&self.readout)) {
            out.push(d.weight.as_slice().expect("standard layout"));
            out.push(d.bias.as_slice().expect("standard layout"));
        }
        out
    }
}

/// Cached intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTape {
    hidden: Hidden,
    head: Head,
    fingerprint: u64,
}

impl ForwardTape {
    /// Node representations after the last convolution layer.
    pub fn last_hidden(&self) -> &Array2<f64> {
        &self.hidden.h3
    }

    pub fn adjacency(&self) -> &NormalizedAdjacency {
        &self.hidden.adj
    }
}

#[derive(Clone, Debug)]
struct Hidden {
    adj: NormalizedAdjacency,
    /// `H_{k-1}` for each layer, `H_0 = X`.
    inputs: Vec<Array2<f64>>,
    /// `Â H_{k-1}`.
    propagated: Vec<Array2<f64>>,
    /// d H_k / d Z_k (ReLU gate times dropout scale).
    active: Vec<Array2<f64>>,
    h3: Array2<f64>,
}

#[derive(Clone, Debug)]
enum Head {
    Single { readout: Readout, pooled: Array1<f64>, probs: Vec<f64> },
    AllNodes,
}

#[derive(Clone, Copy, Debug)]
struct NormArc {
    src: usize,
    dst: usize,
    edge: usize,
    norm: f64,
}

/// Sparse `Â = D̃^{-1/2}(A_w + I)D̃^{-1/2}` together with the degree terms
/// needed to differentiate through it.
#[derive(Clone, Debug)]
pub struct NormalizedAdjacency {
    arcs: Vec<NormArc>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    num_edges: usize,
}

/// Normalises the weighted adjacency with unit self-loops. Degrees are at
/// least one, so this never divides by zero.
pub fn normalize_adjacency(graph: &SparseGraph, edge_weights: &[f64]) -> NormalizedAdjacency {
    let n = graph.num_nodes();
    let mut degree = vec![1.0; n];
    for a in graph.arcs() {
        degree[a.dst] += edge_weights[a.edge];
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let arcs = graph
        .arcs()
        .iter()
        .map(|a| {
            let w = edge_weights[a.edge];
            NormArc { src: a.src, dst: a.dst, edge: a.edge, norm: w * inv_sqrt[a.src] * inv_sqrt[a.dst] }
        })
        .collect();
    let self_loop = degree.iter().map(|d| 1.0 / d).collect();
    NormalizedAdjacency { arcs, self_loop, degree, num_edges: graph.num_edges() }
}

impl NormalizedAdjacency {
    /// Dense copy of `Â` (row = receiving node).
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.self_loop.len();
        let mut m = Array2::zeros((n, n));
        for (v, &s) in self.self_loop.iter().enumerate() {
            m[[v, v]] = s;
        }
        for a in &self.arcs {
            m[[a.dst, a.src]] += a.norm;
        }
        m
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// `Â H`.
    pub fn apply(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut out = h.clone();
        for (mut row, &s) in out.outer_iter_mut().zip(&self.self_loop) {
            row *= s;
        }
        for a in &self.arcs {
            if a.norm != 0.0 {
                let src = h.row(a.src);
                let mut dst = out.row_mut(a.dst);
                dst.scaled_add(a.norm, &src);
            }
        }
        out
    }

    /// `Âᵀ G`.
    pub fn apply_transpose(&self, g: &Array2<f64>) -> Array2<f64> {
        let mut out = g.clone();
        for (mut row, &s) in out.outer_iter_mut().zip(&self.self_loop) {
            row *= s;
        }
        for a in &self.arcs {
            if a.norm != 0.0 {
                let dst = g.row(a.dst);
                let mut src = out.row_mut(a.src);
                src.scaled_add(a.norm, &dst);
            }
        }
        out
    }

    /// Chain rule from `∂L/∂Â` (given per arc and per self-loop) to the
    /// logical edge weights, including the dependence of every degree on the
    /// weights entering it.
    fn weight_gradient(&self, g_arc: &[f64], g_self: &[f64]) -> Vec<f64> {
        let mut g_deg: Vec<f64> = g_self
            .iter()
            .zip(&self.degree)
            .map(|(g, d)| -g / (d * d))
            .collect();
        for (a, g) in self.arcs.iter().zip(g_arc) {
            let c = g * a.norm * -0.5;
            g_deg[a.src] += c / self.degree[a.src];
            g_deg[a.dst] += c / self.degree[a.dst];
        }
        let mut out = vec![0.0; self.num_edges];
        for (a, g) in self.arcs.iter().zip(g_arc) {
            let direct = g / (self.degree[a.src] * self.degree[a.dst]).sqrt();
            out[a.edge] += direct + g_deg[a.dst];
        }
        out
    }
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Numerically stable `log softmax(logits)[class]`.
pub fn log_softmax_at(logits: &[f64], class: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits[class] - lse
}

#[derive(Serialize, Deserialize)]
struct DenseRecord {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseRecord {
    fn from_dense(d: &Dense) -> Self {
        Self {
            rows: d.weight.nrows(),
            cols: d.weight.ncols(),
            data: d.weight.iter().copied().collect(),
            bias: d.bias.to_vec(),
        }
    }

    fn into_dense(self) -> Result<Dense> {
        let weight = Array2::from_shape_vec((self.rows, self.cols), self.data)
            .map_err(|e| Error::Format(format!("weight matrix: {e}")))?;
        Ok(Dense { weight, bias: Array1::from(self.bias) })
    }
}

/// On-disk model layout: row-major matrices with full-precision decimals.
#[derive(Serialize, Deserialize)]
struct ModelRecord {
    layers: Vec<DenseRecord>,
    readout: DenseRecord,
    meta: ModelMeta,
}

impl GcnParams {
    pub fn to_json(&self) -> Result<String> {
        let rec = ModelRecord {
            layers: self.layers.iter().map(DenseRecord::from_dense).collect(),
            readout: DenseRecord::from_dense(&self.readout),
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string_pretty(&rec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: ModelRecord = serde_json::from_str(text)?;
        if rec.layers.len() != NUM_LAYERS {
            return Err(Error::Format(format!("expected {NUM_LAYERS} layers, found {}", rec.layers.len())));
        }
        let mut it = rec.layers.into_iter();
        let layers = [
            it.next().unwrap().into_dense()?,
            it.next().unwrap().into_dense()?,
            it.next().unwrap().into_dense()?,
        ];
        Self::from_parts(layers, rec.readout.into_dense()?, rec.meta)
    }
}
