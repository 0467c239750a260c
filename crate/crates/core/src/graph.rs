//! Graph containers, node features, explanation masks and receptive-field
//! extraction.
//!
//! Undirected graphs keep one *logical* edge per unordered pair `(u, v)` with
//! `u < v`, sorted lexicographically. Message passing runs over *arcs*: each
//! undirected logical edge expands into the two arcs `u -> v` and `v -> u`,
//! both pointing back at the same logical index, so one mask entry drives
//! both directions.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{GcnParams, Readout};

/// A directed message-passing arc derived from a logical edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arc {
    pub src: usize,
    pub dst: usize,
    /// Index of the logical edge this arc belongs to.
    pub edge: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseGraph {
    num_nodes: usize,
    directed: bool,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    arcs: Vec<Arc>,
}

impl SparseGraph {
    /// Builds an undirected graph. Pairs are canonicalised to `u < v`, sorted
    /// and de-duplicated, so `(1, 0)` and `(0, 1)` name the same edge.
    pub fn undirected<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut canon = Vec::new();
        for (u, v) in edges {
            check_pair(num_nodes, u, v)?;
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self::from_canonical(num_nodes, false, canon))
    }

    /// Builds a directed graph; each pair is one arc `src -> dst`.
    pub fn directed<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut canon = Vec::new();
        for (u, v) in edges {
            check_pair(num_nodes, u, v)?;
            canon.push((u, v));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self::from_canonical(num_nodes, true, canon))
    }

    fn from_canonical(num_nodes: usize, directed: bool, edges: Vec<(usize, usize)>) -> Self {
        let mut arcs = Vec::with_capacity(if directed { edges.len() } else { 2 * edges.len() });
        for (i, &(u, v)) in edges.iter().enumerate() {
            arcs.push(Arc { src: u, dst: v, edge: i });
            if !directed {
                arcs.push(Arc { src: v, dst: u, edge: i });
            }
        }
        let weights = vec![1.0; edges.len()];
        Self { num_nodes, directed, edges, weights, arcs }
    }

    /// Replaces the per-edge weights. Every weight must lie in `[0, 1]`.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidGraph(format!("edge weight {w} outside [0, 1]")));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of logical edges (the length of an edge mask).
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Logical index of the edge joining `u` and `v`, if present.
    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        let key = if self.directed { (u, v) } else { (u.min(v), u.max(v)) };
        self.edges.binary_search(&key).ok()
    }

    /// Broadcasts logical-edge values onto arcs.
    pub fn arc_values(&self, logical: &[f64]) -> Vec<f64> {
        self.arcs.iter().map(|a| logical[a.edge]).collect()
    }

    /// For each node, the nodes it receives messages from.
    pub fn in_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for a in &self.arcs {
            adj[a.dst].push(a.src);
        }
        adj
    }

    /// Hop distance (along message direction, towards `center`) of every
    /// node within `k` hops; `None` beyond.
    pub fn hops_to(&self, center: usize, k: usize) -> Result<Vec<Option<usize>>> {
        if center >= self.num_nodes {
            return Err(Error::NodeOutOfRange { node: center, num_nodes: self.num_nodes });
        }
        let adj = self.in_neighbors();
        let mut dist = vec![None; self.num_nodes];
        dist[center] = Some(0);
        let mut queue = VecDeque::from([center]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            if d == k {
                continue;
            }
            for &u in &adj[v] {
                if dist[u].is_none() {
                    dist[u] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        Ok(dist)
    }

    /// Computation subgraph of `center` for a `k`-layer GCN.
    ///
    /// Keeps every node within `k` hops together with *all* arcs entering
    /// those nodes (and the boundary nodes those arcs come from). Symmetric
    /// normalisation reads the degree of every node inside the receptive
    /// field, so the plain induced subgraph would perturb the output.
    pub fn khop(&self, center: usize, k: usize) -> Result<(SparseGraph, SubgraphMapping)> {
        let dist = self.hops_to(center, k)?;
        let mut keep_node = vec![false; self.num_nodes];
        let mut keep_edges = Vec::new();
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            let inside = if self.directed {
                dist[v].is_some()
            } else {
                dist[u].is_some() || dist[v].is_some()
            };
            if inside {
                keep_edges.push(i);
                keep_node[u] = true;
                keep_node[v] = true;
            }
        }
        keep_node[center] = true;
        let nodes: Vec<usize> = (0..self.num_nodes).filter(|&v| keep_node[v]).collect();
        let mut local = vec![usize::MAX; self.num_nodes];
        for (i, &g) in nodes.iter().enumerate() {
            local[g] = i;
        }
        // Both graphs keep edges sorted by endpoint pair and the relabelling
        // is monotone, so the kept edges stay in canonical order.
        let edges: Vec<(usize, usize)> = keep_edges
            .iter()
            .map(|&i| {
                let (u, v) = self.edges[i];
                (local[u], local[v])
            })
            .collect();
        let weights = keep_edges.iter().map(|&i| self.weights[i]).collect();
        let mut sub = Self::from_canonical(nodes.len(), self.directed, edges);
        sub.weights = weights;
        let mapping = SubgraphMapping { center: local[center], nodes, edges: keep_edges };
        Ok((sub, mapping))
    }
}

fn check_pair(num_nodes: usize, u: usize, v: usize) -> Result<()> {
    for node in [u, v] {
        if node >= num_nodes {
            return Err(Error::NodeOutOfRange { node, num_nodes });
        }
    }
    if u == v {
        return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
    }
    Ok(())
}

/// Local-to-original id translation for an extracted subgraph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgraphMapping {
    /// Local id of the center node.
    pub center: usize,
    /// `nodes[local] = original node id`.
    pub nodes: Vec<usize>,
    /// `edges[local] = original logical edge id`.
    pub edges: Vec<usize>,
}

impl SubgraphMapping {
    pub fn local_node(&self, original: usize) -> Option<usize> {
        self.nodes.binary_search(&original).ok()
    }

    pub fn local_edge(&self, original: usize) -> Option<usize> {
        self.edges.binary_search(&original).ok()
    }
}

/// Node feature matrix, one row per node.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self(data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("ragged feature rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), dim), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(data)
    }

    /// `num_nodes x dim` matrix filled with `value`.
    pub fn constant(num_nodes: usize, dim: usize, value: f64) -> Self {
        Self(Array2::from_elem((num_nodes, dim), value))
    }

    pub fn one_hot(labels: &[usize], dim: usize) -> Result<Self> {
        let mut data = Array2::zeros((labels.len(), dim));
        for (i, &l) in labels.iter().enumerate() {
            if l >= dim {
                return Err(Error::Dimension(format!("label {l} >= one-hot width {dim}")));
            }
            data[[i, l]] = 1.0;
        }
        Ok(Self(data))
    }

    pub fn num_nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    /// Copy of the rows selected by `nodes`, in order.
    pub fn select_rows(&self, nodes: &[usize]) -> Self {
        Self(self.0.select(ndarray::Axis(0), nodes))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0.outer_iter().map(|r| r.to_vec()).collect()
    }
}

/// What is being explained: a whole-graph prediction or one node's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Graph { label: Option<usize> },
    Node { target: usize, label: Option<usize> },
}

impl Task {
    pub fn readout(&self) -> Readout {
        match *self {
            Task::Graph { .. } => Readout::Graph,
            Task::Node { target, .. } => Readout::Node(target),
        }
    }

    pub fn label(&self) -> Option<usize> {
        match *self {
            Task::Graph { label } | Task::Node { label, .. } => label,
        }
    }
}

/// One explicand: graph, features, task and the frozen model's prediction.
#[derive(Clone, Debug)]
pub struct Instance {
    graph: SparseGraph,
    features: FeatureMatrix,
    task: Task,
    predicted: usize,
    probs: Vec<f64>,
}

impl Instance {
    /// Validates shapes and records the model's prediction on the unmasked
    /// inputs.
    pub fn new(graph: SparseGraph, features: FeatureMatrix, task: Task, model: &GcnParams) -> Result<Self> {
        if features.num_nodes() != graph.num_nodes() {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} nodes",
                features.num_nodes(),
                graph.num_nodes()
            )));
        }
        if features.dim() != model.input_dim() {
            return Err(Error::Dimension(format!(
                "feature dim {} but model expects {}",
                features.dim(),
                model.input_dim()
            )));
        }
        if let Task::Node { target, .. } = task {
            if target >= graph.num_nodes() {
                return Err(Error::NodeOutOfRange { node: target, num_nodes: graph.num_nodes() });
            }
        }
        if let Some(label) = task.label() {
            if label >= model.num_classes() {
                return Err(Error::Dimension(format!(
                    "label {label} but model has {} classes",
                    model.num_classes()
                )));
            }
        }
        let probs = model.predict(&graph, graph.weights(), features.view(), task.readout())?;
        let predicted = argmax(&probs);
        Ok(Self { graph, features, task, predicted, probs })
    }

    pub fn graph(&self) -> &SparseGraph {
        &self.graph
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn readout(&self) -> Readout {
        self.task.readout()
    }

    /// The model's predicted class ŷ on the unmasked instance.
    pub fn predicted(&self) -> usize {
        self.predicted
    }

    /// Class probabilities on the unmasked instance.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Extracts the computation subgraph around `center` and rebuilds it as a
/// node-classification instance targeting the center.
pub fn khop_subgraph(
    instance: &Instance,
    center: usize,
    k: usize,
    model: &GcnParams,
) -> Result<(Instance, SubgraphMapping)> {
    let Task::Node { target, label } = instance.task else {
        return Err(Error::Config("k-hop extraction needs a node-classification instance".into()));
    };
    if k == 0 {
        return Err(Error::Config("hop count must be at least 1".into()));
    }
    let (graph, mapping) = instance.graph.khop(center, k)?;
    let features = instance.features.select_rows(&mapping.nodes);
    let label = if center == target { label } else { None };
    let task = Task::Node { target: mapping.center, label };
    let sub = Instance::new(graph, features, task, model)?;
    Ok((sub, mapping))
}

/// Continuous explanation masks with entries in `[0, 1]`.
///
/// `node` is `None` for edge-only explanations: the feature channel is then
/// not part of the explanation and is never intervened on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskPair {
    pub edge: Vec<f64>,
    pub node: Option<Vec<f64>>,
}

impl MaskPair {
    pub fn ones(graph: &SparseGraph, with_nodes: bool) -> Self {
        Self {
            edge: vec![1.0; graph.num_edges()],
            node: with_nodes.then(|| vec![1.0; graph.num_nodes()]),
        }
    }

    pub fn validate(&self, graph: &SparseGraph) -> Result<()> {
        if self.edge.len() != graph.num_edges() {
            return Err(Error::Dimension(format!(
                "edge mask has {} entries for {} edges",
                self.edge.len(),
                graph.num_edges()
            )));
        }
        if let Some(node) = &self.node {
            if node.len() != graph.num_nodes() {
                return Err(Error::Dimension(format!(
                    "node mask has {} entries for {} nodes",
                    node.len(),
                    graph.num_nodes()
                )));
            }
        }
        let all = self.edge.iter().chain(self.node.iter().flatten());
        if let Some(m) = all.clone().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::Config(format!("mask entry {m} outside [0, 1]")));
        }
        Ok(())
    }

    /// Thresholds every entry: `> t` becomes 1, everything else 0.
    pub fn binarize(&self, t: f64) -> Self {
        let bin = |v: &Vec<f64>| v.iter().map(|&m| if m > t { 1.0 } else { 0.0 }).collect();
        Self { edge: bin(&self.edge), node: self.node.as_ref().map(bin) }
    }

    /// Element-wise `1 - m`.
    pub fn complement(&self) -> Self {
        let flip = |v: &Vec<f64>| v.iter().map(|m| 1.0 - m).collect();
        Self { edge: flip(&self.edge), node: self.node.as_ref().map(flip) }
    }
}

/// Applies the masks: logical edge weights `E ⊙ M_e` and features with row
/// `v` scaled by `M_f[v]`. The instance is left untouched.
pub fn apply_masks(instance: &Instance, masks: &MaskPair) -> Result<(Vec<f64>, FeatureMatrix)> {
    masks.validate(&instance.graph)?;
    let weights = instance
        .graph
        .weights()
        .iter()
        .zip(&masks.edge)
        .map(|(w, m)| w * m)
        .collect();
    let mut features = instance.features.0.clone();
    if let Some(node) = &masks.node {
        for (mut row, &m) in features.outer_iter_mut().zip(node) {
            row *= m;
        }
    }
    Ok((weights, FeatureMatrix(features)))
}

/// JSON form of one graph.
///
/// `label` is a single class id for graph tasks and one id per node for
/// node tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub num_nodes: usize,
    #[serde(default)]
    pub directed: bool,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_weights: Option<Vec<f64>>,
    pub features: Vec<Vec<f64>>,
    pub task: TaskKind,
    pub label: LabelField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Graph,
    Node,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelField {
    Graph(usize),
    Nodes(Vec<usize>),
}

impl GraphRecord {
    pub fn from_parts(graph: &SparseGraph, features: &FeatureMatrix, label: LabelField) -> Self {
        let task = match label {
            LabelField::Graph(_) => TaskKind::Graph,
            LabelField::Nodes(_) => TaskKind::Node,
        };
        let weighted = graph.weights().iter().any(|&w| w != 1.0);
        Self {
            num_nodes: graph.num_nodes(),
            directed: graph.is_directed(),
            edges: graph.edges().iter().map(|&(u, v)| [u, v]).collect(),
            edge_weights: weighted.then(|| graph.weights().to_vec()),
            features: features.rows(),
            task,
            label,
        }
    }

    pub fn to_parts(&self) -> Result<(SparseGraph, FeatureMatrix)> {
        let pairs = self.edges.iter().map(|&[u, v]| (u, v));
        let mut graph = if self.directed {
            SparseGraph::directed(self.num_nodes, pairs)?
        } else {
            SparseGraph::undirected(self.num_nodes, pairs)?
        };
        if let Some(w) = &self.edge_weights {
            if w.len() != self.edges.len() || graph.num_edges() != self.edges.len() {
                return Err(Error::Format("edge_weights must align with unique edges".into()));
            }
            // Weights were written in canonical order; re-key defensively by pair.
            let mut aligned = vec![1.0; graph.num_edges()];
            for (&[u, v], &wt) in self.edges.iter().zip(w) {
                aligned[graph.edge_id(u, v).unwrap()] = wt;
            }
            graph = graph.with_weights(aligned)?;
        }
        let features = FeatureMatrix::from_rows(&self.features)?;
        if features.num_nodes() != graph.num_nodes() {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} nodes",
                features.num_nodes(),
                graph.num_nodes()
            )));
        }
        match (&self.task, &self.label) {
            (TaskKind::Node, LabelField::Nodes(l)) if l.len() != graph.num_nodes() => {
                return Err(Error::Format("node label count differs from node count".into()))
            }
            (TaskKind::Node, LabelField::Graph(_)) | (TaskKind::Graph, LabelField::Nodes(_)) => {
                return Err(Error::Format("label shape does not match task".into()))
            }
            _ => {}
        }
        Ok((graph, features))
    }
}
