//! Benchmark datasets: synthetic motif graphs with ground-truth explanations
//! and a reader for the TU flat-file format.

mod synthetic;
mod tu;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, GraphRecord, LabelField, SparseGraph, TaskKind};

pub use synthetic::{
    generate, generate_ba_shapes, generate_tree_cycles, generate_tree_grid, SyntheticConfig, SyntheticKind,
    SYNTHETIC_FEATURE_DIM,
};
pub use tu::load_tu_dataset;

/// One graph with its labels: a single class for graph tasks, one class per
/// node for node tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledGraph {
    pub graph: SparseGraph,
    pub features: FeatureMatrix,
    pub labels: LabelField,
}

impl LabeledGraph {
    pub fn graph_label(&self) -> Option<usize> {
        match self.labels {
            LabelField::Graph(l) => Some(l),
            LabelField::Nodes(_) => None,
        }
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        match &self.labels {
            LabelField::Nodes(l) => Some(l),
            LabelField::Graph(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub num_classes: usize,
    pub task: TaskKind,
    pub graphs: Vec<LabeledGraph>,
}

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    name: String,
    num_classes: usize,
    graphs: Vec<GraphRecord>,
}

impl Dataset {
    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, |g| g.features.dim())
    }

    /// Checks that the dataset is non-empty, single-task, consistently shaped
    /// and that every label is below `num_classes`.
    pub fn validate(&self) -> Result<()> {
        if self.graphs.is_empty() {
            return Err(Error::Empty("dataset has no graphs"));
        }
        let dim = self.feature_dim();
        for (i, g) in self.graphs.iter().enumerate() {
            if g.features.dim() != dim {
                return Err(Error::Dimension(format!("graph {i} has feature dim {}, expected {dim}", g.features.dim())));
            }
            let labels: &[usize] = match (&g.labels, self.task) {
                (LabelField::Graph(l), TaskKind::Graph) => std::slice::from_ref(l),
                (LabelField::Nodes(l), TaskKind::Node) => l,
                _ => return Err(Error::Format(format!("graph {i}: label shape does not match task"))),
            };
            if let Some(l) = labels.iter().find(|&&l| l >= self.num_classes) {
                return Err(Error::Format(format!("graph {i}: label {l} >= {} classes", self.num_classes)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = DatasetRecord {
            name: self.name.clone(),
            num_classes: self.num_classes,
            graphs: self
                .graphs
                .iter()
                .map(|g| GraphRecord::from_parts(&g.graph, &g.features, g.labels.clone()))
                .collect(),
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: DatasetRecord = serde_json::from_str(text)?;
        let task = rec.graphs.first().map(|g| g.task).ok_or(Error::Empty("dataset has no graphs"))?;
        let mut graphs = Vec::with_capacity(rec.graphs.len());
        for g in &rec.graphs {
            if g.task != task {
                return Err(Error::Format("mixed graph and node tasks in one dataset".into()));
            }
            let (graph, features) = g.to_parts()?;
            graphs.push(LabeledGraph { graph, features, labels: g.label.clone() });
        }
        let ds = Dataset { name: rec.name, num_classes: rec.num_classes, task, graphs };
        ds.validate()?;
        Ok(ds)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Ground-truth motif membership of one labelled node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifTruth {
    pub node: usize,
    /// Motif edges as endpoint pairs, `u < v`.
    pub edges: Vec<[usize; 2]>,
    pub motif_nodes: Vec<usize>,
}

/// Ground-truth explanations for a synthetic benchmark.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub dataset: String,
    /// K for top-K edge accuracy (edges per motif).
    pub k_edges: usize,
    /// K for top-K node accuracy (nodes per motif).
    pub k_nodes: usize,
    pub nodes: Vec<MotifTruth>,
}

impl GroundTruth {
    pub fn get(&self, node: usize) -> Option<&MotifTruth> {
        self.nodes.binary_search_by_key(&node, |t| t.node).ok().map(|i| &self.nodes[i])
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
