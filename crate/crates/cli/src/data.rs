//! Loading inputs and rebuilding the instances an explanation refers to.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use pnsx::datasets::{Dataset, GroundTruth};
use pnsx::gcn::{GcnParams, NUM_LAYERS};
use pnsx::graph::{khop_subgraph, Instance, SubgraphMapping, Task, TaskKind};

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read(path).with_context(|| format!("loading dataset {}", path.display()))
}

pub fn load_truth(path: &Path) -> Result<GroundTruth> {
    GroundTruth::read(path).with_context(|| format!("loading ground truth {}", path.display()))
}

/// Loads a model and checks it fits the dataset.
pub fn load_model(path: &Path, dataset: &Dataset) -> Result<GcnParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let model = GcnParams::from_json(&text).with_context(|| format!("loading model {}", path.display()))?;
    let meta = model.meta();
    ensure!(meta.task == dataset.task, "model was trained for {:?} tasks but the dataset is {:?}", meta.task, dataset.task);
    ensure!(
        model.input_dim() == dataset.feature_dim() && model.num_classes() == dataset.num_classes,
        "model shape ({} features, {} classes) does not match the dataset ({} features, {} classes)",
        model.input_dim(),
        model.num_classes(),
        dataset.feature_dim(),
        dataset.num_classes
    );
    Ok(model)
}

/// Whole-graph instance for graph `id`.
pub fn graph_instance(dataset: &Dataset, model: &GcnParams, id: usize) -> Result<Instance> {
    ensure!(dataset.task == TaskKind::Graph, "graph ids select instances only in graph-classification data");
    let g = dataset.graphs.get(id).with_context(|| format!("graph {id} not in dataset ({} graphs)", dataset.graphs.len()))?;
    Ok(Instance::new(g.graph.clone(), g.features.clone(), Task::Graph { label: g.graph_label() }, model)?)
}

/// Node `node` of graph `graph` on the full graph.
pub fn full_node_instance(dataset: &Dataset, model: &GcnParams, graph: usize, node: usize) -> Result<Instance> {
    ensure!(dataset.task == TaskKind::Node, "node ids select instances only in node-classification data");
    let g = dataset.graphs.get(graph).with_context(|| format!("graph {graph} not in dataset"))?;
    let Some(labels) = g.node_labels() else { bail!("graph {graph} has no node labels") };
    ensure!(node < labels.len(), "node {node} not in graph ({} nodes)", labels.len());
    Ok(Instance::new(g.graph.clone(), g.features.clone(), Task::Node { target: node, label: Some(labels[node]) }, model)?)
}

/// Receptive field of node `node`, the instance a node explanation refers to.
pub fn node_instance(dataset: &Dataset, model: &GcnParams, graph: usize, node: usize) -> Result<(Instance, SubgraphMapping)> {
    let full = full_node_instance(dataset, model, graph, node)?;
    Ok(khop_subgraph(&full, node, NUM_LAYERS, model)?)
}
