//! Explanation files (JSON) and subgraph drawings (DOT).
//!
//! A record names its masked edges by endpoint pairs and its masked nodes by
//! id, both in the numbering of the full input graph, so masks produced by
//! other tools can be scored by the same code.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{Explanation, NodeExplanation};
use crate::graph::{Instance, MaskPair};

/// Which prediction a record explains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceId {
    pub graph: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub instance_id: InstanceId,
    /// Free-form for imported masks.
    #[serde(default)]
    pub objective: String,
    #[serde(default)]
    pub seed: u64,
    /// Endpoints of each masked edge.
    pub edges: Vec<[usize; 2]>,
    pub edge_mask: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_mask: Option<Vec<f64>>,
    #[serde(default)]
    pub extracted_edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub extracted_nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pns_lb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pn_lb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ps_lb: Option<f64>,
}

impl ExplanationRecord {
    /// Record for an explanation of `instance`, whose ids are translated to
    /// the full graph by `node_ids[local]`.
    fn build(id: InstanceId, instance: &Instance, exp: &Explanation, seed: u64, node_ids: &dyn Fn(usize) -> usize) -> Self {
        let g = instance.graph();
        let pair = |e: usize| {
            let (u, v) = g.edges()[e];
            [node_ids(u), node_ids(v)]
        };
        Self {
            instance_id: id,
            objective: exp.objective.name().to_string(),
            seed,
            edges: (0..g.num_edges()).map(pair).collect(),
            edge_mask: exp.edge_mask.clone(),
            nodes: exp.node_mask.as_ref().map(|_| (0..g.num_nodes()).map(node_ids).collect()),
            node_mask: exp.node_mask.clone(),
            extracted_edges: exp.edges.iter().map(|&e| pair(e)).collect(),
            extracted_nodes: exp.nodes.iter().map(|&v| node_ids(v)).collect(),
            pns_lb: Some(exp.pns_lb),
            pn_lb: Some(exp.pn_lb),
            ps_lb: Some(exp.ps_lb),
        }
    }

    pub fn from_graph(graph: usize, instance: &Instance, exp: &Explanation, seed: u64) -> Self {
        Self::build(InstanceId { graph, node: None }, instance, exp, seed, &|v| v)
    }

    pub fn from_node(graph: usize, ne: &NodeExplanation, seed: u64) -> Self {
        let node = ne.mapping.nodes[ne.mapping.center];
        Self::build(InstanceId { graph, node: Some(node) }, &ne.local, &ne.explanation, seed, &|v| ne.mapping.nodes[v])
    }

    /// Masks aligned with `instance`, whose local node `v` is node
    /// `node_ids[v]` of the full graph. Every edge of the instance must be
    /// covered by the record; extra record entries are an error too.
    pub fn masks_for(&self, instance: &Instance, node_ids: &[usize]) -> Result<MaskPair> {
        let g = instance.graph();
        if self.edges.len() != self.edge_mask.len() {
            return Err(Error::Format(format!("{} edges but {} mask values", self.edges.len(), self.edge_mask.len())));
        }
        let local = |v: usize| -> Result<usize> {
            node_ids
                .iter()
                .position(|&x| x == v)
                .ok_or_else(|| Error::Format(format!("node {v} is not part of the explained instance")))
        };
        let mut edge = vec![f64::NAN; g.num_edges()];
        for (&[u, v], &m) in self.edges.iter().zip(&self.edge_mask) {
            let e = g
                .edge_id(local(u)?, local(v)?)
                .ok_or_else(|| Error::Format(format!("edge ({u}, {v}) is not part of the explained instance")))?;
            if !edge[e].is_nan() {
                return Err(Error::Format(format!("edge ({u}, {v}) listed twice")));
            }
            edge[e] = m;
        }
        if let Some(e) = edge.iter().position(|m| m.is_nan()) {
            let (u, v) = g.edges()[e];
            return Err(Error::Format(format!("no mask value for edge ({}, {})", node_ids[u], node_ids[v])));
        }
        let node = match (&self.nodes, &self.node_mask) {
            (Some(ids), Some(mask)) => {
                if ids.len() != mask.len() || ids.len() != g.num_nodes() {
                    return Err(Error::Format(format!("node mask covers {} of {} nodes", ids.len(), g.num_nodes())));
                }
                let mut out = vec![f64::NAN; g.num_nodes()];
                for (&v, &m) in ids.iter().zip(mask) {
                    out[local(v)?] = m;
                }
                if out.iter().any(|m| m.is_nan()) {
                    return Err(Error::Format("node mask has duplicate ids".into()));
                }
                Some(out)
            }
            (None, None) => None,
            _ => return Err(Error::Format("nodes and node_mask must be given together".into())),
        };
        let masks = MaskPair { edge, node };
        masks.validate(g)?;
        Ok(masks)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// File stem used when writing a directory of records.
    pub fn file_stem(&self) -> String {
        match self.instance_id.node {
            Some(n) => format!("g{}_n{}_{}_s{}", self.instance_id.graph, n, self.objective, self.seed),
            None => format!("g{}_{}_s{}", self.instance_id.graph, self.objective, self.seed),
        }
    }
}

/// Graphviz drawing of a record's subgraph. Extracted edges and nodes are
/// highlighted, the explained node is drawn as a double circle, and every
/// edge is labelled with its mask value.
pub fn to_dot(record: &ExplanationRecord) -> String {
    let mut nodes: Vec<usize> = record.edges.iter().flatten().copied().chain(record.nodes.iter().flatten().copied()).collect();
    nodes.extend(record.instance_id.node);
    nodes.sort_unstable();
    nodes.dedup();
    let picked_edge = |u: usize, v: usize| record.extracted_edges.iter().any(|&[a, b]| (a, b) == (u, v) || (a, b) == (v, u));
    let mut out = String::new();
    let _ = writeln!(out, "graph explanation {{");
    let _ = writeln!(out, "  node [shape=circle, style=filled, fillcolor=white];");
    for v in nodes {
        let mut attrs = Vec::new();
        if record.extracted_nodes.contains(&v) {
            attrs.push("fillcolor=orange".to_string());
        }
        if record.instance_id.node == Some(v) {
            attrs.push("shape=doublecircle".to_string());
        }
        let _ = writeln!(out, "  {v} [{}];", attrs.join(", "));
    }
    for (&[u, v], m) in record.edges.iter().zip(&record.edge_mask) {
        let style = if picked_edge(u, v) { ", color=red, penwidth=3" } else { ", color=gray" };
        let _ = writeln!(out, "  {u} -- {v} [label=\"{m:.2}\"{style}];");
    }
    out.push_str("}\n");
    out
}
