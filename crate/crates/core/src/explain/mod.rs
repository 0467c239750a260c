//! Mask optimisation for PN / PS / PNS explanations of a frozen model.

mod config;
pub mod objective;
pub mod oracle;
pub mod scm;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{EntropyReduction, ExplainConfig, Extraction, Objective};
pub use objective::{binary_entropy, evaluate, overall_loss, sigmoid, Evaluation, MaskParams, Noise};
pub use oracle::{oracle_pns_lb, OracleTable, ORACLE_MAX};
pub use scm::{toy_scm_pns, ScmPns, ScmState};

use crate::error::{Error, Result};
use crate::gcn::{GcnParams, NUM_LAYERS};
use crate::graph::{khop_subgraph, Instance, MaskPair, SubgraphMapping};
use crate::optim::Adam;

/// Result of one mask optimisation. Ids refer to the explained instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Explanation {
    pub objective: Objective,
    pub edge_mask: Vec<f64>,
    pub node_mask: Option<Vec<f64>>,
    /// Extracted edge ids, ascending.
    pub edges: Vec<usize>,
    /// Extracted node ids, ascending. For edge-only objectives these are the
    /// endpoints of the extracted edges.
    pub nodes: Vec<usize>,
    /// `max(0, PN + PS - 1)` of the final masks.
    pub pns_lb: f64,
    pub pn_lb: f64,
    pub ps_lb: f64,
    /// Unclamped objective before the first and after the last step.
    pub initial_objective: f64,
    pub final_objective: f64,
    pub loss_history: Vec<f64>,
}

impl Explanation {
    pub fn masks(&self) -> MaskPair {
        MaskPair { edge: self.edge_mask.clone(), node: self.node_mask.clone() }
    }
}

/// Salt separating the reporting noise stream from the optimisation stream.
const REPORT_STREAM: u64 = 0x5eed_4e70;

/// Optimises mask logits with Adam on the regularised loss, one fresh noise
/// draw per epoch.
pub fn explain(model: &GcnParams, instance: &Instance, cfg: &ExplainConfig) -> Result<Explanation> {
    cfg.validate()?;
    let m = instance.graph().num_edges();
    if m == 0 {
        return Err(Error::Empty("instance has no edges to explain"));
    }
    let n = instance.graph().num_nodes();
    let with_f = cfg.objective.uses_features();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = MaskParams::init(m, with_f.then_some(n), cfg.init_scale, &mut rng);
    let mut adam = Adam::new(cfg.learning_rate, 0.0);
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut initial_objective = None;
    for epoch in 0..cfg.epochs {
        let eval = overall_loss(model, instance, &params, cfg, &mut rng)?;
        if !eval.loss.is_finite() || eval.grad_edge.iter().any(|g| !g.is_finite()) {
            return Err(Error::ExplainDiverged { epoch, loss: eval.loss });
        }
        initial_objective.get_or_insert(eval.objective);
        loss_history.push(eval.loss);
        match (&mut params.node, &eval.grad_node) {
            (Some(theta_f), Some(gf)) => adam.step(&mut [&mut params.edge, theta_f], &[&eval.grad_edge, gf]),
            _ => adam.step(&mut [&mut params.edge], &[&eval.grad_edge]),
        }
    }
    let masks = params.masks();
    let mut report_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ REPORT_STREAM);
    let report = report_bounds(model, instance, &masks, cfg, &mut report_rng)?;
    let final_eval = evaluate(
        model,
        instance,
        &params,
        cfg,
        &Noise::draw(m, with_f.then_some(n), cfg.sigma_e, cfg.sigma_f, cfg.report_samples, &mut report_rng),
    )?;
    let (edges, nodes) = extract_explanation(instance, &masks, cfg.extraction)?;
    Ok(Explanation {
        objective: cfg.objective,
        edge_mask: masks.edge,
        node_mask: masks.node,
        edges,
        nodes,
        pns_lb: report.pns,
        pn_lb: report.pn,
        ps_lb: report.ps,
        initial_objective: initial_objective.unwrap_or(final_eval.objective),
        final_objective: final_eval.objective,
        loss_history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub pn: f64,
    pub ps: f64,
    /// `max(0, pn + ps - 1)`.
    pub pns: f64,
}

/// PN, PS and the clamped PNS bound of fixed masks, with
/// `cfg.report_samples` complement draws.
pub fn report_bounds<R: rand::Rng>(
    model: &GcnParams,
    instance: &Instance,
    masks: &MaskPair,
    cfg: &ExplainConfig,
    rng: &mut R,
) -> Result<Bounds> {
    let cfg = ExplainConfig { mc_samples: cfg.report_samples, ..cfg.clone() };
    let pn = objective::pn_term(model, instance, masks, &cfg, rng)?.value;
    let ps = objective::ps_term(model, instance, masks)?.value;
    Ok(Bounds { pn, ps, pns: (pn + ps - 1.0).max(0.0) })
}

/// Indices of the `k` largest values; ties go to the lower index.
fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k.min(values.len()));
    order.sort_unstable();
    order
}

fn above(values: &[f64], t: f64) -> Vec<usize> {
    values.iter().enumerate().filter(|(_, &v)| v > t).map(|(i, _)| i).collect()
}

/// Discrete edge and node sets from continuous masks. Without a node mask
/// the node set is the endpoints of the chosen edges.
pub fn extract_explanation(instance: &Instance, masks: &MaskPair, mode: Extraction) -> Result<(Vec<usize>, Vec<usize>)> {
    masks.validate(instance.graph())?;
    let edges = match mode {
        Extraction::TopK { edges, .. } => top_k(&masks.edge, edges),
        Extraction::Threshold { t } => above(&masks.edge, t),
    };
    let nodes = match (&masks.node, mode) {
        (Some(node), Extraction::TopK { nodes, .. }) => top_k(node, nodes),
        (Some(node), Extraction::Threshold { t }) => above(node, t),
        (None, _) => {
            let mut ends: Vec<usize> = edges
                .iter()
                .flat_map(|&e| {
                    let (u, v) = instance.graph().edges()[e];
                    [u, v]
                })
                .collect();
            ends.sort_unstable();
            ends.dedup();
            ends
        }
    };
    Ok((edges, nodes))
}

/// An explanation of one node prediction computed on the model's receptive
/// field around that node.
#[derive(Clone, Debug)]
pub struct NodeExplanation {
    pub local: Instance,
    pub mapping: SubgraphMapping,
    pub explanation: Explanation,
}

impl NodeExplanation {
    /// Extracted edges as ids of the full graph, ascending.
    pub fn global_edges(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.explanation.edges.iter().map(|&e| self.mapping.edges[e]).collect();
        out.sort_unstable();
        out
    }

    pub fn global_nodes(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.explanation.nodes.iter().map(|&v| self.mapping.nodes[v]).collect();
        out.sort_unstable();
        out
    }

    /// Edge mask over the full graph; edges outside the receptive field get
    /// `fill`.
    pub fn global_edge_mask(&self, num_edges: usize, fill: f64) -> Vec<f64> {
        let mut out = vec![fill; num_edges];
        for (local, &g) in self.mapping.edges.iter().enumerate() {
            out[g] = self.explanation.edge_mask[local];
        }
        out
    }
}

/// Explains `instance`'s target node on its `NUM_LAYERS`-hop subgraph, which
/// reproduces the full-graph prediction exactly.
pub fn explain_node(model: &GcnParams, instance: &Instance, cfg: &ExplainConfig) -> Result<NodeExplanation> {
    let crate::graph::Task::Node { target, .. } = instance.task() else {
        return Err(Error::Config("explain_node needs a node-classification instance".into()));
    };
    let (local, mapping) = khop_subgraph(instance, target, NUM_LAYERS, model)?;
    let explanation = explain(model, &local, cfg)?;
    Ok(NodeExplanation { local, mapping, explanation })
}
