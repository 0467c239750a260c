//! Exact discrete PNS lower bounds by exhaustive enumeration.
//!
//! For a candidate explanation `(E′, V′)` the complement is uniform over
//! every other subset pair, split into three sub-events (edges and nodes
//! both differ / only edges differ / only nodes differ) mixed by the priors.
//! `f(S, T)` is the probability of ŷ with edges `S` kept and feature rows
//! `T` kept (all other rows zeroed). One table of `f` over every pair makes
//! each candidate's bound an O(1) lookup.

use crate::error::{Error, Result};
use crate::gcn::GcnParams;
use crate::graph::Instance;

/// Largest edge or node count the oracle will enumerate.
pub const ORACLE_MAX: usize = 12;

/// `f^ŷ` for every (edge subset, node subset) bit pattern.
#[derive(Clone, Debug)]
pub struct OracleTable {
    num_edges: usize,
    /// `None` for edge-only tables (features never intervened on).
    num_nodes: Option<usize>,
    priors: [f64; 3],
    /// Row-major `[edge_bits][node_bits]`.
    f: Vec<f64>,
    row_sum: Vec<f64>,
    col_sum: Vec<f64>,
    total: f64,
}

fn subset_bits(ids: &[usize], n: usize) -> Result<usize> {
    let mut bits = 0usize;
    for &i in ids {
        if i >= n {
            return Err(Error::Config(format!("subset member {i} out of range ({n})")));
        }
        bits |= 1 << i;
    }
    Ok(bits)
}

impl OracleTable {
    /// Evaluates the model on every subset. With `with_nodes` the node
    /// subset is enumerated too; otherwise features stay untouched.
    pub fn build(model: &GcnParams, instance: &Instance, with_nodes: bool, priors: [f64; 3]) -> Result<Self> {
        let m = instance.graph().num_edges();
        let n = instance.graph().num_nodes();
        if m > ORACLE_MAX || (with_nodes && n > ORACLE_MAX) {
            return Err(Error::TooLarge(format!("{m} edges, {n} nodes (limit {ORACLE_MAX} each)")));
        }
        let yhat = instance.predicted();
        let w0 = instance.graph().weights();
        let x0 = instance.features().as_array();
        let node_patterns = if with_nodes { 1usize << n } else { 1 };
        let mut f = Vec::with_capacity((1 << m) * node_patterns);
        let mut x = x0.clone();
        let mut w = vec![0.0; m];
        for eb in 0..1usize << m {
            for (j, wj) in w.iter_mut().enumerate() {
                *wj = if eb >> j & 1 == 1 { w0[j] } else { 0.0 };
            }
            for nb in 0..node_patterns {
                if with_nodes {
                    for (v, mut row) in x.outer_iter_mut().enumerate() {
                        if nb >> v & 1 == 1 {
                            row.assign(&x0.row(v));
                        } else {
                            row.fill(0.0);
                        }
                    }
                }
                let p = model.predict(instance.graph(), &w, x.view(), instance.readout())?;
                f.push(p[yhat]);
            }
        }
        let mut row_sum = vec![0.0; 1 << m];
        let mut col_sum = vec![0.0; node_patterns];
        for (eb, rs) in row_sum.iter_mut().enumerate() {
            for (nb, cs) in col_sum.iter_mut().enumerate() {
                let v = f[eb * node_patterns + nb];
                *rs += v;
                *cs += v;
            }
        }
        let total = row_sum.iter().sum();
        Ok(Self { num_edges: m, num_nodes: with_nodes.then_some(n), priors, f, row_sum, col_sum, total })
    }

    fn at(&self, eb: usize, nb: usize) -> f64 {
        self.f[eb * self.col_sum.len() + nb]
    }

    /// Exact `max(0, P(Y_complement ≠ ŷ) + P(Y_explanation = ŷ) - 1)` for
    /// the explanation given by bit patterns.
    pub fn value_bits(&self, eb: usize, nb: usize) -> f64 {
        let me = (1u64 << self.num_edges) as f64 - 1.0;
        let fx = self.at(eb, nb);
        let p_comp_yhat = match self.num_nodes {
            None => {
                if me == 0.0 {
                    // No other edge subset exists: the complement is empty.
                    return 0.0;
                }
                (self.total - fx) / me
            }
            Some(n) => {
                let mn = (1u64 << n) as f64 - 1.0;
                let [p00, p01, p10] = self.priors;
                let mut acc = 0.0;
                let mut mass = 0.0;
                if me > 0.0 && mn > 0.0 {
                    let s00 = self.total - self.row_sum[eb] - self.col_sum[nb] + fx;
                    acc += p00 * s00 / (me * mn);
                    mass += p00;
                }
                if me > 0.0 {
                    acc += p01 * (self.col_sum[nb] - fx) / me;
                    mass += p01;
                }
                if mn > 0.0 {
                    acc += p10 * (self.row_sum[eb] - fx) / mn;
                    mass += p10;
                }
                if mass == 0.0 {
                    return 0.0;
                }
                // Renormalise if a sub-event is empty (single-element spaces).
                acc / mass
            }
        };
        ((1.0 - p_comp_yhat) + fx - 1.0).max(0.0)
    }

    /// Bound for explicit edge and node subsets.
    pub fn value(&self, edges: &[usize], nodes: Option<&[usize]>) -> Result<f64> {
        let eb = subset_bits(edges, self.num_edges)?;
        let nb = match (nodes, self.num_nodes) {
            (Some(ids), Some(n)) => subset_bits(ids, n)?,
            (None, None) => 0,
            _ => return Err(Error::Config("node subset must be given exactly when the table enumerates nodes".into())),
        };
        Ok(self.value_bits(eb, nb))
    }

    /// The best explanation: `(value, edge bits, node bits)`. Ties keep the
    /// numerically smallest bit pattern.
    pub fn best(&self) -> (f64, usize, usize) {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for eb in 0..self.row_sum.len() {
            for nb in 0..self.col_sum.len() {
                let v = self.value_bits(eb, nb);
                if v > best.0 {
                    best = (v, eb, nb);
                }
            }
        }
        best
    }
}

/// Exact discrete bound for one explanation with default uniform priors.
pub fn oracle_pns_lb(model: &GcnParams, instance: &Instance, edges: &[usize], nodes: Option<&[usize]>) -> Result<f64> {
    let table = OracleTable::build(model, instance, nodes.is_some(), [1.0 / 3.0; 3])?;
    table.value(edges, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{FeatureMatrix, SparseGraph, Task, TaskKind};

    fn inst(model: &GcnParams) -> Instance {
        let g = SparseGraph::undirected(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let x = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.3, 0.2]]).unwrap();
        Instance::new(g, x, Task::Graph { label: None }, model).unwrap()
    }

    /// Direct enumeration without the row/column shortcut.
    fn brute(model: &GcnParams, instance: &Instance, eb: usize, nb: usize) -> f64 {
        let m = instance.graph().num_edges();
        let n = instance.graph().num_nodes();
        let f = |e: usize, v: usize| {
            let w: Vec<f64> = (0..m).map(|j| f64::from((e >> j & 1) as u8)).collect();
            let mut x = instance.features().as_array().clone();
            for (i, mut row) in x.outer_iter_mut().enumerate() {
                if v >> i & 1 == 0 {
                    row.fill(0.0);
                }
            }
            model.predict(instance.graph(), &w, x.view(), instance.readout()).unwrap()[instance.predicted()]
        };
        let (mut s00, mut c00, mut s01, mut c01, mut s10, mut c10) = (0.0, 0, 0.0, 0, 0.0, 0);
        for e in 0..1 << m {
            for v in 0..1 << n {
                match (e != eb, v != nb) {
                    (true, true) => (s00, c00) = (s00 + f(e, v), c00 + 1),
                    (true, false) => (s01, c01) = (s01 + f(e, v), c01 + 1),
                    (false, true) => (s10, c10) = (s10 + f(e, v), c10 + 1),
                    (false, false) => {}
                }
            }
        }
        let comp = (s00 / c00 as f64 + s01 / c01 as f64 + s10 / c10 as f64) / 3.0;
        ((1.0 - comp) + f(eb, nb) - 1.0).max(0.0)
    }

    #[test]
    fn table_matches_direct_enumeration() {
        let model = GcnParams::init_with_dims(2, [4, 4, 4], 2, TaskKind::Graph, 8);
        let instance = inst(&model);
        let table = OracleTable::build(&model, &instance, true, [1.0 / 3.0; 3]).unwrap();
        for (eb, nb) in [(0b111, 0b1111), (0b010, 0b0110), (0, 0), (0b101, 0b1001)] {
            let t = table.value_bits(eb, nb);
            let b = brute(&model, &instance, eb, nb);
            assert!((t - b).abs() < 1e-12, "{t} vs {b}");
        }
    }

    #[test]
    fn edge_only_value_formula() {
        let model = GcnParams::init_with_dims(2, [4, 4, 4], 2, TaskKind::Graph, 3);
        let instance = inst(&model);
        let table = OracleTable::build(&model, &instance, false, [1.0 / 3.0; 3]).unwrap();
        let y = instance.predicted();
        let f = |bits: usize| {
            let w: Vec<f64> = (0..3).map(|j| f64::from((bits >> j & 1) as u8)).collect();
            model.predict(instance.graph(), &w, instance.features().view(), instance.readout()).unwrap()[y]
        };
        let others: f64 = (0..8).filter(|&b| b != 0b011).map(f).sum::<f64>() / 7.0;
        let expected = ((1.0 - others) + f(0b011) - 1.0).max(0.0);
        assert!((table.value(&[0, 1], None).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn too_large_is_rejected() {
        let model = GcnParams::init_with_dims(1, [2, 2, 2], 2, TaskKind::Graph, 0);
        let g = SparseGraph::undirected(14, (0..13).map(|i| (i, i + 1))).unwrap();
        let i = Instance::new(g, FeatureMatrix::constant(14, 1, 1.0), Task::Graph { label: None }, &model).unwrap();
        assert!(matches!(OracleTable::build(&model, &i, false, [1.0 / 3.0; 3]), Err(Error::TooLarge(_))));
    }

    #[test]
    fn constant_model_is_zero_everywhere() {
        let model = GcnParams::init_with_dims(2, [4, 4, 4], 2, TaskKind::Graph, 1);
        let mut json: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
        for v in json["readout"]["data"].as_array_mut().unwrap() {
            *v = 0.0.into();
        }
        let flat = GcnParams::from_json(&json.to_string()).unwrap();
        let instance = inst(&flat);
        let table = OracleTable::build(&flat, &instance, true, [1.0 / 3.0; 3]).unwrap();
        assert!(table.best().0.abs() < 1e-12);
    }
}
