//! Full-batch cross-entropy training of [`GcnParams`].

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::gcn::{log_softmax_at, softmax, GcnParams, ParamGrads, Readout};
use crate::graph::{argmax, Instance, TaskKind};
use crate::optim::Adam;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub weight_decay: f64,
    /// Fraction of nodes (node tasks) or graphs (graph tasks) used for
    /// training.
    pub train_fraction: f64,
    pub seed: u64,
    /// Independent initialisations trained on the same split; the one with
    /// the lowest final training loss is kept.
    pub restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.001, epochs: 2000, dropout: 0.0, weight_decay: 0.0, train_fraction: 0.8, seed: 0, restarts: 1 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Train/test partition: node ids for node tasks, graph ids for graph tasks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub params: GcnParams,
    pub train_acc: f64,
    pub test_acc: f64,
    pub curve: Vec<EpochStats>,
    pub split: Split,
}

/// Seeded shuffle, then the first `round(fraction * n)` items train.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((fraction * n as f64).round() as usize).clamp(usize::from(n > 1), n.saturating_sub(1).max(1));
    let mut train = idx[..cut].to_vec();
    let mut test = idx[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

/// Trains fresh models on `dataset`. Restart `r` is initialised from seed
/// `cfg.seed + r`; ties in final loss keep the earlier restart.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let mut best: Option<TrainReport> = None;
    for r in 0..cfg.restarts as u64 {
        let params = GcnParams::init(dataset.feature_dim(), dataset.num_classes, dataset.task, cfg.seed.wrapping_add(r));
        let report = train_from(dataset, cfg, params)?;
        let loss = |rep: &TrainReport| rep.curve.last().map_or(f64::INFINITY, |s| s.loss);
        if best.as_ref().is_none_or(|b| loss(&report) < loss(b)) {
            best = Some(report);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Trains starting from the given parameters.
pub fn train_from(dataset: &Dataset, cfg: &TrainConfig, params: GcnParams) -> Result<TrainReport> {
    cfg.validate()?;
    dataset.validate()?;
    if params.input_dim() != dataset.feature_dim() || params.num_classes() != dataset.num_classes {
        return Err(Error::Dimension("model shape does not match dataset".into()));
    }
    match dataset.task {
        TaskKind::Node => train_nodes(dataset, cfg, params),
        TaskKind::Graph => train_graphs(dataset, cfg, params),
    }
}

fn train_nodes(dataset: &Dataset, cfg: &TrainConfig, mut params: GcnParams) -> Result<TrainReport> {
    if dataset.graphs.len() != 1 {
        return Err(Error::Config("node-task training expects exactly one graph".into()));
    }
    let g = &dataset.graphs[0];
    let labels = g.node_labels().expect("validated node task");
    let split = split_indices(labels.len(), cfg.train_fraction, cfg.seed);
    let mut adam = Adam::new(cfg.learning_rate, cfg.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_d809);
    let weights = g.graph.weights();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let n_train = split.train.len() as f64;

    let accuracy = |params: &GcnParams| -> Result<(f64, f64)> {
        let (logits, _) = params.forward_all_nodes::<ChaCha8Rng>(&g.graph, weights, g.features.view(), None)?;
        let acc = |ids: &[usize]| {
            let hits = ids.iter().filter(|&&v| argmax(logits.row(v).as_slice().unwrap()) == labels[v]).count();
            hits as f64 / ids.len().max(1) as f64
        };
        Ok((acc(&split.train), acc(&split.test)))
    };

    for epoch in 0..cfg.epochs {
        let drop = (cfg.dropout > 0.0).then_some((cfg.dropout, &mut rng));
        let (logits, tape) = params.forward_all_nodes(&g.graph, weights, g.features.view(), drop)?;
        let mut d_logits = Array2::zeros(logits.raw_dim());
        let mut loss = 0.0;
        for &v in &split.train {
            let row = logits.row(v);
            let row = row.as_slice().unwrap();
            loss -= log_softmax_at(row, labels[v]);
            let p = softmax(row);
            for (c, pc) in p.into_iter().enumerate() {
                d_logits[[v, c]] = (pc - f64::from(u8::from(c == labels[v]))) / n_train;
            }
        }
        loss /= n_train;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        let grads = params.backward_params_from_logits(&tape, &d_logits)?;
        step(&mut adam, &mut params, &grads);
        let (train_acc, test_acc) = accuracy(&params)?;
        curve.push(EpochStats { epoch, loss, train_acc, test_acc });
    }
    let (train_acc, test_acc) = accuracy(&params)?;
    Ok(TrainReport { params, train_acc, test_acc, curve, split })
}

fn train_graphs(dataset: &Dataset, cfg: &TrainConfig, mut params: GcnParams) -> Result<TrainReport> {
    let split = split_indices(dataset.graphs.len(), cfg.train_fraction, cfg.seed);
    let mut adam = Adam::new(cfg.learning_rate, cfg.weight_decay);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let n_train = split.train.len() as f64;

    let accuracy = |params: &GcnParams, ids: &[usize]| -> Result<f64> {
        let hits: Result<Vec<bool>> = ids
            .par_iter()
            .map(|&i| {
                let g = &dataset.graphs[i];
                let p = params.predict(&g.graph, g.graph.weights(), g.features.view(), Readout::Graph)?;
                Ok(argmax(&p) == g.graph_label().expect("validated graph task"))
            })
            .collect();
        Ok(hits?.into_iter().filter(|&h| h).count() as f64 / ids.len().max(1) as f64)
    };

    for epoch in 0..cfg.epochs {
        // Per-graph results are collected in order and summed sequentially,
        // so the run is bit-reproducible regardless of thread scheduling.
        let per_graph: Result<Vec<(f64, ParamGrads)>> = split
            .train
            .par_iter()
            .map(|&i| {
                let g = &dataset.graphs[i];
                let label = g.graph_label().expect("validated graph task");
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((epoch as u64) << 32) ^ i as u64);
                let drop = (cfg.dropout > 0.0).then_some((cfg.dropout, &mut rng));
                let (logits, tape) = params.forward_graph_logits(&g.graph, g.graph.weights(), g.features.view(), drop)?;
                let p = softmax(&logits);
                let d = Array2::from_shape_fn((1, p.len()), |(_, c)| p[c] - f64::from(u8::from(c == label)));
                let grads = params.backward_params_from_logits(&tape, &d)?;
                Ok((-log_softmax_at(&logits, label), grads))
            })
            .collect();
        let mut total = ParamGrads::zeros(&params);
        let mut loss = 0.0;
        for (l, g) in per_graph? {
            loss += l;
            total.add_assign(&g);
        }
        loss /= n_train;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        total.scale(1.0 / n_train);
        step(&mut adam, &mut params, &total);
        let train_acc = accuracy(&params, &split.train)?;
        let test_acc = accuracy(&params, &split.test)?;
        curve.push(EpochStats { epoch, loss, train_acc, test_acc });
    }
    let train_acc = accuracy(&params, &split.train)?;
    let test_acc = accuracy(&params, &split.test)?;
    Ok(TrainReport { params, train_acc, test_acc, curve, split })
}

fn step(adam: &mut Adam, params: &mut GcnParams, grads: &ParamGrads) {
    if adam.lr() == 0.0 {
        return;
    }
    let g = grads.slices();
    let mut p = params.slices_mut();
    adam.step(&mut p, &g);
}

/// Fraction of labelled instances whose prediction matches the label.
pub fn evaluate_accuracy(instances: &[Instance]) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::Empty("no instances to evaluate"));
    }
    let mut hits = 0;
    for inst in instances {
        let label = inst.task().label().ok_or_else(|| Error::Config("instance has no label".into()))?;
        hits += usize::from(inst.predicted() == label);
    }
    Ok(hits as f64 / instances.len() as f64)
}

/// Writes the training curve as CSV (`epoch,loss,train_acc,test_acc`).
pub fn curve_csv(curve: &[EpochStats]) -> String {
    let mut out = String::from("epoch,loss,train_acc,test_acc\n");
    for s in curve {
        out.push_str(&format!("{},{},{},{}\n", s.epoch, s.loss, s.train_acc, s.test_acc));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::LabeledGraph;
    use crate::graph::{FeatureMatrix, LabelField, SparseGraph, Task};

    fn two_class_graphs() -> Dataset {
        // Paths (label 0) vs. triangles-with-tail (label 1); features carry
        // the node degree.
        let mut graphs = Vec::new();
        for i in 0..20 {
            let n = 4 + i % 3;
            let (graph, label) = if i % 2 == 0 {
                (SparseGraph::undirected(n, (0..n - 1).map(|v| (v, v + 1))).unwrap(), 0)
            } else {
                let mut e: Vec<_> = (0..n - 1).map(|v| (v, v + 1)).collect();
                e.push((0, 2));
                (SparseGraph::undirected(n, e).unwrap(), 1)
            };
            let mut deg = vec![0.0; n];
            for &(u, v) in graph.edges() {
                deg[u] += 1.0;
                deg[v] += 1.0;
            }
            let rows: Vec<Vec<f64>> = deg.iter().map(|&d| vec![1.0, d]).collect();
            let features = FeatureMatrix::from_rows(&rows).unwrap();
            graphs.push(LabeledGraph { features, graph, labels: LabelField::Graph(label) });
        }
        Dataset { name: "toy".into(), num_classes: 2, task: TaskKind::Graph, graphs }
    }

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let ds = two_class_graphs();
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 10, ..TrainConfig::default() };
        let init = GcnParams::init(2, 2, TaskKind::Graph, cfg.seed);
        let report = train(&ds, &cfg).unwrap();
        assert_eq!(report.params, init);
    }

    #[test]
    fn training_is_seed_deterministic_and_learns() {
        let ds = two_class_graphs();
        let cfg = TrainConfig { learning_rate: 0.01, epochs: 150, seed: 7, ..TrainConfig::default() };
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert!(a.curve.last().unwrap().loss < a.curve[0].loss);
        assert!(a.train_acc > 0.9, "train acc {}", a.train_acc);
    }

    #[test]
    fn node_task_training_reduces_loss() {
        let g = SparseGraph::undirected(6, [(0, 1), (1, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let ds = Dataset {
            name: "nodes".into(),
            num_classes: 2,
            task: TaskKind::Node,
            graphs: vec![LabeledGraph {
                graph: g,
                features: FeatureMatrix::constant(6, 3, 1.0),
                labels: LabelField::Nodes(vec![0, 0, 0, 1, 1, 1]),
            }],
        };
        let cfg = TrainConfig { learning_rate: 0.01, epochs: 100, dropout: 0.2, ..TrainConfig::default() };
        let r = train(&ds, &cfg).unwrap();
        assert!(r.curve.last().unwrap().loss < r.curve[0].loss);
    }

    #[test]
    fn restarts_keep_lowest_training_loss() {
        let ds = two_class_graphs();
        let base = TrainConfig { learning_rate: 0.01, epochs: 30, seed: 2, ..TrainConfig::default() };
        let single: Vec<f64> = (0..3)
            .map(|r| train_from(&ds, &base, GcnParams::init(ds.feature_dim(), ds.num_classes, ds.task, 2 + r)).unwrap())
            .map(|rep| rep.curve.last().unwrap().loss)
            .collect();
        let best = train(&ds, &TrainConfig { restarts: 3, ..base }).unwrap();
        let min = single.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(best.curve.last().unwrap().loss, min);
    }

    #[test]
    fn split_is_disjoint_and_complete() {
        let s = split_indices(10, 0.8, 3);
        assert_eq!(s.train.len(), 8);
        let mut all = [s.train.clone(), s.test.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn evaluate_accuracy_rules() {
        assert!(evaluate_accuracy(&[]).is_err());
        let model = GcnParams::init(2, 2, TaskKind::Graph, 0);
        let g = SparseGraph::undirected(2, [(0, 1)]).unwrap();
        let x = FeatureMatrix::constant(2, 2, 1.0);
        let probe = Instance::new(g.clone(), x.clone(), Task::Graph { label: None }, &model).unwrap();
        let label = probe.predicted();
        let inst = Instance::new(g, x, Task::Graph { label: Some(label) }, &model).unwrap();
        assert_eq!(evaluate_accuracy(&[inst]).unwrap(), 1.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        let ds = two_class_graphs();
        for cfg in [
            TrainConfig { train_fraction: 1.0, ..TrainConfig::default() },
            TrainConfig { dropout: 1.0, ..TrainConfig::default() },
            TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
        ] {
            assert!(matches!(train(&ds, &cfg), Err(Error::Config(_))));
        }
    }
}
