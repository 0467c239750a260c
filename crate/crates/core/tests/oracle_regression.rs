//! Exhaustive oracle on a trained 4-edge triangle detector.

use pnsx::datasets::{Dataset, LabeledGraph};
use pnsx::explain::OracleTable;
use pnsx::graph::{FeatureMatrix, Instance, LabelField, SparseGraph, Task, TaskKind};
use pnsx::train::{train, TrainConfig};

/// Every labelled 4-node graph with 4 edges: a triangle with a pendant edge
/// (label 1) or a 4-cycle (label 0).
fn four_edge_graphs() -> Dataset {
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let graphs = (0..6)
        .flat_map(|a| (a + 1..6).map(move |b| (a, b)))
        .map(|(a, b)| {
            let edges: Vec<(usize, usize)> = pairs.iter().enumerate().filter(|&(i, _)| i != a && i != b).map(|(_, &e)| e).collect();
            let g = SparseGraph::undirected(4, edges).unwrap();
            // The two missing pairs share a node exactly when a triangle remains.
            let (p, q) = (pairs[a], pairs[b]);
            let triangle = p.0 == q.0 || p.0 == q.1 || p.1 == q.0 || p.1 == q.1;
            LabeledGraph { graph: g, features: FeatureMatrix::constant(4, 1, 1.0), labels: LabelField::Graph(usize::from(triangle)) }
        })
        .collect();
    Dataset { name: "four-edges".into(), num_classes: 2, task: TaskKind::Graph, graphs }
}

#[test]
fn triangle_detector_best_subset() {
    let ds = four_edge_graphs();
    assert_eq!(ds.graphs.iter().filter(|g| g.graph_label() == Some(1)).count(), 12);
    let model = train(&ds, &TrainConfig { learning_rate: 0.01, epochs: 3000, seed: 3, ..Default::default() }).unwrap().params;
    let g = &ds.graphs[0];
    let inst = Instance::new(g.graph.clone(), g.features.clone(), Task::Graph { label: g.graph_label() }, &model).unwrap();
    let table = OracleTable::build(&model, &inst, false, [1.0 / 3.0; 3]).unwrap();
    let (best, bits, _) = table.best();
    assert_eq!(inst.predicted(), 1);
    // Constant features leave only degrees to go on, so the detector keys on
    // the degree-3 node: the star around it beats the bare triangle, whose
    // degrees match a 4-cycle.
    assert_eq!(bits, 0b1101);
    assert!((best - 0.467_386_672_581).abs() < 1e-6, "{best}");
    assert_eq!(table.value(&[1, 2, 3], None).unwrap(), 0.0);
}
