//! Reader for the TU benchmark collection's flat-file layout.
//!
//! A dataset `DS` is a directory holding `DS_A.txt` (one `i, j` arc per line,
//! 1-indexed over all nodes), `DS_graph_indicator.txt` (graph id of each
//! node, 1-indexed), `DS_graph_labels.txt` and `DS_node_labels.txt`.
//! Graph and node label values are remapped to `0..k` in sorted order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::{Dataset, LabeledGraph};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelField, SparseGraph, TaskKind};

fn find_prefix(dir: &Path) -> Result<String> {
    let mut prefixes = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(p) = name.strip_suffix("_A.txt") {
            prefixes.push(p.to_string());
        }
    }
    match prefixes.len() {
        1 => Ok(prefixes.pop().unwrap()),
        0 => Err(Error::Format(format!("no *_A.txt file in {}", dir.display()))),
        _ => Err(Error::Format(format!("several *_A.txt files in {}", dir.display()))),
    }
}

fn read_ints(path: &PathBuf) -> Result<Vec<i64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<i64>()
                .map_err(|_| Error::Format(format!("{}:{}: expected an integer, got '{l}'", path.display(), i + 1)))
        })
        .collect()
}

fn remap(values: &[i64]) -> (Vec<usize>, usize) {
    let distinct: BTreeMap<i64, usize> = values
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    (values.iter().map(|v| distinct[v]).collect(), distinct.len())
}

/// Loads every graph of a TU dataset with one-hot node-label features.
pub fn load_tu_dataset(dir: &Path) -> Result<Dataset> {
    let prefix = find_prefix(dir)?;
    let file = |suffix: &str| dir.join(format!("{prefix}_{suffix}.txt"));

    let indicator = read_ints(&file("graph_indicator"))?;
    let graph_labels = read_ints(&file("graph_labels"))?;
    let node_labels = read_ints(&file("node_labels"))?;
    let num_nodes = indicator.len();
    let num_graphs = graph_labels.len();
    if num_graphs == 0 {
        return Err(Error::Empty("TU dataset has no graphs"));
    }
    if node_labels.len() != num_nodes {
        return Err(Error::Format(format!(
            "{} node labels for {num_nodes} nodes",
            node_labels.len()
        )));
    }

    // Per-graph node ranges; nodes of one graph must be contiguous.
    let mut offsets = vec![usize::MAX; num_graphs];
    let mut sizes = vec![0usize; num_graphs];
    for (v, &g) in indicator.iter().enumerate() {
        if g < 1 || g as usize > num_graphs {
            return Err(Error::Format(format!("node {} assigned to unknown graph {g}", v + 1)));
        }
        let g = g as usize - 1;
        if offsets[g] == usize::MAX {
            offsets[g] = v;
        } else if offsets[g] + sizes[g] != v {
            return Err(Error::Format(format!("nodes of graph {} are not contiguous", g + 1)));
        }
        sizes[g] += 1;
    }
    if let Some(g) = offsets.iter().position(|&o| o == usize::MAX) {
        return Err(Error::Format(format!("graph {} has no nodes", g + 1)));
    }

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    let a_path = file("A");
    let text = fs::read_to_string(&a_path).map_err(|e| Error::Format(format!("{}: {e}", a_path.display())))?;
    for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|t| t.trim().parse::<usize>().ok())
                .ok_or_else(|| Error::Format(format!("{}:{}: malformed arc '{line}'", a_path.display(), line_no + 1)))
        };
        let mut parts = line.split(',');
        let (i, j) = (parse(parts.next())?, parse(parts.next())?);
        for x in [i, j] {
            if x < 1 || x > num_nodes {
                return Err(Error::Format(format!("arc references dangling node {x}")));
            }
        }
        let (i, j) = (i - 1, j - 1);
        let g = indicator[i] as usize - 1;
        if indicator[j] as usize - 1 != g {
            return Err(Error::Format(format!("arc {}-{} crosses graphs", i + 1, j + 1)));
        }
        if i != j {
            edges[g].push((i - offsets[g], j - offsets[g]));
        }
    }

    let (node_classes, feature_dim) = remap(&node_labels);
    let (graph_classes, num_classes) = remap(&graph_labels);
    let mut graphs = Vec::with_capacity(num_graphs);
    for g in 0..num_graphs {
        let graph = SparseGraph::undirected(sizes[g], edges[g].drain(..))?;
        let features = FeatureMatrix::one_hot(&node_classes[offsets[g]..offsets[g] + sizes[g]], feature_dim)?;
        graphs.push(LabeledGraph { graph, features, labels: LabelField::Graph(graph_classes[g]) });
    }
    Ok(Dataset { name: prefix, num_classes, task: TaskKind::Graph, graphs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn toy(dir: &Path) {
        // Graph 1: triangle (nodes 1-3); graph 2: single edge (nodes 4-5).
        write(dir, "TOY_A.txt", "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n");
        write(dir, "TOY_graph_indicator.txt", "1\n1\n1\n2\n2\n");
        write(dir, "TOY_graph_labels.txt", "-1\n1\n");
        write(dir, "TOY_node_labels.txt", "0\n2\n2\n0\n5\n");
    }

    #[test]
    fn loads_toy_dataset() {
        let tmp = tempfile::tempdir().unwrap();
        toy(tmp.path());
        let ds = load_tu_dataset(tmp.path()).unwrap();
        assert_eq!(ds.name, "TOY");
        assert_eq!(ds.graphs.len(), 2);
        assert_eq!(ds.num_classes, 2);
        assert_eq!(ds.graphs[0].graph.num_edges(), 3);
        assert_eq!(ds.graphs[1].graph.edges(), &[(0, 1)]);
        assert_eq!(ds.graphs[1].graph_label(), Some(1));
        assert_eq!(ds.feature_dim(), 3);
        assert_eq!(ds.graphs[1].features.rows()[1], vec![0.0, 0.0, 1.0]);
        ds.validate().unwrap();
    }

    #[test]
    fn empty_directory_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(load_tu_dataset(tmp.path()).is_err());
    }

    #[test]
    fn dangling_node_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        toy(tmp.path());
        write(tmp.path(), "TOY_A.txt", "1, 9\n");
        assert!(matches!(load_tu_dataset(tmp.path()), Err(Error::Format(_))));
    }

    #[test]
    fn missing_labels_file_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        toy(tmp.path());
        fs::remove_file(tmp.path().join("TOY_node_labels.txt")).unwrap();
        assert!(load_tu_dataset(tmp.path()).is_err());
    }
}
