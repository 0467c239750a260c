use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, GroundTruth, LabeledGraph, MotifTruth};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelField, SparseGraph, TaskKind};

/// Width of the constant node features used by every synthetic benchmark.
pub const SYNTHETIC_FEATURE_DIM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    BaShapes,
    TreeCycles,
    TreeGrid,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] = [Self::BaShapes, Self::TreeCycles, Self::TreeGrid];

    pub fn name(self) -> &'static str {
        match self {
            Self::BaShapes => "ba-shapes",
            Self::TreeCycles => "tree-cycles",
            Self::TreeGrid => "tree-grid",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown synthetic dataset '{s}'")))
    }
}

/// Generator knobs. The defaults reproduce the published node totals
/// (700 / 871 / 1231).
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub kind: SyntheticKind,
    pub seed: u64,
    /// Barabási–Albert size, or the depth of the balanced binary tree.
    pub base: usize,
    /// Edges added per new node in the Barabási–Albert process.
    pub ba_edges_per_node: usize,
    pub num_motifs: usize,
    /// Uniformly random extra edges added after the motifs are attached.
    pub random_edges: usize,
}

impl SyntheticConfig {
    pub fn new(kind: SyntheticKind, seed: u64) -> Self {
        match kind {
            SyntheticKind::BaShapes => Self {
                kind,
                seed,
                base: 300,
                ba_edges_per_node: 5,
                num_motifs: 80,
                random_edges: 20,
            },
            SyntheticKind::TreeCycles => Self {
                kind,
                seed,
                base: 8,
                ba_edges_per_node: 0,
                num_motifs: 60,
                random_edges: 0,
            },
            SyntheticKind::TreeGrid => Self {
                kind,
                seed,
                base: 8,
                ba_edges_per_node: 0,
                num_motifs: 80,
                random_edges: 0,
            },
        }
    }
}

pub fn generate_ba_shapes(seed: u64) -> (Dataset, GroundTruth) {
    generate(&SyntheticConfig::new(SyntheticKind::BaShapes, seed)).expect("default config is valid")
}

pub fn generate_tree_cycles(seed: u64) -> (Dataset, GroundTruth) {
    generate(&SyntheticConfig::new(SyntheticKind::TreeCycles, seed)).expect("default config is valid")
}

pub fn generate_tree_grid(seed: u64) -> (Dataset, GroundTruth) {
    generate(&SyntheticConfig::new(SyntheticKind::TreeGrid, seed)).expect("default config is valid")
}

/// A motif template: node count, internal edges, class per motif node.
struct Motif {
    size: usize,
    edges: Vec<(usize, usize)>,
    roles: Vec<usize>,
}

fn house() -> Motif {
    // 0,1 bottom; 2,3 middle; 4 roof. Classes: top 1, middle 2, bottom 3.
    Motif {
        size: 5,
        edges: vec![(0, 1), (0, 2), (1, 3), (2, 3), (2, 4), (3, 4)],
        roles: vec![3, 3, 2, 2, 1],
    }
}

fn cycle(n: usize) -> Motif {
    Motif { size: n, edges: (0..n).map(|i| (i, (i + 1) % n)).collect(), roles: vec![1; n] }
}

fn grid(side: usize) -> Motif {
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            let v = r * side + c;
            if c + 1 < side {
                edges.push((v, v + 1));
            }
            if r + 1 < side {
                edges.push((v, v + side));
            }
        }
    }
    Motif { size: side * side, edges, roles: vec![1; side * side] }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<(Dataset, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (base_nodes, mut edges) = match cfg.kind {
        SyntheticKind::BaShapes => {
            let m = cfg.ba_edges_per_node;
            if m == 0 || cfg.base <= m {
                return Err(Error::Config(format!("Barabási–Albert needs base > m >= 1 (base {}, m {m})", cfg.base)));
            }
            (cfg.base, barabasi_albert(cfg.base, m, &mut rng))
        }
        SyntheticKind::TreeCycles | SyntheticKind::TreeGrid => {
            if cfg.base > 20 {
                return Err(Error::Config(format!("tree depth {} too large", cfg.base)));
            }
            let n = (1usize << (cfg.base + 1)) - 1;
            (n, balanced_tree(n))
        }
    };
    let (motif, k_nodes, name) = match cfg.kind {
        SyntheticKind::BaShapes => (house(), 5, "ba-shapes"),
        SyntheticKind::TreeCycles => (cycle(6), 6, "tree-cycles"),
        SyntheticKind::TreeGrid => (grid(3), 9, "tree-grid"),
    };
    if cfg.num_motifs > base_nodes {
        return Err(Error::Config(format!("{} motifs but only {base_nodes} anchor nodes", cfg.num_motifs)));
    }
    let num_nodes = base_nodes + cfg.num_motifs * motif.size;
    let mut labels = vec![0usize; num_nodes];
    let mut truth = Vec::with_capacity(cfg.num_motifs * motif.size);
    let anchors = index::sample(&mut rng, base_nodes, cfg.num_motifs).into_vec();
    for (i, &anchor) in anchors.iter().enumerate() {
        let offset = base_nodes + i * motif.size;
        let motif_edges: Vec<[usize; 2]> = motif
            .edges
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (u + offset, v + offset);
                [a.min(b), a.max(b)]
            })
            .collect();
        edges.extend(motif_edges.iter().map(|&[a, b]| (a, b)));
        edges.insert((anchor.min(offset), anchor.max(offset)));
        let mut sorted = motif_edges.clone();
        sorted.sort_unstable();
        let motif_nodes: Vec<usize> = (offset..offset + motif.size).collect();
        for (j, &role) in motif.roles.iter().enumerate() {
            labels[offset + j] = role;
            truth.push(MotifTruth { node: offset + j, edges: sorted.clone(), motif_nodes: motif_nodes.clone() });
        }
    }
    let mut added = 0;
    let max_edges = num_nodes * (num_nodes - 1) / 2;
    while added < cfg.random_edges && edges.len() < max_edges {
        let u = rng.gen_range(0..num_nodes);
        let v = rng.gen_range(0..num_nodes);
        if u != v && edges.insert((u.min(v), u.max(v))) {
            added += 1;
        }
    }
    let graph = SparseGraph::undirected(num_nodes, edges)?;
    let features = FeatureMatrix::constant(num_nodes, SYNTHETIC_FEATURE_DIM, 1.0);
    let num_classes = labels.iter().max().map_or(1, |m| m + 1);
    let dataset = Dataset {
        name: name.to_string(),
        num_classes,
        task: TaskKind::Node,
        graphs: vec![LabeledGraph { graph, features, labels: LabelField::Nodes(labels) }],
    };
    let gt = GroundTruth { dataset: name.to_string(), k_edges: motif.edges.len(), k_nodes, nodes: truth };
    Ok((dataset, gt))
}

/// Preferential attachment: start from `m` isolated nodes, then every new
/// node links to `m` distinct existing nodes drawn proportionally to degree.
fn barabasi_albert(n: usize, m: usize, rng: &mut ChaCha8Rng) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    let mut targets: Vec<usize> = (0..m).collect();
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * n * m);
    for source in m..n {
        for &t in &targets {
            edges.insert((t.min(source), t.max(source)));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m));
        let mut chosen = BTreeSet::new();
        while chosen.len() < m {
            chosen.insert(*repeated.choose(rng).expect("non-empty"));
        }
        targets = chosen.into_iter().collect();
    }
    edges
}

/// Heap-ordered balanced binary tree: node `i` has children `2i+1`, `2i+2`.
fn balanced_tree(n: usize) -> BTreeSet<(usize, usize)> {
    (1..n).map(|v| ((v - 1) / 2, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    #[test]
    fn node_totals_and_classes() {
        let (ba, gt) = generate_ba_shapes(0);
        assert_eq!(ba.graphs[0].graph.num_nodes(), 700);
        assert_eq!(ba.num_classes, 4);
        assert_eq!(gt.nodes.len(), 400);
        let (tc, gt) = generate_tree_cycles(0);
        assert_eq!(tc.graphs[0].graph.num_nodes(), 871);
        assert_eq!(tc.num_classes, 2);
        assert_eq!(gt.k_edges, 6);
        let (tg, gt) = generate_tree_grid(0);
        assert_eq!(tg.graphs[0].graph.num_nodes(), 1231);
        assert_eq!(gt.k_edges, 12);
        assert_eq!(gt.k_nodes, 9);
    }

    #[test]
    fn seed_determinism() {
        assert_eq!(generate_ba_shapes(3), generate_ba_shapes(3));
        assert_ne!(generate_ba_shapes(3).0, generate_ba_shapes(4).0);
    }

    #[test]
    fn ground_truth_is_connected_and_present() {
        for kind in SyntheticKind::ALL {
            let (ds, gt) = generate(&SyntheticConfig::new(kind, 1)).unwrap();
            let g = &ds.graphs[0].graph;
            for t in &gt.nodes {
                assert_eq!(t.edges.len(), gt.k_edges);
                assert!(t.edges.iter().all(|&[u, v]| g.edge_id(u, v).is_some()));
                // BFS over motif edges reaches every motif node.
                let mut seen = BTreeSet::from([t.node]);
                let mut queue = VecDeque::from([t.node]);
                while let Some(v) = queue.pop_front() {
                    for &[a, b] in &t.edges {
                        let next = if a == v { b } else if b == v { a } else { continue };
                        if seen.insert(next) {
                            queue.push_back(next);
                        }
                    }
                }
                assert_eq!(seen.into_iter().collect::<Vec<_>>(), t.motif_nodes);
            }
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("Tree_Cycles".parse::<SyntheticKind>().unwrap(), SyntheticKind::TreeCycles);
        assert!("ba-circles".parse::<SyntheticKind>().is_err());
    }

    #[test]
    fn grid_has_twelve_edges() {
        assert_eq!(grid(3).edges.len(), 12);
        assert_eq!(house().edges.len(), 6);
    }
}
