use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use pnsx::datasets::{generate, load_tu_dataset, SyntheticConfig};
use pnsx::presets::Preset;
use serde_json::json;

use crate::manifest::Recorder;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// ba-shapes, tree-cycles, tree-grid, mutagenicity or msrc-21.
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory of TU flat files, required for the real datasets.
    #[arg(long)]
    tu_dir: Option<PathBuf>,
    /// Output directory; receives `graph.json`, `ground_truth.json` for
    /// synthetic data, and `manifest.json`.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: GenerateArgs) -> Result<()> {
    let preset: Preset = args.dataset.parse()?;
    let mut rec = Recorder::start("generate");
    let graph_path = args.out.join("graph.json");
    let (nodes, edges) = match (preset.synthetic(), &args.tu_dir) {
        (Some(kind), _) => {
            let (dataset, truth) = generate(&SyntheticConfig::new(kind, args.seed))?;
            rec.write(&graph_path, dataset.to_json()?)?;
            rec.write(&args.out.join("ground_truth.json"), serde_json::to_string_pretty(&truth)?)?;
            let g = &dataset.graphs[0].graph;
            (g.num_nodes(), g.num_edges())
        }
        (None, Some(dir)) => {
            let dataset = load_tu_dataset(dir)?;
            rec.write(&graph_path, dataset.to_json()?)?;
            let count = |f: fn(&pnsx::graph::SparseGraph) -> usize| dataset.graphs.iter().map(|g| f(&g.graph)).sum();
            (count(|g| g.num_nodes()), count(|g| g.num_edges()))
        }
        (None, None) => bail!("{preset} is read from TU files; pass --tu-dir"),
    };
    eprintln!("{preset}: {nodes} nodes, {edges} edges -> {}", graph_path.display());
    let config = json!({ "dataset": preset.name(), "tu_dir": args.tu_dir });
    rec.finish(&args.out.join("manifest.json"), config, args.seed, json!({ "nodes": nodes, "edges": edges }))?;
    Ok(())
}
