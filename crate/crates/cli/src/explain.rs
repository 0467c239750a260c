use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use pnsx::datasets::Dataset;
use pnsx::explain::{explain, explain_node, ExplainConfig, Extraction, Objective};
use pnsx::export::{to_dot, ExplanationRecord};
use pnsx::gcn::GcnParams;
use pnsx::graph::TaskKind;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{overlay, ConfigFile};
use crate::data::{full_node_instance, graph_instance, load_dataset, load_model, load_truth};
use crate::manifest::Recorder;

/// Which predictions to explain. Exactly one must be given.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Selector {
    /// Every node that belongs to a motif (needs `--ground-truth`).
    #[arg(long)]
    motif_nodes: bool,
    /// Comma-separated node ids (node classification).
    #[arg(long, value_delimiter = ',')]
    nodes: Vec<usize>,
    /// Comma-separated graph ids (graph classification).
    #[arg(long, value_delimiter = ',')]
    graphs: Vec<usize>,
    /// Every graph of a graph-classification dataset.
    #[arg(long)]
    all_graphs: bool,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[command(flatten)]
    select: Selector,
    /// pns-e, pns-ef, pn-e, pn-ef, ps-e or ps-ef.
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    preset: Option<String>,
    /// TOML file with an optional `preset` and an `[explain]` table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    alpha_e: Option<f64>,
    #[arg(long)]
    beta_e: Option<f64>,
    #[arg(long)]
    alpha_f: Option<f64>,
    #[arg(long)]
    beta_f: Option<f64>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    sigma_e: Option<f64>,
    #[arg(long)]
    sigma_f: Option<f64>,
    /// Extract the K highest edges (and `--top-k-nodes` nodes).
    #[arg(long, conflicts_with = "threshold")]
    top_k_edges: Option<usize>,
    #[arg(long, requires = "top_k_edges")]
    top_k_nodes: Option<usize>,
    /// Extract every entry above this value.
    #[arg(long)]
    threshold: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory for one JSON and one DOT file per instance.
    #[arg(long)]
    out: PathBuf,
}

impl ExplainArgs {
    fn config(&self) -> Result<ExplainConfig> {
        let file = ConfigFile::read(self.config.as_deref())?;
        let from_file = file.explain.as_ref().and_then(|t| t.get("objective")).and_then(|v| v.as_str());
        let objective: Objective = self.objective.as_deref().or(from_file).unwrap_or("pns-e").parse()?;
        let seed = self.seed.unwrap_or_default();
        let base = match file.preset(self.preset.as_deref())? {
            Some(p) => p.explain_config(objective, seed),
            None => ExplainConfig { objective, seed, ..ExplainConfig::default() },
        };
        let mut cfg: ExplainConfig = overlay(&base, file.explain.as_ref())?;
        cfg.objective = objective;
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.epochs = self.epochs.unwrap_or(cfg.epochs);
        cfg.learning_rate = self.lr.unwrap_or(cfg.learning_rate);
        cfg.alpha_e = self.alpha_e.unwrap_or(cfg.alpha_e);
        cfg.beta_e = self.beta_e.unwrap_or(cfg.beta_e);
        cfg.alpha_f = self.alpha_f.unwrap_or(cfg.alpha_f);
        cfg.beta_f = self.beta_f.unwrap_or(cfg.beta_f);
        cfg.mc_samples = self.mc_samples.unwrap_or(cfg.mc_samples);
        cfg.sigma_e = self.sigma_e.unwrap_or(cfg.sigma_e);
        cfg.sigma_f = self.sigma_f.unwrap_or(cfg.sigma_f);
        if let Some(edges) = self.top_k_edges {
            cfg.extraction = Extraction::TopK { edges, nodes: self.top_k_nodes.unwrap_or(edges) };
        }
        if let Some(t) = self.threshold {
            cfg.extraction = Extraction::Threshold { t };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Instance ids to explain: node ids for node tasks, graph ids otherwise.
    fn targets(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        let s = &self.select;
        let ids = if s.motif_nodes {
            let path = self.ground_truth.as_deref().context("--motif-nodes needs --ground-truth")?;
            ensure!(dataset.task == TaskKind::Node, "--motif-nodes applies to node-classification data");
            load_truth(path)?.nodes.iter().map(|t| t.node).collect()
        } else if s.all_graphs {
            ensure!(dataset.task == TaskKind::Graph, "--all-graphs applies to graph-classification data");
            (0..dataset.graphs.len()).collect()
        } else if !s.nodes.is_empty() {
            ensure!(dataset.task == TaskKind::Node, "--nodes applies to node-classification data");
            s.nodes.clone()
        } else {
            ensure!(dataset.task == TaskKind::Graph, "--graphs applies to graph-classification data");
            s.graphs.clone()
        };
        if ids.is_empty() {
            bail!("the selector matched no instances");
        }
        Ok(ids)
    }
}

fn explain_one(dataset: &Dataset, model: &GcnParams, cfg: &ExplainConfig, id: usize) -> Result<ExplanationRecord> {
    match dataset.task {
        TaskKind::Node => {
            let inst = full_node_instance(dataset, model, 0, id)?;
            let ne = explain_node(model, &inst, cfg).with_context(|| format!("explaining node {id}"))?;
            Ok(ExplanationRecord::from_node(0, &ne, cfg.seed))
        }
        TaskKind::Graph => {
            let inst = graph_instance(dataset, model, id)?;
            let exp = explain(model, &inst, cfg).with_context(|| format!("explaining graph {id}"))?;
            Ok(ExplanationRecord::from_graph(id, &inst, &exp, cfg.seed))
        }
    }
}

pub fn run(args: ExplainArgs) -> Result<()> {
    let cfg = args.config()?;
    let mut rec = Recorder::start("explain");
    rec.input(&args.model);
    rec.input(&args.data);
    for p in [&args.ground_truth, &args.config].into_iter().flatten() {
        rec.input(p);
    }
    let dataset = load_dataset(&args.data)?;
    let model = load_model(&args.model, &dataset)?;
    let ids = args.targets(&dataset)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build()?;
    let records: Vec<ExplanationRecord> =
        pool.install(|| ids.par_iter().map(|&id| explain_one(&dataset, &model, &cfg, id)).collect::<Result<_>>())?;
    for r in &records {
        let stem = r.file_stem();
        rec.write(&args.out.join(format!("{stem}.json")), r.to_json()?)?;
        rec.write(&args.out.join(format!("{stem}.dot")), to_dot(r))?;
    }
    let mean = |f: fn(&ExplanationRecord) -> Option<f64>| records.iter().filter_map(f).sum::<f64>() / records.len() as f64;
    eprintln!("{} explanations ({}) -> {}", records.len(), cfg.objective, args.out.display());
    let results = json!({
        "instances": records.len(),
        "mean_pns_lb": mean(|r| r.pns_lb),
        "mean_pn_lb": mean(|r| r.pn_lb),
        "mean_ps_lb": mean(|r| r.ps_lb),
    });
    rec.finish(&args.out.join("manifest.json"), serde_json::to_value(&cfg)?, cfg.seed, results)?;
    Ok(())
}
