use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use pnsx::datasets::{Dataset, GroundTruth};
use pnsx::export::ExplanationRecord;
use pnsx::gcn::GcnParams;
use pnsx::graph::{Instance, MaskPair};
use pnsx::metrics::{report_rows, score, GroundTruthEdges, MetricReport};
use serde_json::json;

use crate::data::{graph_instance, load_dataset, load_model, load_truth, node_instance};
use crate::manifest::{beside, Recorder};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Explanation files, or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    explanations: Vec<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Adds top-K accuracy and ROC-AUC against the motif edges.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Method column of the report; defaults to the records' objective.
    #[arg(long)]
    method: Option<String>,
    /// Report CSV.
    #[arg(long)]
    out: PathBuf,
}

/// Every `*.json` file under the given paths, manifests excluded.
fn record_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            found.retain(|f| f.extension().is_some_and(|e| e == "json") && !f.to_string_lossy().ends_with("manifest.json"));
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    ensure!(!files.is_empty(), "no explanation files found");
    Ok(files)
}

/// Instances, aligned masks and (with ground truth) the motif edges of one
/// group of records.
#[derive(Default)]
struct ScoredInputs {
    instances: Vec<Instance>,
    masks: Vec<MaskPair>,
    truth_edges: Vec<Vec<usize>>,
}

fn scored_inputs(
    dataset: &Dataset,
    model: &GcnParams,
    truth: Option<&GroundTruth>,
    records: &[(PathBuf, ExplanationRecord)],
) -> Result<ScoredInputs> {
    let mut out = ScoredInputs::default();
    for (path, r) in records {
        let id = r.instance_id;
        let context = || format!("{}", path.display());
        let (inst, node_ids, edges) = match id.node {
            Some(node) => {
                let (inst, mapping) = node_instance(dataset, model, id.graph, node).with_context(context)?;
                let edges = match truth {
                    Some(t) => {
                        let motif = t.get(node).with_context(|| format!("{}: node {node} has no ground truth", path.display()))?;
                        let g = &dataset.graphs[id.graph].graph;
                        motif.edges.iter().filter_map(|&[u, v]| g.edge_id(u, v).and_then(|e| mapping.local_edge(e))).collect()
                    }
                    None => Vec::new(),
                };
                (inst, mapping.nodes, edges)
            }
            None => {
                if truth.is_some() {
                    bail!("{}: ground truth covers node explanations only", path.display());
                }
                let inst = graph_instance(dataset, model, id.graph).with_context(context)?;
                let n = inst.graph().num_nodes();
                (inst, (0..n).collect(), Vec::new())
            }
        };
        out.masks.push(r.masks_for(&inst, &node_ids).with_context(context)?);
        out.instances.push(inst);
        out.truth_edges.push(edges);
    }
    Ok(out)
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    let mut rec = Recorder::start("evaluate");
    let files = record_files(&args.explanations)?;
    for f in &files {
        rec.input(f);
    }
    rec.input(&args.model);
    rec.input(&args.data);
    let dataset = load_dataset(&args.data)?;
    let model = load_model(&args.model, &dataset)?;
    let truth = match &args.ground_truth {
        Some(p) => {
            rec.input(p);
            Some(load_truth(p)?)
        }
        None => None,
    };
    // One report per seed; the CSV summarises across seeds.
    let mut by_seed: BTreeMap<u64, Vec<(PathBuf, ExplanationRecord)>> = BTreeMap::new();
    for f in files {
        let r = ExplanationRecord::read(&f).with_context(|| format!("parsing {}", f.display()))?;
        by_seed.entry(r.seed).or_default().push((f, r));
    }
    let method = match &args.method {
        Some(m) => m.clone(),
        None => {
            let mut names: Vec<&str> = by_seed.values().flatten().map(|(_, r)| r.objective.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            match names.as_slice() {
                [one] if !one.is_empty() => one.to_string(),
                _ => "imported".to_string(),
            }
        }
    };
    // Scoring is single-threaded, so reports do not depend on the machine.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let mut reports: Vec<(u64, MetricReport)> = Vec::new();
    for (seed, records) in &by_seed {
        let inputs = scored_inputs(&dataset, &model, truth.as_ref(), records)?;
        let gt = truth.as_ref().map(|t| GroundTruthEdges { edges: &inputs.truth_edges, k: t.k_edges });
        let report = pool.install(|| score(&model, &inputs.instances, &inputs.masks, None, gt))?;
        reports.push((*seed, report));
    }
    let runs: Vec<MetricReport> = reports.iter().map(|(_, r)| *r).collect();
    let rows = report_rows(&dataset.name, &method, &runs)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        csv.serialize(row)?;
        eprintln!("{:<14} {:>8.2} ± {:.2}", row.metric, 100.0 * row.mean, 100.0 * row.half_width);
    }
    rec.write(&args.out, csv.into_inner()?)?;
    let per_seed: Vec<_> = reports.iter().map(|(s, r)| json!({ "seed": s, "report": r })).collect();
    let config = json!({ "method": method, "dataset": dataset.name, "ground_truth": args.ground_truth.is_some() });
    let seed = by_seed.keys().next().copied().unwrap_or_default();
    rec.finish(&beside(&args.out), config, seed, json!(per_seed))?;
    Ok(())
}
