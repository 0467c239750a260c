//! Fidelity, characterization and ground-truth accuracy of explanations.
//!
//! Every function takes plain masks, so explanations produced elsewhere are
//! scored by the same code path as native ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::GcnParams;
use crate::graph::{argmax, FeatureMatrix, Instance, MaskPair};

/// Threshold used for the discrete fidelity variants.
pub const DISCRETE_THRESHOLD: f64 = 0.5;

/// Prediction with edge weights `E ⊙ M_e` and feature rows blended between
/// `X` (weight `M_f[v]`) and the baseline (weight `1 - M_f[v]`). Without a
/// node mask the features are left as they are.
fn predict_blend(model: &GcnParams, instance: &Instance, masks: &MaskPair, baseline: Option<&FeatureMatrix>) -> Result<usize> {
    masks.validate(instance.graph())?;
    let weights: Vec<f64> = instance.graph().weights().iter().zip(&masks.edge).map(|(w, m)| w * m).collect();
    let x = instance.features().as_array();
    let features = match &masks.node {
        None => x.clone(),
        Some(node) => {
            let mut out = x.clone();
            for (v, (mut row, &m)) in out.outer_iter_mut().zip(node).enumerate() {
                row *= m;
                if let Some(b) = baseline {
                    row.scaled_add(1.0 - m, &b.as_array().row(v));
                }
            }
            out
        }
    };
    let probs = model.predict(instance.graph(), &weights, features.view(), instance.readout())?;
    Ok(argmax(&probs))
}

/// `(Fid+, Fid-)`: the fraction of predictions that change when the
/// explanation is removed, and when only the explanation is kept.
///
/// `baseline` gives the counterfactual feature fill per instance; `None`
/// means all zeros.
pub fn fidelity(
    model: &GcnParams,
    instances: &[Instance],
    masks: &[MaskPair],
    baseline: Option<&[FeatureMatrix]>,
) -> Result<(f64, f64)> {
    if instances.len() != masks.len() {
        return Err(Error::Dimension(format!("{} instances but {} mask pairs", instances.len(), masks.len())));
    }
    if instances.is_empty() {
        return Err(Error::Empty("no instances to score"));
    }
    if let Some(b) = baseline {
        if b.len() != instances.len() {
            return Err(Error::Dimension(format!("{} baselines for {} instances", b.len(), instances.len())));
        }
        for (inst, bx) in instances.iter().zip(b) {
            if bx.num_nodes() != inst.features().num_nodes() || bx.dim() != inst.features().dim() {
                return Err(Error::Dimension("baseline features do not match the instance".into()));
            }
        }
    }
    let kept: Vec<(bool, bool)> = instances
        .par_iter()
        .zip(masks)
        .enumerate()
        .map(|(i, (inst, m))| -> Result<(bool, bool)> {
            let b = baseline.map(|b| &b[i]);
            let yhat = inst.predicted();
            let removed = predict_blend(model, inst, &m.complement(), b)? == yhat;
            let only = predict_blend(model, inst, m, b)? == yhat;
            Ok((removed, only))
        })
        .collect::<Result<_>>()?;
    let n = kept.len() as f64;
    let fid_plus = 1.0 - kept.iter().filter(|k| k.0).count() as f64 / n;
    let fid_minus = 1.0 - kept.iter().filter(|k| k.1).count() as f64 / n;
    Ok((fid_plus, fid_minus))
}

/// Harmonic combination of `Fid+` and `1 - Fid-`; 0 when both are 0.
pub fn charact(fid_plus: f64, fid_minus: f64) -> f64 {
    let keep = 1.0 - fid_minus;
    let denom = fid_plus + keep;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * fid_plus * keep / denom
    }
}

/// `|top-K ∩ gt| / min(K, |gt|)` for one instance; ties go to lower ids.
pub fn instance_topk(mask: &[f64], ground_truth: &[usize], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("top-K needs K >= 1".into()));
    }
    if ground_truth.is_empty() {
        return Err(Error::Empty("ground-truth edge set"));
    }
    let mut order: Vec<usize> = (0..mask.len()).collect();
    order.sort_by(|&a, &b| mask[b].total_cmp(&mask[a]).then(a.cmp(&b)));
    let hits = order.iter().take(k).filter(|e| ground_truth.contains(e)).count();
    Ok(hits as f64 / k.min(ground_truth.len()) as f64)
}

/// Mean per-instance top-K accuracy.
pub fn topk_accuracy(masks: &[Vec<f64>], ground_truth: &[Vec<usize>], k: usize) -> Result<f64> {
    if masks.len() != ground_truth.len() {
        return Err(Error::Dimension(format!("{} masks but {} ground truths", masks.len(), ground_truth.len())));
    }
    if masks.is_empty() {
        return Err(Error::Empty("no instances to score"));
    }
    let total: f64 = masks.iter().zip(ground_truth).map(|(m, g)| instance_topk(m, g, k)).sum::<Result<f64>>()?;
    Ok(total / masks.len() as f64)
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half (Mann–Whitney statistic with mid-ranks).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(format!("{pos} positive and {neg} negative edges")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("mask scores"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based mid-rank of the tie group i..=j.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&e| labels[e]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Per-instance ROC-AUC with ground-truth edge ids as positives, averaged.
/// Instances whose edges are all positive (or all negative) have no AUC and
/// are skipped; it is an error if every instance is skipped.
pub fn mean_roc_auc(masks: &[Vec<f64>], ground_truth: &[Vec<usize>]) -> Result<f64> {
    if masks.len() != ground_truth.len() {
        return Err(Error::Dimension(format!("{} masks but {} ground truths", masks.len(), ground_truth.len())));
    }
    if masks.is_empty() {
        return Err(Error::Empty("no instances to score"));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for (m, gt) in masks.iter().zip(ground_truth) {
        let mut labels = vec![false; m.len()];
        for &e in gt {
            *labels.get_mut(e).ok_or_else(|| Error::Dimension(format!("ground-truth edge {e} outside mask of {}", m.len())))? = true;
        }
        match roc_auc(m, &labels) {
            Ok(a) => {
                total += a;
                counted += 1;
            }
            Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if counted == 0 {
        return Err(Error::Degenerate("every instance has a single edge label".into()));
    }
    Ok(total / counted as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub fid_plus_c: f64,
    pub fid_minus_c: f64,
    pub charact_c: f64,
    pub fid_plus_d: f64,
    pub fid_minus_d: f64,
    pub charact_d: f64,
    pub topk_accuracy: Option<f64>,
    pub roc_auc: Option<f64>,
}

/// Ground-truth edges per instance, in the instance's own edge ids.
#[derive(Clone, Copy, Debug)]
pub struct GroundTruthEdges<'a> {
    pub edges: &'a [Vec<usize>],
    pub k: usize,
}

/// Continuous and discrete fidelity plus, when ground truth is given, top-K
/// accuracy and ROC-AUC.
pub fn score(
    model: &GcnParams,
    instances: &[Instance],
    masks: &[MaskPair],
    baseline: Option<&[FeatureMatrix]>,
    ground_truth: Option<GroundTruthEdges<'_>>,
) -> Result<MetricReport> {
    let (fid_plus_c, fid_minus_c) = fidelity(model, instances, masks, baseline)?;
    let discrete: Vec<MaskPair> = masks.iter().map(|m| m.binarize(DISCRETE_THRESHOLD)).collect();
    let (fid_plus_d, fid_minus_d) = fidelity(model, instances, &discrete, baseline)?;
    let (topk, auc) = match ground_truth {
        Some(gt) => {
            let edge_masks: Vec<Vec<f64>> = masks.iter().map(|m| m.edge.clone()).collect();
            (Some(topk_accuracy(&edge_masks, gt.edges, gt.k)?), Some(mean_roc_auc(&edge_masks, gt.edges)?))
        }
        None => (None, None),
    };
    Ok(MetricReport {
        n: instances.len(),
        fid_plus_c,
        fid_minus_c,
        charact_c: charact(fid_plus_c, fid_minus_c),
        fid_plus_d,
        fid_minus_d,
        charact_d: charact(fid_plus_d, fid_minus_d),
        topk_accuracy: topk,
        roc_auc: auc,
    })
}

/// Mean and half-width of a normal 95% interval (`1.96 · sd / √n`, sample
/// standard deviation; 0 for a single value).
pub fn mean_half_width(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("no values to summarise"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, 1.96 * var.sqrt() / n.sqrt()))
}

/// One CSV line of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub dataset: String,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub half_width: f64,
    /// Number of repeated runs summarised.
    pub runs: usize,
    /// Instances per run.
    pub n: usize,
}

/// Rows for each metric, summarised over repeated runs (e.g. seeds).
pub fn report_rows(dataset: &str, method: &str, runs: &[MetricReport]) -> Result<Vec<MetricRow>> {
    let first = runs.first().ok_or(Error::Empty("no runs to summarise"))?;
    type Get = fn(&MetricReport) -> Option<f64>;
    let fields: [(&str, Get); 8] = [
        ("fid_plus_c", |r| Some(r.fid_plus_c)),
        ("fid_minus_c", |r| Some(r.fid_minus_c)),
        ("charact_c", |r| Some(r.charact_c)),
        ("fid_plus_d", |r| Some(r.fid_plus_d)),
        ("fid_minus_d", |r| Some(r.fid_minus_d)),
        ("charact_d", |r| Some(r.charact_d)),
        ("topk_accuracy", |r| r.topk_accuracy),
        ("roc_auc", |r| r.roc_auc),
    ];
    let mut rows = Vec::new();
    for (name, get) in fields {
        let values: Vec<f64> = runs.iter().filter_map(get).collect();
        if values.is_empty() {
            continue;
        }
        let (mean, half_width) = mean_half_width(&values)?;
        rows.push(MetricRow {
            dataset: dataset.to_string(),
            method: method.to_string(),
            metric: name.to_string(),
            mean,
            half_width,
            runs: values.len(),
            n: first.n,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{SparseGraph, Task, TaskKind};

    fn instances() -> (GcnParams, Vec<Instance>) {
        let model = GcnParams::init_with_dims(2, [4, 4, 4], 3, TaskKind::Graph, 11);
        let insts = (0..4)
            .map(|i| {
                let g = SparseGraph::undirected(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
                let rows: Vec<Vec<f64>> = (0..4).map(|v| vec![(v + i) as f64 * 0.3, 1.0 - v as f64 * 0.2]).collect();
                Instance::new(g, FeatureMatrix::from_rows(&rows).unwrap(), Task::Graph { label: None }, &model).unwrap()
            })
            .collect();
        (model, insts)
    }

    #[test]
    fn identity_masks_keep_every_prediction() {
        let (model, insts) = instances();
        for with_nodes in [false, true] {
            let ones: Vec<MaskPair> = insts.iter().map(|i| MaskPair::ones(i.graph(), with_nodes)).collect();
            let (_, fm) = fidelity(&model, &insts, &ones, None).unwrap();
            assert_eq!(fm, 0.0);
            let zeros: Vec<MaskPair> = ones.iter().map(MaskPair::complement).collect();
            let (fp0, _) = fidelity(&model, &insts, &zeros, None).unwrap();
            assert_eq!(fp0, 0.0);
        }
    }

    #[test]
    fn count_mismatch_rejected() {
        let (model, insts) = instances();
        let ones = vec![MaskPair::ones(insts[0].graph(), false)];
        assert!(fidelity(&model, &insts, &ones, None).is_err());
    }

    #[test]
    fn charact_values() {
        assert_eq!(charact(1.0, 0.0), 1.0);
        assert_eq!(charact(0.0, 1.0), 0.0);
        assert!((charact(0.9790, 0.0) - 0.9894).abs() < 5e-5);
    }

    #[test]
    fn topk_perfect_and_clamped() {
        let mask = [0.1, 0.9, 0.8, 0.2];
        assert_eq!(instance_topk(&mask, &[1, 2], 2).unwrap(), 1.0);
        assert_eq!(instance_topk(&mask, &[1], 3).unwrap(), 1.0);
        assert_eq!(instance_topk(&mask, &[0, 3], 2).unwrap(), 0.0);
        assert!(instance_topk(&mask, &[], 2).is_err());
    }

    #[test]
    fn roc_auc_known_values() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn mean_auc_skips_single_label_instances() {
        let masks = vec![vec![0.9, 0.1], vec![0.3, 0.4]];
        assert_eq!(mean_roc_auc(&masks, &[vec![0], vec![0, 1]]).unwrap(), 1.0);
        assert!(mean_roc_auc(&masks[1..], &[vec![0, 1]]).is_err());
    }

    #[test]
    fn half_width_formula() {
        let (m, h) = mean_half_width(&[1.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((h - 1.96 * 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_half_width(&[4.0]).unwrap(), (4.0, 0.0));
    }

    #[test]
    fn rows_skip_missing_metrics() {
        let r = MetricReport {
            n: 3,
            fid_plus_c: 1.0,
            fid_minus_c: 0.0,
            charact_c: 1.0,
            fid_plus_d: 1.0,
            fid_minus_d: 0.0,
            charact_d: 1.0,
            topk_accuracy: None,
            roc_auc: None,
        };
        let rows = report_rows("tree-grid", "pns-e", &[r, r]).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|row| row.half_width == 0.0 && row.runs == 2));
    }
}
