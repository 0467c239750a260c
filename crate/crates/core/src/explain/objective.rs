//! Differentiable PN / PS / PNS lower-bound terms and the regularised loss.
//!
//! Every model evaluation is `f^ŷ(w, X)`, the probability the frozen model
//! assigns to its own prediction under substituted edge weights `w` and
//! features `X`. The factual inputs are `M_e ⊙ E` and `M_f ⊙ X`; the
//! complement inputs are `clamp(1 - M + ε, 0, 1) ⊙ ·` with `ε` uniform in
//! `[-σ, σ]` per entry.

use ndarray::Array2;
use rand::Rng;

use super::config::{EntropyReduction, ExplainConfig};
use crate::error::{Error, Result};
use crate::gcn::GcnParams;
use crate::graph::{FeatureMatrix, Instance, MaskPair};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-[m ln m + (1-m) ln(1-m)]`, with `0 ln 0 = 0`.
pub fn binary_entropy(m: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { p * p.ln() };
    -(term(m) + term(1.0 - m))
}

/// Unconstrained mask parameters; masks are their logistic images, so every
/// entry stays inside `(0, 1)` whatever the optimiser does.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskParams {
    pub edge: Vec<f64>,
    pub node: Option<Vec<f64>>,
}

impl MaskParams {
    /// Logits uniform in `±scale`, so masks start near 0.5.
    pub fn init<R: Rng>(num_edges: usize, num_nodes: Option<usize>, scale: f64, rng: &mut R) -> Self {
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| if scale > 0.0 { rng.gen_range(-scale..=scale) } else { 0.0 }).collect()
        };
        let edge = draw(num_edges);
        let node = num_nodes.map(draw);
        Self { edge, node }
    }

    pub fn masks(&self) -> MaskPair {
        MaskPair {
            edge: self.edge.iter().map(|&t| sigmoid(t)).collect(),
            node: self.node.as_ref().map(|v| v.iter().map(|&t| sigmoid(t)).collect()),
        }
    }
}

/// Which channel a complement sample perturbs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Edges,
    Features,
    Both,
}

/// Perturbed inputs for one complement draw.
#[derive(Clone, Debug)]
pub struct ComplementSample {
    pub edge_weights: Vec<f64>,
    pub features: FeatureMatrix,
}

fn uniform<R: Rng>(n: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| if sigma > 0.0 { rng.gen_range(-sigma..=sigma) } else { 0.0 }).collect()
}

fn complement_scale(m: f64, eps: f64) -> (f64, bool) {
    let raw = 1.0 - m + eps;
    (raw.clamp(0.0, 1.0), raw > 0.0 && raw < 1.0)
}

/// Draws one complement of the explanation. The channel not named by
/// `which` keeps its factual masked value; for edge-only masks the features
/// are left as they are.
pub fn sample_complement<R: Rng>(
    instance: &Instance,
    masks: &MaskPair,
    which: Which,
    rng: &mut R,
    sigma_e: f64,
    sigma_f: f64,
) -> Result<ComplementSample> {
    masks.validate(instance.graph())?;
    let w0 = instance.graph().weights();
    let edge_weights = if which == Which::Features {
        masks.edge.iter().zip(w0).map(|(m, w)| m * w).collect()
    } else {
        let eps = uniform(w0.len(), sigma_e, rng);
        masks.edge.iter().zip(w0).zip(eps).map(|((&m, &w), e)| complement_scale(m, e).0 * w).collect()
    };
    let mut x = instance.features().as_array().clone();
    if let Some(node) = &masks.node {
        let eps = if which == Which::Edges { vec![0.0; node.len()] } else { uniform(node.len(), sigma_f, rng) };
        for ((mut row, &m), e) in x.outer_iter_mut().zip(node).zip(eps) {
            let s = if which == Which::Edges { m } else { complement_scale(m, e).0 };
            row *= s;
        }
    }
    Ok(ComplementSample { edge_weights, features: FeatureMatrix::new(x)? })
}

/// Pre-drawn ε for one evaluation: per Monte-Carlo sample, separate draws
/// for each expectation. Fixing it makes the loss a deterministic function
/// of the mask parameters.
#[derive(Clone, Debug)]
pub struct Noise {
    samples: Vec<NoiseSample>,
}

#[derive(Clone, Debug)]
struct NoiseSample {
    /// Both channels complemented.
    e00: Vec<f64>,
    f00: Vec<f64>,
    /// Only edges complemented (also the edge-only expectation).
    e01: Vec<f64>,
    /// Only features complemented.
    f10: Vec<f64>,
}

impl Noise {
    /// `num_nodes` is `None` for edge-only masks.
    pub fn draw<R: Rng>(
        num_edges: usize,
        num_nodes: Option<usize>,
        sigma_e: f64,
        sigma_f: f64,
        samples: usize,
        rng: &mut R,
    ) -> Self {
        let with_f = num_nodes.is_some();
        let nf = num_nodes.unwrap_or(0);
        let samples = (0..samples)
            .map(|_| NoiseSample {
                e00: if with_f { uniform(num_edges, sigma_e, rng) } else { Vec::new() },
                f00: uniform(nf, sigma_f, rng),
                e01: uniform(num_edges, sigma_e, rng),
                f10: uniform(nf, sigma_f, rng),
            })
            .collect();
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A scalar together with its gradient with respect to the mask values.
#[derive(Clone, Debug)]
pub struct TermValue {
    pub value: f64,
    pub d_edge: Vec<f64>,
    pub d_node: Option<Vec<f64>>,
}

impl TermValue {
    fn zero(masks: &MaskPair) -> Self {
        Self { value: 0.0, d_edge: vec![0.0; masks.edge.len()], d_node: masks.node.as_ref().map(|n| vec![0.0; n.len()]) }
    }

    fn add_scaled(&mut self, other: &TermValue, c: f64) {
        self.value += c * other.value;
        for (a, b) in self.d_edge.iter_mut().zip(&other.d_edge) {
            *a += c * b;
        }
        if let (Some(a), Some(b)) = (self.d_node.as_mut(), other.d_node.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
    }
}

/// How one input channel is formed from its mask.
enum Channel<'a> {
    Factual,
    Complement(&'a [f64]),
}

/// `f^ŷ` under edge channel `ec` and feature channel `fc`, with its
/// gradient with respect to the mask entries.
fn masked_prob(
    model: &GcnParams,
    instance: &Instance,
    masks: &MaskPair,
    ec: Channel<'_>,
    fc: Channel<'_>,
) -> Result<TermValue> {
    let w0 = instance.graph().weights();
    let (weights, dw_dm): (Vec<f64>, Vec<f64>) = match ec {
        Channel::Factual => masks.edge.iter().zip(w0).map(|(&m, &w)| (m * w, w)).unzip(),
        Channel::Complement(eps) => masks
            .edge
            .iter()
            .zip(w0)
            .zip(eps)
            .map(|((&m, &w), &e)| {
                let (s, live) = complement_scale(m, e);
                (s * w, if live { -w } else { 0.0 })
            })
            .unzip(),
    };
    let x0 = instance.features().as_array();
    let (features, ds_dm): (Array2<f64>, Option<Vec<f64>>) = match &masks.node {
        None => (x0.clone(), None),
        Some(node) => {
            let (scale, deriv): (Vec<f64>, Vec<f64>) = match fc {
                Channel::Factual => node.iter().map(|&m| (m, 1.0)).unzip(),
                Channel::Complement(eps) => node
                    .iter()
                    .zip(eps)
                    .map(|(&m, &e)| {
                        let (s, live) = complement_scale(m, e);
                        (s, if live { -1.0 } else { 0.0 })
                    })
                    .unzip(),
            };
            let mut x = x0.clone();
            for (mut row, s) in x.outer_iter_mut().zip(&scale) {
                row *= *s;
            }
            (x, Some(deriv))
        }
    };
    let (probs, tape) = model.forward(instance.graph(), &weights, features.view(), instance.readout())?;
    let yhat = instance.predicted();
    let mut upstream = vec![0.0; probs.len()];
    upstream[yhat] = 1.0;
    let grads = model.backward_inputs(&tape, &upstream)?;
    let d_edge = grads.edge_weights.iter().zip(&dw_dm).map(|(g, d)| g * d).collect();
    let d_node = ds_dm.map(|deriv| {
        grads
            .features
            .outer_iter()
            .zip(x0.outer_iter())
            .zip(deriv)
            .map(|((g, x), d)| g.dot(&x) * d)
            .collect()
    });
    Ok(TermValue { value: probs[yhat], d_edge, d_node })
}

/// `f^ŷ(M_e ⊙ E, M_f ⊙ X)`: how strongly the explanation alone supports
/// the prediction.
pub fn ps_term(model: &GcnParams, instance: &Instance, masks: &MaskPair) -> Result<TermValue> {
    masks.validate(instance.graph())?;
    masked_prob(model, instance, masks, Channel::Factual, Channel::Factual)
}

fn pn_with_noise(model: &GcnParams, instance: &Instance, masks: &MaskPair, priors: [f64; 3], noise: &Noise) -> Result<TermValue> {
    if noise.is_empty() {
        return Err(Error::Config("at least one complement sample is required".into()));
    }
    let mut acc = TermValue::zero(masks);
    let k = 1.0 / noise.len() as f64;
    for s in &noise.samples {
        if masks.node.is_none() {
            let t = masked_prob(model, instance, masks, Channel::Complement(&s.e01), Channel::Factual)?;
            acc.add_scaled(&t, -k);
            continue;
        }
        let [p00, p01, p10] = priors;
        if p00 > 0.0 {
            let t = masked_prob(model, instance, masks, Channel::Complement(&s.e00), Channel::Complement(&s.f00))?;
            acc.add_scaled(&t, -k * p00);
        }
        if p01 > 0.0 {
            let t = masked_prob(model, instance, masks, Channel::Complement(&s.e01), Channel::Factual)?;
            acc.add_scaled(&t, -k * p01);
        }
        if p10 > 0.0 {
            let t = masked_prob(model, instance, masks, Channel::Factual, Channel::Complement(&s.f10))?;
            acc.add_scaled(&t, -k * p10);
        }
    }
    acc.value += 1.0;
    Ok(acc)
}

/// Monte-Carlo estimate of `1 - P(Y = ŷ | complement of the explanation)`
/// with `cfg.mc_samples` draws per expectation.
pub fn pn_term<R: Rng>(
    model: &GcnParams,
    instance: &Instance,
    masks: &MaskPair,
    cfg: &ExplainConfig,
    rng: &mut R,
) -> Result<TermValue> {
    masks.validate(instance.graph())?;
    let nodes = masks.node.as_ref().map(Vec::len);
    let noise = Noise::draw(masks.edge.len(), nodes, cfg.sigma_e, cfg.sigma_f, cfg.mc_samples, rng);
    pn_with_noise(model, instance, masks, cfg.priors, &noise)
}

/// Unclamped `PN + PS - 1`; the reported bound is `max(0, ·)`.
pub fn pns_lower_bound<R: Rng>(
    model: &GcnParams,
    instance: &Instance,
    masks: &MaskPair,
    cfg: &ExplainConfig,
    rng: &mut R,
) -> Result<TermValue> {
    let mut pn = pn_term(model, instance, masks, cfg, rng)?;
    let ps = ps_term(model, instance, masks)?;
    pn.add_scaled(&ps, 1.0);
    pn.value -= 1.0;
    Ok(pn)
}

/// Loss value, objective parts and gradient with respect to the mask
/// logits.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub loss: f64,
    /// Unclamped objective being maximised.
    pub objective: f64,
    pub pn: Option<f64>,
    pub ps: Option<f64>,
    pub grad_edge: Vec<f64>,
    pub grad_node: Option<Vec<f64>>,
}

/// `L = -objective + α_e Σ M_e + β_e Σ Ent(M_e) [+ α_f Σ M_f + β_f Σ Ent(M_f)]`
/// under fixed noise, differentiated with respect to the logits.
pub fn evaluate(
    model: &GcnParams,
    instance: &Instance,
    params: &MaskParams,
    cfg: &ExplainConfig,
    noise: &Noise,
) -> Result<Evaluation> {
    let masks = params.masks();
    masks.validate(instance.graph())?;
    if masks.node.is_some() != cfg.objective.uses_features() {
        return Err(Error::Config(format!("objective {} does not match the mask channels", cfg.objective)));
    }
    let mut obj = TermValue::zero(&masks);
    let mut pn = None;
    let mut ps = None;
    if cfg.objective.has_pn() {
        let t = pn_with_noise(model, instance, &masks, cfg.priors, noise)?;
        pn = Some(t.value);
        obj.add_scaled(&t, 1.0);
    }
    if cfg.objective.has_ps() {
        let t = ps_term(model, instance, &masks)?;
        ps = Some(t.value);
        obj.add_scaled(&t, 1.0);
    }
    if pn.is_some() && ps.is_some() {
        obj.value -= 1.0;
    }

    let mut loss = -obj.value;
    let mut channel = |theta: &[f64], m: &[f64], d_obj: &[f64], alpha: f64, beta: f64| -> Vec<f64> {
        let beta = match cfg.entropy_reduction {
            EntropyReduction::Sum => beta,
            EntropyReduction::Mean => beta / m.len().max(1) as f64,
        };
        loss += m.iter().map(|&v| alpha * v + beta * binary_entropy(v)).sum::<f64>();
        theta
            .iter()
            .zip(m)
            .zip(d_obj)
            .map(|((&t, &v), &g)| {
                let dm_dt = v * (1.0 - v);
                // d Ent / dθ = -θ m (1 - m)
                (alpha - g) * dm_dt - beta * t * dm_dt
            })
            .collect()
    };
    let grad_edge = channel(&params.edge, &masks.edge, &obj.d_edge, cfg.alpha_e, cfg.beta_e);
    let grad_node = match (&params.node, &masks.node, &obj.d_node) {
        (Some(t), Some(m), Some(d)) => Some(channel(t, m, d, cfg.alpha_f, cfg.beta_f)),
        _ => None,
    };
    Ok(Evaluation { loss, objective: obj.value, pn, ps, grad_edge, grad_node })
}

/// Loss and logit gradients with a fresh noise draw.
pub fn overall_loss<R: Rng>(
    model: &GcnParams,
    instance: &Instance,
    params: &MaskParams,
    cfg: &ExplainConfig,
    rng: &mut R,
) -> Result<Evaluation> {
    let nodes = params.node.as_ref().map(Vec::len);
    let noise = Noise::draw(params.edge.len(), nodes, cfg.sigma_e, cfg.sigma_f, cfg.mc_samples, rng);
    evaluate(model, instance, params, cfg, &noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::Objective;
    use crate::graph::{SparseGraph, Task, TaskKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (GcnParams, Instance) {
        let model = GcnParams::init_with_dims(2, [4, 4, 4], 2, TaskKind::Graph, 4);
        let g = SparseGraph::undirected(4, [(0, 1), (1, 2), (2, 3), (0, 2)]).unwrap();
        let x = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, -0.5]]).unwrap();
        let inst = Instance::new(g, x, Task::Graph { label: None }, &model).unwrap();
        (model, inst)
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn ps_of_ones_is_unmasked_confidence() {
        let (model, inst) = toy();
        let masks = MaskPair::ones(inst.graph(), true);
        let ps = ps_term(&model, &inst, &masks).unwrap();
        assert_eq!(ps.value, inst.probs()[inst.predicted()]);
    }

    #[test]
    fn complement_sampling_edge_cases() {
        let (_, inst) = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ones = MaskPair::ones(inst.graph(), false);
        let c = sample_complement(&inst, &ones, Which::Edges, &mut rng, 0.0, 0.0).unwrap();
        assert!(c.edge_weights.iter().all(|&w| w == 0.0));
        let zeros = MaskPair { edge: vec![0.0; 4], node: None };
        let c = sample_complement(&inst, &zeros, Which::Edges, &mut rng, 0.0, 0.0).unwrap();
        assert_eq!(c.edge_weights, inst.graph().weights());
        let half = MaskPair { edge: vec![0.5; 4], node: None };
        for _ in 0..50 {
            let c = sample_complement(&inst, &half, Which::Both, &mut rng, 0.5, 0.5).unwrap();
            assert!(c.edge_weights.iter().all(|w| (0.0..=1.0).contains(w)));
        }
    }

    #[test]
    fn pns_is_pn_plus_ps_minus_one() {
        let (model, inst) = toy();
        let cfg = ExplainConfig { objective: Objective::PnsEf, mc_samples: 3, ..ExplainConfig::default() };
        let masks = MaskPair { edge: vec![0.2, 0.9, 0.4, 0.7], node: Some(vec![0.3, 0.6, 0.8, 0.1]) };
        let pn = pn_term(&model, &inst, &masks, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let ps = ps_term(&model, &inst, &masks).unwrap();
        let pns = pns_lower_bound(&model, &inst, &masks, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!((pns.value - (pn.value + ps.value - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_mc_mean_is_deterministic() {
        let (model, inst) = toy();
        let cfg = ExplainConfig { sigma_e: 0.0, mc_samples: 7, ..ExplainConfig::default() };
        let masks = MaskPair { edge: vec![0.2, 0.9, 0.4, 0.7], node: None };
        let pn = pn_term(&model, &inst, &masks, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let w: Vec<f64> = masks.edge.iter().map(|m| 1.0 - m).collect();
        let direct = model.predict(inst.graph(), &w, inst.features().view(), inst.readout()).unwrap();
        assert!((pn.value - (1.0 - direct[inst.predicted()])).abs() < 1e-12);
    }

    #[test]
    fn constant_model_has_zero_pns() {
        let (model, inst) = toy();
        // Zero every weight: the output is the softmax of the readout bias.
        let mut json: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
        for layer in json["layers"].as_array_mut().unwrap() {
            for v in layer["data"].as_array_mut().unwrap() {
                *v = 0.0.into();
            }
        }
        for v in json["readout"]["data"].as_array_mut().unwrap() {
            *v = 0.0.into();
        }
        let flat = GcnParams::from_json(&json.to_string()).unwrap();
        let inst = Instance::new(inst.graph().clone(), inst.features().clone(), inst.task(), &flat).unwrap();
        let cfg = ExplainConfig::default();
        let masks = MaskPair { edge: vec![0.1, 0.5, 0.9, 0.3], node: None };
        let pns = pns_lower_bound(&flat, &inst, &masks, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(pns.value.abs() < 1e-12);
        let pn = pn_term(&flat, &inst, &masks, &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!((pn.value - (1.0 - inst.probs()[inst.predicted()])).abs() < 1e-12);
    }

    #[test]
    fn mean_reduction_scales_entropy_by_mask_size() {
        let (model, inst) = toy();
        let params = MaskParams { edge: vec![0.3, -0.2, 0.0, 1.0], node: None };
        let noise = Noise::draw(4, None, 0.5, 0.5, 1, &mut ChaCha8Rng::seed_from_u64(1));
        let at = |entropy_reduction, beta_e| {
            let cfg = ExplainConfig { entropy_reduction, beta_e, alpha_e: 0.0, ..ExplainConfig::default() };
            evaluate(&model, &inst, &params, &cfg, &noise).unwrap().loss
        };
        let (sum, mean) = (at(EntropyReduction::Sum, 1.0), at(EntropyReduction::Mean, 1.0));
        let base = at(EntropyReduction::Sum, 0.0);
        assert!(((sum - base) / 4.0 - (mean - base)).abs() < 1e-12);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let (model, inst) = toy();
        let cases = Objective::ALL.into_iter().flat_map(|o| [(o, EntropyReduction::Mean), (o, EntropyReduction::Sum)]);
        for (objective, entropy_reduction) in cases {
            let cfg = ExplainConfig { objective, entropy_reduction, mc_samples: 2, ..ExplainConfig::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let nodes = objective.uses_features().then_some(4);
            let params = MaskParams::init(4, nodes, 1.0, &mut rng);
            let noise = Noise::draw(4, nodes, cfg.sigma_e, cfg.sigma_f, 2, &mut rng);
            let e = evaluate(&model, &inst, &params, &cfg, &noise).unwrap();
            let h = 1e-5;
            let loss_at = |p: &MaskParams| evaluate(&model, &inst, p, &cfg, &noise).unwrap().loss;
            for i in 0..4 {
                let (mut a, mut b) = (params.clone(), params.clone());
                a.edge[i] += h;
                b.edge[i] -= h;
                let fd = (loss_at(&a) - loss_at(&b)) / (2.0 * h);
                assert!((fd - e.grad_edge[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "{objective} edge {i}: {fd} vs {}", e.grad_edge[i]);
            }
            if let Some(gn) = &e.grad_node {
                for i in 0..4 {
                    let (mut a, mut b) = (params.clone(), params.clone());
                    a.node.as_mut().unwrap()[i] += h;
                    b.node.as_mut().unwrap()[i] -= h;
                    let fd = (loss_at(&a) - loss_at(&b)) / (2.0 * h);
                    assert!((fd - gn[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "{objective} node {i}: {fd} vs {}", gn[i]);
                }
            }
        }
    }
}
