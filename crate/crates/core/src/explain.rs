//! Perturbation explanations: how much of a prediction survives when raw
//! features or template nodes are masked.
//!
//! Fidelity is the fraction of association vertices whose 0.5-binarized
//! prediction (`y >= 0.5`) matches the unmasked one. Masking sets raw
//! feature values to 0 before the model's normalization record is applied;
//! a masked template node keeps its edges and loses all of its features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_association_graph, IndividualGraph, SemanticLabel};
use crate::model::{self, EagmnParams};
use crate::pipeline::prepare;

pub const DEFAULT_TAU: f64 = 0.8;

/// `true` keeps an item, `false` masks it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FidelityMasks {
    pub nodes: Vec<bool>,
    pub features: Vec<bool>,
}

impl FidelityMasks {
    pub fn full(n2: usize, d: usize) -> Self {
        FidelityMasks {
            nodes: vec![true; n2],
            features: vec![true; d],
        }
    }
}

fn binarize(values: &[f64]) -> Vec<bool> {
    values.iter().map(|&v| v >= 0.5).collect()
}

#[derive(Clone, Debug)]
pub struct FidelityContext<'a> {
    params: &'a EagmnParams,
    g1: &'a IndividualGraph,
    g2: &'a IndividualGraph,
    baseline: Vec<bool>,
}

impl<'a> FidelityContext<'a> {
    pub fn new(params: &'a EagmnParams, g1: &'a IndividualGraph, g2: &'a IndividualGraph) -> Result<Self> {
        let baseline = binarize(Self::run(params, g1, g2)?.as_slice());
        Ok(FidelityContext {
            params,
            g1,
            g2,
            baseline,
        })
    }

    fn run(params: &EagmnParams, g1: &IndividualGraph, g2: &IndividualGraph) -> Result<crate::numerics::Matrix> {
        let assoc = build_association_graph(&prepare(params, g1)?, &prepare(params, g2)?)?;
        Ok(model::predict(params, &assoc)?.0)
    }

    pub fn fidelity(&self, masks: &FidelityMasks) -> Result<f64> {
        let d = self.g1.feature_dim();
        if masks.nodes.len() != self.g2.len() || masks.features.len() != d {
            return Err(Error::shape(
                "fidelity masks",
                format!("{} nodes, {} features", self.g2.len(), d),
                format!("{} nodes, {} features", masks.nodes.len(), masks.features.len()),
            ));
        }
        let apply = |g: &IndividualGraph, node_mask: Option<&[bool]>| {
            let mut out = g.clone();
            for (i, n) in out.nodes.iter_mut().enumerate() {
                let keep_node = node_mask.is_none_or(|m| m[i]);
                for (c, v) in n.features.iter_mut().enumerate() {
                    if !keep_node || !masks.features[c] {
                        *v = 0.0;
                    }
                }
            }
            out
        };
        let (m1, m2) = if masks.nodes.iter().all(|&k| k) && masks.features.iter().all(|&k| k) {
            (self.g1.clone(), self.g2.clone())
        } else {
            (apply(self.g1, None), apply(self.g2, Some(&masks.nodes)))
        };
        let y = binarize(Self::run(self.params, &m1, &m2)?.as_slice());
        let same = y.iter().zip(&self.baseline).filter(|(a, b)| a == b).count();
        Ok(same as f64 / y.len() as f64)
    }
}

pub fn fidelity(
    params: &EagmnParams,
    g1: &IndividualGraph,
    g2: &IndividualGraph,
    masks: &FidelityMasks,
) -> Result<f64> {
    FidelityContext::new(params, g1, g2)?.fidelity(masks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub item: usize,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityTrace {
    pub tau: f64,
    pub initial_fidelity: f64,
    pub steps: Vec<TraceStep>,
}

impl FidelityTrace {
    pub fn final_fidelity(&self) -> f64 {
        self.steps.last().map_or(self.initial_fidelity, |s| s.fidelity)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tau = {tau} is not in (0, 1]")))
    }
}

/// Adds items one at a time, each time the one giving the highest fidelity
/// (lowest index on ties), until fidelity reaches `tau` or nothing is left.
fn greedy(count: usize, tau: f64, mut eval: impl FnMut(&[bool]) -> Result<f64>) -> Result<FidelityTrace> {
    let mut kept = vec![false; count];
    let initial_fidelity = eval(&kept)?;
    let mut current = initial_fidelity;
    let mut steps = Vec::new();
    while current < tau && steps.len() < count {
        let mut best: Option<(usize, f64)> = None;
        for item in 0..count {
            if kept[item] {
                continue;
            }
            kept[item] = true;
            let f = eval(&kept)?;
            kept[item] = false;
            if best.is_none_or(|(_, b)| f > b) {
                best = Some((item, f));
            }
        }
        let (item, f) = best.expect("an unselected item remains");
        kept[item] = true;
        current = f;
        steps.push(TraceStep { item, fidelity: f });
    }
    Ok(FidelityTrace {
        tau,
        initial_fidelity,
        steps,
    })
}

pub fn feature_trace(
    params: &EagmnParams,
    g1: &IndividualGraph,
    g2: &IndividualGraph,
    tau: f64,
) -> Result<FidelityTrace> {
    check_tau(tau)?;
    let ctx = FidelityContext::new(params, g1, g2)?;
    let n2 = g2.len();
    greedy(g1.feature_dim(), tau, |kept| {
        ctx.fidelity(&FidelityMasks {
            nodes: vec![true; n2],
            features: kept.to_vec(),
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRank {
    pub feature_name: String,
    pub selection_count: usize,
    pub fraction_of_pairs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub tau: f64,
    pub pairs: usize,
    pub ranking: Vec<FeatureRank>,
    pub traces: Vec<FidelityTrace>,
}

/// Greedy feature selection per pair; features ranked by how many pairs
/// selected them (lower index first on ties).
pub fn explain_features(
    params: &EagmnParams,
    pairs: &[(IndividualGraph, IndividualGraph)],
    tau: f64,
) -> Result<FeatureReport> {
    check_tau(tau)?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no pairs to explain".into()));
    }
    let d = params.hyper.feature_dim;
    let mut counts = vec![0usize; d];
    let mut traces = Vec::with_capacity(pairs.len());
    for (g1, g2) in pairs {
        let trace = feature_trace(params, g1, g2, tau)?;
        for s in &trace.steps {
            counts[s.item] += 1;
        }
        traces.push(trace);
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let ranking = order
        .into_iter()
        .map(|c| FeatureRank {
            feature_name: params
                .manifest
                .names
                .get(c)
                .cloned()
                .unwrap_or_else(|| format!("feature_{c}")),
            selection_count: counts[c],
            fraction_of_pairs: counts[c] as f64 / pairs.len() as f64,
        })
        .collect();
    Ok(FeatureReport {
        tau,
        pairs: pairs.len(),
        ranking,
        traces,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeImportance {
    pub node_id: u64,
    pub label: Option<SemanticLabel>,
    pub marginal_gain: f64,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub tau: f64,
    pub initial_fidelity: f64,
    pub final_fidelity: f64,
    /// Template nodes in the order they were restored.
    pub nodes: Vec<NodeImportance>,
}

/// Starts from a fully masked template (`g2`) and restores its nodes
/// greedily; each node's importance is the fidelity it added.
pub fn explain_nodes(params: &EagmnParams, g1: &IndividualGraph, g2: &IndividualGraph, tau: f64) -> Result<NodeReport> {
    check_tau(tau)?;
    let ctx = FidelityContext::new(params, g1, g2)?;
    let d = g1.feature_dim();
    let trace = greedy(g2.len(), tau, |kept| {
        ctx.fidelity(&FidelityMasks {
            nodes: kept.to_vec(),
            features: vec![true; d],
        })
    })?;
    let mut prev = trace.initial_fidelity;
    let nodes = trace
        .steps
        .iter()
        .enumerate()
        .map(|(order, s)| {
            let gain = s.fidelity - prev;
            prev = s.fidelity;
            NodeImportance {
                node_id: g2.nodes[s.item].id,
                label: g2.nodes[s.item].label,
                marginal_gain: gain,
                order,
            }
        })
        .collect();
    Ok(NodeReport {
        tau,
        initial_fidelity: trace.initial_fidelity,
        final_fidelity: trace.final_fidelity(),
        nodes,
    })
}
