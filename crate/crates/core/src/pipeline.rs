//! Label splitting, training, and template-voting inference.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::assignment::{decode_assignment, DecodeRule};
use crate::error::{Error, Result};
use crate::features::{FeatureManifest, NormalizationRecord};
use crate::graph::{
    build_association_graph, ground_truth_assignment, BaseLabel, IndividualGraph, SemanticLabel, ViewAngle,
};
use crate::model::{self, init_params, EagmnParams, Hyperparameters};
use crate::numerics::AdamState;
use crate::rng;

/// Step budget for full-size clinical training sets; desk-scale runs use
/// [`DEFAULT_STEPS`].
pub const FULL_SCALE_STEPS: usize = 100_000;
pub const DEFAULT_STEPS: usize = 2_000;

pub fn merge_labels(label: SemanticLabel) -> BaseLabel {
    label.merged()
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Re-indexes labels along the flow. LAD and LCX nodes must each form one
/// connected chain with strictly increasing hop depth from the root; they
/// are numbered by depth. D and OM nodes are numbered by depth, ties going
/// to the proximal key point closer to the root's proximal key point, then
/// to the lower node id.
pub fn split_labels(g: &IndividualGraph) -> Result<IndividualGraph> {
    let depth = g.hop_depths();
    let adj = g.adjacency();
    let mut by_base: BTreeMap<BaseLabel, Vec<usize>> = BTreeMap::new();
    for (i, n) in g.nodes.iter().enumerate() {
        let label = n.label.ok_or(Error::MissingLabel(n.id))?;
        by_base.entry(label.base).or_default().push(i);
    }
    let mut out = g.clone();
    let origin: [f64; 2] = g.nodes[g.root].key_points[0].into();
    for (base, mut members) in by_base {
        if base == BaseLabel::Lma {
            if members.len() > 1 {
                return Err(Error::AmbiguousSplit(format!("{} LMA segments", members.len())));
            }
            out.nodes[members[0]].label = Some(SemanticLabel::base(BaseLabel::Lma));
            continue;
        }
        if base.is_main_branch() {
            let set: BTreeSet<usize> = members.iter().copied().collect();
            let mut seen = BTreeSet::from([members[0]]);
            let mut stack = vec![members[0]];
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if set.contains(&v) && seen.insert(v) {
                        stack.push(v);
                    }
                }
            }
            if seen.len() != set.len() {
                return Err(Error::AmbiguousSplit(format!("{base} segments form more than one run")));
            }
            members.sort_by_key(|&i| (depth[i], i));
            if members.windows(2).any(|w| depth[w[0]] == depth[w[1]]) {
                return Err(Error::AmbiguousSplit(format!("{base} run branches")));
            }
        } else {
            members.sort_by(|&a, &b| {
                let da = euclid(g.nodes[a].key_points[0].into(), origin);
                let db = euclid(g.nodes[b].key_points[0].into(), origin);
                depth[a]
                    .cmp(&depth[b])
                    .then(da.total_cmp(&db))
                    .then(g.nodes[a].id.cmp(&g.nodes[b].id))
            });
        }
        for (k, &i) in members.iter().enumerate() {
            out.nodes[i].label = Some(SemanticLabel::new(base, k as u32 + 1));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden: usize,
    pub attention_rounds: usize,
    pub conv_rounds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: DEFAULT_STEPS,
            lr: crate::numerics::DEFAULT_LR,
            seed: 0,
            hidden: crate::numerics::DEFAULT_HIDDEN,
            attention_rounds: model::DEFAULT_ATTENTION_ROUNDS,
            conv_rounds: model::DEFAULT_CONV_ROUNDS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: EagmnParams,
    /// Loss of the sampled pair at every step, before that step's update.
    pub losses: Vec<f64>,
}

/// Every ordered same-view pair of distinct graphs.
pub fn training_pairs(graphs: &[IndividualGraph]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..graphs.len() {
        for j in 0..graphs.len() {
            if i != j && graphs[i].view_angle == graphs[j].view_angle {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Fits feature normalization on `graphs`, then runs `steps` Adam updates,
/// each on a uniformly drawn same-view pair (smaller graph first) with the
/// summed squared error against the ground-truth assignment.
pub fn train(cfg: &TrainConfig, graphs: &[IndividualGraph], manifest: Option<FeatureManifest>) -> Result<TrainOutcome> {
    train_on_pairs(cfg, graphs, &training_pairs(graphs), manifest)
}

/// [`train`] restricted to the given index pairs into `graphs`.
pub fn train_on_pairs(
    cfg: &TrainConfig,
    graphs: &[IndividualGraph],
    pairs: &[(usize, usize)],
    manifest: Option<FeatureManifest>,
) -> Result<TrainOutcome> {
    if pairs.is_empty() {
        return Err(Error::NoTrainingPair);
    }
    if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= graphs.len() || b >= graphs.len()) {
        return Err(Error::InvalidArgument(format!(
            "training pair ({a}, {b}) is out of range"
        )));
    }
    let record = NormalizationRecord::fit(graphs)?;
    let normalized = graphs.iter().map(|g| record.apply(g)).collect::<Result<Vec<_>>>()?;
    let hyper = Hyperparameters {
        feature_dim: record.dim(),
        hidden: cfg.hidden,
        attention_rounds: cfg.attention_rounds,
        conv_rounds: cfg.conv_rounds,
    };
    let mut params = init_params(hyper, cfg.seed)?;
    if let Some(m) = manifest {
        if m.names.len() != hyper.feature_dim {
            return Err(Error::shape("feature manifest", hyper.feature_dim, m.names.len()));
        }
        params.manifest = m;
    }
    params.normalization = Some(record);
    let mut adam = AdamState::new(cfg.lr);
    let mut sampler = rng::stream(cfg.seed, "train/pairs");
    let mut losses = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let (a, b) = pairs[sampler.random_range(0..pairs.len())];
        let (g1, g2) = if normalized[a].len() <= normalized[b].len() {
            (&normalized[a], &normalized[b])
        } else {
            (&normalized[b], &normalized[a])
        };
        let assoc = build_association_graph(g1, g2)?;
        let target = ground_truth_assignment(g1, g2)?;
        let (loss, grads) = model::loss_and_gradients(&params, &assoc, &target)?;
        adam.step(&mut params.tensors_mut(), &grads)?;
        losses.push(loss);
    }
    Ok(TrainOutcome { params, losses })
}

/// Splits `pool` into templates (the `per_view` largest graphs of each
/// view, earlier index first on ties) and the rest, both in pool order.
pub fn select_templates(pool: Vec<IndividualGraph>, per_view: usize) -> (Vec<IndividualGraph>, Vec<IndividualGraph>) {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool[b].len().cmp(&pool[a].len()).then(a.cmp(&b)));
    let mut taken = vec![false; pool.len()];
    let mut per: BTreeMap<ViewAngle, usize> = BTreeMap::new();
    for i in order {
        let n = per.entry(pool[i].view_angle).or_default();
        if *n < per_view {
            *n += 1;
            taken[i] = true;
        }
    }
    let (mut templates, mut rest) = (Vec::new(), Vec::new());
    for (g, t) in pool.into_iter().zip(taken) {
        if t {
            templates.push(g)
        } else {
            rest.push(g)
        }
    }
    (templates, rest)
}

/// Applies the stored normalization record, if any.
pub fn prepare(params: &EagmnParams, g: &IndividualGraph) -> Result<IndividualGraph> {
    match &params.normalization {
        Some(rec) => rec.apply(g),
        None => Ok(g.clone()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub label: BaseLabel,
    pub count: usize,
    pub mean_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodePrediction {
    pub node_id: u64,
    pub predicted: BaseLabel,
    #[serde(rename = "true", skip_serializing_if = "Option::is_none", default)]
    pub truth: Option<BaseLabel>,
    pub votes: Vec<Vote>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedTemplate {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub test_case_id: Option<String>,
    pub per_node: Vec<NodePrediction>,
    pub skipped_templates: Vec<SkippedTemplate>,
}

impl Prediction {
    /// `(true, predicted)` for every node with a known label.
    pub fn labeled_pairs(&self) -> Vec<(BaseLabel, BaseLabel)> {
        self.per_node
            .iter()
            .filter_map(|n| n.truth.map(|t| (t, n.predicted)))
            .collect()
    }
}

fn template_id(g: &IndividualGraph, k: usize) -> String {
    g.case_id.clone().unwrap_or_else(|| format!("template-{k}"))
}

/// Raw-feature graphs in, merged labels out. Each usable template (same
/// view, at least as many nodes as the test graph) casts one vote per test
/// node for the merged label of its matched node; the most frequent label
/// wins, then the higher mean matched probability, then the label order
/// LMA < LAD < LCX < D < OM.
pub fn infer_labels(
    params: &EagmnParams,
    test: &IndividualGraph,
    templates: &[IndividualGraph],
    rule: DecodeRule,
) -> Result<Prediction> {
    let g1 = prepare(params, test)?;
    let mut skipped = Vec::new();
    let mut tallies: Vec<BTreeMap<BaseLabel, (usize, f64)>> = vec![BTreeMap::new(); test.len()];
    let mut used = 0;
    for (k, tpl) in templates.iter().enumerate() {
        let id = template_id(tpl, k);
        if tpl.view_angle != test.view_angle {
            skipped.push(SkippedTemplate {
                id,
                reason: format!(
                    "view angle {} differs from test view {}",
                    tpl.view_angle, test.view_angle
                ),
            });
            continue;
        }
        if tpl.len() < test.len() {
            skipped.push(SkippedTemplate {
                id,
                reason: format!("template has {} nodes, test graph has {}", tpl.len(), test.len()),
            });
            continue;
        }
        if let Some(n) = tpl.nodes.iter().find(|n| n.label.is_none()) {
            skipped.push(SkippedTemplate {
                id,
                reason: format!("node {} is unlabeled", n.id),
            });
            continue;
        }
        let g2 = prepare(params, tpl)?;
        let assoc = build_association_graph(&g1, &g2)?;
        let p = model::predict(params, &assoc)?;
        let cols = decode_assignment(&p, rule)?;
        for (i, &a) in cols.iter().enumerate() {
            let label = tpl.nodes[a].label.expect("checked above").merged();
            let e = tallies[i].entry(label).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += p.get(i, a);
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoUsableTemplate(
            skipped.into_iter().map(|s| (s.id, s.reason)).collect(),
        ));
    }
    let per_node = tallies
        .into_iter()
        .zip(&test.nodes)
        .map(|(tally, node)| {
            let mut votes: Vec<Vote> = tally
                .into_iter()
                .map(|(label, (count, sum))| Vote {
                    label,
                    count,
                    mean_prob: sum / count as f64,
                })
                .collect();
            votes.sort_by(|a, b| {
                b.count
                    .cmp(&a.count)
                    .then(b.mean_prob.total_cmp(&a.mean_prob))
                    .then(a.label.cmp(&b.label))
            });
            NodePrediction {
                node_id: node.id,
                predicted: votes[0].label,
                truth: node.label.map(SemanticLabel::merged),
                votes,
            }
        })
        .collect();
    Ok(Prediction {
        test_case_id: test.case_id.clone(),
        per_node,
        skipped_templates: skipped,
    })
}
