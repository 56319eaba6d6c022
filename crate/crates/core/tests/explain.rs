mod common;

use vesselmatch::explain::{explain_features, explain_nodes, fidelity, FidelityMasks, DEFAULT_TAU};
use vesselmatch::features::NormalizationRecord;
use vesselmatch::graph::{build_association_graph, BaseLabel, IndividualGraph, SemanticLabel};
use vesselmatch::model::{self, EagmnParams};

fn binarized(p: &EagmnParams, g1: &IndividualGraph, g2: &IndividualGraph) -> Vec<bool> {
    let rec = p.normalization.as_ref().unwrap();
    let (a, b) = (rec.apply(g1).unwrap(), rec.apply(g2).unwrap());
    let y = model::predict(p, &build_association_graph(&a, &b).unwrap()).unwrap();
    y.matrix().as_slice().iter().map(|&v| v >= 0.5).collect()
}

#[test]
fn fidelity_equals_indicator_count_on_three_by_three() {
    let mut r = common::rng(12);
    let g1 = common::random_tree(&mut r, 3, 3);
    let g2 = common::random_tree(&mut r, 3, 3);
    let mut p = common::random_params(8, 3, 12);
    p.normalization = Some(NormalizationRecord::fit([&g1, &g2]).unwrap());
    let base = binarized(&p, &g1, &g2);
    for bits in 0..64u32 {
        let masks = FidelityMasks {
            nodes: (0..3).map(|k| bits >> k & 1 == 1).collect(),
            features: (3..6).map(|k| bits >> k & 1 == 1).collect(),
        };
        let (mut m1, mut m2) = (g1.clone(), g2.clone());
        for c in 0..3 {
            for i in 0..3 {
                if !masks.features[c] {
                    m1.nodes[i].features[c] = 0.0;
                    m2.nodes[i].features[c] = 0.0;
                }
                if !masks.nodes[i] {
                    m2.nodes[i].features[c] = 0.0;
                }
            }
        }
        let masked = binarized(&p, &m1, &m2);
        let mut same = 0;
        for v in 0..9 {
            if masked[v] == base[v] {
                same += 1;
            }
        }
        assert_eq!(
            fidelity(&p, &g1, &g2, &masks).unwrap(),
            same as f64 / 9.0,
            "masks {bits:06b}"
        );
    }
    assert_eq!(fidelity(&p, &g1, &g2, &FidelityMasks::full(3, 3)).unwrap(), 1.0);
}

/// Zeroes every first-layer weight that reads feature channel `c` of any
/// node block, so the model ignores that channel.
fn blind_to_channel(p: &mut EagmnParams, c: usize) {
    let d = p.hyper.feature_dim;
    for name in ["vertex_embed", "edge_embed"] {
        let w = &mut p.network_mut(name).unwrap().layers[0].weight;
        for block in 0..w.rows() / d {
            for o in 0..w.cols() {
                w[(block * d + c, o)] = 0.0;
            }
        }
    }
}

#[test]
fn feature_that_alone_drives_output_is_picked_first() {
    let mut r = common::rng(40);
    let mut p = common::random_params(8, 2, 40);
    blind_to_channel(&mut p, 1);
    let mut pairs = vec![];
    while pairs.len() < 5 {
        let g1 = common::random_tree(&mut r, 3, 2);
        let mut g2 = common::random_tree(&mut r, 4, 2);
        for n in &mut g2.nodes {
            n.features[0] = 3.0 * n.features[0] - 1.0;
        }
        // Only pairs where hiding everything changes some prediction say
        // anything about the order.
        if fidelity(
            &p,
            &g1,
            &g2,
            &FidelityMasks {
                nodes: vec![true; 4],
                features: vec![false; 2],
            },
        )
        .unwrap()
            < DEFAULT_TAU
        {
            pairs.push((g1, g2));
        }
    }
    let report = explain_features(&p, &pairs, DEFAULT_TAU).unwrap();
    for t in &report.traces {
        assert_eq!(t.steps[0].item, 0);
        assert_eq!(t.steps[0].fidelity, 1.0);
        assert_eq!(t.steps.len(), 1);
    }
    assert_eq!(report.ranking[0].selection_count, 5);
    assert_eq!(report.ranking[1].selection_count, 0);
}

#[test]
fn only_informative_template_node_gets_the_largest_gain() {
    let mut r = common::rng(41);
    let p = common::random_params(8, 2, 41);
    let mut found = 0;
    for _ in 0..50 {
        let g1 = common::random_tree(&mut r, 3, 2);
        let mut g2 = common::random_tree(&mut r, 5, 2);
        // Masking writes zeros, so only the LMA node carries information.
        for (i, n) in g2.nodes.iter_mut().enumerate() {
            if i == 0 {
                n.label = Some(SemanticLabel::base(BaseLabel::Lma));
                n.features = vec![4.0, -3.0];
            } else {
                n.features = vec![0.0, 0.0];
            }
        }
        let empty = fidelity(
            &p,
            &g1,
            &g2,
            &FidelityMasks {
                nodes: vec![false; 5],
                features: vec![true; 2],
            },
        )
        .unwrap();
        if empty == 1.0 {
            continue;
        }
        found += 1;
        let single: Vec<f64> = (0..5)
            .map(|k| {
                let nodes = (0..5).map(|i| i == k).collect();
                fidelity(
                    &p,
                    &g1,
                    &g2,
                    &FidelityMasks {
                        nodes,
                        features: vec![true; 2],
                    },
                )
                .unwrap()
            })
            .collect();
        assert_eq!(single[0], 1.0);
        assert!(single[1..].iter().all(|&f| f == empty));
        let report = explain_nodes(&p, &g1, &g2, DEFAULT_TAU).unwrap();
        assert_eq!(report.nodes[0].label, Some(SemanticLabel::base(BaseLabel::Lma)));
        assert_eq!(report.nodes[0].marginal_gain, 1.0 - empty);
        assert_eq!(report.final_fidelity, 1.0);
        if found == 5 {
            break;
        }
    }
    assert_eq!(found, 5, "too few informative fixtures");
}
