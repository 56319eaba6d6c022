//! Hand-written loop oracles; index loops mirror the definitions on purpose.
#![allow(clippy::needless_range_loop)]

mod common;

use rand::seq::SliceRandom;
use rand::Rng;
use vesselmatch::graph::{ground_truth_assignment, BaseLabel, SemanticLabel};
use vesselmatch::numerics::{Activation, Matrix, Mlp};

#[test]
fn mlp_matches_hand_rolled_loops() {
    let mut r = common::rng(77);
    for norm in [false, true] {
        let mut net_rng = vesselmatch::rng::stream(9, "test/mlp");
        let mut net = Mlp::new(&[8, 6, 3], Activation::Identity, norm, &mut net_rng);
        for l in &mut net.layers {
            for v in l.bias.as_mut_slice() {
                *v = r.random_range(-1.0..1.0);
            }
        }
        let data: Vec<f64> = (0..40).map(|_| r.random_range(-2.0..2.0)).collect();
        let x = Matrix::from_vec(5, 8, data.clone()).unwrap();
        let got = net.forward(&x).unwrap();

        let mut h: Vec<Vec<f64>> = data.chunks(8).map(<[f64]>::to_vec).collect();
        for (l, layer) in net.layers.iter().enumerate() {
            let (fi, fo) = layer.weight.shape();
            let mut out = vec![vec![0.0; fo]; h.len()];
            for (r, row) in h.iter().enumerate() {
                for o in 0..fo {
                    let mut acc = layer.bias[(0, o)];
                    for k in 0..fi {
                        acc += row[k] * layer.weight[(k, o)];
                    }
                    out[r][o] = acc;
                }
            }
            if norm {
                for o in 0..fo {
                    let mean: f64 = out.iter().map(|r| r[o]).sum::<f64>() / 5.0;
                    let var: f64 = out.iter().map(|r| (r[o] - mean).powi(2)).sum::<f64>() / 5.0;
                    for r in out.iter_mut() {
                        r[o] = (r[o] - mean) / (var + 1e-5).sqrt();
                    }
                }
            }
            if l == 0 {
                out.iter_mut().flatten().for_each(|v| *v = v.max(0.0));
            }
            h = out;
        }
        for (r, row) in h.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((got[(r, c)] - v).abs() < 1e-12, "norm={norm} ({r},{c})");
            }
        }
    }
}

fn labels(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<SemanticLabel> {
    let mut pool = vec![SemanticLabel::base(BaseLabel::Lma)];
    for base in [BaseLabel::Lad, BaseLabel::Lcx, BaseLabel::D, BaseLabel::Om] {
        for k in 1..=3 {
            pool.push(SemanticLabel::new(base, k));
        }
    }
    pool.shuffle(r);
    pool.truncate(n);
    pool
}

#[test]
fn ground_truth_equals_label_double_loop() {
    let mut r = common::rng(4);
    for _ in 0..200 {
        let (n1, n2) = (r.random_range(1..8), r.random_range(1..10));
        let mut g1 = common::random_tree(&mut r, n1, 1);
        let mut g2 = common::random_tree(&mut r, n2, 1);
        for (n, l) in g1.nodes.iter_mut().zip(labels(&mut r, n1)) {
            n.label = Some(l);
        }
        for (n, l) in g2.nodes.iter_mut().zip(labels(&mut r, n2)) {
            n.label = Some(l);
        }
        let m = ground_truth_assignment(&g1, &g2).unwrap();
        for i in 0..n1 {
            for a in 0..n2 {
                let want = if g1.nodes[i].label == g2.nodes[a].label {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(m.get(i, a), want);
            }
        }
    }
}
