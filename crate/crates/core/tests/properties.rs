mod common;

use proptest::prelude::*;
use vesselmatch::assignment::{assignment_total, hungarian};
use vesselmatch::features::FeatureConfig;
use vesselmatch::graph::{build_association_graph, SemanticLabel};
use vesselmatch::numerics::Matrix;
use vesselmatch::pipeline::{merge_labels, split_labels};
use vesselmatch::skeleton::{thin_mask, BinaryMask};
use vesselmatch::synthetic::{generate_case, TreeGrammarConfig};

/// Optimal total and the lexicographically smallest optimal column vector,
/// by enumerating injections in lexicographic order.
fn brute_force(s: &Matrix) -> (f64, Vec<usize>) {
    fn go(s: &Matrix, row: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut Option<(f64, Vec<usize>)>) {
        if row == s.rows() {
            let t = assignment_total(s, cur);
            if best.as_ref().is_none_or(|(b, _)| t > *b) {
                *best = Some((t, cur.clone()));
            }
            return;
        }
        for a in 0..s.cols() {
            if !used[a] {
                used[a] = true;
                cur.push(a);
                go(s, row + 1, used, cur, best);
                cur.pop();
                used[a] = false;
            }
        }
    }
    let mut best = None;
    go(s, 0, &mut vec![false; s.cols()], &mut vec![], &mut best);
    best.unwrap()
}

fn grid_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..=6)
        .prop_flat_map(|n| (Just(n), n..=6))
        .prop_flat_map(|(n, m)| {
            proptest::collection::vec(0u32..=1024, n * m)
                .prop_map(move |v| Matrix::from_vec(n, m, v.into_iter().map(|k| k as f64 / 1024.0).collect()).unwrap())
        })
}

/// Union of thick strokes and discs on a small canvas.
fn blob_mask() -> impl Strategy<Value = BinaryMask> {
    let shape = (0i32..40, 0i32..40, 0i32..40, 0i32..40, 1i32..4);
    proptest::collection::vec(shape, 1..5).prop_map(|shapes| {
        let (w, h) = (40usize, 40usize);
        let mut bits = vec![false; w * h];
        for (x0, y0, x1, y1, r) in shapes {
            let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
            for s in 0..=steps {
                let cx = x0 + (x1 - x0) * s / steps;
                let cy = y0 + (y1 - y0) * s / steps;
                for y in (cy - r).max(1)..=(cy + r).min(h as i32 - 2) {
                    for x in (cx - r).max(1)..=(cx + r).min(w as i32 - 2) {
                        if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                            bits[y as usize * w + x as usize] = true;
                        }
                    }
                }
            }
        }
        BinaryMask::new(w, h, bits).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn association_graph_law(seed in any::<u64>(), n1 in 1usize..6, extra in 0usize..3, d in 1usize..4) {
        let mut r = common::rng(seed);
        let g1 = common::random_tree(&mut r, n1, d);
        let g2 = common::random_tree(&mut r, n1 + extra, d);
        let a = build_association_graph(&g1, &g2).unwrap();
        prop_assert_eq!(a.vertex_count(), g1.len() * g2.len());
        prop_assert_eq!(a.edge_count(), 2 * g1.edges.len() * g2.edges.len());
        for i in 0..g1.len() {
            for b in 0..g2.len() {
                let row = a.vertex_features.row(a.vertex_index(i, b));
                prop_assert_eq!(&row[..d], &g1.nodes[i].features[..]);
                prop_assert_eq!(&row[d..], &g2.nodes[b].features[..]);
            }
        }
        let mut expected = vec![];
        for &(i, j) in &g1.edges {
            for &(p, q) in &g2.edges {
                for (x, y) in [(p, q), (q, p)] {
                    expected.push((a.vertex_index(i, x), a.vertex_index(j, y), [i, j, x, y]));
                }
            }
        }
        expected.sort_by_key(|e| (e.0, e.1));
        for (k, (s, t, nodes)) in expected.iter().enumerate() {
            prop_assert_eq!((a.edge_src[k], a.edge_dst[k]), (*s, *t));
            let row = a.edge_features.row(k);
            prop_assert_eq!(&row[..d], &g1.nodes[nodes[0]].features[..]);
            prop_assert_eq!(&row[d..2 * d], &g1.nodes[nodes[1]].features[..]);
            prop_assert_eq!(&row[2 * d..3 * d], &g2.nodes[nodes[2]].features[..]);
            prop_assert_eq!(&row[3 * d..], &g2.nodes[nodes[3]].features[..]);
        }
    }

    #[test]
    fn hungarian_matches_enumeration(s in grid_matrix()) {
        let cols = hungarian(&s).unwrap();
        let (best, lex) = brute_force(&s);
        prop_assert_eq!(assignment_total(&s, &cols), best);
        prop_assert_eq!(cols, lex);
    }

    #[test]
    fn thinning_is_idempotent_and_keeps_components(mask in blob_mask()) {
        let c = thin_mask(&mask).unwrap();
        prop_assert_eq!(c.component_count(), mask.component_count());
        prop_assert!(!c.has_block());
        let mut inside = true;
        for (x, y) in c.pixels() {
            inside &= mask.get(x, y);
        }
        prop_assert!(inside);
        let again = thin_mask(&BinaryMask::new(c.width, c.height, c.bits.clone()).unwrap()).unwrap();
        prop_assert_eq!(again.bits, c.bits);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn split_then_merge_recovers_generator_labels(seed in 0u64..100_000) {
        let case = generate_case(&TreeGrammarConfig::default(), &FeatureConfig::default(), seed).unwrap();
        let mut merged = case.graph.clone();
        for n in &mut merged.nodes {
            n.label = n.label.map(|l| SemanticLabel::base(merge_labels(l)));
        }
        let split = split_labels(&merged).unwrap();
        prop_assert_eq!(split.labels(), case.graph.labels());
        let remerged: Vec<_> = split.labels().into_iter().map(|l| merge_labels(l.unwrap())).collect();
        let original: Vec<_> = merged.labels().into_iter().map(|l| l.unwrap().base).collect();
        prop_assert_eq!(remerged, original);
    }
}
