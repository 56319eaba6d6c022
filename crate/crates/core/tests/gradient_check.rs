mod common;

use common::*;
use vesselmatch::graph::build_association_graph;
use vesselmatch::model::{init_params, Hyperparameters, NETWORK_NAMES};

fn check(seed: u64, n1: usize, n2: usize, d: usize, hidden: usize, stride: usize) -> GradientCheck {
    let mut r = rng(seed);
    let g1 = random_tree(&mut r, n1, d);
    let g2 = random_tree(&mut r, n2, d);
    let assoc = build_association_graph(&g1, &g2).unwrap();
    let target = random_target(&mut r, n1, n2);
    let params = init_params(
        Hyperparameters {
            hidden,
            ..Hyperparameters::new(d)
        },
        seed,
    )
    .unwrap();
    gradient_check(&params, &assoc, &target, 1e-5, stride)
}

#[test]
fn backward_matches_central_differences_on_three_by_three() {
    let c = check(5, 3, 3, 4, 8, 1);
    assert_eq!(c.worst.len(), NETWORK_NAMES.len());
    assert!(c.checked > 10 * c.kinks, "{} kinks of {}", c.kinks, c.checked);
    for (net, e) in &c.worst {
        assert!(*e < 1e-4, "{net}: {e:e}");
    }
}

#[test]
fn perturbed_weights_and_biases_also_check() {
    let mut r = rng(31);
    let g1 = random_tree(&mut r, 3, 3);
    let g2 = random_tree(&mut r, 4, 3);
    let assoc = build_association_graph(&g1, &g2).unwrap();
    let target = random_target(&mut r, 3, 4);
    let c = gradient_check(&random_params(8, 3, 31), &assoc, &target, 1e-5, 1);
    assert!(c.max_error() < 1e-4, "{:?}", c.worst);
}

#[test]
fn sampled_check_at_default_width() {
    let c = check(8, 3, 4, 6, 64, 97);
    assert!(c.checked > 100);
    assert!(c.max_error() < 1e-4, "{:?}", c.worst);
}
