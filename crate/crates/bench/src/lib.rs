//! Fixtures shared by the benchmarks.

use vesselmatch::features::FeatureConfig;
use vesselmatch::graph::IndividualGraph;
use vesselmatch::synthetic::{generate_case, SyntheticCase, TreeGrammarConfig};

pub fn case(seed: u64) -> SyntheticCase {
    generate_case(&TreeGrammarConfig::default(), &FeatureConfig::default(), seed).expect("default grammar is valid")
}

/// Two same-view default-grammar graphs, smaller first.
pub fn same_view_pair(seed: u64) -> (IndividualGraph, IndividualGraph) {
    let first = case(seed).graph;
    let second = (seed + 1..)
        .map(|s| case(s).graph)
        .find(|g| g.view_angle == first.view_angle)
        .expect("both views are drawn");
    if first.len() <= second.len() {
        (first, second)
    } else {
        (second, first)
    }
}
