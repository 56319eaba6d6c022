//! Independent walk over generated trees checking attachment rules and
//! index order.

use std::collections::BTreeMap;

use vesselmatch::features::FeatureConfig;
use vesselmatch::graph::{ensure_valid, BaseLabel, SemanticLabel};
use vesselmatch::pipeline::split_labels;
use vesselmatch::synthetic::{generate_case, SyntheticTree, TreeGrammarConfig};

fn chain(tree: &SyntheticTree, base: BaseLabel, start: usize) -> Result<Vec<usize>, String> {
    let mut members: Vec<usize> = (0..tree.segments.len())
        .filter(|&s| tree.segments[s].label.base == base)
        .collect();
    members.sort_by_key(|&s| tree.segments[s].label.index);
    let mut at = start;
    for (k, &s) in members.iter().enumerate() {
        let seg = &tree.segments[s];
        if seg.label.index != k as u32 + 1 {
            return Err(format!("{base} indices are not 1..n: {}", seg.label));
        }
        if seg.key_points[0] != at {
            return Err(format!("{} does not continue the chain", seg.label));
        }
        at = seg.key_points[1];
    }
    Ok(members)
}

fn validate(tree: &SyntheticTree, cfg: &TreeGrammarConfig) -> Result<(), String> {
    let segs = &tree.segments;
    let lma: Vec<usize> = (0..segs.len())
        .filter(|&s| segs[s].label.base == BaseLabel::Lma)
        .collect();
    if lma != [0] || segs[0].label != SemanticLabel::base(BaseLabel::Lma) || segs[0].key_points[0] != 0 {
        return Err("tree must start with one unindexed LMA at the root".into());
    }
    let split = segs[0].key_points[1];
    let lad = chain(tree, BaseLabel::Lad, split)?;
    let lcx = chain(tree, BaseLabel::Lcx, split)?;
    for (name, c, [lo, hi]) in [("LAD", &lad, cfg.lad_segments), ("LCX", &lcx, cfg.lcx_segments)] {
        if c.len() < lo || c.len() > hi {
            return Err(format!("{name} has {} segments, outside [{lo}, {hi}]", c.len()));
        }
    }
    let mut uses: BTreeMap<usize, usize> = BTreeMap::new();
    for s in segs {
        if s.key_points[0] == s.key_points[1] {
            return Err(format!("{} is a loop", s.label));
        }
        for &k in &s.key_points {
            *uses.entry(k).or_default() += 1;
        }
    }
    for (side, main) in [(BaseLabel::D, &lad), (BaseLabel::Om, &lcx)] {
        // Interior junctions of the parent chain, proximal first.
        let junctions: Vec<usize> = main[..main.len() - 1].iter().map(|&s| segs[s].key_points[1]).collect();
        let mut members: Vec<usize> = (0..segs.len()).filter(|&s| segs[s].label.base == side).collect();
        members.sort_by_key(|&s| segs[s].label.index);
        let mut last_pos = None;
        for (k, &s) in members.iter().enumerate() {
            let seg = &segs[s];
            if seg.label.index != k as u32 + 1 {
                return Err(format!("{side} indices are not 1..n"));
            }
            let pos = junctions.iter().position(|&j| j == seg.key_points[0]).ok_or(format!(
                "{} is not attached to an interior junction of its parent",
                seg.label
            ))?;
            if last_pos.is_some_and(|p| pos <= p) {
                return Err(format!("{} is not distal to the previous {side}", seg.label));
            }
            last_pos = Some(pos);
            if uses[&seg.key_points[1]] != 1 {
                return Err(format!("{} does not end in a leaf", seg.label));
            }
        }
    }
    if uses.values().any(|&u| u > 3) || uses[&split] != 3 {
        return Err("junction degrees must be 3".into());
    }
    let junction_count = uses.values().filter(|&&u| u == 3).count();
    if junction_count != tree.junction_count {
        return Err(format!(
            "junction count {} vs recorded {}",
            junction_count, tree.junction_count
        ));
    }
    let [wlo, whi] = cfg.vessel_width;
    for s in segs {
        let ends = [s.polyline[0], *s.polyline.last().unwrap()];
        for (p, &k) in ends.iter().zip(&s.key_points) {
            let q = tree.key_points[k];
            if (p.0 - q.0).abs() > 1e-9 || (p.1 - q.1).abs() > 1e-9 {
                return Err(format!("{} polyline does not end on its key points", s.label));
            }
        }
        if s.polyline
            .iter()
            .any(|&(x, y)| x < 0.0 || y < 0.0 || x > (tree.width - 1) as f64 || y > (tree.height - 1) as f64)
        {
            return Err(format!("{} leaves the image", s.label));
        }
        if !(s.width >= 1.0 && s.width <= whi && (s.label.base.is_side_branch() || s.width >= wlo)) {
            return Err(format!("{} width {} outside range", s.label, s.width));
        }
    }
    Ok(())
}

#[test]
fn thousand_seeds_follow_the_grammar() {
    let cfg = TreeGrammarConfig::default();
    let features = FeatureConfig::default();
    let mut failures = vec![];
    for seed in 0..1000 {
        let case = generate_case(&cfg, &features, seed).unwrap();
        if let Err(e) = validate(&case.tree, &cfg) {
            failures.push(format!("seed {seed}: {e}"));
            continue;
        }
        ensure_valid(&case.graph).unwrap();
        let mut uses: BTreeMap<usize, usize> = BTreeMap::new();
        for seg in &case.tree.segments {
            for &k in &seg.key_points {
                *uses.entry(k).or_default() += 1;
            }
        }
        let pairs: usize = uses.values().map(|&u| u * (u - 1) / 2).sum();
        assert_eq!(
            case.graph.edges.len(),
            pairs,
            "seed {seed}: edges are not the shared-key pairs"
        );
        let mut merged = case.graph.clone();
        for n in &mut merged.nodes {
            n.label = n.label.map(|l| SemanticLabel::base(l.base));
        }
        let split = split_labels(&merged).unwrap();
        if split.labels() != case.graph.labels() {
            failures.push(format!("seed {seed}: split labels differ from generator labels"));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
