//! Seeded generator of labeled left-coronary trees and their masks.
//!
//! Layout (LAO; RAO mirrors x): the LMA enters from the top border and
//! bifurcates into an LAD chain heading down-left and an LCX chain heading
//! down-right. Each chain gets `k - 1` attachment slots for `k` drawn from
//! its segment range; a slot carries a side branch (D on the LAD, OM on the
//! LCX) with the configured probability, and only occupied slots split the
//! chain. Side branches are single leaf segments leaving the chain 40-55°
//! outward. All polylines carry a smooth sinusoidal wobble of amplitude up
//! to `jitter`, and layouts whose segments come closer than
//! `min_separation` (away from their shared key points) are redrawn.
//!
//! Intensity along the tree is `contrast * exp(-falloff * s)` for
//! along-tree distance `s` from the root point, plus Gaussian noise, clipped
//! to `[0, 255]`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{self, FeatureConfig, Pixel, SegmentGeometry, TreeGeometry};
use crate::graph::{BaseLabel, IndividualGraph, SemanticLabel, ViewAngle};
use crate::rng::{indexed_stream, stream};
use crate::skeleton::{self, BinaryMask};

const MAX_LAYOUT_ATTEMPTS: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntensityModel {
    pub contrast: f64,
    pub falloff: f64,
    pub noise_std: f64,
}

impl Default for IntensityModel {
    fn default() -> Self {
        IntensityModel {
            contrast: 220.0,
            falloff: 0.003,
            noise_std: 6.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeGrammarConfig {
    pub lad_segments: [usize; 2],
    pub lcx_segments: [usize; 2],
    pub d_branch_prob: f64,
    pub om_branch_prob: f64,
    pub jitter: f64,
    pub vessel_width: [f64; 2],
    pub width: usize,
    pub height: usize,
    /// Probability that a case is drawn in the LAO view.
    pub lao_fraction: f64,
    pub min_separation: f64,
    pub intensity: IntensityModel,
}

impl Default for TreeGrammarConfig {
    fn default() -> Self {
        TreeGrammarConfig {
            lad_segments: [1, 4],
            lcx_segments: [1, 4],
            d_branch_prob: 0.7,
            om_branch_prob: 0.7,
            jitter: 3.0,
            vessel_width: [2.0, 4.0],
            width: 256,
            height: 256,
            lao_fraction: 0.5,
            min_separation: 12.0,
            intensity: IntensityModel::default(),
        }
    }
}

impl TreeGrammarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidArgument(what));
        for (name, p) in [
            ("d_branch_prob", self.d_branch_prob),
            ("om_branch_prob", self.om_branch_prob),
            ("lao_fraction", self.lao_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not in [0, 1]"));
            }
        }
        for (name, [lo, hi]) in [("lad_segments", self.lad_segments), ("lcx_segments", self.lcx_segments)] {
            if lo == 0 || lo > hi {
                return bad(format!("{name} range [{lo}, {hi}] is empty"));
            }
        }
        let [wlo, whi] = self.vessel_width;
        if !(wlo >= 1.0 && wlo <= whi) {
            return bad(format!("vessel_width range [{wlo}, {whi}] is invalid"));
        }
        if self.width < 128 || self.height < 128 {
            return bad(format!("image {}x{} is smaller than 128x128", self.width, self.height));
        }
        if !(self.jitter >= 0.0 && self.min_separation >= 0.0) {
            return bad("jitter and min_separation must be non-negative".into());
        }
        let im = &self.intensity;
        if !(im.contrast >= 0.0 && im.falloff >= 0.0 && im.noise_std >= 0.0) {
            return bad("intensity parameters must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSegment {
    pub label: SemanticLabel,
    /// Proximal to distal.
    pub polyline: Vec<(f64, f64)>,
    pub key_points: [usize; 2],
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTree {
    pub view_angle: ViewAngle,
    pub width: usize,
    pub height: usize,
    /// Index 0 is the root point on the LMA.
    pub key_points: Vec<(f64, f64)>,
    /// Generator order: LMA, LAD chain, D branches, LCX chain, OM branches.
    pub segments: Vec<SyntheticSegment>,
    pub junction_count: usize,
}

impl SyntheticTree {
    pub fn root_point(&self) -> (f64, f64) {
        self.key_points[0]
    }

    /// Segment pairs sharing a key point.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for a in 0..self.segments.len() {
            for b in a + 1..self.segments.len() {
                let ka = self.segments[a].key_points;
                if self.segments[b].key_points.iter().any(|k| ka.contains(k)) {
                    edges.push((a, b));
                }
            }
        }
        edges
    }

    /// Segment count per node, sorted (the degree multiset of the graph).
    pub fn degree_multiset(&self) -> Vec<usize> {
        let mut deg = vec![0; self.segments.len()];
        for (a, b) in self.edges() {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg.sort_unstable();
        deg
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCase {
    pub seed: u64,
    pub tree: SyntheticTree,
    pub mask: BinaryMask,
    /// Labeled graph with split labels and ground-truth features; node
    /// order is a seeded shuffle of the generator's segment order.
    pub graph: IndividualGraph,
    /// `node_segment[j]` is the tree segment behind graph node `j`.
    pub node_segment: Vec<usize>,
}

fn uniform(rng: &mut crate::rng::Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn deg(d: f64) -> f64 {
    d * PI / 180.0
}

struct Stroke {
    points: Vec<(f64, f64)>,
    headings: Vec<f64>,
}

/// Dense curve from `start` with slowly turning heading and a sinusoidal
/// perpendicular wobble that vanishes at the start point.
fn stroke(rng: &mut crate::rng::Rng, start: (f64, f64), heading: f64, length: f64, jitter: f64) -> Stroke {
    const STEP: f64 = 1.0;
    let curvature = uniform(rng, -0.002, 0.002);
    let amp = uniform(rng, 0.0, jitter);
    let wavelength = uniform(rng, 60.0, 120.0);
    let steps = (length / STEP).ceil().max(1.0) as usize;
    let mut base = start;
    let mut h = heading;
    let mut points = Vec::with_capacity(steps + 1);
    let mut headings = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let s = i as f64 * STEP;
        let wobble = amp * (2.0 * PI * s / wavelength).sin();
        points.push((base.0 - h.sin() * wobble, base.1 + h.cos() * wobble));
        headings.push(h);
        base = (base.0 + h.cos() * STEP, base.1 + h.sin() * STEP);
        h += curvature * STEP;
    }
    Stroke { points, headings }
}

struct Layout {
    key_points: Vec<(f64, f64)>,
    segments: Vec<SyntheticSegment>,
}

fn push_key(keys: &mut Vec<(f64, f64)>, p: (f64, f64)) -> usize {
    keys.push(p);
    keys.len() - 1
}

/// Splits a chain stroke at the occupied slot fractions and attaches side
/// branches. Returns chain segments and side segments separately.
#[allow(clippy::too_many_arguments)]
fn build_chain(
    rng: &mut crate::rng::Rng,
    cfg: &TreeGrammarConfig,
    keys: &mut Vec<(f64, f64)>,
    origin_key: usize,
    heading: f64,
    length: f64,
    slots: usize,
    branch_prob: f64,
    chain_label: BaseLabel,
    side_label: BaseLabel,
    outward: f64,
    main_width: f64,
) -> (Vec<SyntheticSegment>, Vec<SyntheticSegment>) {
    let chain = stroke(rng, keys[origin_key], heading, length, cfg.jitter);
    let last = chain.points.len() - 1;
    let mut cuts = Vec::new();
    for k in 1..=slots {
        let frac = k as f64 / (slots + 1) as f64 + uniform(rng, -0.06, 0.06);
        let occupied = rng.random_bool(branch_prob);
        if occupied {
            cuts.push(((frac * last as f64).round() as usize).clamp(1, last - 1));
        }
    }
    cuts.dedup();
    let side_width = (main_width - 1.0).max(1.0);
    let mut chain_segs = Vec::new();
    let mut side_segs = Vec::new();
    let mut from_idx = 0;
    let mut from_key = origin_key;
    for (n, &cut) in cuts.iter().chain(std::iter::once(&last)).enumerate() {
        let to_key = push_key(keys, chain.points[cut]);
        chain_segs.push(SyntheticSegment {
            label: SemanticLabel::new(chain_label, n as u32 + 1),
            polyline: chain.points[from_idx..=cut].to_vec(),
            key_points: [from_key, to_key],
            width: main_width,
        });
        if cut != last {
            let angle = chain.headings[cut] + outward * deg(uniform(rng, 40.0, 55.0));
            let len = uniform(rng, 35.0, 60.0);
            let branch = stroke(rng, chain.points[cut], angle, len, cfg.jitter * 0.5);
            let tip = push_key(keys, *branch.points.last().unwrap());
            side_segs.push(SyntheticSegment {
                label: SemanticLabel::new(side_label, side_segs.len() as u32 + 1),
                polyline: branch.points,
                key_points: [to_key, tip],
                width: side_width,
            });
        }
        from_idx = cut;
        from_key = to_key;
    }
    (chain_segs, side_segs)
}

fn draw_layout(rng: &mut crate::rng::Rng, cfg: &TreeGrammarConfig, side_branches: bool) -> Layout {
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let sx = w / 256.0;
    let sy = h / 256.0;
    let main_width = uniform(rng, cfg.vessel_width[0], cfg.vessel_width[1]);
    let mut keys = Vec::new();
    let root = push_key(&mut keys, (w * uniform(rng, 0.42, 0.58), 3.0));
    let lma_heading = deg(uniform(rng, 80.0, 100.0));
    let lma_length = uniform(rng, 30.0, 50.0) * sy;
    let lma = stroke(rng, keys[root], lma_heading, lma_length, cfg.jitter * 0.5);
    let b0 = push_key(&mut keys, *lma.points.last().unwrap());
    let mut segments = vec![SyntheticSegment {
        label: SemanticLabel::new(BaseLabel::Lma, 0),
        polyline: lma.points,
        key_points: [root, b0],
        width: main_width,
    }];
    let scale = sx.min(sy);
    let lad_slots = rng.random_range(cfg.lad_segments[0]..=cfg.lad_segments[1]) - 1;
    let lcx_slots = rng.random_range(cfg.lcx_segments[0]..=cfg.lcx_segments[1]) - 1;
    let (pd, pom) = if side_branches {
        (cfg.d_branch_prob, cfg.om_branch_prob)
    } else {
        (0.0, 0.0)
    };
    let (lad, d) = {
        let heading = deg(uniform(rng, 105.0, 125.0));
        let length = uniform(rng, 140.0, 180.0) * scale;
        build_chain(
            rng,
            cfg,
            &mut keys,
            b0,
            heading,
            length,
            lad_slots,
            pd,
            BaseLabel::Lad,
            BaseLabel::D,
            1.0,
            main_width,
        )
    };
    let (lcx, om) = {
        let heading = deg(uniform(rng, 50.0, 70.0));
        let length = uniform(rng, 110.0, 150.0) * scale;
        build_chain(
            rng,
            cfg,
            &mut keys,
            b0,
            heading,
            length,
            lcx_slots,
            pom,
            BaseLabel::Lcx,
            BaseLabel::Om,
            -1.0,
            main_width,
        )
    };
    segments.extend(lad);
    segments.extend(d);
    segments.extend(lcx);
    segments.extend(om);
    Layout {
        key_points: keys,
        segments,
    }
}

#[cfg(test)]
fn point_to_polyline(p: (f64, f64), line: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    for w in line.windows(2) {
        best = best.min(point_to_segment(p, w[0], w[1]));
    }
    if line.len() == 1 {
        best = ((p.0 - line[0].0).powi(2) + (p.1 - line[0].1).powi(2)).sqrt();
    }
    best
}

fn point_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

fn layout_is_acceptable(layout: &Layout, cfg: &TreeGrammarConfig) -> bool {
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    for seg in &layout.segments {
        let margin = seg.width / 2.0 + 2.0;
        let inside = seg
            .polyline
            .iter()
            .all(|&(x, y)| x >= margin && y >= 2.0 && x <= w - 1.0 - margin && y <= h - 1.0 - margin);
        if !inside {
            return false;
        }
        let chord = {
            let (a, b) = (seg.polyline[0], *seg.polyline.last().unwrap());
            ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
        };
        if chord < 20.0 {
            return false;
        }
    }
    let clearance = |a: &SyntheticSegment, b: &SyntheticSegment, shared: Option<usize>, need: f64| {
        let keep = |p: &(f64, f64)| match shared {
            Some(k) => {
                let c = layout.key_points[k];
                ((p.0 - c.0).powi(2) + (p.1 - c.1).powi(2)).sqrt() > 15.0
            }
            None => true,
        };
        let far: Vec<(f64, f64)> = b.polyline.iter().copied().filter(keep).collect();
        a.polyline.iter().filter(|p| keep(p)).all(|&p| {
            far.iter()
                .all(|&q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() >= need)
        })
    };
    for (i, a) in layout.segments.iter().enumerate() {
        for b in &layout.segments[i + 1..] {
            let shared = a.key_points.iter().copied().find(|k| b.key_points.contains(k));
            let need = match shared {
                Some(_) => cfg.min_separation * 0.75,
                None => cfg.min_separation + a.width.max(b.width),
            };
            if !clearance(a, b, shared, need) {
                return false;
            }
        }
    }
    true
}

/// Draws a labeled tree. Layouts are redrawn until they fit the image and
/// keep segments apart; after many failures side branches are dropped.
pub fn generate_tree(cfg: &TreeGrammarConfig, seed: u64) -> Result<SyntheticTree> {
    cfg.validate()?;
    let view_angle = if stream(seed, "synthetic/view").random_bool(cfg.lao_fraction) {
        ViewAngle::Lao
    } else {
        ViewAngle::Rao
    };
    let mut layout = None;
    for attempt in 0..MAX_LAYOUT_ATTEMPTS * 2 {
        let mut rng = indexed_stream(seed, "synthetic/layout", attempt);
        let candidate = draw_layout(&mut rng, cfg, attempt < MAX_LAYOUT_ATTEMPTS);
        if layout_is_acceptable(&candidate, cfg) {
            layout = Some(candidate);
            break;
        }
    }
    let mut layout =
        layout.ok_or_else(|| Error::InvalidArgument("grammar config admits no layout that fits the image".into()))?;
    if view_angle == ViewAngle::Rao {
        let mirror = |p: &mut (f64, f64)| p.0 = cfg.width as f64 - 1.0 - p.0;
        layout.key_points.iter_mut().for_each(mirror);
        for seg in &mut layout.segments {
            seg.polyline.iter_mut().for_each(mirror);
        }
    }
    let junction_count = layout.segments.iter().filter(|s| s.label.base.is_side_branch()).count() + 1;
    Ok(SyntheticTree {
        view_angle,
        width: cfg.width,
        height: cfg.height,
        key_points: layout.key_points,
        segments: layout.segments,
        junction_count,
    })
}

/// Integer pixels along a polyline, consecutive duplicates removed.
pub fn polyline_pixels(line: &[(f64, f64)]) -> Vec<Pixel> {
    let mut out: Vec<Pixel> = Vec::new();
    let mut push = |p: Pixel| {
        if out.last() != Some(&p) {
            out.push(p);
        }
    };
    let round = |p: (f64, f64)| (p.0.round() as i64, p.1.round() as i64);
    if line.len() == 1 {
        let (x, y) = round(line[0]);
        push((x as usize, y as usize));
    }
    for w in line.windows(2) {
        let (mut x0, mut y0) = round(w[0]);
        let (x1, y1) = round(w[1]);
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let (stx, sty) = ((x1 - x0).signum(), (y1 - y0).signum());
        let mut err = dx + dy;
        loop {
            push((x0 as usize, y0 as usize));
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += stx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sty;
            }
        }
    }
    out
}

/// Arc length from the root point to every key point (the tree is drawn
/// proximal to distal, so parents always precede children).
fn key_distances(tree: &SyntheticTree) -> Vec<f64> {
    let mut dist = vec![f64::NAN; tree.key_points.len()];
    dist[0] = 0.0;
    for seg in &tree.segments {
        let [a, b] = seg.key_points;
        dist[b] = dist[a] + polyline_length(&seg.polyline);
    }
    dist
}

fn polyline_length(line: &[(f64, f64)]) -> f64 {
    line.windows(2)
        .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
        .sum()
}

/// Strokes every segment and shades it by along-tree distance. Width-1
/// segments are drawn with Bresenham lines; wider ones as the set of pixel
/// centers within `width / 2` of the polyline.
pub fn rasterize_mask(tree: &SyntheticTree, intensity: &IntensityModel, seed: u64) -> Result<BinaryMask> {
    let (w, h) = (tree.width, tree.height);
    for seg in &tree.segments {
        for &(x, y) in &seg.polyline {
            if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
                return Err(Error::OutOfBounds {
                    x,
                    y,
                    width: w,
                    height: h,
                });
            }
        }
    }
    let key_dist = key_distances(tree);
    // along-tree distance of the nearest stroked point, per pixel
    let mut along = vec![f64::INFINITY; w * h];
    let mut best = vec![f64::INFINITY; w * h];
    for seg in &tree.segments {
        let start = key_dist[seg.key_points[0]];
        let mut arc = vec![0.0; seg.polyline.len()];
        for i in 1..seg.polyline.len() {
            let (p, q) = (seg.polyline[i - 1], seg.polyline[i]);
            arc[i] = arc[i - 1] + ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
        }
        if seg.width <= 1.0 {
            let pixels = polyline_pixels(&seg.polyline);
            for &(x, y) in &pixels {
                let i = y * w + x;
                let (d, t) = nearest_on(&seg.polyline, &arc, (x as f64, y as f64));
                if d < best[i] {
                    best[i] = d;
                    along[i] = start + t;
                }
            }
            continue;
        }
        let r = seg.width / 2.0;
        for (k, win) in seg.polyline.windows(2).enumerate() {
            let (a, b) = (win[0], win[1]);
            let x0 = (a.0.min(b.0) - r).floor().max(0.0) as usize;
            let x1 = ((a.0.max(b.0) + r).ceil() as usize).min(w - 1);
            let y0 = (a.1.min(b.1) - r).floor().max(0.0) as usize;
            let y1 = ((a.1.max(b.1) + r).ceil() as usize).min(h - 1);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len2 = dx * dx + dy * dy;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (px, py) = (x as f64, y as f64);
                    let t = if len2 > 0.0 {
                        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let d = ((px - a.0 - t * dx).powi(2) + (py - a.1 - t * dy).powi(2)).sqrt();
                    let i = y * w + x;
                    if d <= r && d < best[i] {
                        best[i] = d;
                        along[i] = start + arc[k] + t * (arc[k + 1] - arc[k]);
                    }
                }
            }
        }
    }
    let bits: Vec<bool> = best.iter().map(|d| d.is_finite()).collect();
    let mut rng = stream(seed, "synthetic/noise");
    let noise = Normal::new(0.0, intensity.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let plane = (0..w * h)
        .map(|i| {
            if !bits[i] {
                return 0u8;
            }
            let v = intensity.contrast * (-intensity.falloff * along[i]).exp();
            let v = if intensity.noise_std > 0.0 {
                v + noise.sample(&mut rng)
            } else {
                v
            };
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    BinaryMask::new(w, h, bits)?.with_intensity(plane)
}

fn nearest_on(line: &[(f64, f64)], arc: &[f64], p: (f64, f64)) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..line.len().saturating_sub(1) {
        let d = point_to_segment(p, line[k], line[k + 1]);
        if d < best.0 {
            best = (d, arc[k]);
        }
    }
    best
}

/// Ground-truth geometry of a generated tree on its own mask.
pub fn tree_geometry(tree: &SyntheticTree, mask: &BinaryMask) -> TreeGeometry {
    let paths: Vec<Vec<Pixel>> = tree.segments.iter().map(|s| polyline_pixels(&s.polyline)).collect();
    let regions = features::assign_regions(mask.width, mask.height, &mask.bits, &paths);
    TreeGeometry {
        width: tree.width,
        height: tree.height,
        key_points: tree.key_points.clone(),
        segments: paths
            .into_iter()
            .zip(regions)
            .zip(&tree.segments)
            .map(|((path, region), s)| SegmentGeometry {
                path,
                region,
                key_points: s.key_points,
            })
            .collect(),
        root_segment: 0,
        root_point: tree.root_point(),
    }
}

/// Tree, mask and labeled graph for one seed.
pub fn generate_case(cfg: &TreeGrammarConfig, features: &FeatureConfig, seed: u64) -> Result<SyntheticCase> {
    let tree = generate_tree(cfg, seed)?;
    let mask = rasterize_mask(&tree, &cfg.intensity, seed)?;
    let geometry = tree_geometry(&tree, &mask);
    let ordered = skeleton::graph_from_geometry(&geometry, mask.intensity.as_deref(), features, tree.view_angle)?;
    let mut node_segment: Vec<usize> = (0..tree.segments.len()).collect();
    node_segment.shuffle(&mut stream(seed, "synthetic/node-order"));
    let mut position = vec![0; node_segment.len()];
    for (j, &s) in node_segment.iter().enumerate() {
        position[s] = j;
    }
    let nodes = node_segment
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let mut n = ordered.nodes[s].clone();
            n.id = j as u64;
            n.label = Some(tree.segments[s].label);
            n
        })
        .collect();
    let edges = ordered.edges.iter().map(|&(a, b)| (position[a], position[b])).collect();
    let graph = IndividualGraph::new(tree.view_angle, position[0], nodes, edges);
    Ok(SyntheticCase {
        seed,
        tree,
        mask,
        graph,
        node_segment,
    })
}
