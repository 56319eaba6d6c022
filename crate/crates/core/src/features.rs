//! Per-segment descriptors.
//!
//! Three groups, concatenated in this order when enabled:
//!
//! * topology (2): segment count at each key point, smaller first.
//! * position (20), all in `[0, 1]`:
//!   centroid x, y; proximal key point x, y; distal key point x, y;
//!   hop depth from the root segment over the maximum hop depth;
//!   Euclidean distance from the proximal key point to the root point over
//!   the image diagonal; length over total tree length; length over the
//!   image diagonal; `(sin + 1)/2` and `(cos + 1)/2` of the proximal→distal
//!   chord angle; along-tree distance from the root point to the proximal key
//!   point over the largest along-tree distance; descendant segments over
//!   `n - 1`; region bounding-box width over image width and height over
//!   image height; width proxy (region area / centerline length) over the
//!   largest width proxy in the tree; leaf flag; sibling count at the
//!   proximal key point over the largest key-point degree; subtree height
//!   over the maximum hop depth.
//! * intensity and shape (14): mean, standard deviation, minimum, maximum,
//!   median, skewness, excess kurtosis, energy (mean square) and 16-bin
//!   Shannon entropy of region intensity scaled to `[0, 1]`; region pixel
//!   count; centerline length; tortuosity (centerline length / chord);
//!   bounding-box aspect (short side / long side); fill ratio (area /
//!   bounding-box area).
//!
//! Degenerate moments (zero variance) evaluate to 0. The proximal key point
//! of a segment is the one with the smaller along-tree distance from the
//! root point; ties go to the lower pixel index.

use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEATURE_MANIFEST_VERSION: u32 = 1;

pub const TOPOLOGY_FEATURES: [&str; 2] = ["degree_low", "degree_high"];

pub const POSITION_FEATURES: [&str; 20] = [
    "centroid_x",
    "centroid_y",
    "proximal_x",
    "proximal_y",
    "distal_x",
    "distal_y",
    "hop_depth",
    "root_distance",
    "length_of_tree",
    "length_of_diagonal",
    "chord_sin",
    "chord_cos",
    "along_tree_distance",
    "descendant_fraction",
    "bbox_width",
    "bbox_height",
    "width_proxy",
    "is_leaf",
    "sibling_fraction",
    "subtree_depth",
];

pub const INTENSITY_FEATURES: [&str; 14] = [
    "intensity_mean",
    "intensity_std",
    "intensity_min",
    "intensity_max",
    "intensity_median",
    "intensity_skewness",
    "intensity_kurtosis",
    "intensity_energy",
    "intensity_entropy",
    "pixel_count",
    "centerline_length",
    "tortuosity",
    "bbox_aspect",
    "fill_ratio",
];

pub type Pixel = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub enable_topology: bool,
    pub enable_position: bool,
    pub enable_intensity: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            enable_topology: true,
            enable_position: true,
            enable_intensity: true,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        self.names().len()
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if self.enable_topology {
            names.extend(TOPOLOGY_FEATURES);
        }
        if self.enable_position {
            names.extend(POSITION_FEATURES);
        }
        if self.enable_intensity {
            names.extend(INTENSITY_FEATURES);
        }
        names
    }
}

/// Feature names and layout version, stored with models and graph files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureManifest {
    pub version: u32,
    pub names: Vec<String>,
}

impl FeatureManifest {
    pub fn for_config(cfg: &FeatureConfig) -> Self {
        FeatureManifest {
            version: FEATURE_MANIFEST_VERSION,
            names: cfg.names().into_iter().map(String::from).collect(),
        }
    }

    /// Generic names for `d` features of unknown provenance.
    pub fn anonymous(d: usize) -> Self {
        FeatureManifest {
            version: FEATURE_MANIFEST_VERSION,
            names: (0..d).map(|i| format!("feature_{i}")).collect(),
        }
    }
}

/// One traced segment: its ordered centerline pixels (key point to key
/// point), the mask pixels it owns, and indices of its two key points.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentGeometry {
    pub path: Vec<Pixel>,
    pub region: Vec<Pixel>,
    pub key_points: [usize; 2],
}

/// Everything feature extraction needs to know about one tree.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeGeometry {
    pub width: usize,
    pub height: usize,
    pub key_points: Vec<(f64, f64)>,
    pub segments: Vec<SegmentGeometry>,
    pub root_segment: usize,
    pub root_point: (f64, f64),
}

impl TreeGeometry {
    /// Segment pairs sharing a key point, lower index first, sorted.
    pub fn segment_edges(&self) -> Vec<(usize, usize)> {
        let incident = self.incident_segments();
        let mut edges = Vec::new();
        for segs in &incident {
            for (x, &a) in segs.iter().enumerate() {
                for &b in &segs[x + 1..] {
                    edges.push((a.min(b), a.max(b)));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn incident_segments(&self) -> Vec<Vec<usize>> {
        let mut incident = vec![Vec::new(); self.key_points.len()];
        for (s, seg) in self.segments.iter().enumerate() {
            incident[seg.key_points[0]].push(s);
            if seg.key_points[1] != seg.key_points[0] {
                incident[seg.key_points[1]].push(s);
            }
        }
        incident
    }
}

pub fn path_length(path: &[Pixel]) -> f64 {
    path.windows(2)
        .map(|w| {
            let dx = w[0].0.abs_diff(w[1].0);
            let dy = w[0].1.abs_diff(w[1].1);
            ((dx * dx + dy * dy) as f64).sqrt()
        })
        .sum()
}

/// Tree-level quantities shared by all segments of one tree.
#[derive(Clone, Debug)]
pub struct TreeContext {
    pub key_degree: Vec<usize>,
    pub hop_depth: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub descendants: Vec<usize>,
    pub subtree_height: Vec<usize>,
    pub key_distance: Vec<f64>,
    pub proximal: Vec<usize>,
    pub lengths: Vec<f64>,
    pub width_proxy: Vec<f64>,
    pub max_depth: usize,
    pub max_key_distance: f64,
    pub max_key_degree: usize,
    pub max_width_proxy: f64,
    pub total_length: f64,
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl TreeContext {
    pub fn new(tree: &TreeGeometry) -> Self {
        let n = tree.segments.len();
        let incident = tree.incident_segments();
        let key_degree: Vec<usize> = incident.iter().map(Vec::len).collect();
        let lengths: Vec<f64> = tree.segments.iter().map(|s| path_length(&s.path)).collect();

        // hop depth and BFS tree over the segment graph
        let mut adj = vec![Vec::new(); n];
        for (a, b) in tree.segment_edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut hop_depth = vec![usize::MAX; n];
        let mut parent = vec![None; n];
        let mut order = Vec::with_capacity(n);
        if n > 0 {
            hop_depth[tree.root_segment] = 0;
            let mut queue = VecDeque::from([tree.root_segment]);
            while let Some(u) = queue.pop_front() {
                order.push(u);
                for &v in &adj[u] {
                    if hop_depth[v] == usize::MAX {
                        hop_depth[v] = hop_depth[u] + 1;
                        parent[v] = Some(u);
                        queue.push_back(v);
                    }
                }
            }
        }
        let mut descendants = vec![0usize; n];
        let mut subtree_height = vec![0usize; n];
        for &u in order.iter().rev() {
            if let Some(p) = parent[u] {
                descendants[p] += descendants[u] + 1;
                subtree_height[p] = subtree_height[p].max(subtree_height[u] + 1);
            }
        }
        let max_depth = hop_depth
            .iter()
            .copied()
            .filter(|&d| d != usize::MAX)
            .max()
            .unwrap_or(0);

        // along-tree distance over the key point graph, from the root key
        let root_key = {
            let seg = &tree.segments[tree.root_segment];
            let d = |k: usize| dist(tree.key_points[k], tree.root_point);
            if d(seg.key_points[1]) < d(seg.key_points[0]) {
                seg.key_points[1]
            } else {
                seg.key_points[0]
            }
        };
        let mut key_distance = vec![f64::INFINITY; tree.key_points.len()];
        key_distance[root_key] = 0.0;
        let mut heap = BinaryHeap::from([HeapItem(0.0, root_key)]);
        while let Some(HeapItem(d, k)) = heap.pop() {
            if d > key_distance[k] {
                continue;
            }
            for &s in &incident[k] {
                let [a, b] = tree.segments[s].key_points;
                let other = if a == k { b } else { a };
                let nd = d + lengths[s];
                if nd < key_distance[other] {
                    key_distance[other] = nd;
                    heap.push(HeapItem(nd, other));
                }
            }
        }
        let pixel_index = |k: usize| {
            let (x, y) = tree.key_points[k];
            y.round() * tree.width as f64 + x.round()
        };
        let proximal = tree
            .segments
            .iter()
            .map(|s| {
                let [a, b] = s.key_points;
                match key_distance[a].total_cmp(&key_distance[b]) {
                    std::cmp::Ordering::Less => a,
                    std::cmp::Ordering::Greater => b,
                    std::cmp::Ordering::Equal => {
                        if pixel_index(b) < pixel_index(a) {
                            b
                        } else {
                            a
                        }
                    }
                }
            })
            .collect();
        let max_key_distance = key_distance
            .iter()
            .copied()
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max);
        let width_proxy: Vec<f64> = tree
            .segments
            .iter()
            .zip(&lengths)
            .map(|(s, &l)| s.region.len() as f64 / l.max(1.0))
            .collect();
        TreeContext {
            max_key_degree: key_degree.iter().copied().max().unwrap_or(0),
            max_width_proxy: width_proxy.iter().copied().fold(0.0, f64::max),
            total_length: lengths.iter().sum(),
            key_degree,
            hop_depth,
            parent,
            descendants,
            subtree_height,
            key_distance,
            proximal,
            lengths,
            width_proxy,
            max_depth,
            max_key_distance,
        }
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn bounding_box(pixels: &[Pixel]) -> (usize, usize) {
    if pixels.is_empty() {
        return (0, 0);
    }
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for &(x, y) in pixels {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    (x1 - x0 + 1, y1 - y0 + 1)
}

/// First-order statistics of a sample; zero-variance moments are 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntensityStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub energy: f64,
    pub entropy: f64,
}

pub const ENTROPY_BINS: usize = 16;

pub fn intensity_stats(values: &[f64]) -> IntensityStats {
    if values.is_empty() {
        return IntensityStats {
            mean: 0.0,
            std: 0.0,
            min: 0.0,
            max: 0.0,
            median: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
            energy: 0.0,
            entropy: 0.0,
        };
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let constant = sorted[0] == sorted[sorted.len() - 1];
    let mean = if constant {
        sorted[0]
    } else {
        values.iter().sum::<f64>() / n
    };
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let m2 = if constant { 0.0 } else { m2 };
    let (skewness, kurtosis) = if m2 > 1e-24 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let mut hist = [0usize; ENTROPY_BINS];
    for &v in values {
        let bin = ((v.clamp(0.0, 1.0) * ENTROPY_BINS as f64) as usize).min(ENTROPY_BINS - 1);
        hist[bin] += 1;
    }
    let entropy = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0);
    IntensityStats {
        mean,
        std: m2.sqrt(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        median,
        skewness,
        kurtosis,
        energy: values.iter().map(|v| v * v).sum::<f64>() / n,
        entropy,
    }
}

pub fn extract_node_features(
    tree: &TreeGeometry,
    ctx: &TreeContext,
    segment: usize,
    intensity: Option<&[u8]>,
    cfg: &FeatureConfig,
) -> Result<Vec<f64>> {
    let seg = &tree.segments[segment];
    let mut out = Vec::with_capacity(cfg.dim());
    let [ka, kb] = seg.key_points;
    let prox = ctx.proximal[segment];
    let distal = if prox == ka { kb } else { ka };

    if cfg.enable_topology {
        let (da, db) = (ctx.key_degree[ka], ctx.key_degree[kb]);
        out.push(da.min(db) as f64);
        out.push(da.max(db) as f64);
    }

    if cfg.enable_position {
        let sx = (tree.width.max(2) - 1) as f64;
        let sy = (tree.height.max(2) - 1) as f64;
        let diag = (sx * sx + sy * sy).sqrt();
        let n = tree.segments.len();
        let (cx, cy) = if seg.path.is_empty() {
            (0.0, 0.0)
        } else {
            let k = seg.path.len() as f64;
            (
                seg.path.iter().map(|p| p.0 as f64).sum::<f64>() / k,
                seg.path.iter().map(|p| p.1 as f64).sum::<f64>() / k,
            )
        };
        let pp = tree.key_points[prox];
        let dp = tree.key_points[distal];
        let len = ctx.lengths[segment];
        let angle = if (dp.0 - pp.0).abs() + (dp.1 - pp.1).abs() > 0.0 {
            (dp.1 - pp.1).atan2(dp.0 - pp.0)
        } else {
            0.0
        };
        let (bw, bh) = bounding_box(&seg.region);
        let depth = ctx.hop_depth[segment];
        let depth = if depth == usize::MAX { ctx.max_depth } else { depth };
        let prox_degree = ctx.key_degree[prox];
        let siblings = if segment == tree.root_segment {
            prox_degree.saturating_sub(1)
        } else {
            prox_degree.saturating_sub(2)
        };
        let leaf = ctx.key_degree[ka] == 1 || ctx.key_degree[kb] == 1;
        out.extend([
            ratio(cx, sx),
            ratio(cy, sy),
            ratio(pp.0, sx),
            ratio(pp.1, sy),
            ratio(dp.0, sx),
            ratio(dp.1, sy),
            ratio(depth as f64, ctx.max_depth as f64),
            ratio(dist(pp, tree.root_point), diag),
            ratio(len, ctx.total_length),
            ratio(len, diag),
            (angle.sin() + 1.0) / 2.0,
            (angle.cos() + 1.0) / 2.0,
            ratio(ctx.key_distance[prox], ctx.max_key_distance),
            ratio(ctx.descendants[segment] as f64, n.saturating_sub(1) as f64),
            ratio(bw as f64, tree.width as f64),
            ratio(bh as f64, tree.height as f64),
            ratio(ctx.width_proxy[segment], ctx.max_width_proxy),
            if leaf { 1.0 } else { 0.0 },
            ratio(siblings as f64, ctx.max_key_degree as f64),
            ratio(ctx.subtree_height[segment] as f64, ctx.max_depth as f64),
        ]);
    }

    if cfg.enable_intensity {
        let plane = intensity.ok_or(Error::MissingIntensity)?;
        if plane.len() != tree.width * tree.height {
            return Err(Error::shape("intensity plane", tree.width * tree.height, plane.len()));
        }
        let values: Vec<f64> = seg
            .region
            .iter()
            .map(|&(x, y)| f64::from(plane[y * tree.width + x]) / 255.0)
            .collect();
        let st = intensity_stats(&values);
        let len = ctx.lengths[segment];
        let chord = dist(tree.key_points[ka], tree.key_points[kb]);
        let (bw, bh) = bounding_box(&seg.region);
        let area = seg.region.len() as f64;
        out.extend([
            st.mean,
            st.std,
            st.min,
            st.max,
            st.median,
            st.skewness,
            st.kurtosis,
            st.energy,
            st.entropy,
            area,
            len,
            if chord > 0.0 { len / chord } else { 1.0 },
            if bw.max(bh) > 0 {
                bw.min(bh) as f64 / bw.max(bh) as f64
            } else {
                0.0
            },
            if bw * bh > 0 { area / (bw * bh) as f64 } else { 0.0 },
        ]);
    }
    Ok(out)
}

/// Features for every segment, in segment order.
pub fn extract_features(tree: &TreeGeometry, intensity: Option<&[u8]>, cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    if tree.segments.is_empty() {
        return Err(Error::EmptyInput("tree has no segments".into()));
    }
    let ctx = TreeContext::new(tree);
    (0..tree.segments.len())
        .map(|s| extract_node_features(tree, &ctx, s, intensity, cfg))
        .collect()
}

/// Multi-source breadth-first assignment of foreground pixels to the
/// segment whose centerline reaches them first (8-connectivity, seeds and
/// neighbors visited in a fixed order).
pub fn assign_regions(width: usize, height: usize, foreground: &[bool], seeds: &[Vec<Pixel>]) -> Vec<Vec<Pixel>> {
    let mut owner = vec![usize::MAX; width * height];
    let mut queue = VecDeque::new();
    for (s, pixels) in seeds.iter().enumerate() {
        for &(x, y) in pixels {
            let i = y * width + x;
            if owner[i] == usize::MAX {
                owner[i] = s;
                queue.push_back(i);
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % width) as isize, (i / width) as isize);
        for (dx, dy) in [(0, -1), (1, 0), (0, 1), (-1, 0), (1, -1), (1, 1), (-1, 1), (-1, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                continue;
            }
            let j = ny as usize * width + nx as usize;
            if foreground[j] && owner[j] == usize::MAX {
                owner[j] = owner[i];
                queue.push_back(j);
            }
        }
    }
    let mut regions = vec![Vec::new(); seeds.len()];
    for (i, &o) in owner.iter().enumerate() {
        if o != usize::MAX {
            regions[o].push((i % width, i / width));
        }
    }
    regions
}

// ---------------------------------------------------------------------------
// Normalization

/// Per-channel min-max record fitted on a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationRecord {
    pub fn fit<'a>(graphs: impl IntoIterator<Item = &'a crate::graph::IndividualGraph>) -> Result<Self> {
        let mut min: Vec<f64> = Vec::new();
        let mut max: Vec<f64> = Vec::new();
        let mut any = false;
        for g in graphs {
            for node in &g.nodes {
                if !any {
                    min = node.features.clone();
                    max = node.features.clone();
                    any = true;
                    continue;
                }
                if node.features.len() != min.len() {
                    return Err(Error::shape("normalization fit", min.len(), node.features.len()));
                }
                for (c, &v) in node.features.iter().enumerate() {
                    min[c] = min[c].min(v);
                    max[c] = max[c].max(v);
                }
            }
        }
        if !any {
            return Err(Error::EmptyInput("no nodes to fit normalization on".into()));
        }
        Ok(NormalizationRecord { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// `(v - min) / (max - min)`; channels with zero range map to 0.5.
    pub fn apply_vector(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                let range = self.max[c] - self.min[c];
                if range > 0.0 {
                    (v - self.min[c]) / range
                } else {
                    0.5
                }
            })
            .collect()
    }

    pub fn apply(&self, g: &crate::graph::IndividualGraph) -> Result<crate::graph::IndividualGraph> {
        if g.feature_dim() != self.dim() {
            return Err(Error::shape("normalization apply", self.dim(), g.feature_dim()));
        }
        let mut out = g.clone();
        for node in &mut out.nodes {
            node.features = self.apply_vector(&node.features);
        }
        Ok(out)
    }
}

/// Fits on `train` and applies the record to both sets.
pub fn normalize_features(
    train: &[crate::graph::IndividualGraph],
    others: &[crate::graph::IndividualGraph],
) -> Result<(
    NormalizationRecord,
    Vec<crate::graph::IndividualGraph>,
    Vec<crate::graph::IndividualGraph>,
)> {
    let record = NormalizationRecord::fit(train)?;
    let a = train.iter().map(|g| record.apply(g)).collect::<Result<Vec<_>>>()?;
    let b = others.iter().map(|g| record.apply(g)).collect::<Result<Vec<_>>>()?;
    Ok((record, a, b))
}

/// Feature names keyed by position, handy for reports.
pub fn feature_index(names: &[String]) -> BTreeMap<&str, usize> {
    names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::path_graph;
    use crate::graph::ViewAngle;

    /// Trifurcation at (10,10): a root segment from (10,0) and three
    /// children going left, right and down.
    fn star_tree() -> TreeGeometry {
        let line = |a: Pixel, b: Pixel| -> Vec<Pixel> {
            let n = a.0.abs_diff(b.0).max(a.1.abs_diff(b.1));
            (0..=n)
                .map(|t| {
                    let lerp =
                        |p: usize, q: usize| (p as f64 + (q as f64 - p as f64) * t as f64 / n as f64).round() as usize;
                    (lerp(a.0, b.0), lerp(a.1, b.1))
                })
                .collect()
        };
        let kp = vec![(10.0, 0.0), (10.0, 10.0), (0.0, 10.0), (20.0, 10.0), (10.0, 20.0)];
        let seg = |a: usize, b: usize| {
            let pa = (kp[a].0 as usize, kp[a].1 as usize);
            let pb = (kp[b].0 as usize, kp[b].1 as usize);
            let path = line(pa, pb);
            SegmentGeometry {
                region: path.clone(),
                path,
                key_points: [a, b],
            }
        };
        TreeGeometry {
            width: 21,
            height: 21,
            segments: vec![seg(0, 1), seg(1, 2), seg(1, 3), seg(1, 4)],
            key_points: kp,
            root_segment: 0,
            root_point: (10.0, 0.0),
        }
    }

    #[test]
    fn default_dimension_is_36() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.dim(), 36);
        assert_eq!(
            FeatureConfig {
                enable_intensity: false,
                ..cfg
            }
            .dim(),
            22
        );
    }

    #[test]
    fn topology_and_root_position() {
        let tree = star_tree();
        let cfg = FeatureConfig {
            enable_intensity: false,
            ..Default::default()
        };
        let f = extract_features(&tree, None, &cfg).unwrap();
        // leaf hanging off the trifurcation
        assert_eq!(&f[1][..2], &[1.0, 4.0]);
        // root segment: hop depth 0, proximal at the root point
        assert_eq!(f[0][2 + 6], 0.0);
        assert_eq!(f[0][2 + 7], 0.0);
        assert!(f.iter().flatten().all(|v| v.is_finite()));
        for row in &f {
            assert!(row[2..].iter().all(|&v| (0.0..=1.0).contains(&v)), "{row:?}");
        }
    }

    #[test]
    fn degrees_match_recount() {
        let tree = star_tree();
        let cfg = FeatureConfig {
            enable_position: false,
            enable_intensity: false,
            ..Default::default()
        };
        let f = extract_features(&tree, None, &cfg).unwrap();
        for (s, seg) in tree.segments.iter().enumerate() {
            let mut d: Vec<f64> = seg
                .key_points
                .iter()
                .map(|&k| tree.segments.iter().filter(|o| o.key_points.contains(&k)).count() as f64)
                .collect();
            d.sort_by(f64::total_cmp);
            assert_eq!(f[s], d);
        }
    }

    #[test]
    fn constant_intensity_moments_are_zero() {
        let st = intensity_stats(&[0.4; 12]);
        assert_eq!((st.std, st.entropy, st.skewness, st.kurtosis), (0.0, 0.0, 0.0, 0.0));
        assert!((st.mean - 0.4).abs() < 1e-15);
    }

    #[test]
    fn missing_intensity_plane_errors() {
        let tree = star_tree();
        let err = extract_features(&tree, None, &FeatureConfig::default());
        assert!(matches!(err, Err(Error::MissingIntensity)));
        let plane = vec![100u8; 21 * 21];
        let f = extract_features(&tree, Some(&plane), &FeatureConfig::default()).unwrap();
        assert_eq!(f[0].len(), 36);
        assert_eq!(
            f,
            extract_features(&tree, Some(&plane), &FeatureConfig::default()).unwrap()
        );
    }

    #[test]
    fn min_max_channel_scaling() {
        let mut a = path_graph(&["LMA", "LAD"], ViewAngle::Lao);
        a.nodes[0].features = vec![2.0, 7.0];
        a.nodes[1].features = vec![4.0, 7.0];
        let rec = NormalizationRecord::fit([&a]).unwrap();
        assert_eq!(rec.apply_vector(&[3.0, 1.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn test_set_uses_training_record() {
        // three tiny graphs: two for training, one held out
        let mk = |vals: &[[f64; 2]]| {
            let mut g = path_graph(&vec!["LMA"; vals.len()], ViewAngle::Lao);
            for (n, v) in g.nodes.iter_mut().zip(vals) {
                n.features = v.to_vec();
            }
            g
        };
        let train = vec![mk(&[[0.0, 10.0], [4.0, 30.0]]), mk(&[[2.0, 20.0]])];
        let test = vec![mk(&[[1.0, 15.0], [8.0, 0.0]])];
        let (rec, _, held) = normalize_features(&train, &test).unwrap();
        assert_eq!(rec.min, vec![0.0, 10.0]);
        assert_eq!(rec.max, vec![4.0, 30.0]);
        // by hand: (1-0)/4, (15-10)/20, (8-0)/4, (0-10)/20
        assert_eq!(held[0].nodes[0].features, vec![0.25, 0.25]);
        assert_eq!(held[0].nodes[1].features, vec![2.0, -0.5]);
    }

    #[test]
    fn regions_partition_foreground() {
        let w = 5;
        let fg = vec![true; 25];
        let r = assign_regions(w, 5, &fg, &[vec![(0, 0)], vec![(4, 4)]]);
        assert_eq!(r[0].len() + r[1].len(), 25);
    }
}
