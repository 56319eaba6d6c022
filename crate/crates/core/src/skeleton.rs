//! Mask → centerline → key points → segments → graph.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::features::{self, FeatureConfig, Pixel, SegmentGeometry, TreeContext, TreeGeometry};
use crate::graph::{IndividualGraph, KeyPoint, Node, ViewAngle};
use crate::pgm::Graymap;

pub const DEFAULT_PRUNE_LEN: usize = 5;
pub const FOREGROUND_THRESHOLD: u8 = 128;

/// Ring order N, NE, E, SE, S, SW, W, NW (y grows downward). Even slots
/// are the 4-neighbors.
const RING: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
    pub intensity: Option<Vec<u8>>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!("mask dimensions {width}x{height}")));
        }
        if bits.len() != width * height {
            return Err(Error::shape("mask bits", width * height, bits.len()));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
            intensity: None,
        })
    }

    pub fn with_intensity(mut self, plane: Vec<u8>) -> Result<Self> {
        if plane.len() != self.width * self.height {
            return Err(Error::shape("intensity plane", self.width * self.height, plane.len()));
        }
        self.intensity = Some(plane);
        Ok(self)
    }

    pub fn from_pgm(mask: &Graymap, intensity: Option<&Graymap>) -> Result<Self> {
        let bits = mask.pixels.iter().map(|&v| v >= FOREGROUND_THRESHOLD).collect();
        let out = BinaryMask::new(mask.width, mask.height, bits)?;
        match intensity {
            Some(plane) => {
                if (plane.width, plane.height) != (mask.width, mask.height) {
                    return Err(Error::shape(
                        "intensity plane",
                        format!("{}x{}", mask.width, mask.height),
                        format!("{}x{}", plane.width, plane.height),
                    ));
                }
                out.with_intensity(plane.pixels.clone())
            }
            None => Ok(out),
        }
    }

    pub fn to_pgm(&self) -> Graymap {
        Graymap {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.bits[y * self.width + x]
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn component_count(&self) -> usize {
        count_components(self.width, self.height, &self.bits)
    }
}

/// One-pixel-wide skeleton on the mask grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Centerline {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Centerline {
    pub fn get(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    /// Skeleton pixels in raster order.
    pub fn pixels(&self) -> Vec<Pixel> {
        (0..self.bits.len())
            .filter(|&i| self.bits[i])
            .map(|i| (i % self.width, i / self.width))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbor_count(&self, (x, y): Pixel) -> usize {
        ring(self, x, y).iter().filter(|&&b| b).count()
    }

    pub fn component_count(&self) -> usize {
        count_components(self.width, self.height, &self.bits)
    }

    /// True when some 2x2 window is entirely on the skeleton.
    pub fn has_block(&self) -> bool {
        (0..self.height.saturating_sub(1)).any(|y| {
            (0..self.width.saturating_sub(1)).any(|x| {
                let (x, y) = (x as isize, y as isize);
                self.get(x, y) && self.get(x + 1, y) && self.get(x, y + 1) && self.get(x + 1, y + 1)
            })
        })
    }
}

fn ring(c: &Centerline, x: usize, y: usize) -> [bool; 8] {
    let mut out = [false; 8];
    for (k, (dx, dy)) in RING.iter().enumerate() {
        out[k] = c.get(x as isize + dx, y as isize + dy);
    }
    out
}

fn neighbors(width: usize, height: usize, i: usize) -> impl Iterator<Item = usize> {
    let (x, y) = ((i % width) as isize, (i / width) as isize);
    RING.iter().filter_map(move |(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        (nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height)
            .then(|| ny as usize * width + nx as usize)
    })
}

fn adjacent(a: Pixel, b: Pixel) -> bool {
    a != b && a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
}

/// 8-connected foreground components.
pub fn count_components(width: usize, height: usize, bits: &[bool]) -> usize {
    let mut seen = vec![false; bits.len()];
    let mut count = 0;
    for start in 0..bits.len() {
        if !bits[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for j in neighbors(width, height, i) {
                if bits[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// 0→1 transitions around the ring.
fn transitions(r: &[bool; 8]) -> usize {
    (0..8).filter(|&k| !r[k] && r[(k + 1) % 8]).count()
}

/// Yokoi connectivity number for 8-connected foreground; 1 means the
/// pixel can be removed without changing topology.
fn yokoi8(r: &[bool; 8]) -> usize {
    let c = |k: usize| usize::from(!r[k % 8]);
    [0, 2, 4, 6].iter().map(|&k| c(k) - c(k) * c(k + 1) * c(k + 2)).sum()
}

/// Zhang-Suen candidate selection with sequential re-checking, followed by
/// removal of any remaining simple non-end pixels, repeated until stable.
pub fn thin_mask(mask: &BinaryMask) -> Result<Centerline> {
    if mask.foreground_count() == 0 {
        return Err(Error::EmptyMask);
    }
    let mut c = Centerline {
        width: mask.width,
        height: mask.height,
        bits: mask.bits.clone(),
    };
    let w = c.width;
    let deletable = |r: &[bool; 8], sub: usize| {
        let b = r.iter().filter(|&&v| v).count();
        let (n, e, s, west) = (r[0], r[2], r[4], r[6]);
        let side = if sub == 0 {
            !(n && e && s) && !(e && s && west)
        } else {
            !(n && e && west) && !(n && s && west)
        };
        (2..=6).contains(&b) && transitions(r) == 1 && side
    };
    loop {
        let mut changed = false;
        for sub in 0..2 {
            let candidates: Vec<usize> = (0..c.bits.len())
                .filter(|&i| c.bits[i] && deletable(&ring(&c, i % w, i / w), sub))
                .collect();
            for i in candidates {
                if deletable(&ring(&c, i % w, i / w), sub) {
                    c.bits[i] = false;
                    changed = true;
                }
            }
        }
        for i in 0..c.bits.len() {
            if !c.bits[i] {
                continue;
            }
            let r = ring(&c, i % w, i / w);
            if r.iter().filter(|&&v| v).count() >= 2 && yokoi8(&r) == 1 {
                c.bits[i] = false;
                changed = true;
            }
        }
        if !changed {
            return Ok(c);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyKind {
    Endpoint,
    Bifurcation,
    /// Pseudo key point placed on a closed loop that touches no other key.
    Anchor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeyPointGroup {
    pub kind: KeyKind,
    pub pixels: Vec<Pixel>,
    pub location: (f64, f64),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyPoints {
    pub groups: Vec<KeyPointGroup>,
}

impl KeyPoints {
    fn of_kind(&self, kind: KeyKind) -> Vec<(f64, f64)> {
        self.groups
            .iter()
            .filter(|g| g.kind == kind)
            .map(|g| g.location)
            .collect()
    }

    pub fn endpoints(&self) -> Vec<(f64, f64)> {
        self.of_kind(KeyKind::Endpoint)
    }

    pub fn bifurcations(&self) -> Vec<(f64, f64)> {
        self.of_kind(KeyKind::Bifurcation)
    }
}

/// Endpoints have at most one skeleton neighbor. Pixels with three or more
/// neighbors are clustered by 8-adjacency; a cluster counts as a
/// bifurcation only if its outside neighbors form at least three separate
/// groups, otherwise it is an ordinary path pixel run.
pub fn detect_key_points(c: &Centerline) -> KeyPoints {
    let (w, h) = (c.width, c.height);
    let mut groups = Vec::new();
    let mut candidate = vec![false; c.bits.len()];
    for (x, y) in c.pixels() {
        let b = c.neighbor_count((x, y));
        if b <= 1 {
            groups.push(KeyPointGroup {
                kind: KeyKind::Endpoint,
                pixels: vec![(x, y)],
                location: (x as f64, y as f64),
            });
        } else if b >= 3 {
            candidate[y * w + x] = true;
        }
    }
    let mut seen = vec![false; c.bits.len()];
    for start in 0..c.bits.len() {
        if !candidate[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut cluster = vec![start];
        let mut head = 0;
        while head < cluster.len() {
            let i = cluster[head];
            head += 1;
            for j in neighbors(w, h, i) {
                if candidate[j] && !seen[j] {
                    seen[j] = true;
                    cluster.push(j);
                }
            }
        }
        cluster.sort_unstable();
        let members: BTreeSet<usize> = cluster.iter().copied().collect();
        let exits: Vec<usize> = cluster
            .iter()
            .flat_map(|&i| neighbors(w, h, i))
            .filter(|&j| c.bits[j] && !members.contains(&j))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let exit_groups = {
            let exit_set: BTreeSet<usize> = exits.iter().copied().collect();
            let mut done = BTreeSet::new();
            let mut n = 0;
            for &e in &exits {
                if !done.insert(e) {
                    continue;
                }
                n += 1;
                let mut stack = vec![e];
                while let Some(i) = stack.pop() {
                    for j in neighbors(w, h, i) {
                        if exit_set.contains(&j) && done.insert(j) {
                            stack.push(j);
                        }
                    }
                }
            }
            n
        };
        if exit_groups >= 3 {
            let pixels: Vec<Pixel> = cluster.iter().map(|&i| (i % w, i / w)).collect();
            let k = pixels.len() as f64;
            let location = (
                pixels.iter().map(|p| p.0 as f64).sum::<f64>() / k,
                pixels.iter().map(|p| p.1 as f64).sum::<f64>() / k,
            );
            groups.push(KeyPointGroup {
                kind: KeyKind::Bifurcation,
                pixels,
                location,
            });
        }
    }
    groups.sort_by_key(|g| {
        let (x, y) = g.pixels[0];
        y * w + x
    });
    KeyPoints { groups }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CenterlineSegment {
    /// Ordered pixels from the first key point to the second, both included.
    pub path: Vec<Pixel>,
    /// Skeleton pixels owned by this segment alone (no key pixels).
    pub interior: Vec<Pixel>,
    pub ends: [usize; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tracing {
    pub centerline: Centerline,
    pub key_points: KeyPoints,
    pub segments: Vec<CenterlineSegment>,
}

/// Splits the skeleton at key points. Components of non-key pixels become
/// segments between the key points they touch; directly touching key
/// points get a segment with no interior. Loops shorter than `min_loop`
/// that leave and re-enter the same junction are folded into it.
fn raw_segments(c: &Centerline, k: &mut KeyPoints, min_loop: usize) -> Vec<CenterlineSegment> {
    let (w, h) = (c.width, c.height);
    let mut key_of = vec![usize::MAX; c.bits.len()];
    for (g, group) in k.groups.iter().enumerate() {
        for &(x, y) in &group.pixels {
            key_of[y * w + x] = g;
        }
    }
    let mut segments = Vec::new();
    let mut seen = vec![false; c.bits.len()];
    for start in 0..c.bits.len() {
        if !c.bits[start] || key_of[start] != usize::MAX || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut head = 0;
        while head < comp.len() {
            let i = comp[head];
            head += 1;
            for j in neighbors(w, h, i) {
                if c.bits[j] && key_of[j] == usize::MAX && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                }
            }
        }
        let keys: Vec<usize> = comp
            .iter()
            .flat_map(|&i| neighbors(w, h, i))
            .filter(|&j| key_of[j] != usize::MAX)
            .map(|j| key_of[j])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let members: BTreeSet<usize> = comp.iter().copied().collect();
        let touches = |i: usize, key: usize| neighbors(w, h, i).any(|j| key_of[j] == key);
        let to_px = |i: usize| (i % w, i / w);
        let mut interior: Vec<Pixel> = comp.iter().map(|&i| to_px(i)).collect();
        interior.sort_by_key(|p| p.1 * w + p.0);

        let (ends, inner): ([usize; 2], Vec<usize>) = match keys.len() {
            0 => {
                let first = *comp.iter().min().unwrap();
                let anchor = k.groups.len();
                k.groups.push(KeyPointGroup {
                    kind: KeyKind::Anchor,
                    pixels: vec![to_px(first)],
                    location: (to_px(first).0 as f64, to_px(first).1 as f64),
                });
                key_of[first] = anchor;
                interior.retain(|&p| p != to_px(first));
                let walk = walk_from(w, h, first, &members);
                segments.push(CenterlineSegment {
                    path: walk.iter().map(|&i| to_px(i)).chain([to_px(first)]).collect(),
                    interior,
                    ends: [anchor, anchor],
                });
                continue;
            }
            1 if k.groups[keys[0]].kind == KeyKind::Bifurcation && comp.len() < min_loop => {
                // thinning debris hugging a junction cluster
                k.groups[keys[0]].pixels.extend(comp.iter().map(|&i| to_px(i)));
                for &i in &comp {
                    key_of[i] = keys[0];
                }
                continue;
            }
            1 => {
                let key = keys[0];
                let first = *comp.iter().filter(|&&i| touches(i, key)).min().unwrap();
                ([key, key], walk_from(w, h, first, &members))
            }
            _ => {
                let (a, b) = (keys[0], keys[1]);
                (
                    [a, b],
                    shortest_path(w, h, &members, |i| touches(i, a), |i| touches(i, b)),
                )
            }
        };
        let key_pixel = |key: usize, near: usize| -> Pixel {
            let p = to_px(near);
            *k.groups[key]
                .pixels
                .iter()
                .find(|&&q| adjacent(p, q))
                .unwrap_or(&k.groups[key].pixels[0])
        };
        let mut path = vec![key_pixel(ends[0], inner[0])];
        path.extend(inner.iter().map(|&i| to_px(i)));
        path.push(key_pixel(ends[1], *inner.last().unwrap()));
        segments.push(CenterlineSegment { path, interior, ends });
    }

    for a in 0..k.groups.len() {
        for b in a + 1..k.groups.len() {
            let pair = k.groups[a]
                .pixels
                .iter()
                .flat_map(|&p| k.groups[b].pixels.iter().map(move |&q| (p, q)))
                .find(|&(p, q)| adjacent(p, q));
            if let Some((p, q)) = pair {
                segments.push(CenterlineSegment {
                    path: vec![p, q],
                    interior: Vec::new(),
                    ends: [a, b],
                });
            }
        }
    }

    // isolated pixels and bare junction blobs
    for g in 0..k.groups.len() {
        if !segments.iter().any(|s| s.ends.contains(&g)) {
            segments.push(CenterlineSegment {
                path: k.groups[g].pixels.clone(),
                interior: Vec::new(),
                ends: [g, g],
            });
        }
    }
    segments
}

/// Greedy walk through a pixel set, always stepping to the first unvisited
/// neighbor in ring order.
fn walk_from(w: usize, h: usize, start: usize, members: &BTreeSet<usize>) -> Vec<usize> {
    let mut visited = BTreeSet::from([start]);
    let mut out = vec![start];
    let mut cur = start;
    while let Some(next) = neighbors(w, h, cur).find(|j| members.contains(j) && !visited.contains(j)) {
        visited.insert(next);
        out.push(next);
        cur = next;
    }
    out
}

fn shortest_path(
    w: usize,
    h: usize,
    members: &BTreeSet<usize>,
    is_source: impl Fn(usize) -> bool,
    is_target: impl Fn(usize) -> bool,
) -> Vec<usize> {
    let mut prev = std::collections::BTreeMap::new();
    let mut queue = VecDeque::new();
    for &i in members {
        if is_source(i) {
            prev.insert(i, usize::MAX);
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        if is_target(i) {
            let mut path = vec![i];
            let mut cur = i;
            while prev[&cur] != usize::MAX {
                cur = prev[&cur];
                path.push(cur);
            }
            path.reverse();
            return path;
        }
        for j in neighbors(w, h, i) {
            if members.contains(&j) && !prev.contains_key(&j) {
                prev.insert(j, i);
                queue.push_back(j);
            }
        }
    }
    // members touch both keys, so the search always finishes above
    members.iter().copied().collect()
}

/// Traces segments, pruning endpoint-to-bifurcation spurs with fewer than
/// `prune_len` pixels (one per bifurcation per round, shortest first) and
/// re-detecting key points after every round.
pub fn trace_segments(c: &Centerline, prune_len: usize) -> Tracing {
    let mut skel = c.clone();
    loop {
        let mut k = detect_key_points(&skel);
        let segments = raw_segments(&skel, &mut k, prune_len);
        let mut best: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
        for (s, seg) in segments.iter().enumerate() {
            let [a, b] = seg.ends;
            let (tip, hub) = match (k.groups[a].kind, k.groups[b].kind) {
                (KeyKind::Endpoint, KeyKind::Bifurcation) => (a, b),
                (KeyKind::Bifurcation, KeyKind::Endpoint) => (b, a),
                _ => continue,
            };
            let len = seg.interior.len() + k.groups[tip].pixels.len();
            if len < prune_len {
                let entry = best.entry(hub).or_insert((len, s));
                if len < entry.0 {
                    *entry = (len, s);
                }
            }
        }
        if best.is_empty() {
            return Tracing {
                centerline: skel,
                key_points: k,
                segments,
            };
        }
        for (hub, (_, s)) in best {
            let seg = &segments[s];
            let tip = if seg.ends[0] == hub { seg.ends[1] } else { seg.ends[0] };
            for &(x, y) in seg.interior.iter().chain(&k.groups[tip].pixels) {
                skel.bits[y * skel.width + x] = false;
            }
        }
    }
}

/// Builds the segment graph. The root segment is the one incident to the
/// endpoint nearest `root_hint`; with no hint the endpoint nearest the top
/// border is used (lowest x breaks ties).
pub fn build_individual_graph(
    tracing: &Tracing,
    mask: &BinaryMask,
    features: &FeatureConfig,
    view_angle: ViewAngle,
    root_hint: Option<(f64, f64)>,
) -> Result<(IndividualGraph, TreeGeometry)> {
    if tracing.segments.is_empty() {
        return Err(Error::EmptyMask);
    }
    let k = &tracing.key_points;
    let root_key = {
        let ends: Vec<usize> = (0..k.groups.len())
            .filter(|&g| k.groups[g].kind == KeyKind::Endpoint)
            .collect();
        let pool: Vec<usize> = if ends.is_empty() {
            (0..k.groups.len()).collect()
        } else {
            ends
        };
        let score = |g: usize| {
            let (x, y) = k.groups[g].location;
            match root_hint {
                Some((hx, hy)) => ((x - hx).powi(2) + (y - hy).powi(2), 0.0),
                None => (y, x),
            }
        };
        *pool
            .iter()
            .min_by(|&&a, &&b| {
                let (sa, sb) = (score(a), score(b));
                sa.0.total_cmp(&sb.0).then(sa.1.total_cmp(&sb.1)).then(a.cmp(&b))
            })
            .unwrap()
    };
    let root_segment = tracing
        .segments
        .iter()
        .position(|s| s.ends.contains(&root_key))
        .unwrap_or(0);
    let seeds: Vec<Vec<Pixel>> = tracing
        .segments
        .iter()
        .map(|s| {
            if s.interior.is_empty() {
                s.path.clone()
            } else {
                s.interior.clone()
            }
        })
        .collect();
    let regions = features::assign_regions(mask.width, mask.height, &mask.bits, &seeds);
    let geometry = TreeGeometry {
        width: mask.width,
        height: mask.height,
        key_points: k.groups.iter().map(|g| g.location).collect(),
        segments: tracing
            .segments
            .iter()
            .zip(regions)
            .map(|(s, region)| SegmentGeometry {
                path: s.path.clone(),
                region,
                key_points: s.ends,
            })
            .collect(),
        root_segment,
        root_point: k.groups[root_key].location,
    };
    let graph = graph_from_geometry(&geometry, mask.intensity.as_deref(), features, view_angle)?;
    Ok((graph, geometry))
}

/// Nodes in segment order with `[proximal, distal]` key points; edges join
/// segments sharing a key point.
pub fn graph_from_geometry(
    geometry: &TreeGeometry,
    intensity: Option<&[u8]>,
    features: &FeatureConfig,
    view_angle: ViewAngle,
) -> Result<IndividualGraph> {
    let ctx = TreeContext::new(geometry);
    let feats = features::extract_features(geometry, intensity, features)?;
    let nodes = feats
        .into_iter()
        .enumerate()
        .map(|(s, f)| {
            let [a, b] = geometry.segments[s].key_points;
            let prox = ctx.proximal[s];
            let distal = if prox == a { b } else { a };
            let kp = |g: usize| KeyPoint {
                x: geometry.key_points[g].0,
                y: geometry.key_points[g].1,
            };
            Node {
                id: s as u64,
                label: None,
                features: f,
                key_points: [kp(prox), kp(distal)],
            }
        })
        .collect();
    let graph = IndividualGraph::new(view_angle, geometry.root_segment, nodes, geometry.segment_edges());
    let components = graph.component_count();
    if components > 1 {
        return Err(Error::Disconnected(components));
    }
    Ok(graph)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractConfig {
    pub prune_len: usize,
    pub features: FeatureConfig,
    pub root_hint: Option<(f64, f64)>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            prune_len: DEFAULT_PRUNE_LEN,
            features: FeatureConfig::default(),
            root_hint: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub graph: IndividualGraph,
    pub geometry: TreeGeometry,
    pub tracing: Tracing,
}

pub fn extract_graph(mask: &BinaryMask, view_angle: ViewAngle, cfg: &ExtractConfig) -> Result<Extraction> {
    let centerline = thin_mask(mask)?;
    let tracing = trace_segments(&centerline, cfg.prune_len);
    let (graph, geometry) = build_individual_graph(&tracing, mask, &cfg.features, view_angle, cfg.root_hint)?;
    Ok(Extraction {
        graph,
        geometry,
        tracing,
    })
}
