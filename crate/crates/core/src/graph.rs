//! Individual graphs (one node per arterial segment) and their association
//! graph, the product graph whose vertices are candidate correspondences.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaseLabel {
    #[serde(rename = "LMA")]
    Lma,
    #[serde(rename = "LAD")]
    Lad,
    #[serde(rename = "LCX")]
    Lcx,
    D,
    #[serde(rename = "OM")]
    Om,
}

impl BaseLabel {
    pub const ALL: [BaseLabel; 5] = [
        BaseLabel::Lma,
        BaseLabel::Lad,
        BaseLabel::Lcx,
        BaseLabel::D,
        BaseLabel::Om,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaseLabel::Lma => "LMA",
            BaseLabel::Lad => "LAD",
            BaseLabel::Lcx => "LCX",
            BaseLabel::D => "D",
            BaseLabel::Om => "OM",
        }
    }

    /// LAD and LCX form chains that are split into indexed sub-segments.
    pub fn is_main_branch(self) -> bool {
        matches!(self, BaseLabel::Lad | BaseLabel::Lcx)
    }

    pub fn is_side_branch(self) -> bool {
        matches!(self, BaseLabel::D | BaseLabel::Om)
    }
}

impl fmt::Display for BaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A base class plus an optional split index (`0` = unindexed), e.g. `LCX2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SemanticLabel {
    pub base: BaseLabel,
    pub index: u32,
}

impl SemanticLabel {
    pub const fn new(base: BaseLabel, index: u32) -> Self {
        SemanticLabel { base, index }
    }

    pub const fn base(base: BaseLabel) -> Self {
        SemanticLabel { base, index: 0 }
    }

    pub fn merged(self) -> BaseLabel {
        self.base
    }
}

impl fmt::Display for SemanticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            write!(f, "{}", self.base)
        } else {
            write!(f, "{}{}", self.base, self.index)
        }
    }
}

impl FromStr for SemanticLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (head, tail) = s.split_at(split);
        let base = BaseLabel::ALL
            .into_iter()
            .find(|b| b.as_str() == head)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown label {s:?}")))?;
        let index = if tail.is_empty() {
            0
        } else {
            tail.parse::<u32>()
                .ok()
                .filter(|&i| i >= 1 && !tail.starts_with('0'))
                .ok_or_else(|| Error::InvalidArgument(format!("bad label index in {s:?}")))?
        };
        Ok(SemanticLabel { base, index })
    }
}

impl Serialize for SemanticLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SemanticLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewAngle {
    #[serde(rename = "LAO")]
    Lao,
    #[serde(rename = "RAO")]
    Rao,
}

impl fmt::Display for ViewAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewAngle::Lao => "LAO",
            ViewAngle::Rao => "RAO",
        })
    }
}

/// Pixel-space location of an endpoint or bifurcation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct KeyPoint {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for KeyPoint {
    fn from([x, y]: [f64; 2]) -> Self {
        KeyPoint { x, y }
    }
}

impl From<KeyPoint> for [f64; 2] {
    fn from(k: KeyPoint) -> Self {
        [k.x, k.y]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: u64,
    pub label: Option<SemanticLabel>,
    pub features: Vec<f64>,
    pub key_points: [KeyPoint; 2],
}

/// Attributed undirected graph of one arterial tree. Edges are stored as
/// node-index pairs with the lower index first.
#[derive(Clone, Debug, PartialEq)]
pub struct IndividualGraph {
    pub case_id: Option<String>,
    pub view_angle: ViewAngle,
    pub root: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
}

impl IndividualGraph {
    /// Canonicalizes edge orientation; does not validate.
    pub fn new(view_angle: ViewAngle, root: usize, nodes: Vec<Node>, edges: Vec<(usize, usize)>) -> Self {
        let mut edges: Vec<_> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort_unstable();
        IndividualGraph {
            case_id: None,
            view_angle,
            root,
            nodes,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Feature dimension (length of the first node's vector).
    pub fn feature_dim(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.features.len())
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            if a < adj.len() && b < adj.len() && a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency().iter().map(Vec::len).collect()
    }

    pub fn component_count(&self) -> usize {
        component_count(self.nodes.len(), &self.adjacency())
    }

    /// Hop distance of every node from the root (`usize::MAX` if unreachable).
    pub fn hop_depths(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut depth = vec![usize::MAX; self.nodes.len()];
        if self.root >= self.nodes.len() {
            return depth;
        }
        depth[self.root] = 0;
        let mut queue = VecDeque::from([self.root]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        depth
    }

    /// Identifies key points by exact coordinate equality. Returns the
    /// per-node key point ids and the number of distinct key points.
    pub fn key_point_ids(&self) -> (Vec<[usize; 2]>, usize) {
        let mut ids: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        let per_node = self
            .nodes
            .iter()
            .map(|n| {
                n.key_points.map(|k| {
                    let key = (k.x.to_bits(), k.y.to_bits());
                    let next = ids.len();
                    *ids.entry(key).or_insert(next)
                })
            })
            .collect();
        (per_node, ids.len())
    }

    /// Number of segments sharing each key point.
    pub fn key_point_degrees(&self) -> (Vec<[usize; 2]>, Vec<usize>) {
        let (ids, count) = self.key_point_ids();
        let mut deg = vec![0usize; count];
        for pair in &ids {
            deg[pair[0]] += 1;
            if pair[1] != pair[0] {
                deg[pair[1]] += 1;
            }
        }
        (ids, deg)
    }

    /// A leaf segment owns at least one key point no other segment touches.
    pub fn is_leaf(&self, node: usize) -> bool {
        let (ids, deg) = self.key_point_degrees();
        ids[node].iter().any(|&k| deg[k] == 1)
    }

    /// Copy without `node`; edges are reindexed and the root follows.
    pub fn without_node(&self, node: usize) -> Result<IndividualGraph> {
        if node == self.root {
            return Err(Error::InvalidArgument("cannot remove the root node".into()));
        }
        if node >= self.nodes.len() {
            return Err(Error::InvalidArgument(format!("node index {node} out of range")));
        }
        let remap = |i: usize| if i > node { i - 1 } else { i };
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != node)
            .map(|(_, n)| n.clone())
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| a != node && b != node)
            .map(|&(a, b)| (remap(a), remap(b)))
            .collect();
        let mut g = IndividualGraph::new(self.view_angle, remap(self.root), nodes, edges);
        g.case_id = self.case_id.clone();
        Ok(g)
    }

    pub fn labels(&self) -> Vec<Option<SemanticLabel>> {
        self.nodes.iter().map(|n| n.label).collect()
    }

    pub fn feature_matrix(&self) -> Matrix {
        let d = self.feature_dim();
        let mut m = Matrix::zeros(self.nodes.len(), d);
        for (r, n) in self.nodes.iter().enumerate() {
            m.row_mut(r).copy_from_slice(&n.features);
        }
        m
    }
}

fn component_count(n: usize, adj: &[Vec<usize>]) -> usize {
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    count
}

/// One structural problem found by [`validate_graph`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Empty,
    MissingRoot,
    Disconnected {
        components: usize,
    },
    SelfLoop {
        node: usize,
    },
    DuplicateEdge {
        a: usize,
        b: usize,
    },
    EdgeOutOfRange {
        a: usize,
        b: usize,
    },
    FeatureDim {
        node: usize,
        expected: usize,
        actual: usize,
    },
    NonFiniteFeature {
        node: usize,
    },
    DuplicateId {
        id: u64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty: graph has no nodes"),
            Violation::MissingRoot => write!(f, "missing root"),
            Violation::Disconnected { components } => {
                write!(f, "disconnected: {components} components")
            }
            Violation::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Violation::DuplicateEdge { a, b } => write!(f, "duplicate edge ({a}, {b})"),
            Violation::EdgeOutOfRange { a, b } => write!(f, "edge ({a}, {b}) out of range"),
            Violation::FeatureDim { node, expected, actual } => {
                write!(f, "feature dim: node {node} has {actual}, expected {expected}")
            }
            Violation::NonFiniteFeature { node } => write!(f, "non-finite feature at node {node}"),
            Violation::DuplicateId { id } => write!(f, "duplicate node id {id}"),
        }
    }
}

pub fn validate_graph(g: &IndividualGraph) -> Vec<Violation> {
    let mut found = Vec::new();
    let n = g.nodes.len();
    if n == 0 {
        found.push(Violation::Empty);
        return found;
    }
    if g.root >= n {
        found.push(Violation::MissingRoot);
    }
    let mut seen_ids = BTreeSet::new();
    for node in &g.nodes {
        if !seen_ids.insert(node.id) {
            found.push(Violation::DuplicateId { id: node.id });
        }
    }
    let mut seen = BTreeSet::new();
    for &(a, b) in &g.edges {
        if a >= n || b >= n {
            found.push(Violation::EdgeOutOfRange { a, b });
        } else if a == b {
            found.push(Violation::SelfLoop { node: a });
        } else if !seen.insert((a.min(b), a.max(b))) {
            found.push(Violation::DuplicateEdge { a, b });
        }
    }
    let d = g.feature_dim();
    for (i, node) in g.nodes.iter().enumerate() {
        if node.features.len() != d {
            found.push(Violation::FeatureDim {
                node: i,
                expected: d,
                actual: node.features.len(),
            });
        }
        if node.features.iter().any(|v| !v.is_finite()) {
            found.push(Violation::NonFiniteFeature { node: i });
        }
    }
    let components = g.component_count();
    if components > 1 {
        found.push(Violation::Disconnected { components });
    }
    found
}

/// [`validate_graph`] as a `Result`.
pub fn ensure_valid(g: &IndividualGraph) -> Result<()> {
    let v = validate_graph(g);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidGraph(v.iter().map(ToString::to_string).collect()))
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<SemanticLabel>,
    features: Vec<f64>,
    key_points: [KeyPoint; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_manifest_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    case_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run_config_hash: Option<String>,
    view_angle: ViewAngle,
    root_node_id: u64,
    nodes: Vec<NodeRecord>,
    edges: Vec<[u64; 2]>,
}

/// Metadata carried alongside a graph in its JSON file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraphFileMeta {
    pub feature_manifest_version: Option<u32>,
    pub run_config_hash: Option<String>,
}

impl IndividualGraph {
    pub fn to_json(&self, meta: &GraphFileMeta) -> Result<String> {
        let record = GraphRecord {
            format_version: GRAPH_FORMAT_VERSION,
            feature_manifest_version: meta.feature_manifest_version,
            case_id: self.case_id.clone(),
            run_config_hash: meta.run_config_hash.clone(),
            view_angle: self.view_angle,
            root_node_id: self
                .nodes
                .get(self.root)
                .map(|n| n.id)
                .ok_or_else(|| Error::InvalidGraph(vec!["missing root".into()]))?,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    label: n.label,
                    features: n.features.clone(),
                    key_points: n.key_points,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| [self.nodes[a].id, self.nodes[b].id])
                .collect(),
        };
        serde_json::to_string_pretty(&record).map_err(|e| Error::json("<graph>", e))
    }

    /// Parses a graph file; `origin` names the source in error messages.
    pub fn from_json(text: &str, origin: &str) -> Result<(IndividualGraph, GraphFileMeta)> {
        let record: GraphRecord = serde_json::from_str(text).map_err(|e| Error::json(origin, e))?;
        if record.format_version > GRAPH_FORMAT_VERSION {
            return Err(Error::Version {
                found: record.format_version,
                supported: GRAPH_FORMAT_VERSION,
            });
        }
        let index: BTreeMap<u64, usize> = record.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let lookup = |id: u64, field: &str| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidGraph(vec![format!("{origin}: {field} refers to unknown node id {id}")]))
        };
        let root = lookup(record.root_node_id, "root_node_id")?;
        let mut edges = Vec::with_capacity(record.edges.len());
        for [a, b] in &record.edges {
            edges.push((lookup(*a, "edges")?, lookup(*b, "edges")?));
        }
        let nodes = record
            .nodes
            .into_iter()
            .map(|n| Node {
                id: n.id,
                label: n.label,
                features: n.features,
                key_points: n.key_points,
            })
            .collect();
        let mut g = IndividualGraph::new(record.view_angle, root, nodes, edges);
        g.case_id = record.case_id;
        Ok((
            g,
            GraphFileMeta {
                feature_manifest_version: record.feature_manifest_version,
                run_config_hash: record.run_config_hash,
            },
        ))
    }

    pub fn read(path: &Path) -> Result<(IndividualGraph, GraphFileMeta)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}

// ---------------------------------------------------------------------------
// Association graph

/// Product graph of `g1` (rows) and `g2` (columns). Vertex `(i, a)` has index
/// `i * n2 + a`. Every association edge joins `(i, a')` and `(j, b')` where
/// `(i, j)` is an edge of `g1` with `i < j` and `{a', b'}` an edge of `g2`;
/// both pairings are present, sorted by `(src, dst)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociationGraph {
    pub n1: usize,
    pub n2: usize,
    /// `n1·n2 × 2d`, rows `[v_i, v_a]`.
    pub vertex_features: Matrix,
    pub edge_src: Vec<usize>,
    pub edge_dst: Vec<usize>,
    /// `E × 4d`, rows `[v_i, v_j, v_a', v_b']` aligned with `(src, dst)`.
    pub edge_features: Matrix,
}

impl AssociationGraph {
    pub fn vertex_count(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn edge_count(&self) -> usize {
        self.edge_src.len()
    }

    pub fn vertex_index(&self, i: usize, a: usize) -> usize {
        i * self.n2 + a
    }

    pub fn vertex_pair(&self, v: usize) -> (usize, usize) {
        (v / self.n2, v % self.n2)
    }
}

pub fn build_association_graph(g1: &IndividualGraph, g2: &IndividualGraph) -> Result<AssociationGraph> {
    if g1.view_angle != g2.view_angle {
        return Err(Error::ViewAngleMismatch(
            g1.view_angle.to_string(),
            g2.view_angle.to_string(),
        ));
    }
    let (n1, n2) = (g1.len(), g2.len());
    if n1 > n2 {
        return Err(Error::SizeOrder { n1, n2 });
    }
    let d = g1.feature_dim();
    if g2.feature_dim() != d {
        return Err(Error::shape("build_association_graph feature dim", d, g2.feature_dim()));
    }

    let mut vertex_features = Matrix::zeros(n1 * n2, 2 * d);
    for i in 0..n1 {
        for a in 0..n2 {
            let row = vertex_features.row_mut(i * n2 + a);
            row[..d].copy_from_slice(&g1.nodes[i].features);
            row[d..].copy_from_slice(&g2.nodes[a].features);
        }
    }

    let canon = |edges: &[(usize, usize)]| -> Vec<(usize, usize)> {
        let set: BTreeSet<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        set.into_iter().collect()
    };
    let e1 = canon(&g1.edges);
    let e2 = canon(&g2.edges);

    // (src, dst, i, j, a', b')
    let mut pairs = Vec::with_capacity(2 * e1.len() * e2.len());
    for &(i, j) in &e1 {
        for &(a, b) in &e2 {
            for (x, y) in [(a, b), (b, a)] {
                pairs.push((i * n2 + x, j * n2 + y, i, j, x, y));
            }
        }
    }
    pairs.sort_unstable();

    let mut edge_features = Matrix::zeros(pairs.len(), 4 * d);
    let mut edge_src = Vec::with_capacity(pairs.len());
    let mut edge_dst = Vec::with_capacity(pairs.len());
    for (k, &(src, dst, i, j, x, y)) in pairs.iter().enumerate() {
        edge_src.push(src);
        edge_dst.push(dst);
        let row = edge_features.row_mut(k);
        row[..d].copy_from_slice(&g1.nodes[i].features);
        row[d..2 * d].copy_from_slice(&g1.nodes[j].features);
        row[2 * d..3 * d].copy_from_slice(&g2.nodes[x].features);
        row[3 * d..].copy_from_slice(&g2.nodes[y].features);
    }

    Ok(AssociationGraph {
        n1,
        n2,
        vertex_features,
        edge_src,
        edge_dst,
        edge_features,
    })
}

/// `n1 × n2` correspondence matrix, binary for ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentMatrix(pub Matrix);

impl AssignmentMatrix {
    pub fn n1(&self) -> usize {
        self.0.rows()
    }

    pub fn n2(&self) -> usize {
        self.0.cols()
    }

    pub fn get(&self, i: usize, a: usize) -> f64 {
        self.0[(i, a)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

fn unique_labels(g: &IndividualGraph) -> Result<BTreeMap<SemanticLabel, usize>> {
    let mut map = BTreeMap::new();
    for (i, n) in g.nodes.iter().enumerate() {
        let label = n.label.ok_or(Error::MissingLabel(n.id))?;
        if map.insert(label, i).is_some() {
            return Err(Error::DuplicateLabel(label.to_string()));
        }
    }
    Ok(map)
}

/// `M[i][a] = 1` iff node `i` of `g1` and node `a` of `g2` carry the same
/// split label.
pub fn ground_truth_assignment(g1: &IndividualGraph, g2: &IndividualGraph) -> Result<AssignmentMatrix> {
    let l1 = unique_labels(g1)?;
    let l2 = unique_labels(g2)?;
    let mut m = Matrix::zeros(g1.len(), g2.len());
    for (label, &i) in &l1 {
        if let Some(&a) = l2.get(label) {
            m[(i, a)] = 1.0;
        }
    }
    Ok(AssignmentMatrix(m))
}
