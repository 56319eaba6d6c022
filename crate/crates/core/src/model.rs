//! Edge-attention graph matching network on the association graph.
//!
//! Data flow, with `h` the hidden width and `[a, b]` column concatenation:
//!
//! ```text
//! v0 = vertex_embed(vertex features)          e0 = edge_embed(edge features)
//! a0 = attn_vertex_embed(v0)                  b0 = attn_edge_embed(e0)
//! a = a0
//! repeat attention_rounds:
//!     b = attn_edge_update([attn_edge_message([a_src, a_dst]), b0])
//!     a = attn_vertex_update([Σ_incident attn_vertex_message(b), a0])
//! theta = clamp(attn_readout(b), ±10);   w = exp(-theta)
//! v = v0
//! repeat conv_rounds:
//!     e = conv_edge_update([w · conv_edge_message([v_src, v_dst]), w · e0])
//!     v = conv_vertex_update([Σ_incident conv_vertex_message(w · e), v0])
//! y = classifier(v)         (sigmoid output, one probability per vertex)
//! ```
//!
//! Every network is a two-layer perceptron. All but `attn_readout` and
//! `classifier` instance-normalize (over the rows of the graph) after each
//! affine layer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureManifest, NormalizationRecord};
use crate::graph::{AssignmentMatrix, AssociationGraph};
use crate::numerics::{Activation, GradientTape, Matrix, Mlp, Var, DEFAULT_HIDDEN};
use crate::rng;

pub const WEIGHT_FORMAT_VERSION: u32 = 1;
pub const WEIGHT_MAGIC: [u8; 8] = *b"VMATCHW\0";
pub const DEFAULT_ATTENTION_ROUNDS: usize = 3;
pub const DEFAULT_CONV_ROUNDS: usize = 2;
pub const THETA_CLAMP: f64 = 10.0;

pub const NETWORK_NAMES: [&str; 14] = [
    "vertex_embed",
    "edge_embed",
    "attn_vertex_embed",
    "attn_edge_embed",
    "attn_edge_message",
    "attn_edge_update",
    "attn_vertex_message",
    "attn_vertex_update",
    "attn_readout",
    "conv_edge_message",
    "conv_edge_update",
    "conv_vertex_message",
    "conv_vertex_update",
    "classifier",
];

const VERTEX_EMBED: usize = 0;
const EDGE_EMBED: usize = 1;
const ATTN_VERTEX_EMBED: usize = 2;
const ATTN_EDGE_EMBED: usize = 3;
const ATTN_EDGE_MESSAGE: usize = 4;
const ATTN_EDGE_UPDATE: usize = 5;
const ATTN_VERTEX_MESSAGE: usize = 6;
const ATTN_VERTEX_UPDATE: usize = 7;
const ATTN_READOUT: usize = 8;
const CONV_EDGE_MESSAGE: usize = 9;
const CONV_EDGE_UPDATE: usize = 10;
const CONV_VERTEX_MESSAGE: usize = 11;
const CONV_VERTEX_UPDATE: usize = 12;
const CLASSIFIER: usize = 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub feature_dim: usize,
    pub hidden: usize,
    pub attention_rounds: usize,
    pub conv_rounds: usize,
}

impl Hyperparameters {
    pub fn new(feature_dim: usize) -> Self {
        Hyperparameters {
            feature_dim,
            hidden: DEFAULT_HIDDEN,
            attention_rounds: DEFAULT_ATTENTION_ROUNDS,
            conv_rounds: DEFAULT_CONV_ROUNDS,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.hidden == 0 || self.attention_rounds == 0 || self.conv_rounds == 0 {
            return Err(Error::InvalidArgument(format!(
                "hyperparameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// `(widths, output activation, instance norm)` of each network.
    pub fn architecture(&self) -> [(Vec<usize>, Activation, bool); 14] {
        let (d, h) = (self.feature_dim, self.hidden);
        let enc = |input: usize| (vec![input, h, h], Activation::Identity, true);
        [
            enc(2 * d),
            enc(4 * d),
            enc(h),
            enc(h),
            enc(2 * h),
            enc(2 * h),
            enc(h),
            enc(2 * h),
            (vec![h, h, 1], Activation::Identity, false),
            enc(2 * h),
            enc(2 * h),
            enc(h),
            enc(2 * h),
            (vec![h, h, 1], Activation::Sigmoid, false),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EagmnParams {
    pub hyper: Hyperparameters,
    /// Indexed like [`NETWORK_NAMES`].
    pub networks: Vec<Mlp>,
    pub manifest: FeatureManifest,
    pub normalization: Option<NormalizationRecord>,
    pub run_config_hash: Option<String>,
}

/// Glorot-uniform weights and zero biases; each network draws from its
/// own stream so the layout of one never shifts another.
pub fn init_params(hyper: Hyperparameters, seed: u64) -> Result<EagmnParams> {
    hyper.validate()?;
    let networks = hyper
        .architecture()
        .into_iter()
        .zip(NETWORK_NAMES)
        .map(|((widths, act, norm), name)| {
            let mut r = rng::stream(seed, &format!("model/init/{name}"));
            Mlp::new(&widths, act, norm, &mut r)
        })
        .collect();
    Ok(EagmnParams {
        hyper,
        networks,
        manifest: FeatureManifest::anonymous(hyper.feature_dim),
        normalization: None,
        run_config_hash: None,
    })
}

impl EagmnParams {
    pub fn network(&self, name: &str) -> Option<&Mlp> {
        NETWORK_NAMES.iter().position(|&n| n == name).map(|i| &self.networks[i])
    }

    pub fn network_mut(&mut self, name: &str) -> Option<&mut Mlp> {
        NETWORK_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| &mut self.networks[i])
    }

    /// Parameter id of each network's first tensor.
    fn offsets(&self) -> [usize; 14] {
        let mut out = [0; 14];
        let mut acc = 0;
        for (i, net) in self.networks.iter().enumerate() {
            out[i] = acc;
            acc += net.param_count();
        }
        out
    }

    pub fn tensor_count(&self) -> usize {
        self.networks.iter().map(Mlp::param_count).sum()
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        self.networks.iter().flat_map(|n| n.tensors()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.networks.iter_mut().flat_map(|n| n.tensors_mut()).collect()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors().iter().map(|t| t.shape()).collect()
    }

    /// `network.layer.weight` / `network.layer.bias`, in tensor order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (net, name) in self.networks.iter().zip(NETWORK_NAMES) {
            for l in 0..net.layers.len() {
                out.push(format!("{name}.{l}.weight"));
                out.push(format!("{name}.{l}.bias"));
            }
        }
        out
    }
}

/// Per-stage values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub vertex_embedding: Matrix,
    pub attention_edges: Matrix,
    /// Clamped attention score per association edge (`m×1`).
    pub theta: Matrix,
    pub conv_vertices: Matrix,
    /// Vertex probabilities (`n1·n2 × 1`).
    pub prediction: Matrix,
}

struct Recorded {
    vertex_embedding: Var,
    attention_edges: Var,
    theta: Var,
    conv_vertices: Var,
    prediction: Var,
}

fn check_dims(params: &EagmnParams, assoc: &AssociationGraph) -> Result<()> {
    let d = params.hyper.feature_dim;
    if assoc.vertex_features.cols() != 2 * d {
        return Err(Error::shape(
            "association vertex features",
            2 * d,
            assoc.vertex_features.cols(),
        ));
    }
    if assoc.edge_count() > 0 && assoc.edge_features.cols() != 4 * d {
        return Err(Error::shape(
            "association edge features",
            4 * d,
            assoc.edge_features.cols(),
        ));
    }
    if params.networks.len() != NETWORK_NAMES.len() {
        return Err(Error::shape(
            "network count",
            NETWORK_NAMES.len(),
            params.networks.len(),
        ));
    }
    Ok(())
}

fn record(params: &EagmnParams, tape: &mut GradientTape, assoc: &AssociationGraph) -> Result<Recorded> {
    check_dims(params, assoc)?;
    let off = params.offsets();
    let nets = &params.networks;
    let run = |tape: &mut GradientTape, k: usize, x: Var| nets[k].record(tape, x, off[k]);
    let (src, dst) = (&assoc.edge_src, &assoc.edge_dst);
    let nv = assoc.vertex_count();
    let d = params.hyper.feature_dim;

    let v_in = tape.input(assoc.vertex_features.clone());
    let e_in = if assoc.edge_count() == 0 {
        tape.input(Matrix::zeros(0, 4 * d))
    } else {
        tape.input(assoc.edge_features.clone())
    };
    let v0 = run(tape, VERTEX_EMBED, v_in)?;
    let e0 = run(tape, EDGE_EMBED, e_in)?;

    let a0 = run(tape, ATTN_VERTEX_EMBED, v0)?;
    let b0 = run(tape, ATTN_EDGE_EMBED, e0)?;
    let mut a = a0;
    let mut b = b0;
    for _ in 0..params.hyper.attention_rounds {
        let (s, t) = (tape.gather(a, src)?, tape.gather(a, dst)?);
        let pair = tape.concat(&[s, t])?;
        let msg = run(tape, ATTN_EDGE_MESSAGE, pair)?;
        let joined = tape.concat(&[msg, b0])?;
        b = run(tape, ATTN_EDGE_UPDATE, joined)?;
        let vm = run(tape, ATTN_VERTEX_MESSAGE, b)?;
        let agg = tape.incidence_sum(vm, src, dst, nv)?;
        let joined = tape.concat(&[agg, a0])?;
        a = run(tape, ATTN_VERTEX_UPDATE, joined)?;
    }
    let theta = run(tape, ATTN_READOUT, b)?;
    let w = tape.exp_neg_clamped(theta, -THETA_CLAMP, THETA_CLAMP);

    let mut v = v0;
    let we0 = tape.scale_rows(e0, w)?;
    for _ in 0..params.hyper.conv_rounds {
        let (s, t) = (tape.gather(v, src)?, tape.gather(v, dst)?);
        let pair = tape.concat(&[s, t])?;
        let msg = run(tape, CONV_EDGE_MESSAGE, pair)?;
        let wmsg = tape.scale_rows(msg, w)?;
        let joined = tape.concat(&[wmsg, we0])?;
        let e = run(tape, CONV_EDGE_UPDATE, joined)?;
        let we = tape.scale_rows(e, w)?;
        let vm = run(tape, CONV_VERTEX_MESSAGE, we)?;
        let agg = tape.incidence_sum(vm, src, dst, nv)?;
        let joined = tape.concat(&[agg, v0])?;
        v = run(tape, CONV_VERTEX_UPDATE, joined)?;
    }
    let y = run(tape, CLASSIFIER, v)?;
    Ok(Recorded {
        vertex_embedding: v0,
        attention_edges: b,
        theta,
        conv_vertices: v,
        prediction: y,
    })
}

fn to_assignment(assoc: &AssociationGraph, column: &Matrix) -> AssignmentMatrix {
    AssignmentMatrix(Matrix::from_vec(assoc.n1, assoc.n2, column.as_slice().to_vec()).expect("n1·n2 vertices"))
}

pub fn forward(params: &EagmnParams, assoc: &AssociationGraph) -> Result<(AssignmentMatrix, ForwardTrace)> {
    let mut tape = GradientTape::new();
    let r = record(params, &mut tape, assoc)?;
    let prediction = tape.value(r.prediction).clone();
    let theta = tape.value(r.theta).map(|t| t.clamp(-THETA_CLAMP, THETA_CLAMP));
    let trace = ForwardTrace {
        vertex_embedding: tape.value(r.vertex_embedding).clone(),
        attention_edges: tape.value(r.attention_edges).clone(),
        theta,
        conv_vertices: tape.value(r.conv_vertices).clone(),
        prediction: prediction.clone(),
    };
    if !prediction.is_finite() {
        return Err(Error::NonFinite("forward prediction".into()));
    }
    Ok((to_assignment(assoc, &prediction), trace))
}

pub fn predict(params: &EagmnParams, assoc: &AssociationGraph) -> Result<AssignmentMatrix> {
    forward(params, assoc).map(|(p, _)| p)
}

/// Clamped attention score of every association edge.
pub fn attention_scores(params: &EagmnParams, assoc: &AssociationGraph) -> Result<Vec<f64>> {
    let (_, trace) = forward(params, assoc)?;
    Ok(trace.theta.into_vec())
}

/// [`loss`] together with the piecewise-boundary pattern of the pass (see
/// [`GradientTape::branch_pattern`]). Finite-difference checks use the
/// pattern to tell kinks from gradient errors.
pub fn loss_and_branch_pattern(
    params: &EagmnParams,
    assoc: &AssociationGraph,
    target: &AssignmentMatrix,
) -> Result<(f64, Vec<u8>)> {
    let mut tape = GradientTape::new();
    let r = record(params, &mut tape, assoc)?;
    let y = tape.value(r.prediction);
    let value = y
        .as_slice()
        .iter()
        .zip(target.matrix().as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((value, tape.branch_pattern()))
}

/// Summed squared error against `target` and its gradient for every
/// tensor, in [`EagmnParams::tensors`] order.
pub fn loss_and_gradients(
    params: &EagmnParams,
    assoc: &AssociationGraph,
    target: &AssignmentMatrix,
) -> Result<(f64, Vec<Matrix>)> {
    if (target.n1(), target.n2()) != (assoc.n1, assoc.n2) {
        return Err(Error::shape(
            "target assignment",
            format!("{}x{}", assoc.n1, assoc.n2),
            format!("{}x{}", target.n1(), target.n2()),
        ));
    }
    let mut tape = GradientTape::new();
    let r = record(params, &mut tape, assoc)?;
    let column = Matrix::from_vec(assoc.vertex_count(), 1, target.matrix().as_slice().to_vec())?;
    let loss = tape.squared_error(r.prediction, &column)?;
    let value = tape.value(loss)[(0, 0)];
    let grads = tape.backward(loss)?.into_dense(&params.shapes());
    Ok((value, grads))
}

pub fn loss(params: &EagmnParams, assoc: &AssociationGraph, target: &AssignmentMatrix) -> Result<f64> {
    let p = predict(params, assoc)?;
    Ok(p.matrix()
        .as_slice()
        .iter()
        .zip(target.matrix().as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

// ---------------------------------------------------------------------------
// Weight file: magic, u32 LE format version, u32 LE header length, JSON
// header, then every tensor listed in the header as row-major f64 LE.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightHeader {
    hyperparameters: Hyperparameters,
    feature_manifest: FeatureManifest,
    run_config_hash: Option<String>,
    tensors: Vec<TensorEntry>,
}

pub fn params_to_bytes(params: &EagmnParams) -> Result<Vec<u8>> {
    let mut entries: Vec<TensorEntry> = params
        .tensor_names()
        .into_iter()
        .zip(params.tensors())
        .map(|(name, t)| TensorEntry {
            name,
            rows: t.rows(),
            cols: t.cols(),
        })
        .collect();
    let mut blobs: Vec<&[f64]> = params.tensors().into_iter().map(Matrix::as_slice).collect();
    if let Some(rec) = &params.normalization {
        for (name, v) in [("normalization.min", &rec.min), ("normalization.max", &rec.max)] {
            entries.push(TensorEntry {
                name: name.into(),
                rows: 1,
                cols: v.len(),
            });
            blobs.push(v);
        }
    }
    let header = WeightHeader {
        hyperparameters: params.hyper,
        feature_manifest: params.manifest.clone(),
        run_config_hash: params.run_config_hash.clone(),
        tensors: entries,
    };
    let header = serde_json::to_vec(&header).map_err(|e| Error::json("<weight header>", e))?;
    let mut out = Vec::with_capacity(16 + header.len() + blobs.iter().map(|b| 8 * b.len()).sum::<usize>());
    out.extend_from_slice(&WEIGHT_MAGIC);
    out.extend_from_slice(&WEIGHT_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for blob in blobs {
        for v in blob {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn params_from_bytes(bytes: &[u8], origin: &str) -> Result<EagmnParams> {
    let corrupt = |what: String| Error::Corrupt(format!("{origin}: {what}"));
    if bytes.len() < 16 || bytes[..8] != WEIGHT_MAGIC {
        return Err(corrupt("not a weight file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version > WEIGHT_FORMAT_VERSION || version == 0 {
        return Err(Error::Version {
            found: version,
            supported: WEIGHT_FORMAT_VERSION,
        });
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("truncated header".into()))?;
    let header: WeightHeader =
        serde_json::from_slice(&bytes[16..header_end]).map_err(|e| corrupt(format!("header: {e}")))?;
    let payload: usize = header.tensors.iter().map(|t| t.rows * t.cols * 8).sum();
    if bytes.len() != header_end + payload {
        return Err(corrupt(format!(
            "expected {} bytes of tensor data, found {}",
            payload,
            bytes.len() - header_end
        )));
    }
    let mut params = init_params(header.hyperparameters, 0)?;
    let expected = params.tensor_names();
    let mut pos = header_end;
    let mut read = |entry: &TensorEntry| -> Vec<f64> {
        let n = entry.rows * entry.cols;
        let out = bytes[pos..pos + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        pos += 8 * n;
        out
    };
    let (model_entries, extra) = header.tensors.split_at(expected.len().min(header.tensors.len()));
    if model_entries.len() != expected.len() {
        return Err(corrupt(format!(
            "expected {} tensors, found {}",
            expected.len(),
            model_entries.len()
        )));
    }
    for ((entry, name), slot) in model_entries.iter().zip(&expected).zip(params.tensors_mut()) {
        if &entry.name != name || (entry.rows, entry.cols) != slot.shape() {
            return Err(corrupt(format!(
                "tensor {} ({}x{}) where {} ({}x{}) was expected",
                entry.name,
                entry.rows,
                entry.cols,
                name,
                slot.rows(),
                slot.cols()
            )));
        }
        *slot = Matrix::from_vec(entry.rows, entry.cols, read(entry))?;
    }
    params.normalization = match extra {
        [] => None,
        [lo, hi] if lo.name == "normalization.min" && hi.name == "normalization.max" && lo.cols == hi.cols => {
            Some(NormalizationRecord {
                min: read(lo),
                max: read(hi),
            })
        }
        _ => return Err(corrupt("unexpected trailing tensors".into())),
    };
    params.manifest = header.feature_manifest;
    params.run_config_hash = header.run_config_hash;
    Ok(params)
}

pub fn save_params(params: &EagmnParams, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &params_to_bytes(params)?)
}

pub fn load_params(path: &Path) -> Result<EagmnParams> {
    let bytes = crate::io::read_bytes(path)?;
    params_from_bytes(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::path_graph;
    use crate::graph::{build_association_graph, ViewAngle};

    fn small() -> Hyperparameters {
        Hyperparameters {
            feature_dim: 2,
            hidden: 8,
            attention_rounds: 3,
            conv_rounds: 2,
        }
    }

    fn pair() -> AssociationGraph {
        let g1 = path_graph(&["LMA", "LAD"], ViewAngle::Lao);
        let g2 = path_graph(&["LMA", "LAD", "LCX"], ViewAngle::Lao);
        build_association_graph(&g1, &g2).unwrap()
    }

    #[test]
    fn init_is_seeded() {
        let a = init_params(small(), 1).unwrap();
        assert_eq!(a, init_params(small(), 1).unwrap());
        assert_ne!(a, init_params(small(), 2).unwrap());
        assert_eq!(a.tensor_count(), 56);
    }

    #[test]
    fn output_is_a_probability_matrix() {
        let p = init_params(small(), 3).unwrap();
        let (y, trace) = forward(&p, &pair()).unwrap();
        assert_eq!((y.n1(), y.n2()), (2, 3));
        assert!(y.matrix().as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        // 2 * e1 * e2 with one edge in g1 and two in g2
        assert_eq!(trace.theta.rows(), 4);
    }

    #[test]
    fn zero_classifier_gives_half() {
        let mut p = init_params(small(), 3).unwrap();
        p.network_mut("classifier")
            .unwrap()
            .tensors_mut()
            .for_each(|t| t.fill(0.0));
        let y = predict(&p, &pair()).unwrap();
        assert!(y.matrix().as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn edgeless_association_graph_still_classifies() {
        let g1 = path_graph(&["LMA"], ViewAngle::Lao);
        let g2 = path_graph(&["LMA", "LAD"], ViewAngle::Lao);
        let assoc = build_association_graph(&g1, &g2).unwrap();
        assert_eq!(assoc.edge_count(), 0);
        let p = init_params(small(), 4).unwrap();
        let (y, trace) = forward(&p, &assoc).unwrap();
        assert_eq!(trace.theta.rows(), 0);
        assert_eq!(y.matrix().len(), 2);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = init_params(
            Hyperparameters {
                feature_dim: 3,
                ..small()
            },
            4,
        )
        .unwrap();
        assert!(matches!(forward(&p, &pair()), Err(Error::Shape { .. })));
    }

    #[test]
    fn weight_file_round_trip() {
        let mut p = init_params(small(), 5).unwrap();
        p.normalization = Some(NormalizationRecord {
            min: vec![0.0, -1.0],
            max: vec![2.0, 3.0],
        });
        p.run_config_hash = Some("abc".into());
        let bytes = params_to_bytes(&p).unwrap();
        let q = params_from_bytes(&bytes, "mem").unwrap();
        assert_eq!(p, q);
        let a = predict(&p, &pair()).unwrap();
        let b = predict(&q, &pair()).unwrap();
        assert_eq!(a.matrix().as_slice(), b.matrix().as_slice());
        assert_eq!(params_to_bytes(&q).unwrap(), bytes);
    }

    #[test]
    fn truncated_and_future_files_are_rejected() {
        let bytes = params_to_bytes(&init_params(small(), 5).unwrap()).unwrap();
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(params_from_bytes(cut, "mem"), Err(Error::Corrupt(_))));
        let mut future = bytes.clone();
        future[8..12].copy_from_slice(&(WEIGHT_FORMAT_VERSION + 1).to_le_bytes());
        assert!(matches!(params_from_bytes(&future, "mem"), Err(Error::Version { .. })));
    }

    #[test]
    fn gradients_cover_every_network() {
        let p = init_params(small(), 6).unwrap();
        let assoc = pair();
        let g1 = path_graph(&["LMA", "LAD"], ViewAngle::Lao);
        let g2 = path_graph(&["LMA", "LAD", "LCX"], ViewAngle::Lao);
        let target = crate::graph::ground_truth_assignment(&g1, &g2).unwrap();
        let (l, grads) = loss_and_gradients(&p, &assoc, &target).unwrap();
        assert!((l - loss(&p, &assoc, &target).unwrap()).abs() < 1e-12);
        let off = p.offsets();
        for (k, name) in NETWORK_NAMES.iter().enumerate() {
            let norm: f64 = grads[off[k]].as_slice().iter().map(|v| v.abs()).sum();
            assert!(norm > 0.0, "{name} got no gradient");
        }
    }
}
