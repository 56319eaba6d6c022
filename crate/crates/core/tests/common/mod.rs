#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vesselmatch::graph::{AssignmentMatrix, AssociationGraph, IndividualGraph, KeyPoint, Node, ViewAngle};
use vesselmatch::model::{self, init_params, EagmnParams, Hyperparameters};
use vesselmatch::numerics::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree on `n` nodes with uniform features in [0, 1).
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize, d: usize) -> IndividualGraph {
    let nodes = (0..n)
        .map(|i| Node {
            id: i as u64,
            label: None,
            features: (0..d).map(|_| rng.random_range(0.0..1.0)).collect(),
            key_points: [KeyPoint { x: i as f64, y: 0.0 }, KeyPoint { x: i as f64, y: 1.0 }],
        })
        .collect();
    let edges = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    IndividualGraph::new(ViewAngle::Lao, 0, nodes, edges)
}

pub fn random_params(hidden: usize, d: usize, seed: u64) -> EagmnParams {
    let mut p = init_params(
        Hyperparameters {
            hidden,
            ..Hyperparameters::new(d)
        },
        seed,
    )
    .unwrap();
    let mut r = rng(seed ^ 0xb1a5);
    for t in p.tensors_mut() {
        for v in t.as_mut_slice() {
            *v += r.random_range(-0.3..0.3);
        }
    }
    p
}

pub fn random_target(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> AssignmentMatrix {
    let data = (0..n1 * n2)
        .map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 })
        .collect();
    AssignmentMatrix(Matrix::from_vec(n1, n2, data).unwrap())
}

/// Relative error with a denominator floor, so entries whose true
/// gradient is ~0 are judged on absolute error.
pub const RELATIVE_FLOOR: f64 = 1e-3;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Default)]
pub struct GradientCheck {
    /// Worst relative error per network over smooth entries, against the
    /// extrapolated difference.
    pub worst: Vec<(String, f64)>,
    /// Same, against the plain central difference at `h`.
    pub worst_plain: f64,
    pub checked: usize,
    /// Entries whose ±h stencil crossed a ReLU or clamp boundary; finite
    /// differences are not a valid oracle there.
    pub kinks: usize,
}

impl GradientCheck {
    pub fn max_error(&self) -> f64 {
        self.worst.iter().map(|w| w.1).fold(0.0, f64::max)
    }
}

/// Backward vs central differences at `h` and `h/2`, combined by one
/// Richardson step to cancel the h² truncation term. `stride` > 1 checks
/// every `stride`-th entry only.
pub fn gradient_check(
    params: &EagmnParams,
    assoc: &AssociationGraph,
    target: &AssignmentMatrix,
    h: f64,
    stride: usize,
) -> GradientCheck {
    let (_, grads) = model::loss_and_gradients(params, assoc, target).unwrap();
    let (_, base) = model::loss_and_branch_pattern(params, assoc, target).unwrap();
    let names = params.tensor_names();
    let mut out = GradientCheck::default();
    let mut p = params.clone();
    let mut k = 0usize;
    for t in 0..grads.len() {
        let net = names[t].split('.').next().unwrap().to_string();
        if out.worst.last().is_none_or(|(n, _)| *n != net) {
            out.worst.push((net, 0.0));
        }
        for i in 0..grads[t].len() {
            k += 1;
            if !k.is_multiple_of(stride) {
                continue;
            }
            let orig = p.tensors()[t].as_slice()[i];
            let mut smooth = true;
            let mut central = |step: f64| {
                let mut at = |x: f64| {
                    p.tensors_mut()[t].as_mut_slice()[i] = x;
                    let (l, pattern) = model::loss_and_branch_pattern(&p, assoc, target).unwrap();
                    smooth &= pattern == base;
                    l
                };
                let d = (at(orig + step) - at(orig - step)) / (2.0 * step);
                p.tensors_mut()[t].as_mut_slice()[i] = orig;
                d
            };
            let full = central(h);
            let half = central(h / 2.0);
            if !smooth {
                out.kinks += 1;
                continue;
            }
            out.checked += 1;
            let analytic = grads[t].as_slice()[i];
            let extrapolated = (4.0 * half - full) / 3.0;
            out.worst_plain = out.worst_plain.max(relative_error(analytic, full));
            let slot = &mut out.worst.last_mut().unwrap().1;
            *slot = slot.max(relative_error(analytic, extrapolated));
        }
    }
    out
}
