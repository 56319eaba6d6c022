//! One-to-one decoding of predicted correspondence matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AssignmentMatrix;
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeRule {
    /// Maximum-total-probability one-to-one matching.
    #[default]
    Hungarian,
    /// Independent argmax per row; columns may repeat.
    RowArgmax,
}

/// Sums within this distance of the optimum count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Minimum-cost assignment of every row to a distinct column
/// (`rows <= cols`), by shortest augmenting paths with potentials.
/// Returns the column of each row.
fn min_cost_assignment(cost: &Matrix) -> Vec<usize> {
    let (n, m) = (cost.rows(), cost.cols());
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

pub fn assignment_total(scores: &Matrix, cols: &[usize]) -> f64 {
    cols.iter().enumerate().map(|(i, &a)| scores[(i, a)]).sum()
}

/// Maximum-total-score matching of rows to distinct columns. Among optimal
/// matchings the lexicographically smallest `(row, column)` sequence wins:
/// rows are fixed in order to the lowest column that still admits an
/// optimal completion.
pub fn hungarian(scores: &Matrix) -> Result<Vec<usize>> {
    let (n, m) = scores.shape();
    if n > m {
        return Err(Error::SizeOrder { n1: n, n2: m });
    }
    if !scores.is_finite() {
        return Err(Error::NonFinite("assignment scores".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let best = assignment_total(scores, &min_cost_assignment(&scores.map(|s| -s)));
    let tol = TIE_TOLERANCE * (n as f64).max(best.abs());
    let forbid = 1.0 + scores.as_slice().iter().fold(0.0f64, |a, s| a.max(s.abs())) * 2.0 * n as f64;
    let mut cost = scores.map(|s| -s);
    let mut chosen = Vec::with_capacity(n);
    for i in 0..n {
        let taken = |a: usize, chosen: &[usize]| chosen.contains(&a);
        let mut fixed = None;
        for a in 0..m {
            if taken(a, &chosen) {
                continue;
            }
            let mut trial = cost.clone();
            for b in 0..m {
                if b != a {
                    trial[(i, b)] = forbid;
                }
            }
            for r in i + 1..n {
                trial[(r, a)] = forbid;
            }
            let cols = min_cost_assignment(&trial);
            let feasible = cols.iter().enumerate().all(|(r, &c)| trial[(r, c)] < forbid);
            if feasible && assignment_total(scores, &cols) >= best - tol {
                fixed = Some(a);
                break;
            }
        }
        let a = fixed.expect("an optimal completion always exists");
        for b in 0..m {
            if b != a {
                cost[(i, b)] = forbid;
            }
        }
        for r in i + 1..n {
            cost[(r, a)] = forbid;
        }
        chosen.push(a);
    }
    Ok(chosen)
}

/// Column of each row under `rule`; lowest column wins argmax ties.
pub fn decode_assignment(p: &AssignmentMatrix, rule: DecodeRule) -> Result<Vec<usize>> {
    match rule {
        DecodeRule::Hungarian => hungarian(p.matrix()),
        DecodeRule::RowArgmax => {
            let m = p.matrix();
            if m.rows() > 0 && m.cols() == 0 {
                return Err(Error::SizeOrder { n1: m.rows(), n2: 0 });
            }
            Ok((0..m.rows())
                .map(|i| {
                    let row = m.row(i);
                    (0..row.len()).fold(0, |best, a| if row[a] > row[best] { a } else { best })
                })
                .collect())
        }
    }
}
