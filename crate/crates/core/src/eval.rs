//! Support-weighted one-vs-rest metrics and the leaf-dropping robustness
//! sweep.
//!
//! Per base class `c` with one-vs-rest counts:
//!
//! * `acc  = (tp + tn) / n`
//! * `prec = tp / (tp + fp)`
//! * `rec  = tp / (tp + fn)`, or `tn / (tn + fn)` with [`RecallForm::TrueNegative`]
//! * `f1   = tp / (tp + (fp + fn) / 2)`
//!
//! Empty denominators give 0. Weighted values are `Σ_c metric_c · n_c / n`
//! with `n_c` the true support of `c`; micro accuracy (fraction of correct
//! labels) is reported alongside.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::assignment::DecodeRule;
use crate::error::{Error, Result};
use crate::graph::{BaseLabel, IndividualGraph};
use crate::model::EagmnParams;
use crate::pipeline::{infer_labels, Prediction};
use crate::rng;

pub const DROP_PROBABILITIES: [f64; 7] = [0.05, 0.075, 0.10, 0.125, 0.15, 0.175, 0.20];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecallForm {
    #[default]
    Standard,
    TrueNegative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: BaseLabel,
    pub support: usize,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub acc: f64,
    pub prec: f64,
    pub rec: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub acc: f64,
    pub prec: f64,
    pub rec: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub recall_form: RecallForm,
    /// Classes seen among true or predicted labels, in label order.
    pub per_class: Vec<ClassMetrics>,
    pub weighted: Summary,
    pub micro_accuracy: f64,
}

fn ratio(num: usize, den: f64) -> f64 {
    if den > 0.0 {
        num as f64 / den
    } else {
        0.0
    }
}

pub fn compute_metrics(pairs: &[(BaseLabel, BaseLabel)], recall: RecallForm) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no labeled predictions to score".into()));
    }
    let n = pairs.len();
    let classes: BTreeSet<BaseLabel> = pairs.iter().flat_map(|&(t, p)| [t, p]).collect();
    let per_class: Vec<ClassMetrics> = classes
        .into_iter()
        .map(|c| {
            let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count();
            let fp = pairs.iter().filter(|&&(t, p)| t != c && p == c).count();
            let fn_ = pairs.iter().filter(|&&(t, p)| t == c && p != c).count();
            let tn = n - tp - fp - fn_;
            let rec = match recall {
                RecallForm::Standard => ratio(tp, (tp + fn_) as f64),
                RecallForm::TrueNegative => ratio(tn, (tn + fn_) as f64),
            };
            ClassMetrics {
                label: c,
                support: tp + fn_,
                tp,
                tn,
                fp,
                fn_,
                acc: ratio(tp + tn, n as f64),
                prec: ratio(tp, (tp + fp) as f64),
                rec,
                f1: ratio(tp, tp as f64 + 0.5 * (fp + fn_) as f64),
            }
        })
        .collect();
    let weigh = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|m| f(m) * m.support as f64 / n as f64)
            .sum::<f64>()
    };
    let weighted = Summary {
        acc: weigh(|m| m.acc),
        prec: weigh(|m| m.prec),
        rec: weigh(|m| m.rec),
        f1: weigh(|m| m.f1),
    };
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    Ok(MetricsReport {
        n,
        recall_form: recall,
        per_class,
        weighted,
        micro_accuracy: correct as f64 / n as f64,
    })
}

impl MetricsReport {
    /// One row per class plus a `weighted` row; full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,support,acc,prec,rec,f1\n");
        for m in &self.per_class {
            let _ = writeln!(out, "{},{},{},{},{},{}", m.label, m.support, m.acc, m.prec, m.rec, m.f1);
        }
        let w = &self.weighted;
        let _ = writeln!(out, "weighted,{},{},{},{},{}", self.n, w.acc, w.prec, w.rec, w.f1);
        out
    }

    /// Four-decimal table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<9}{:>8}{:>8}{:>8}{:>8}{:>8}\n",
            "class", "n", "ACC", "PREC", "REC", "F1"
        );
        for m in &self.per_class {
            let _ = writeln!(
                out,
                "{:<9}{:>8}{:>8.4}{:>8.4}{:>8.4}{:>8.4}",
                m.label.as_str(),
                m.support,
                m.acc,
                m.prec,
                m.rec,
                m.f1
            );
        }
        let w = &self.weighted;
        let _ = writeln!(
            out,
            "{:<9}{:>8}{:>8.4}{:>8.4}{:>8.4}{:>8.4}",
            "weighted", self.n, w.acc, w.prec, w.rec, w.f1
        );
        let _ = writeln!(out, "micro accuracy {:.4}", self.micro_accuracy);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub case_id: String,
    pub reason: String,
}

/// Predictions for every test graph that has a usable template.
pub fn predict_all(
    params: &EagmnParams,
    tests: &[IndividualGraph],
    templates: &[IndividualGraph],
    rule: DecodeRule,
) -> Result<(Vec<Prediction>, Vec<SkippedCase>)> {
    let mut preds = Vec::new();
    let mut skipped = Vec::new();
    for (k, g) in tests.iter().enumerate() {
        match infer_labels(params, g, templates, rule) {
            Ok(p) => preds.push(p),
            Err(e @ Error::NoUsableTemplate(_)) => skipped.push(SkippedCase {
                case_id: g.case_id.clone().unwrap_or_else(|| format!("test-{k}")),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((preds, skipped))
}

pub fn pooled_pairs(preds: &[Prediction]) -> Vec<(BaseLabel, BaseLabel)> {
    preds.iter().flat_map(Prediction::labeled_pairs).collect()
}

/// Drops leaf segments independently with probability `p`. Nodes are
/// visited in index order and each draws one uniform number whether or not
/// it is droppable, so for a fixed stream the dropped set grows with `p`.
/// A node is droppable when it is not the root, one of its key points
/// touches no other remaining segment, and removing it leaves the graph
/// connected; all three are re-checked against the current graph.
/// Returns the surviving graph and the ids of dropped nodes.
pub fn perturb_graph(g: &IndividualGraph, p: f64, stream: &mut rng::Rng) -> Result<(IndividualGraph, Vec<u64>)> {
    let mut current = g.clone();
    let mut dropped = Vec::new();
    for id in g.nodes.iter().map(|n| n.id).collect::<Vec<_>>() {
        let u: f64 = stream.random();
        if u >= p {
            continue;
        }
        let Some(idx) = current.nodes.iter().position(|n| n.id == id) else {
            continue;
        };
        if idx == current.root || !current.is_leaf(idx) {
            continue;
        }
        let next = current.without_node(idx)?;
        if next.component_count() == 1 {
            current = next;
            dropped.push(id);
        }
    }
    Ok((current, dropped))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCell {
    pub probability: f64,
    pub dropped_segments: usize,
    pub surviving_segments: usize,
    pub report: MetricsReport,
    pub skipped_cases: Vec<SkippedCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub seed: u64,
    pub cells: Vec<RobustnessCell>,
}

/// Each test graph uses the same drop stream at every probability, so
/// `p = 0` reproduces the unperturbed evaluation exactly.
pub fn robustness_sweep(
    params: &EagmnParams,
    tests: &[IndividualGraph],
    templates: &[IndividualGraph],
    probabilities: &[f64],
    seed: u64,
    rule: DecodeRule,
    recall: RecallForm,
) -> Result<RobustnessReport> {
    if tests.is_empty() {
        return Err(Error::EmptyInput("robustness sweep needs test graphs".into()));
    }
    let mut cells = Vec::new();
    for &p in probabilities {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("drop probability {p} is not in [0, 1]")));
        }
        let mut perturbed = Vec::with_capacity(tests.len());
        let mut dropped = 0;
        for (t, g) in tests.iter().enumerate() {
            let mut s = rng::indexed_stream(seed, "robustness/drop", t as u64);
            let (h, d) = perturb_graph(g, p, &mut s)?;
            dropped += d.len();
            perturbed.push(h);
        }
        let (preds, skipped) = predict_all(params, &perturbed, templates, rule)?;
        let pairs = pooled_pairs(&preds);
        cells.push(RobustnessCell {
            probability: p,
            dropped_segments: dropped,
            surviving_segments: perturbed.iter().map(IndividualGraph::len).sum(),
            report: compute_metrics(&pairs, recall)?,
            skipped_cases: skipped,
        });
    }
    Ok(RobustnessReport { seed, cells })
}

impl RobustnessReport {
    /// Tidy rows: probability, class, metric, value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("probability,class,metric,value\n");
        for cell in &self.cells {
            let r = &cell.report;
            for m in &r.per_class {
                for (name, v) in [("acc", m.acc), ("prec", m.prec), ("rec", m.rec), ("f1", m.f1)] {
                    let _ = writeln!(out, "{},{},{},{}", cell.probability, m.label, name, v);
                }
            }
            let w = &r.weighted;
            for (name, v) in [("acc", w.acc), ("prec", w.prec), ("rec", w.rec), ("f1", w.f1)] {
                let _ = writeln!(out, "{},weighted,{},{}", cell.probability, name, v);
            }
            let _ = writeln!(out, "{},all,micro_accuracy,{}", cell.probability, r.micro_accuracy);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BaseLabel::{Lad, Lcx, D};

    #[test]
    fn perfect_predictions_score_one() {
        let pairs = [(Lad, Lad), (Lcx, Lcx), (D, D)];
        let r = compute_metrics(&pairs, RecallForm::Standard).unwrap();
        assert_eq!(
            r.weighted,
            Summary {
                acc: 1.0,
                prec: 1.0,
                rec: 1.0,
                f1: 1.0
            }
        );
        assert_eq!(r.micro_accuracy, 1.0);
    }

    #[test]
    fn empty_input_errors() {
        assert!(compute_metrics(&[], RecallForm::Standard).is_err());
    }

    #[test]
    fn csv_weighted_row_matches_report() {
        let pairs = [(Lad, Lad), (Lcx, D), (D, D)];
        let r = compute_metrics(&pairs, RecallForm::Standard).unwrap();
        let csv = r.to_csv();
        let last = csv.lines().last().unwrap();
        let acc: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(acc, r.weighted.acc);
        assert!(r.to_table().contains("weighted"));
    }
}
