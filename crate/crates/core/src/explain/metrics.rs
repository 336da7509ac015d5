use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcn::{GcnModel, Mask, MaskMode};
use crate::graph::{GraphDataset, LabeledGraph};

use super::{masked_probabilities, Explanation};

/// Per-graph terms of the metric sums.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphMetrics {
    pub graph_id: String,
    pub rule: Option<usize>,
    /// Model decision on the intact graph.
    pub decision: u8,
    /// Probability of `decision` on the intact graph, the complement of the
    /// mask and the mask alone.
    pub p_original: f64,
    pub p_complement: f64,
    pub p_mask: f64,
    pub decision_complement: u8,
    pub decision_mask: u8,
    /// `1 - |mask| / |graph|`, sizes counting nodes plus edges.
    pub sparsity: f64,
}

impl GraphMetrics {
    pub fn fid_acc(&self) -> f64 {
        f64::from(u8::from(self.decision_complement != self.decision))
    }

    pub fn fid_prob(&self) -> f64 {
        self.p_original - self.p_complement
    }

    pub fn infid_acc(&self) -> f64 {
        f64::from(u8::from(self.decision_mask != self.decision))
    }

    pub fn infid_prob(&self) -> f64 {
        self.p_original - self.p_mask
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Fid_acc")]
    pub fid_acc: f64,
    #[serde(rename = "Fid_prob")]
    pub fid_prob: f64,
    #[serde(rename = "Infid_acc")]
    pub infid_acc: f64,
    #[serde(rename = "Infid_prob")]
    pub infid_prob: f64,
    #[serde(rename = "Sparsity")]
    pub sparsity: f64,
    /// Share of class-0 graphs whose complement is classified 1; `None`
    /// without class-0 graphs.
    #[serde(rename = "F_0_to_1")]
    pub f_0_to_1: Option<f64>,
    #[serde(rename = "F_1_to_0")]
    pub f_1_to_0: Option<f64>,
}

fn sparsity_term(g: &LabeledGraph, mask: &Mask) -> f64 {
    let size = g.node_count() + g.edge_count();
    if size == 0 {
        return 1.0;
    }
    1.0 - mask.footprint(g) as f64 / size as f64
}

fn decide(p: [f64; 2]) -> u8 {
    u8::from(p[1] > p[0])
}

fn check_alignment(ds: &GraphDataset, explanations: &[Explanation]) -> Result<()> {
    if explanations.len() != ds.len() {
        return Err(Error::InvalidDataset(format!(
            "{} explanations for {} graphs",
            explanations.len(),
            ds.len()
        )));
    }
    for (g, e) in ds.graphs.iter().zip(explanations) {
        if e.graph_id != g.id() || e.mask.graph_id != g.id() {
            return Err(Error::InvalidMask {
                graph_id: e.graph_id.clone(),
                reason: format!("explanation does not belong to graph {}", g.id()),
            });
        }
    }
    Ok(())
}

/// Per-graph terms; explanations must follow the dataset order.
pub fn graph_metrics(model: &GcnModel, ds: &GraphDataset, explanations: &[Explanation]) -> Result<Vec<GraphMetrics>> {
    check_alignment(ds, explanations)?;
    ds.graphs
        .par_iter()
        .zip(explanations)
        .map(|(g, e)| {
            let original = model.predict(g)?;
            let y = decide(original);
            let complement = masked_probabilities(model, g, &e.mask, MaskMode::KeepComplement)?;
            let kept = masked_probabilities(model, g, &e.mask, MaskMode::KeepMask)?;
            let sparsity = sparsity_term(g, &e.mask);
            Ok(GraphMetrics {
                graph_id: g.id().to_string(),
                rule: e.rule,
                decision: y,
                p_original: original[y as usize],
                p_complement: complement[y as usize],
                p_mask: kept[y as usize],
                decision_complement: decide(complement),
                decision_mask: decide(kept),
                sparsity,
            })
        })
        .collect()
}

fn mean(rows: &[GraphMetrics], f: impl Fn(&GraphMetrics) -> f64) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

fn flip_rate(rows: &[GraphMetrics], class: u8) -> Option<f64> {
    let of_class: Vec<&GraphMetrics> = rows.iter().filter(|r| r.decision == class).collect();
    if of_class.is_empty() {
        return None;
    }
    let flips = of_class.iter().filter(|r| r.decision_complement != class).count();
    Some(flips as f64 / of_class.len() as f64)
}

impl MetricReport {
    pub fn from_rows(rows: &[GraphMetrics]) -> Self {
        MetricReport {
            n: rows.len(),
            fid_acc: mean(rows, GraphMetrics::fid_acc),
            fid_prob: mean(rows, GraphMetrics::fid_prob),
            infid_acc: mean(rows, GraphMetrics::infid_acc),
            infid_prob: mean(rows, GraphMetrics::infid_prob),
            sparsity: mean(rows, |r| r.sparsity),
            f_0_to_1: flip_rate(rows, 0),
            f_1_to_0: flip_rate(rows, 1),
        }
    }

    /// CSV of the per-graph terms.
    pub fn rows_csv(rows: &[GraphMetrics]) -> String {
        let mut out = String::from(
            "graph,rule,decision,p_original,p_complement,p_mask,fid_acc,fid_prob,infid_acc,infid_prob,sparsity\n",
        );
        for r in rows {
            let rule = r.rule.map_or(String::new(), |i| i.to_string());
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.graph_id,
                rule,
                r.decision,
                r.p_original,
                r.p_complement,
                r.p_mask,
                r.fid_acc(),
                r.fid_prob(),
                r.infid_acc(),
                r.infid_prob(),
                r.sparsity
            )
            .unwrap();
        }
        out
    }
}

/// Full report plus the per-graph terms.
pub fn evaluate(
    model: &GcnModel,
    ds: &GraphDataset,
    explanations: &[Explanation],
) -> Result<(MetricReport, Vec<GraphMetrics>)> {
    let rows = graph_metrics(model, ds, explanations)?;
    Ok((MetricReport::from_rows(&rows), rows))
}

/// `(Fid_acc, Fid_prob)`.
pub fn fidelity(model: &GcnModel, ds: &GraphDataset, explanations: &[Explanation]) -> Result<(f64, f64)> {
    let (r, _) = evaluate(model, ds, explanations)?;
    Ok((r.fid_acc, r.fid_prob))
}

/// `(Infid_acc, Infid_prob)`.
pub fn infidelity(model: &GcnModel, ds: &GraphDataset, explanations: &[Explanation]) -> Result<(f64, f64)> {
    let (r, _) = evaluate(model, ds, explanations)?;
    Ok((r.infid_acc, r.infid_prob))
}

/// `(F_0_to_1, F_1_to_0)`.
pub fn polarized_fidelity(
    model: &GcnModel,
    ds: &GraphDataset,
    explanations: &[Explanation],
) -> Result<(Option<f64>, Option<f64>)> {
    let (r, _) = evaluate(model, ds, explanations)?;
    Ok((r.f_0_to_1, r.f_1_to_0))
}

pub fn sparsity(ds: &GraphDataset, explanations: &[Explanation]) -> Result<f64> {
    check_alignment(ds, explanations)?;
    let terms: Vec<f64> = ds
        .graphs
        .iter()
        .zip(explanations)
        .map(|(g, e)| sparsity_term(g, &e.mask))
        .collect();
    Ok(if terms.is_empty() {
        0.0
    } else {
        terms.iter().sum::<f64>() / terms.len() as f64
    })
}
