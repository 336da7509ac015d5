//! Explanation masks derived from activation rules.

mod metrics;
mod tree;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gcn::{apply_mask, ActivationMatrix, GcnModel, Mask, MaskMode};
use crate::graph::{GraphDataset, LabeledGraph};
use crate::miner::ActivationRule;

pub use metrics::{
    evaluate, fidelity, graph_metrics, infidelity, polarized_fidelity, sparsity, GraphMetrics, MetricReport,
};
pub use tree::{mimic_tree, rule_count_features, DecisionTree, MimicResult, TreeNode, TreeParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    /// Activating nodes and their incident edges.
    Node,
    /// Union of the ego-graphs (radius = rule layer) around activating nodes.
    Ego,
    /// Continuous edge weights decaying with distance to activating nodes.
    Decay,
    /// The `k` heaviest edges of the decay mask.
    TopK(usize),
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Node => f.write_str("node"),
            Policy::Ego => f.write_str("ego"),
            Policy::Decay => f.write_str("decay"),
            Policy::TopK(k) => write!(f, "topk:{k}"),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    /// Accepts `node`, `ego`, `decay` and `topk:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node" => Ok(Policy::Node),
            "ego" => Ok(Policy::Ego),
            "decay" => Ok(Policy::Decay),
            _ => s
                .strip_prefix("topk:")
                .and_then(|k| k.parse().ok())
                .map(Policy::TopK)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown policy {s:?}"))),
        }
    }
}

/// Decay weight of every node: each activating node `a` within `radius`
/// contributes `1 / 2^(1 + d(v, a))`.
pub fn decay_node_weights(g: &LabeledGraph, activating: &[usize], radius: usize) -> Result<Vec<f64>> {
    let mut w = vec![0.0; g.node_count()];
    for &a in activating {
        for (v, d) in g.geodesic_distances(a)?.into_iter().enumerate() {
            if let Some(d) = d.filter(|&d| d <= radius) {
                w[v] += 0.5f64.powi(1 + d as i32);
            }
        }
    }
    Ok(w)
}

/// Raw (unnormalized) decay weight `w_u + w_v` of every edge, in edge order.
pub fn decay_edge_weights(g: &LabeledGraph, activating: &[usize], radius: usize) -> Result<Vec<((usize, usize), f64)>> {
    let w = decay_node_weights(g, activating, radius)?;
    Ok(g.edges().iter().map(|e| (e.key(), w[e.u] + w[e.v])).collect())
}

/// Mask of `g` for a rule of layer `layer` whose activating nodes in `g` are
/// `activating`.
pub fn build_mask(g: &LabeledGraph, layer: usize, activating: &[usize], policy: Policy) -> Result<Mask> {
    if activating.is_empty() {
        return Err(Error::NoActivation(g.id().to_string()));
    }
    if let Some(&v) = activating.iter().find(|&&v| v >= g.node_count()) {
        return Err(Error::NodeOutOfRange {
            graph_id: g.id().to_string(),
            node: v,
            node_count: g.node_count(),
        });
    }
    let mask = match policy {
        Policy::Node => Mask::nodes(g.id(), activating.iter().copied()),
        Policy::Ego => {
            let mut nodes = BTreeSet::new();
            for &a in activating {
                let dist = g.geodesic_distances(a)?;
                nodes.extend((0..g.node_count()).filter(|&v| dist[v].is_some_and(|d| d <= layer)));
            }
            Mask::nodes(g.id(), nodes)
        }
        Policy::Decay => {
            let raw = decay_edge_weights(g, activating, layer)?;
            let max = raw.iter().map(|(_, w)| *w).fold(0.0, f64::max);
            let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
            Mask::weighted(g.id(), raw.into_iter().map(|(e, w)| (e, (w * scale).min(1.0))))
        }
        Policy::TopK(k) => {
            let mut raw = decay_edge_weights(g, activating, layer)?;
            raw.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            Mask::edges(g.id(), raw.into_iter().take(k).map(|(e, _)| e))
        }
    };
    Ok(mask)
}

/// Mask chosen for one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub graph_id: String,
    /// Index of the chosen rule; `None` when no rule activates in the graph
    /// (the mask is then empty).
    pub rule: Option<usize>,
    pub policy: Option<Policy>,
    pub mask: Mask,
}

impl Explanation {
    pub fn empty(graph_id: &str) -> Self {
        Explanation {
            graph_id: graph_id.to_string(),
            rule: None,
            policy: None,
            mask: Mask::nodes(graph_id, []),
        }
    }
}

/// Probabilities of the graph left after applying `mask`, with the
/// empty-graph fallback.
pub(crate) fn masked_probabilities(model: &GcnModel, g: &LabeledGraph, mask: &Mask, mode: MaskMode) -> Result<[f64; 2]> {
    match apply_mask(g, mask, mode) {
        Ok(h) => model.predict(&h),
        Err(Error::EmptyGraph(_)) => Ok(crate::gcn::EMPTY_GRAPH_PROBABILITIES),
        Err(e) => Err(e),
    }
}

/// One explanation per graph. Among all rules (any layer) with an
/// activating node in the graph, picks the one whose mask removes the most
/// probability from the model's decision; ties keep the earlier rule.
/// `acts[l - 1]` is the activation matrix of layer `l` over `ds`.
pub fn explain_dataset(
    model: &GcnModel,
    ds: &GraphDataset,
    rules: &[ActivationRule],
    acts: &[ActivationMatrix],
    policy: Policy,
) -> Result<Vec<Explanation>> {
    for rule in rules {
        if rule.layer == 0 || rule.layer > acts.len() {
            return Err(Error::LayerOutOfRange {
                layer: rule.layer,
                layers: acts.len(),
            });
        }
    }
    ds.graphs
        .par_iter()
        .enumerate()
        .map(|(gi, g)| {
            let original = model.forward(g)?;
            let y = original.decision as usize;
            let mut best: Option<(f64, Explanation)> = None;
            for (ri, rule) in rules.iter().enumerate() {
                let act = &acts[rule.layer - 1];
                let activating = act.activating_nodes(gi, rule.bits());
                if activating.is_empty() {
                    continue;
                }
                let mask = build_mask(g, rule.layer, &activating, policy)?;
                let p = masked_probabilities(model, g, &mask, MaskMode::KeepComplement)?;
                let delta = original.probabilities[y] - p[y];
                if best.as_ref().map_or(true, |(b, _)| delta > *b) {
                    let e = Explanation {
                        graph_id: g.id().to_string(),
                        rule: Some(ri),
                        policy: Some(policy),
                        mask,
                    };
                    best = Some((delta, e));
                }
            }
            Ok(best.map_or_else(|| Explanation::empty(g.id()), |(_, e)| e))
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMaskEdge {
    Plain(usize, usize),
    Weighted(usize, usize, f64),
}

/// Reads externally produced masks: a JSON object mapping graph ids to lists
/// of `[u, v]` or `[u, v, w]` edges. A graph with any weighted entry gets a
/// continuous mask; graphs absent from the map get an empty mask.
pub fn parse_external_masks(text: &str, ds: &GraphDataset) -> Result<Vec<Explanation>> {
    let raw: BTreeMap<String, Vec<RawMaskEdge>> = serde_json::from_str(text)?;
    if let Some(id) = raw.keys().find(|id| ds.graph_index(id).is_none()) {
        return Err(Error::InvalidMask {
            graph_id: id.clone(),
            reason: "graph not in dataset".into(),
        });
    }
    ds.graphs
        .iter()
        .map(|g| {
            let Some(edges) = raw.get(g.id()) else {
                return Ok(Explanation::empty(g.id()));
            };
            let weighted = edges.iter().any(|e| matches!(e, RawMaskEdge::Weighted(..)));
            let mask = if weighted {
                Mask::weighted(
                    g.id(),
                    edges.iter().map(|e| match *e {
                        RawMaskEdge::Plain(u, v) => ((u, v), 1.0),
                        RawMaskEdge::Weighted(u, v, w) => ((u, v), w),
                    }),
                )
            } else {
                Mask::edges(
                    g.id(),
                    edges.iter().map(|e| match *e {
                        RawMaskEdge::Plain(u, v) | RawMaskEdge::Weighted(u, v, _) => (u, v),
                    }),
                )
            };
            mask.validate(g)?;
            Ok(Explanation {
                graph_id: g.id().to_string(),
                rule: None,
                policy: None,
                mask,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::MaskPayload;

    fn path(n: usize) -> LabeledGraph {
        LabeledGraph::new("p", vec![0; n], (1..n).map(|v| (v - 1, v, 1.0)), 1).unwrap()
    }

    #[test]
    fn policy_strings() {
        for p in [Policy::Node, Policy::Ego, Policy::Decay, Policy::TopK(4)] {
            assert_eq!(p.to_string().parse::<Policy>().unwrap(), p);
        }
        assert!("topk".parse::<Policy>().is_err());
    }

    #[test]
    fn node_policy() {
        let g = path(4);
        let m = build_mask(&g, 1, &[1], Policy::Node).unwrap();
        assert_eq!(m.payload, MaskPayload::Nodes([1].into()));
        assert_eq!(m.footprint(&g), 3);
        assert!(matches!(build_mask(&g, 1, &[], Policy::Node), Err(Error::NoActivation(_))));
    }

    #[test]
    fn ego_policy() {
        let g = path(5);
        let m = build_mask(&g, 1, &[0, 4], Policy::Ego).unwrap();
        assert_eq!(m.payload, MaskPayload::Nodes([0, 1, 3, 4].into()));
    }

    #[test]
    fn decay_weights() {
        let g = path(3);
        let w = decay_node_weights(&g, &[0], 1).unwrap();
        assert_eq!(w, vec![0.5, 0.25, 0.0]);
        let e = decay_edge_weights(&g, &[0], 1).unwrap();
        assert_eq!(e, vec![((0, 1), 0.75), ((1, 2), 0.25)]);
        let m = build_mask(&g, 1, &[0], Policy::Decay).unwrap();
        let MaskPayload::Weighted(map) = m.payload else { panic!() };
        assert_eq!(map[&(0, 1)], 1.0);
        assert_eq!(map[&(1, 2)], 0.25 / 0.75);
    }

    #[test]
    fn topk_ties_and_saturation() {
        // star around 0: all edges tie
        let g = LabeledGraph::new("s", vec![0; 4], [(0, 3, 1.0), (0, 1, 1.0), (0, 2, 1.0)], 1).unwrap();
        let m = build_mask(&g, 1, &[0], Policy::TopK(2)).unwrap();
        assert_eq!(m.payload, MaskPayload::Edges([(0, 1), (0, 2)].into()));
        let m = build_mask(&g, 1, &[0], Policy::TopK(10)).unwrap();
        assert_eq!(m.payload, MaskPayload::Edges(g.edge_set()));
    }

    #[test]
    fn external_masks() {
        let ds = GraphDataset::new(vec!["a".into()], vec![path(3)], None).unwrap();
        let ex = parse_external_masks(r#"{"p": [[1, 0]]}"#, &ds).unwrap();
        assert_eq!(ex[0].mask.payload, MaskPayload::Edges([(0, 1)].into()));
        let ex = parse_external_masks(r#"{"p": [[1, 0, 0.5], [1, 2]]}"#, &ds).unwrap();
        assert!(ex[0].mask.is_continuous());
        assert!(parse_external_masks(r#"{"p": [[0, 2]]}"#, &ds).is_err());
        assert!(parse_external_masks(r#"{"q": []}"#, &ds).is_err());
        let ex = parse_external_masks("{}", &ds).unwrap();
        assert!(ex[0].mask.is_empty());
    }
}
