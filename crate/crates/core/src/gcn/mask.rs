use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{edge_key, Edge, LabeledGraph};

#[derive(Clone, Debug, PartialEq)]
pub enum MaskPayload {
    Nodes(BTreeSet<usize>),
    /// Undirected pairs stored as `(min, max)`.
    Edges(BTreeSet<(usize, usize)>),
    /// Per-edge weight in `[0, 1]`; unlisted edges weigh 0.
    Weighted(BTreeMap<(usize, usize), f64>),
}

/// Explanation mask over one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub graph_id: String,
    pub payload: MaskPayload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskMode {
    /// Keep only what the mask selects.
    KeepMask,
    /// Remove what the mask selects.
    KeepComplement,
}

impl Mask {
    pub fn nodes(graph_id: impl Into<String>, nodes: impl IntoIterator<Item = usize>) -> Self {
        Mask {
            graph_id: graph_id.into(),
            payload: MaskPayload::Nodes(nodes.into_iter().collect()),
        }
    }

    pub fn edges(graph_id: impl Into<String>, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Mask {
            graph_id: graph_id.into(),
            payload: MaskPayload::Edges(edges.into_iter().map(|(a, b)| edge_key(a, b)).collect()),
        }
    }

    pub fn weighted(
        graph_id: impl Into<String>,
        weights: impl IntoIterator<Item = ((usize, usize), f64)>,
    ) -> Self {
        Mask {
            graph_id: graph_id.into(),
            payload: MaskPayload::Weighted(
                weights
                    .into_iter()
                    .map(|((a, b), w)| (edge_key(a, b), w))
                    .collect(),
            ),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.payload, MaskPayload::Weighted(_))
    }

    pub fn is_empty(&self) -> bool {
        match &self.payload {
            MaskPayload::Nodes(s) => s.is_empty(),
            MaskPayload::Edges(s) => s.is_empty(),
            MaskPayload::Weighted(m) => m.values().all(|&w| w <= 0.0),
        }
    }

    pub fn validate(&self, g: &LabeledGraph) -> Result<()> {
        let invalid = |reason: String| Error::InvalidMask {
            graph_id: g.id().to_string(),
            reason,
        };
        if self.graph_id != g.id() {
            return Err(invalid(format!("mask belongs to graph {}", self.graph_id)));
        }
        let n = g.node_count();
        match &self.payload {
            MaskPayload::Nodes(s) => {
                if let Some(v) = s.iter().find(|&&v| v >= n) {
                    return Err(invalid(format!("node {v} does not exist")));
                }
            }
            MaskPayload::Edges(s) => {
                let edges = g.edge_set();
                if let Some(e) = s.iter().find(|e| !edges.contains(e)) {
                    return Err(invalid(format!("edge {e:?} does not exist")));
                }
            }
            MaskPayload::Weighted(m) => {
                let edges = g.edge_set();
                for (e, w) in m {
                    if !edges.contains(e) {
                        return Err(invalid(format!("edge {e:?} does not exist")));
                    }
                    if !(0.0..=1.0).contains(w) {
                        return Err(invalid(format!("weight {w} on edge {e:?} outside [0, 1]")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Node and edge count of the mask, for sparsity. Node masks count their
    /// nodes plus every incident edge; edge masks count their edges plus
    /// endpoints; continuous masks count edges weighing more than 0.5 plus
    /// endpoints.
    pub fn footprint(&self, g: &LabeledGraph) -> usize {
        match &self.payload {
            MaskPayload::Nodes(s) => {
                s.len()
                    + g.edges()
                        .iter()
                        .filter(|e| s.contains(&e.u) || s.contains(&e.v))
                        .count()
            }
            MaskPayload::Edges(s) => s.len() + endpoints(s.iter()),
            MaskPayload::Weighted(m) => {
                let heavy: Vec<_> = m.iter().filter(|(_, &w)| w > 0.5).map(|(e, _)| e).collect();
                heavy.len() + endpoints(heavy.into_iter())
            }
        }
    }
}

fn endpoints<'a>(edges: impl Iterator<Item = &'a (usize, usize)>) -> usize {
    edges
        .flat_map(|&(u, v)| [u, v])
        .collect::<BTreeSet<_>>()
        .len()
}

/// Applies a mask to a graph. Removing every node yields
/// [`Error::EmptyGraph`]; callers choose the fallback prediction.
pub fn apply_mask(g: &LabeledGraph, mask: &Mask, mode: MaskMode) -> Result<LabeledGraph> {
    mask.validate(g)?;
    let n = g.node_count();
    let out = match (&mask.payload, mode) {
        (MaskPayload::Nodes(s), MaskMode::KeepComplement) => {
            let keep: Vec<usize> = (0..n).filter(|v| !s.contains(v)).collect();
            g.induced(&keep, g.id().to_string()).0
        }
        (MaskPayload::Nodes(s), MaskMode::KeepMask) => {
            let keep: Vec<usize> = s.iter().copied().collect();
            g.induced(&keep, g.id().to_string()).0
        }
        (MaskPayload::Edges(s), MaskMode::KeepComplement) => {
            let mut had_edge = vec![false; n];
            let mut has_edge = vec![false; n];
            for e in g.edges() {
                had_edge[e.u] = true;
                had_edge[e.v] = true;
                if !s.contains(&e.key()) {
                    has_edge[e.u] = true;
                    has_edge[e.v] = true;
                }
            }
            // nodes isolated by the deletion are dropped; originally isolated
            // nodes stay
            let keep: Vec<usize> = (0..n).filter(|&v| has_edge[v] || !had_edge[v]).collect();
            let stripped = g.with_edges(
                g.edges()
                    .iter()
                    .filter(|e| !s.contains(&e.key()))
                    .copied()
                    .collect(),
            );
            stripped.induced(&keep, g.id().to_string()).0
        }
        (MaskPayload::Edges(s), MaskMode::KeepMask) => {
            let keep: Vec<usize> = s
                .iter()
                .flat_map(|&(u, v)| [u, v])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let kept = g.with_edges(
                g.edges()
                    .iter()
                    .filter(|e| s.contains(&e.key()))
                    .copied()
                    .collect(),
            );
            kept.induced(&keep, g.id().to_string()).0
        }
        (MaskPayload::Weighted(m), mode) => {
            let edges: Vec<Edge> = g
                .edges()
                .iter()
                .filter_map(|e| {
                    let w = m.get(&e.key()).copied().unwrap_or(0.0).clamp(0.0, 1.0);
                    let factor = match mode {
                        MaskMode::KeepComplement => 1.0 - w,
                        MaskMode::KeepMask => w,
                    };
                    let weight = e.weight * factor;
                    (weight > 0.0).then_some(Edge { weight, ..*e })
                })
                .collect();
            g.with_edges(edges)
        }
    };
    if out.node_count() == 0 {
        return Err(Error::EmptyGraph(g.id().to_string()));
    }
    Ok(out)
}
