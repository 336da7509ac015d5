//! Node-labeled, weighted, undirected graphs and the dataset container.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected weighted edge, stored once with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    pub fn key(&self) -> (usize, usize) {
        (self.u, self.v)
    }
}

/// Orders an undirected pair as `(min, max)`.
#[inline]
pub fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledGraph {
    id: String,
    node_labels: Vec<usize>,
    edges: Vec<Edge>,
}

impl LabeledGraph {
    /// Builds a graph and checks its invariants. `label_count` bounds the
    /// node labels; edges are normalized to `u < v` and sorted.
    pub fn new(
        id: impl Into<String>,
        node_labels: Vec<usize>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        label_count: usize,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: String| Error::InvalidGraph {
            graph_id: id.clone(),
            reason,
        };
        let n = node_labels.len();
        if let Some((v, l)) = node_labels.iter().enumerate().find(|(_, l)| **l >= label_count) {
            return Err(invalid(format!(
                "node {v} has label {l} but only {label_count} labels exist"
            )));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(invalid(format!("edge ({a},{b}) references a node >= {n}")));
            }
            if a == b {
                return Err(invalid(format!("self-loop on node {a}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(invalid(format!("edge ({a},{b}) has non-positive weight {w}")));
            }
            let (u, v) = edge_key(a, b);
            if !seen.insert((u, v)) {
                return Err(invalid(format!("duplicate edge ({u},{v})")));
            }
            out.push(Edge { u, v, weight: w });
        }
        out.sort_by_key(Edge::key);
        Ok(LabeledGraph {
            id,
            node_labels,
            edges: out,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn node_count(&self) -> usize {
        self.node_labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_labels(&self) -> &[usize] {
        &self.node_labels
    }

    pub fn label(&self, v: usize) -> usize {
        self.node_labels[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Symmetric weighted adjacency lists.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for e in &self.edges {
            adj[e.u].push((e.v, e.weight));
            adj[e.v].push((e.u, e.weight));
        }
        adj
    }

    /// Unweighted neighbor sets, sorted.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.node_count() {
            return Err(Error::NodeOutOfRange {
                graph_id: self.id.clone(),
                node: v,
                node_count: self.node_count(),
            });
        }
        Ok(())
    }

    /// Hop distances from `v` (edge weights ignored). Unreachable nodes are
    /// `None`.
    pub fn geodesic_distances(&self, v: usize) -> Result<Vec<Option<usize>>> {
        self.check_node(v)?;
        Ok(bfs(&self.neighbors(), v))
    }

    /// Subgraph induced by all nodes within `radius` hops of `v`.
    pub fn ego_graph(&self, v: usize, radius: usize) -> Result<EgoGraph> {
        self.check_node(v)?;
        let dist = bfs(&self.neighbors(), v);
        let keep: Vec<usize> = (0..self.node_count())
            .filter(|&u| matches!(dist[u], Some(d) if d <= radius))
            .collect();
        let (graph, node_map) = self.induced(&keep, format!("{}@{}", self.id, v));
        Ok(EgoGraph {
            parent_id: self.id.clone(),
            center: v,
            radius,
            graph,
            node_map,
        })
    }

    /// Induced subgraph over `nodes` (kept in the given order). Returns the
    /// new graph and the map from new to old node indices.
    pub fn induced(&self, nodes: &[usize], id: String) -> (LabeledGraph, Vec<usize>) {
        let mut index = vec![usize::MAX; self.node_count()];
        for (i, &u) in nodes.iter().enumerate() {
            index[u] = i;
        }
        let node_labels = nodes.iter().map(|&u| self.node_labels[u]).collect();
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| index[e.u] != usize::MAX && index[e.v] != usize::MAX)
            .map(|e| {
                let (u, v) = edge_key(index[e.u], index[e.v]);
                Edge {
                    u,
                    v,
                    weight: e.weight,
                }
            })
            .collect();
        edges.sort_by_key(|e| e.key());
        (
            LabeledGraph {
                id,
                node_labels,
                edges,
            },
            nodes.to_vec(),
        )
    }

    /// Same nodes, replaced edge set. Edges must already satisfy the
    /// invariants.
    pub(crate) fn with_edges(&self, edges: Vec<Edge>) -> LabeledGraph {
        LabeledGraph {
            id: self.id.clone(),
            node_labels: self.node_labels.clone(),
            edges,
        }
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(Edge::key).collect()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = edge_key(a, b);
        self.edges.iter().any(|e| e.key() == key)
    }
}

fn bfs(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for &w in &adj[u] {
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Ego-graph of a node: the induced subgraph of its `radius`-hop
/// neighborhood, with `node_map[i]` the parent index of ego node `i`.
#[derive(Clone, Debug)]
pub struct EgoGraph {
    pub parent_id: String,
    pub center: usize,
    pub radius: usize,
    pub graph: LabeledGraph,
    pub node_map: Vec<usize>,
}

impl EgoGraph {
    /// Index of the center inside `graph`.
    pub fn local_center(&self) -> usize {
        self.node_map
            .iter()
            .position(|&u| u == self.center)
            .expect("center is always part of its ego-graph")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    pub labels: Vec<String>,
    pub graphs: Vec<LabeledGraph>,
    /// Model decision per graph, when known.
    pub decisions: Option<Vec<u8>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawEdge {
    Plain(usize, usize),
    Weighted(usize, usize, f64),
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    id: String,
    n: usize,
    node_labels: Vec<usize>,
    edges: Vec<RawEdge>,
}

#[derive(Serialize, Deserialize)]
struct RawDataset {
    labels: Vec<String>,
    graphs: Vec<RawGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decisions: Option<Vec<u8>>,
}

impl GraphDataset {
    pub fn new(labels: Vec<String>, graphs: Vec<LabeledGraph>, decisions: Option<Vec<u8>>) -> Result<Self> {
        let ds = GraphDataset {
            labels,
            graphs,
            decisions,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn node_total(&self) -> usize {
        self.graphs.iter().map(LabeledGraph::node_count).sum()
    }

    pub fn graph_index(&self, id: &str) -> Option<usize> {
        self.graphs.iter().position(|g| g.id() == id)
    }

    fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for g in &self.graphs {
            if !ids.insert(g.id()) {
                return Err(Error::InvalidDataset(format!("duplicate graph id {}", g.id())));
            }
            if let Some(l) = g.node_labels().iter().find(|&&l| l >= self.labels.len()) {
                return Err(Error::InvalidGraph {
                    graph_id: g.id().to_string(),
                    reason: format!("label {l} outside the alphabet of {}", self.labels.len()),
                });
            }
        }
        if let Some(dec) = &self.decisions {
            if dec.len() != self.graphs.len() {
                return Err(Error::InvalidDataset(format!(
                    "{} decisions for {} graphs",
                    dec.len(),
                    self.graphs.len()
                )));
            }
            if let Some(c) = dec.iter().find(|&&c| c > 1) {
                return Err(Error::InvalidDataset(format!("decision {c} is not a binary class")));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawDataset = serde_json::from_str(text)?;
        let label_count = raw.labels.len();
        let mut graphs = Vec::with_capacity(raw.graphs.len());
        for rg in raw.graphs {
            if rg.node_labels.len() != rg.n {
                return Err(Error::InvalidGraph {
                    graph_id: rg.id,
                    reason: format!("n = {} but {} node labels", rg.n, rg.node_labels.len()),
                });
            }
            let edges = rg.edges.into_iter().map(|e| match e {
                RawEdge::Plain(u, v) => (u, v, 1.0),
                RawEdge::Weighted(u, v, w) => (u, v, w),
            });
            graphs.push(LabeledGraph::new(rg.id, rg.node_labels, edges, label_count)?);
        }
        GraphDataset::new(raw.labels, graphs, raw.decisions)
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawDataset {
            labels: self.labels.clone(),
            graphs: self
                .graphs
                .iter()
                .map(|g| RawGraph {
                    id: g.id.clone(),
                    n: g.node_count(),
                    node_labels: g.node_labels.clone(),
                    edges: g
                        .edges
                        .iter()
                        .map(|e| {
                            if e.weight == 1.0 {
                                RawEdge::Plain(e.u, e.v)
                            } else {
                                RawEdge::Weighted(e.u, e.v, e.weight)
                            }
                        })
                        .collect(),
                })
                .collect(),
            decisions: self.decisions.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("dataset serialization cannot fail")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}
