//! DFS codes of connected labeled graphs and the rightmost-path extension
//! primitives shared by canonical-form computation and pattern growth.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::graph::LabeledGraph;

/// Unlabeled edges all carry this tag.
pub const EDGE_TAG: usize = 0;

/// One step of a DFS code: an edge between DFS indices `from` and `to`.
/// Forward edges have `from < to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DfsEdge {
    pub from: usize,
    pub to: usize,
    pub from_label: usize,
    pub edge_label: usize,
    pub to_label: usize,
}

impl DfsEdge {
    pub fn is_forward(&self) -> bool {
        self.from < self.to
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DfsCode(pub Vec<DfsEdge>);

impl DfsCode {
    pub fn edge_count(&self) -> usize {
        self.0.len()
    }

    pub fn node_count(&self) -> usize {
        self.0.iter().map(|e| e.from.max(e.to) + 1).max().unwrap_or(0)
    }

    /// Label of every DFS index.
    pub fn node_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.node_count()];
        for e in &self.0 {
            labels[e.from] = e.from_label;
            labels[e.to] = e.to_label;
        }
        labels
    }

    /// Pattern graph with nodes numbered by DFS index.
    pub fn to_graph(&self, id: &str, label_count: usize) -> LabeledGraph {
        let labels = self.node_labels();
        let count = label_count.max(labels.iter().map(|l| l + 1).max().unwrap_or(0));
        LabeledGraph::new(id, labels, self.0.iter().map(|e| (e.from, e.to, 1.0)), count)
            .expect("a DFS code describes a simple graph")
    }

    /// Indices (into the code) of the forward edges on the rightmost path,
    /// deepest first.
    pub fn rightmost_path(&self) -> Vec<usize> {
        let mut path = Vec::new();
        let mut old_from = None;
        for (i, e) in self.0.iter().enumerate().rev() {
            if e.is_forward() && (path.is_empty() || old_from == Some(e.to)) {
                path.push(i);
                old_from = Some(e.from);
            }
        }
        path
    }

    /// Whether the code is the minimal DFS code of its own pattern.
    pub fn is_canonical(&self) -> bool {
        if self.0.len() <= 1 {
            return self.0.first().is_none_or(|e| e.from == 0 && e.to == 1 && e.from_label <= e.to_label);
        }
        let g = SearchGraph::from_code(self);
        min_code_of(&g, Some(self)).as_ref() == Some(self)
    }

    /// Lexicographic order on the edge tuples; used only for tie-breaking.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct GEdge {
    pub from: usize,
    pub to: usize,
    pub label: usize,
    pub id: usize,
}

/// Adjacency-list view of a labeled graph for the extension primitives.
#[derive(Clone, Debug)]
pub(crate) struct SearchGraph {
    pub labels: Vec<usize>,
    pub adj: Vec<Vec<GEdge>>,
    pub edge_count: usize,
}

impl SearchGraph {
    pub fn new(labels: Vec<usize>, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); labels.len()];
        let mut id = 0;
        for (u, v) in edges {
            adj[u].push(GEdge { from: u, to: v, label: EDGE_TAG, id });
            adj[v].push(GEdge { from: v, to: u, label: EDGE_TAG, id });
            id += 1;
        }
        SearchGraph {
            labels,
            adj,
            edge_count: id,
        }
    }

    pub fn from_labeled(g: &LabeledGraph) -> Self {
        Self::new(g.node_labels().to_vec(), g.edges().iter().map(|e| (e.u, e.v)))
    }

    fn from_code(code: &DfsCode) -> Self {
        Self::new(code.node_labels(), code.0.iter().map(|e| (e.from, e.to)))
    }
}

/// An embedding of the current code, as a chain of graph edges.
pub(crate) struct Pdfs {
    pub gid: usize,
    pub edge: GEdge,
    pub prev: Option<Rc<Pdfs>>,
}

/// Edges and vertices used by one embedding, in code order.
pub(crate) struct History {
    pub edges: Vec<GEdge>,
    has_edge: Vec<bool>,
    has_vertex: Vec<bool>,
}

impl History {
    pub fn new(g: &SearchGraph, p: &Rc<Pdfs>) -> Self {
        let mut edges = Vec::new();
        let mut has_edge = vec![false; g.edge_count];
        let mut has_vertex = vec![false; g.labels.len()];
        let mut cur = Some(p);
        while let Some(node) = cur {
            edges.push(node.edge);
            has_edge[node.edge.id] = true;
            has_vertex[node.edge.from] = true;
            has_vertex[node.edge.to] = true;
            cur = node.prev.as_ref();
        }
        edges.reverse();
        History {
            edges,
            has_edge,
            has_vertex,
        }
    }

    pub fn has_vertex(&self, v: usize) -> bool {
        self.has_vertex[v]
    }
}

/// Backward edge closing the rightmost path from its tip (`e2.to`) to the
/// start of `e1`.
pub(crate) fn get_backward(g: &SearchGraph, e1: GEdge, e2: GEdge, h: &History) -> Option<GEdge> {
    if e1 == e2 {
        return None;
    }
    g.adj[e2.to].iter().copied().find(|x| {
        !h.has_edge[x.id]
            && x.to == e1.from
            && (e1.label < x.label || (e1.label == x.label && g.labels[e1.to] <= g.labels[e2.to]))
    })
}

/// Forward edges from the rightmost vertex to unvisited vertices.
pub(crate) fn get_forward_pure(g: &SearchGraph, e: GEdge, min_label: usize, h: &History) -> Vec<GEdge> {
    g.adj[e.to]
        .iter()
        .copied()
        .filter(|x| g.labels[x.to] >= min_label && !h.has_vertex(x.to))
        .collect()
}

/// Forward edges from a rightmost-path vertex (`e.from`) to unvisited
/// vertices, not smaller than `e` itself.
pub(crate) fn get_forward_rmpath(g: &SearchGraph, e: GEdge, min_label: usize, h: &History) -> Vec<GEdge> {
    let to_label = g.labels[e.to];
    g.adj[e.from]
        .iter()
        .copied()
        .filter(|x| {
            let l = g.labels[x.to];
            e.to != x.to
                && l >= min_label
                && !h.has_vertex(x.to)
                && (e.label < x.label || (e.label == x.label && to_label <= l))
        })
        .collect()
}

type Projected = Vec<Rc<Pdfs>>;

/// Greedily builds the minimal DFS code of a connected graph. With `target`
/// set, stops as soon as the code being built departs from it (returning
/// `None`).
fn min_code_of(g: &SearchGraph, target: Option<&DfsCode>) -> Option<DfsCode> {
    let mut roots: BTreeMap<(usize, usize, usize), Projected> = BTreeMap::new();
    for v in 0..g.labels.len() {
        for &e in &g.adj[v] {
            if g.labels[v] <= g.labels[e.to] {
                roots
                    .entry((g.labels[v], e.label, g.labels[e.to]))
                    .or_default()
                    .push(Rc::new(Pdfs { gid: 0, edge: e, prev: None }));
            }
        }
    }
    let ((fl, el, tl), mut projected) = roots.into_iter().next()?;
    let mut code = DfsCode(vec![DfsEdge {
        from: 0,
        to: 1,
        from_label: fl,
        edge_label: el,
        to_label: tl,
    }]);
    let departs = |code: &DfsCode| {
        target.is_some_and(|t| {
            let i = code.0.len() - 1;
            t.0.get(i) != Some(&code.0[i])
        })
    };
    if departs(&code) {
        return None;
    }
    while code.0.len() < g.edge_count {
        let rmpath = code.rightmost_path();
        let min_label = code.0[0].from_label;
        let max_toc = code.0[rmpath[0]].to;
        let labels = code.node_labels();

        let mut backward: BTreeMap<usize, Projected> = BTreeMap::new();
        let mut new_to = 0;
        for i in (1..rmpath.len()).rev() {
            for p in &projected {
                let h = History::new(g, p);
                if let Some(e) = get_backward(g, h.edges[rmpath[i]], h.edges[rmpath[0]], &h) {
                    backward.entry(e.label).or_default().push(Rc::new(Pdfs {
                        gid: 0,
                        edge: e,
                        prev: Some(p.clone()),
                    }));
                    new_to = code.0[rmpath[i]].from;
                }
            }
            if !backward.is_empty() {
                break;
            }
        }
        if let Some((el, next)) = backward.into_iter().next() {
            code.0.push(DfsEdge {
                from: max_toc,
                to: new_to,
                from_label: labels[max_toc],
                edge_label: el,
                to_label: labels[new_to],
            });
            if departs(&code) {
                return None;
            }
            projected = next;
            continue;
        }

        let mut forward: BTreeMap<(usize, usize), Projected> = BTreeMap::new();
        let mut new_from = 0;
        for p in &projected {
            let h = History::new(g, p);
            for e in get_forward_pure(g, h.edges[rmpath[0]], min_label, &h) {
                new_from = max_toc;
                forward.entry((e.label, g.labels[e.to])).or_default().push(Rc::new(Pdfs {
                    gid: 0,
                    edge: e,
                    prev: Some(p.clone()),
                }));
            }
        }
        for &ri in &rmpath {
            if !forward.is_empty() {
                break;
            }
            for p in &projected {
                let h = History::new(g, p);
                for e in get_forward_rmpath(g, h.edges[ri], min_label, &h) {
                    new_from = code.0[ri].from;
                    forward.entry((e.label, g.labels[e.to])).or_default().push(Rc::new(Pdfs {
                        gid: 0,
                        edge: e,
                        prev: Some(p.clone()),
                    }));
                }
            }
        }
        let ((el, tl), next) = forward.into_iter().next()?;
        code.0.push(DfsEdge {
            from: new_from,
            to: max_toc + 1,
            from_label: labels[new_from],
            edge_label: el,
            to_label: tl,
        });
        if departs(&code) {
            return None;
        }
        projected = next;
    }
    Some(code)
}

/// Minimal DFS code of a connected graph with at least one edge; `None`
/// otherwise.
pub fn min_dfs_code(g: &LabeledGraph) -> Option<DfsCode> {
    let sg = SearchGraph::from_labeled(g);
    let code = min_code_of(&sg, None)?;
    (code.edge_count() == g.edge_count() && code.node_count() == g.node_count()).then_some(code)
}
