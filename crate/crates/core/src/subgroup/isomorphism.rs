use std::collections::BTreeSet;

use crate::graph::LabeledGraph;

/// Whether `target` contains a label-preserving copy of `pattern`: an
/// injective node map keeping labels and sending every pattern edge onto a
/// target edge (extra target edges allowed).
pub fn subgraph_isomorphic(pattern: &LabeledGraph, target: &LabeledGraph) -> bool {
    let n = pattern.node_count();
    if n > target.node_count() || pattern.edge_count() > target.edge_count() {
        return false;
    }
    if n == 0 {
        return true;
    }
    let pn = pattern.neighbors();
    let tn = target.neighbors();
    let t_edges: BTreeSet<(usize, usize)> = target.edge_set();

    // match nodes in BFS order from the highest-degree node so each new
    // node (past the first of its component) has a mapped neighbor
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let start = (0..n)
            .filter(|&v| !placed[v])
            .max_by_key(|&v| (pn[v].len(), std::cmp::Reverse(v)))
            .unwrap();
        placed[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &w in &pn[u] {
                if !placed[w] {
                    placed[w] = true;
                    order.push(w);
                }
            }
        }
    }

    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; target.node_count()];
    extend(0, &order, pattern, target, &pn, &tn, &t_edges, &mut map, &mut used)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    depth: usize,
    order: &[usize],
    pattern: &LabeledGraph,
    target: &LabeledGraph,
    pn: &[Vec<usize>],
    tn: &[Vec<usize>],
    t_edges: &BTreeSet<(usize, usize)>,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some(&u) = order.get(depth) else {
        return true;
    };
    let anchor = pn[u].iter().copied().find(|&w| map[w] != usize::MAX);
    let candidates: Vec<usize> = match anchor {
        Some(w) => tn[map[w]].clone(),
        None => (0..target.node_count()).collect(),
    };
    for c in candidates {
        if used[c] || target.label(c) != pattern.label(u) || tn[c].len() < pn[u].len() {
            continue;
        }
        let consistent = pn[u].iter().all(|&w| {
            let m = map[w];
            m == usize::MAX || t_edges.contains(&(c.min(m), c.max(m)))
        });
        if !consistent {
            continue;
        }
        map[u] = c;
        used[c] = true;
        if extend(depth + 1, order, pattern, target, pn, tn, t_edges, map, used) {
            return true;
        }
        map[u] = usize::MAX;
        used[c] = false;
    }
    false
}
