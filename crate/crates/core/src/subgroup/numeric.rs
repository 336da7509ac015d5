//! Topological node features and interval subgroups over them.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcn::ActivationMatrix;
use crate::graph::{GraphDataset, LabeledGraph};
use crate::miner::ActivationRule;

use super::wracc;

pub const BASE_FEATURES: [&str; 4] = ["degree", "betweenness", "clustering", "triangle"];

/// Number of triangles through each node.
pub fn triangles(g: &LabeledGraph) -> Vec<usize> {
    let nb: Vec<HashSet<usize>> = g.neighbors().into_iter().map(|v| v.into_iter().collect()).collect();
    let mut t = vec![0; g.node_count()];
    for e in g.edges() {
        let common = nb[e.u].intersection(&nb[e.v]).count();
        t[e.u] += common;
        t[e.v] += common;
    }
    // each triangle at v is seen from both of its edges at v
    t.into_iter().map(|x| x / 2).collect()
}

/// Local clustering `2 T(v) / (d (d - 1))`, zero below degree 2.
pub fn clustering(g: &LabeledGraph) -> Vec<f64> {
    let nb = g.neighbors();
    triangles(g)
        .into_iter()
        .zip(&nb)
        .map(|(t, n)| {
            let d = n.len();
            if d < 2 {
                0.0
            } else {
                2.0 * t as f64 / (d * (d - 1)) as f64
            }
        })
        .collect()
}

/// Unweighted betweenness (Brandes), normalized by `(n - 1)(n - 2) / 2`.
pub fn betweenness(g: &LabeledGraph) -> Vec<f64> {
    let n = g.node_count();
    let nb = g.neighbors();
    let mut cb = vec![0.0; n];
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![usize::MAX; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &nb[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    if n <= 2 {
        return vec![0.0; n];
    }
    // every unordered pair was counted from both ends
    let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
    cb.into_iter().map(|x| x * scale).collect()
}

/// Base features of every node, in [`BASE_FEATURES`] order.
pub fn base_features(g: &LabeledGraph) -> Vec<[f64; 4]> {
    let nb = g.neighbors();
    let bc = betweenness(g);
    let cc = clustering(g);
    let tr = triangles(g);
    (0..g.node_count())
        .map(|v| [nb[v].len() as f64, bc[v], cc[v], tr[v] as f64])
        .collect()
}

/// Base features followed by their closed-neighborhood sums (`<f>2`) and
/// means (`<f>2_avg`).
pub fn node_features(g: &LabeledGraph) -> Vec<Vec<f64>> {
    let base = base_features(g);
    let nb = g.neighbors();
    (0..g.node_count())
        .map(|v| {
            let mut row = base[v].to_vec();
            let closed: Vec<usize> = std::iter::once(v).chain(nb[v].iter().copied()).collect();
            let sums: Vec<f64> = (0..4).map(|f| closed.iter().map(|&u| base[u][f]).sum()).collect();
            row.extend(&sums);
            row.extend(sums.iter().map(|s| s / closed.len() as f64));
            row
        })
        .collect()
}

pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = BASE_FEATURES.iter().map(|s| s.to_string()).collect();
    names.extend(BASE_FEATURES.iter().map(|s| format!("{s}2")));
    names.extend(BASE_FEATURES.iter().map(|s| format!("{s}2_avg")));
    names
}

/// One row per dataset node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatureTable {
    pub columns: Vec<String>,
    pub graph_ids: Vec<String>,
    pub nodes: Vec<usize>,
    pub values: Vec<Vec<f64>>,
    /// The node activates the rule.
    pub target: Vec<bool>,
}

impl NodeFeatureTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether every value of column `f` is integral.
    pub fn is_integer(&self, f: usize) -> bool {
        self.values.iter().all(|r| r[f].fract() == 0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("graph,node");
        for c in &self.columns {
            write!(out, ",{c}").unwrap();
        }
        out.push_str(",target\n");
        for i in 0..self.len() {
            write!(out, "{},{}", self.graph_ids[i], self.nodes[i]).unwrap();
            for x in &self.values[i] {
                write!(out, ",{x}").unwrap();
            }
            writeln!(out, ",{}", u8::from(self.target[i])).unwrap();
        }
        out
    }
}

/// Feature table of every node of `ds`, targets from the rule's layer
/// activation matrix `act`.
pub fn propositionalize(ds: &GraphDataset, rule: &ActivationRule, act: &ActivationMatrix) -> Result<NodeFeatureTable> {
    if act.graph_count() != ds.len() || act.row_count() != ds.node_total() {
        return Err(Error::InvalidDataset("activation matrix does not match the dataset".into()));
    }
    let per_graph: Vec<Vec<Vec<f64>>> = ds.graphs.par_iter().map(node_features).collect();
    let bits = rule.bits();
    let mut table = NodeFeatureTable {
        columns: feature_names(),
        graph_ids: Vec::new(),
        nodes: Vec::new(),
        values: Vec::new(),
        target: Vec::new(),
    };
    for (gi, (g, rows)) in ds.graphs.iter().zip(per_graph).enumerate() {
        for (v, (row, r)) in rows.into_iter().zip(act.graph_rows(gi)).enumerate() {
            table.graph_ids.push(g.id().to_string());
            table.nodes.push(v);
            table.values.push(row);
            table.target.push(bits.is_subset(act.row(r)));
        }
    }
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "op", content = "value", rename_all = "lowercase")]
pub enum Bound {
    Lt(f64),
    Ge(f64),
    /// Closed-open interval `[a, b)`.
    Range(f64, f64),
    Eq(f64),
}

impl Bound {
    fn holds(&self, x: f64) -> bool {
        match *self {
            Bound::Lt(c) => x < c,
            Bound::Ge(c) => x >= c,
            Bound::Range(a, b) => a <= x && x < b,
            Bound::Eq(c) => x == c,
        }
    }

    fn rank(&self) -> (u8, f64, f64) {
        match *self {
            Bound::Eq(c) => (0, c, 0.0),
            Bound::Lt(c) => (1, c, 0.0),
            Bound::Ge(c) => (2, c, 0.0),
            Bound::Range(a, b) => (3, a, b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub feature: usize,
    pub bound: Bound,
}

impl Condition {
    fn cmp_key(&self, other: &Self) -> Ordering {
        let (a, b) = (self.bound.rank(), other.bound.rank());
        self.feature
            .cmp(&other.feature)
            .then(a.0.cmp(&b.0))
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    }

    pub fn display(&self, columns: &[String]) -> String {
        let name = &columns[self.feature];
        match self.bound {
            Bound::Eq(c) => format!("{name}={c}"),
            Bound::Lt(c) => format!("{name}<{c}"),
            Bound::Ge(c) => format!("{name}>={c}"),
            Bound::Range(a, b) => format!("{name} in [{a}, {b})"),
        }
    }
}

/// Conjunction of conditions, sorted by feature.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalPattern {
    pub conditions: Vec<Condition>,
    pub wracc: f64,
    pub support: usize,
    pub support_pos: usize,
}

impl IntervalPattern {
    pub fn covers(&self, row: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.bound.holds(row[c.feature]))
    }

    pub fn display(&self, columns: &[String]) -> String {
        self.conditions
            .iter()
            .map(|c| c.display(columns))
            .collect::<Vec<_>>()
            .join(" AND ")
    }

    /// Ranking: higher WRAcc, then fewer conditions, then feature order.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .wracc
            .total_cmp(&self.wracc)
            .then(self.conditions.len().cmp(&other.conditions.len()))
            .then_with(|| {
                for (a, b) in self.conditions.iter().zip(&other.conditions) {
                    let o = a.cmp_key(b);
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                Ordering::Equal
            })
    }
}

impl fmt::Display for IntervalPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols = feature_names();
        write!(f, "{} (WRAcc={:.4})", self.display(&cols), self.wracc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeamParams {
    pub beam_width: usize,
    pub max_depth: usize,
    pub bins: usize,
    /// Patterns returned.
    pub top: usize,
}

impl Default for BeamParams {
    fn default() -> Self {
        BeamParams {
            beam_width: 50,
            max_depth: 4,
            bins: 5,
            top: 10,
        }
    }
}

/// Candidate conditions of one feature: equal-frequency cut points give
/// `< c`, `>= c` and the intervals between consecutive cuts; integral
/// features also get one equality per distinct value.
pub fn candidate_conditions(t: &NodeFeatureTable, f: usize, bins: usize) -> Vec<Condition> {
    let mut values: Vec<f64> = t.values.iter().map(|r| r[f]).collect();
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mut cuts: Vec<f64> = Vec::new();
    for i in 1..bins.max(1) {
        let c = values[(i * n / bins).min(n - 1)];
        if c > values[0] && cuts.last() != Some(&c) {
            cuts.push(c);
        }
    }
    let mut out = Vec::new();
    for &c in &cuts {
        out.push(Condition { feature: f, bound: Bound::Lt(c) });
        out.push(Condition { feature: f, bound: Bound::Ge(c) });
    }
    for w in cuts.windows(2) {
        out.push(Condition {
            feature: f,
            bound: Bound::Range(w[0], w[1]),
        });
    }
    if t.is_integer(f) {
        let distinct: BTreeSet<i64> = values.iter().map(|&x| x as i64).collect();
        out.extend(distinct.into_iter().map(|v| Condition {
            feature: f,
            bound: Bound::Eq(v as f64),
        }));
    }
    out
}

/// Beam search for the conjunctions of conditions with the highest WRAcc
/// with respect to the activating nodes. Each feature appears at most once
/// per pattern.
pub fn mine_numeric_subgroups(t: &NodeFeatureTable, params: &BeamParams) -> Result<Vec<IntervalPattern>> {
    if t.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.beam_width == 0 || params.bins == 0 {
        return Err(Error::InvalidParameter("beam width and bins must be positive".into()));
    }
    let total = t.len();
    let total_pos = t.target.iter().filter(|&&x| x).count();
    if total_pos == 0 || total_pos == total {
        return Ok(Vec::new());
    }
    let candidates: Vec<Vec<Condition>> = (0..t.columns.len())
        .map(|f| candidate_conditions(t, f, params.bins))
        .collect();
    // each candidate's covered rows, computed once
    let cover: Vec<Vec<Vec<bool>>> = candidates
        .iter()
        .map(|cs| {
            cs.iter()
                .map(|c| t.values.iter().map(|r| c.bound.holds(r[c.feature])).collect())
                .collect()
        })
        .collect();

    let mut beam: Vec<(IntervalPattern, Vec<bool>)> = vec![(
        IntervalPattern {
            conditions: Vec::new(),
            wracc: 0.0,
            support: total,
            support_pos: total_pos,
        },
        vec![true; total],
    )];
    let mut results: Vec<IntervalPattern> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for _ in 0..params.max_depth {
        let mut next: Vec<(IntervalPattern, Vec<bool>)> = Vec::new();
        for (pattern, covered) in &beam {
            for (f, cs) in candidates.iter().enumerate() {
                if pattern.conditions.iter().any(|c| c.feature == f) {
                    continue;
                }
                for (ci, c) in cs.iter().enumerate() {
                    let rows: Vec<bool> = covered.iter().zip(&cover[f][ci]).map(|(&a, &b)| a && b).collect();
                    let support = rows.iter().filter(|&&x| x).count();
                    if support == 0 {
                        continue;
                    }
                    let mut conditions = pattern.conditions.clone();
                    conditions.push(*c);
                    conditions.sort_by(Condition::cmp_key);
                    let key = format!("{conditions:?}");
                    if !seen.insert(key) {
                        continue;
                    }
                    let support_pos = rows.iter().zip(&t.target).filter(|(&r, &y)| r && y).count();
                    let p = IntervalPattern {
                        conditions,
                        wracc: wracc(support, support_pos, total, total_pos),
                        support,
                        support_pos,
                    };
                    next.push((p, rows));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_by(|a, b| a.0.rank_cmp(&b.0));
        next.truncate(params.beam_width);
        results.extend(next.iter().map(|(p, _)| p.clone()));
        beam = next;
    }
    results.sort_by(IntervalPattern::rank_cmp);
    results.retain(|p| p.wracc > 0.0);
    results.truncate(params.top);
    Ok(results)
}
