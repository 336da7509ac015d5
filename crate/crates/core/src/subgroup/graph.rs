//! Labeled-subgraph subgroups over ego-graphs, mined with gSpan under
//! WRAcc bounds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::rc::Rc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcn::ActivationMatrix;
use crate::graph::{GraphDataset, LabeledGraph};
use crate::miner::ActivationRule;

use super::dfs_code::{get_backward, get_forward_pure, get_forward_rmpath, DfsCode, DfsEdge, History, Pdfs, SearchGraph};
use super::{ub3_numerator, wracc, wracc_numerator};

/// Ego-graph of one dataset node.
#[derive(Clone, Debug)]
pub struct EgoInstance {
    pub graph_id: String,
    pub node: usize,
    pub graph: LabeledGraph,
    /// The node activates the rule.
    pub positive: bool,
}

#[derive(Clone, Debug)]
pub struct SubgroupDataset {
    pub label_names: Vec<String>,
    pub instances: Vec<EgoInstance>,
}

impl SubgroupDataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.instances.iter().filter(|i| i.positive).count()
    }
}

/// One instance per node of `ds`: its ego-graph with radius equal to the
/// rule's layer, positive iff the node activates the rule. `act` is the
/// rule layer's activation matrix over `ds`.
pub fn build_ego_dataset(rule: &ActivationRule, ds: &GraphDataset, act: &ActivationMatrix) -> Result<SubgroupDataset> {
    if act.graph_count() != ds.len() {
        return Err(Error::InvalidDataset(format!(
            "activation matrix covers {} graphs, dataset has {}",
            act.graph_count(),
            ds.len()
        )));
    }
    let bits = rule.bits();
    let mut instances = Vec::with_capacity(ds.node_total());
    for (gi, g) in ds.graphs.iter().enumerate() {
        let rows = act.graph_rows(gi);
        if rows.len() != g.node_count() {
            return Err(Error::InvalidDataset(format!(
                "graph {} has {} nodes but {} activation rows",
                g.id(),
                g.node_count(),
                rows.len()
            )));
        }
        for (v, r) in rows.enumerate() {
            instances.push(EgoInstance {
                graph_id: g.id().to_string(),
                node: v,
                graph: g.ego_graph(v, rule.layer)?.graph,
                positive: bits.is_subset(act.row(r)),
            });
        }
    }
    Ok(SubgroupDataset {
        label_names: ds.labels.clone(),
        instances,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphMinerParams {
    /// Minimum number of instances containing a pattern.
    pub min_sup: usize,
    pub max_edges: usize,
    /// Prune extensions whose bound cannot reach the incumbent.
    pub prune: bool,
    /// Also collect every pattern with WRAcc at least this value.
    pub floor: Option<f64>,
}

impl Default for GraphMinerParams {
    fn default() -> Self {
        GraphMinerParams {
            min_sup: 10,
            max_edges: 6,
            prune: true,
            floor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgraphPattern {
    pub code: DfsCode,
    pub support: usize,
    pub support_pos: usize,
    pub wracc: f64,
}

impl SubgraphPattern {
    /// Tie-break order: higher WRAcc, then fewer edges, then smaller code.
    fn beats(&self, num: i128, other: &SubgraphPattern, other_num: i128) -> bool {
        num > other_num
            || (num == other_num
                && (self.code.edge_count() < other.code.edge_count()
                    || (self.code.edge_count() == other.code.edge_count() && self.code.lex_cmp(&other.code).is_lt())))
    }

    pub fn to_json(&self, label_names: &[String]) -> serde_json::Value {
        let labels = self.code.node_labels();
        let name = |l: usize| label_names.get(l).cloned().unwrap_or_else(|| l.to_string());
        serde_json::json!({
            "nodes": labels.iter().enumerate().map(|(i, &l)| serde_json::json!({"id": i, "label": name(l)})).collect::<Vec<_>>(),
            "edges": self.code.0.iter().map(|e| [e.from, e.to]).collect::<Vec<_>>(),
            "dfs_code": self.code.0.iter().map(|e| [e.from, e.to, e.from_label, e.edge_label, e.to_label]).collect::<Vec<_>>(),
            "wracc": self.wracc,
            "support": self.support,
            "support_pos": self.support_pos,
        })
    }

    pub fn to_dot(&self, label_names: &[String], name: &str) -> String {
        let mut out = format!("graph \"{name}\" {{\n");
        for (i, &l) in self.code.node_labels().iter().enumerate() {
            let label = label_names.get(l).cloned().unwrap_or_else(|| l.to_string());
            writeln!(out, "  n{i} [label=\"{label}\"];").unwrap();
        }
        for e in &self.code.0 {
            writeln!(out, "  n{} -- n{};", e.from, e.to).unwrap();
        }
        writeln!(out, "  label=\"WRAcc={:.4} support={} ({} positive)\";", self.wracc, self.support, self.support_pos).unwrap();
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct MiningResult {
    pub best: Option<SubgraphPattern>,
    /// Patterns at or above the floor, best first (empty without a floor).
    pub above_floor: Vec<SubgraphPattern>,
    /// Canonical codes whose support was evaluated.
    pub evaluated: usize,
}

struct Miner<'a> {
    graphs: Vec<SearchGraph>,
    positive: Vec<bool>,
    total: usize,
    total_pos: usize,
    params: &'a GraphMinerParams,
    code: DfsCode,
    best: Option<(i128, SubgraphPattern)>,
    above_floor: Vec<(i128, SubgraphPattern)>,
    evaluated: usize,
}

type Projected = Vec<Rc<Pdfs>>;

impl Miner<'_> {
    fn supports(&self, projected: &Projected) -> (usize, usize) {
        let mut seen = vec![false; self.graphs.len()];
        let (mut s, mut sp) = (0, 0);
        for p in projected {
            if !seen[p.gid] {
                seen[p.gid] = true;
                s += 1;
                sp += usize::from(self.positive[p.gid]);
            }
        }
        (s, sp)
    }

    fn floor_reached(&self, num: i128) -> bool {
        let d2 = self.total as f64 * self.total as f64;
        self.params.floor.is_some_and(|f| num as f64 / d2 >= f)
    }

    fn run(&mut self) {
        let mut roots: BTreeMap<(usize, usize, usize), Projected> = BTreeMap::new();
        for (gid, g) in self.graphs.iter().enumerate() {
            for v in 0..g.labels.len() {
                for &e in &g.adj[v] {
                    if g.labels[v] <= g.labels[e.to] {
                        roots
                            .entry((g.labels[v], e.label, g.labels[e.to]))
                            .or_default()
                            .push(Rc::new(Pdfs { gid, edge: e, prev: None }));
                    }
                }
            }
        }
        for ((fl, el, tl), projected) in roots {
            self.code.0.push(DfsEdge {
                from: 0,
                to: 1,
                from_label: fl,
                edge_label: el,
                to_label: tl,
            });
            self.grow(&projected);
            self.code.0.pop();
        }
    }

    fn grow(&mut self, projected: &Projected) {
        let (s, sp) = self.supports(projected);
        if s < self.params.min_sup.max(1) {
            return;
        }
        if !self.code.is_canonical() {
            return;
        }
        self.evaluated += 1;
        let num = wracc_numerator(s, sp, self.total, self.total_pos);
        let pattern = SubgraphPattern {
            code: self.code.clone(),
            support: s,
            support_pos: sp,
            wracc: wracc(s, sp, self.total, self.total_pos),
        };
        if self.floor_reached(num) {
            self.above_floor.push((num, pattern.clone()));
        }
        if self.best.as_ref().map_or(true, |(bn, b)| pattern.beats(num, b, *bn)) {
            self.best = Some((num, pattern));
        }
        if self.code.edge_count() >= self.params.max_edges {
            return;
        }
        if self.params.prune {
            let bound = ub3_numerator(s, sp, self.total, self.total_pos, self.params.min_sup);
            let incumbent = self.best.as_ref().map(|(n, _)| *n).unwrap_or(i128::MIN);
            let below_floor = match self.params.floor {
                Some(f) => (bound as f64) < f * self.total as f64 * self.total as f64,
                None => true,
            };
            if bound < incumbent && below_floor {
                return;
            }
        }

        let rmpath = self.code.rightmost_path();
        let min_label = self.code.0[0].from_label;
        let max_toc = self.code.0[rmpath[0]].to;
        let labels = self.code.node_labels();
        let mut backward: BTreeMap<(usize, usize), Projected> = BTreeMap::new();
        let mut forward: BTreeMap<(std::cmp::Reverse<usize>, usize, usize), Projected> = BTreeMap::new();
        for p in projected {
            let g = &self.graphs[p.gid];
            let h = History::new(g, p);
            for i in (0..rmpath.len()).rev() {
                if let Some(e) = get_backward(g, h.edges[rmpath[i]], h.edges[rmpath[0]], &h) {
                    backward.entry((self.code.0[rmpath[i]].from, e.label)).or_default().push(Rc::new(Pdfs {
                        gid: p.gid,
                        edge: e,
                        prev: Some(p.clone()),
                    }));
                }
            }
            for e in get_forward_pure(g, h.edges[rmpath[0]], min_label, &h) {
                forward
                    .entry((std::cmp::Reverse(max_toc), e.label, g.labels[e.to]))
                    .or_default()
                    .push(Rc::new(Pdfs {
                        gid: p.gid,
                        edge: e,
                        prev: Some(p.clone()),
                    }));
            }
            for &ri in &rmpath {
                for e in get_forward_rmpath(g, h.edges[ri], min_label, &h) {
                    forward
                        .entry((std::cmp::Reverse(self.code.0[ri].from), e.label, g.labels[e.to]))
                        .or_default()
                        .push(Rc::new(Pdfs {
                            gid: p.gid,
                            edge: e,
                            prev: Some(p.clone()),
                        }));
                }
            }
        }
        for ((to, el), next) in backward {
            self.code.0.push(DfsEdge {
                from: max_toc,
                to,
                from_label: labels[max_toc],
                edge_label: el,
                to_label: labels[to],
            });
            self.grow(&next);
            self.code.0.pop();
        }
        for ((std::cmp::Reverse(from), el, tl), next) in forward {
            self.code.0.push(DfsEdge {
                from,
                to: max_toc + 1,
                from_label: labels[from],
                edge_label: el,
                to_label: tl,
            });
            self.grow(&next);
            self.code.0.pop();
        }
    }
}

/// Connected labeled subgraph (at least one edge, at most `max_edges`)
/// with the highest WRAcc among those contained in at least `min_sup`
/// instances. Ties go to fewer edges, then the smaller code.
pub fn mine_top_subgraph(d: &SubgroupDataset, params: &GraphMinerParams) -> Result<MiningResult> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.min_sup == 0 || params.max_edges == 0 {
        return Err(Error::InvalidParameter("min_sup and max_edges must be at least 1".into()));
    }
    let mut miner = Miner {
        graphs: d.instances.iter().map(|i| SearchGraph::from_labeled(&i.graph)).collect(),
        positive: d.instances.iter().map(|i| i.positive).collect(),
        total: d.len(),
        total_pos: d.positives(),
        params,
        code: DfsCode::default(),
        best: None,
        above_floor: Vec::new(),
        evaluated: 0,
    };
    miner.run();
    let mut above = miner.above_floor;
    above.sort_by(|(an, a), (bn, b)| {
        if a.beats(*an, b, *bn) {
            std::cmp::Ordering::Less
        } else if b.beats(*bn, a, *an) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    Ok(MiningResult {
        best: miner.best.map(|(_, p)| p),
        above_floor: above.into_iter().map(|(_, p)| p).collect(),
        evaluated: miner.evaluated,
    })
}
