//! Activation-rule scoring and the branch-and-bound search for the rule
//! with the highest class-contrasted subjective interestingness.
//!
//! The search enumerates component sets depth-first, branching on the
//! lowest still-available component (include first, then exclude). Each
//! search node is replaced by its closure: the components shared by every
//! target-class node that activates it. A closure reaching back into an
//! excluded component means the closed set belongs to another branch, so
//! the node is pruned. The remaining nodes are pruned by an optimistic
//! bound on the score of all their descendants.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::background::BackgroundModel;
use crate::components::Components;
use crate::error::{Error, Result};
use crate::gcn::ActivationMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinerParams {
    /// Description cost per component.
    pub alpha: f64,
    /// Fixed description cost of a rule.
    pub beta: f64,
    /// A rule is only reported when its score exceeds this floor.
    pub min_si: f64,
    /// Rules extracted per (layer, class).
    pub nb_patt: usize,
    /// Search nodes visited per extraction before the search is cut short.
    pub max_visits: u64,
}

impl Default for MinerParams {
    fn default() -> Self {
        MinerParams {
            alpha: 0.6,
            beta: 1.0,
            min_si: 10.0,
            nb_patt: 10,
            max_visits: 100_000_000,
        }
    }
}

impl MinerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.min_si >= 0.0) {
            return Err(Error::InvalidParameter(format!("min_si must be >= 0, got {}", self.min_si)));
        }
        Ok(())
    }
}

/// Description length `alpha * |A| + beta`.
pub fn dl(components: Components, params: &MinerParams) -> f64 {
    params.alpha * components.len() as f64 + params.beta
}

/// Per-class weights: the minority class is scaled up by the class ratio.
pub fn class_weights(act: &ActivationMatrix) -> Result<[f64; 2]> {
    let n0 = act.decisions().iter().filter(|&&c| c == 0).count();
    let n1 = act.decisions().len() - n0;
    if n0 == 0 {
        return Err(Error::EmptyClass(0));
    }
    if n1 == 0 {
        return Err(Error::EmptyClass(1));
    }
    let (n0, n1) = (n0 as f64, n1 as f64);
    Ok([(n1 / n0).max(1.0), (n0 / n1).max(1.0)])
}

/// `IC / DL` of a rule over the graphs in `subset`.
pub fn si(
    bg: &BackgroundModel,
    act: &ActivationMatrix,
    components: Components,
    subset: impl IntoIterator<Item = usize>,
    params: &MinerParams,
) -> f64 {
    bg.information_content(act, components, subset) / dl(components, params)
}

/// Weighted difference between the interestingness of a rule on the graphs
/// the model assigns to `class` and on the other graphs.
pub fn si_sg(
    bg: &BackgroundModel,
    act: &ActivationMatrix,
    components: Components,
    class: u8,
    params: &MinerParams,
) -> Result<f64> {
    let w = class_weights(act)?;
    let other = 1 - class;
    let target = si(bg, act, components, act.class_graphs(class), params);
    let contrast = si(bg, act, components, act.class_graphs(other), params);
    Ok(w[class as usize] * target - w[other as usize] * contrast)
}

/// One node of the enumeration: the rule `a`, the components `pot` that its
/// descendants may still add, and the graphs supporting `a` (and
/// `a ∪ pot`) in each class. Everything outside `a ∪ pot` was excluded by
/// an ancestor.
#[derive(Clone, Debug)]
pub struct SearchNode {
    pub a: Components,
    pub pot: Components,
    /// Target-class graphs with a node activating `a`.
    pub g_target: Vec<usize>,
    /// Other-class graphs with a node activating `a`.
    pub g_other: Vec<usize>,
    /// Target-class graphs with a node activating `a ∪ pot`.
    pub tg_target: Vec<usize>,
    /// Other-class graphs with a node activating `a ∪ pot`.
    pub tg_other: Vec<usize>,
    rows_target: Vec<u32>,
    rows_other: Vec<u32>,
    full_target: Vec<u32>,
    full_other: Vec<u32>,
}

fn graphs_of(act: &ActivationMatrix, rows: &[u32]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &r in rows {
        let g = act.row_graph(r as usize);
        if out.last() != Some(&g) {
            out.push(g);
        }
    }
    out
}

fn filter_rows(act: &ActivationMatrix, rows: &[u32], components: Components) -> Vec<u32> {
    rows.iter()
        .copied()
        .filter(|&r| components.is_subset(act.row(r as usize)))
        .collect()
}

impl SearchNode {
    /// Builds a node from scratch by scanning the whole matrix.
    pub fn new(act: &ActivationMatrix, class: u8, a: Components, pot: Components) -> Self {
        let mut target = Vec::new();
        let mut other = Vec::new();
        for r in 0..act.row_count() {
            if a.is_subset(act.row(r)) {
                if act.row_decision(r) == class {
                    target.push(r as u32);
                } else {
                    other.push(r as u32);
                }
            }
        }
        Self::from_rows(act, a, pot.difference(a), target, other)
    }

    fn from_rows(
        act: &ActivationMatrix,
        a: Components,
        pot: Components,
        rows_target: Vec<u32>,
        rows_other: Vec<u32>,
    ) -> Self {
        let all = a.union(pot);
        let full_target = filter_rows(act, &rows_target, all);
        let full_other = filter_rows(act, &rows_other, all);
        SearchNode {
            a,
            pot,
            g_target: graphs_of(act, &rows_target),
            g_other: graphs_of(act, &rows_other),
            tg_target: graphs_of(act, &full_target),
            tg_other: graphs_of(act, &full_other),
            rows_target,
            rows_other,
            full_target,
            full_other,
        }
    }

    /// Root of the enumeration: empty rule, every component available.
    pub fn root(act: &ActivationMatrix, class: u8) -> Self {
        Self::new(act, class, Components::EMPTY, Components::full(act.width()))
    }

    fn include(&self, act: &ActivationMatrix, x: usize) -> Self {
        let a = self.a.with(x);
        let pot = self.pot.without(x);
        let rows_target = filter_rows(act, &self.rows_target, a);
        let rows_other = filter_rows(act, &self.rows_other, a);
        let mut node = Self::from_rows(act, a, pot, rows_target, rows_other);
        // a ∪ pot did not change
        node.full_target.clone_from(&self.full_target);
        node.full_other.clone_from(&self.full_other);
        node.tg_target.clone_from(&self.tg_target);
        node.tg_other.clone_from(&self.tg_other);
        node
    }

    fn exclude(&self, act: &ActivationMatrix, x: usize) -> Self {
        Self::from_rows(
            act,
            self.a,
            self.pot.without(x),
            self.rows_target.clone(),
            self.rows_other.clone(),
        )
    }

    /// Components removed from consideration by ancestors.
    pub fn excluded(&self, width: usize) -> Components {
        Components::full(width).difference(self.a.union(self.pot))
    }
}

/// Extends `node.a` with every component shared by all target-class nodes
/// activating it (this keeps the activating nodes, hence the supporting
/// graphs, unchanged). Returns the closed node and whether it is valid,
/// i.e. the closure did not pull in an excluded component.
pub fn closure(node: &SearchNode, act: &ActivationMatrix) -> (SearchNode, bool) {
    let width = act.width();
    let closed = node
        .rows_target
        .iter()
        .fold(Components::full(width), |acc, &r| acc.intersection(act.row(r as usize)));
    let valid = closed.intersection(node.excluded(width)).is_empty();
    if closed == node.a {
        return (node.clone(), valid);
    }
    let a = closed;
    let pot = node.pot.difference(closed);
    let rows_other = filter_rows(act, &node.rows_other, a);
    let out = if valid {
        // a ∪ pot is unchanged, so the descendant sets carry over
        let mut n = node.clone();
        n.a = a;
        n.pot = pot;
        n.g_other = graphs_of(act, &rows_other);
        n.rows_other = rows_other;
        n
    } else {
        SearchNode::from_rows(act, a, pot, node.rows_target.clone(), rows_other)
    };
    (out, valid)
}

/// Sum over supporting graphs of the largest surprisal of `components`
/// among the listed rows of that graph. `rows` must be ascending.
fn grouped_max_surprisal(
    bg: &BackgroundModel,
    act: &ActivationMatrix,
    rows: &[u32],
    components: Components,
) -> f64 {
    let mut total = 0.0;
    let mut current: Option<(usize, f64)> = None;
    for &r in rows {
        let r = r as usize;
        let g = act.row_graph(r);
        let s = bg.surprisal(r, components);
        current = match current {
            Some((cg, best)) if cg == g => Some((cg, best.max(s))),
            Some((_, best)) => {
                total += best;
                Some((g, s))
            }
            None => Some((g, s)),
        };
    }
    if let Some((_, best)) = current {
        total += best;
    }
    total
}

/// Optimistic bound on the score of every rule `B` with
/// `node.a ⊆ B ⊆ node.a ∪ node.pot`: the target term takes all available
/// components over the graphs supporting `a` at the smallest description
/// length; the contrast term takes only `a` over the graphs that keep
/// supporting every descendant, at the largest description length.
pub fn ub_si(
    node: &SearchNode,
    bg: &BackgroundModel,
    act: &ActivationMatrix,
    class: u8,
    params: &MinerParams,
    weights: [f64; 2],
) -> f64 {
    let all = node.a.union(node.pot);
    let gamma = grouped_max_surprisal(bg, act, &node.rows_target, all);
    let delta = dl(node.a, params);
    let epsilon = grouped_max_surprisal(bg, act, &node.full_other, node.a);
    let eta = dl(all, params);
    weights[class as usize] * (gamma / delta) - weights[1 - class as usize] * (epsilon / eta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredComponents {
    pub components: Components,
    pub score: f64,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: Option<ScoredComponents>,
    pub visited: u64,
    pub truncated: bool,
}

struct Search<'a> {
    act: &'a ActivationMatrix,
    bg: &'a BackgroundModel,
    params: &'a MinerParams,
    class: u8,
    weights: [f64; 2],
    min_si: f64,
    best: Option<ScoredComponents>,
    visited: u64,
    truncated: bool,
}

/// Slack on pruning comparisons so that rounding in the bound never drops
/// a rule whose exact score reaches the threshold.
fn prune_slack(threshold: f64) -> f64 {
    1e-9 * (1.0 + threshold.abs())
}

impl Search<'_> {
    fn visit(&mut self, node: SearchNode) {
        if self.visited >= self.params.max_visits {
            self.truncated = true;
            return;
        }
        self.visited += 1;
        let (node, valid) = closure(&node, self.act);
        if !valid {
            return;
        }
        let bound = ub_si(&node, self.bg, self.act, self.class, self.params, self.weights);
        let threshold = self.best.map_or(self.min_si, |b| b.score.max(self.min_si));
        if bound < threshold - prune_slack(threshold) {
            return;
        }
        let Some(x) = node.pot.first() else {
            // leaf: with nothing left to add the bound is the exact score
            if !node.a.is_empty() {
                self.offer(node.a, bound);
            }
            return;
        };
        let with = node.include(self.act, x);
        let without = node.exclude(self.act, x);
        drop(node);
        self.visit(with);
        self.visit(without);
    }

    fn offer(&mut self, components: Components, score: f64) {
        if !(score > self.min_si) {
            return;
        }
        let better = match self.best {
            None => true,
            Some(b) => {
                score > b.score
                    || (score == b.score && components.lex_cmp(b.components).is_lt())
            }
        };
        if better {
            self.best = Some(ScoredComponents { components, score });
        }
    }
}

/// Finds the closed rule for `class` with the highest score above `min_si`.
/// Ties go to the lexicographically smallest component vector.
pub fn mine_best(
    act: &ActivationMatrix,
    bg: &BackgroundModel,
    class: u8,
    params: &MinerParams,
    min_si: f64,
) -> Result<SearchOutcome> {
    params.validate()?;
    let weights = class_weights(act)?;
    let mut search = Search {
        act,
        bg,
        params,
        class,
        weights,
        min_si,
        best: None,
        visited: 0,
        truncated: false,
    };
    search.visit(SearchNode::root(act, class));
    if search.truncated {
        warn!(
            "layer {} class {}: search cut short after {} nodes",
            act.layer, class, search.visited
        );
    }
    Ok(SearchOutcome {
        best: search.best,
        visited: search.visited,
        truncated: search.truncated,
    })
}

/// A mined rule with its provenance, in the rules-file layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationRule {
    pub layer: usize,
    pub class: u8,
    /// Zero-based component indices, ascending.
    pub components: Vec<usize>,
    pub si_sg: f64,
    /// Graphs of the rule's class with an activating node.
    pub support_pos: Vec<String>,
    /// Graphs of the other class with an activating node.
    pub support_neg: Vec<String>,
    /// Activating nodes of every graph in either support list.
    pub activating_nodes: BTreeMap<String, Vec<usize>>,
}

impl ActivationRule {
    pub fn from_components(act: &ActivationMatrix, class: u8, components: Components, si_sg: f64) -> Self {
        let mut support_pos = Vec::new();
        let mut support_neg = Vec::new();
        let mut activating_nodes = BTreeMap::new();
        for g in 0..act.graph_count() {
            let nodes = act.activating_nodes(g, components);
            if nodes.is_empty() {
                continue;
            }
            let id = act.graph_id(g).to_string();
            if act.decision(g) == class {
                support_pos.push(id.clone());
            } else {
                support_neg.push(id.clone());
            }
            activating_nodes.insert(id, nodes);
        }
        ActivationRule {
            layer: act.layer,
            class,
            components: components.indices(),
            si_sg,
            support_pos,
            support_neg,
            activating_nodes,
        }
    }

    pub fn bits(&self) -> Components {
        Components::from_indices(self.components.iter().copied())
    }
}

pub fn load_rules(path: impl AsRef<Path>) -> Result<Vec<ActivationRule>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_rules(path: impl AsRef<Path>, rules: &[ActivationRule]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(rules)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationLog {
    pub layer: usize,
    pub class: u8,
    pub iteration: usize,
    pub si_sg: Option<f64>,
    pub visited: u64,
    pub truncated: bool,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug)]
pub struct MiningRun {
    pub rules: Vec<ActivationRule>,
    pub log: Vec<IterationLog>,
}

/// Extracts up to `nb_patt` rules for `class`, folding each one into the
/// background model before searching for the next.
pub fn mine_all_with(
    act: &ActivationMatrix,
    bg: &mut BackgroundModel,
    params: &MinerParams,
    class: u8,
) -> Result<MiningRun> {
    params.validate()?;
    let mut rules = Vec::new();
    let mut log = Vec::new();
    while rules.len() < params.nb_patt {
        let started = Instant::now();
        let outcome = mine_best(act, bg, class, params, params.min_si)?;
        log.push(IterationLog {
            layer: act.layer,
            class,
            iteration: rules.len(),
            si_sg: outcome.best.map(|b| b.score),
            visited: outcome.visited,
            truncated: outcome.truncated,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        let Some(best) = outcome.best else { break };
        debug!(
            "layer {} class {}: rule {:?} scores {:.4} ({} nodes)",
            act.layer, class, best.components, best.score, outcome.visited
        );
        bg.update(best.components, act);
        rules.push(ActivationRule::from_components(act, class, best.components, best.score));
    }
    Ok(MiningRun { rules, log })
}

/// Fits a fresh background model and runs [`mine_all_with`].
pub fn mine_all(act: &ActivationMatrix, params: &MinerParams, class: u8) -> Result<MiningRun> {
    params.validate()?;
    if params.nb_patt == 0 {
        return Ok(MiningRun {
            rules: Vec::new(),
            log: Vec::new(),
        });
    }
    let mut bg = BackgroundModel::fit(act)?;
    mine_all_with(act, &mut bg, params, class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(blocks: Vec<Vec<&[usize]>>, decisions: Vec<u8>, width: usize) -> ActivationMatrix {
        let ids = (0..blocks.len()).map(|g| format!("G{}", g + 1)).collect();
        let rows = blocks
            .into_iter()
            .map(|b| b.into_iter().map(|r| Components::from_indices(r.iter().copied())).collect())
            .collect();
        ActivationMatrix::from_rows(1, width, ids, decisions, rows).unwrap()
    }

    #[test]
    fn description_length() {
        let p = MinerParams::default();
        assert_eq!(dl(Components::from_indices([0, 5]), &p), 2.2);
        assert_eq!(dl(Components::EMPTY, &p), 1.0);
        assert!((dl(Components::full(20), &p) - 13.0).abs() < 1e-12);
    }

    #[test]
    fn weights() {
        let decisions: Vec<u8> = (0..125).map(|i| u8::from(i >= 100)).collect();
        let blocks = vec![vec![&[][..]]; 125];
        let m = act(blocks, decisions, 2);
        assert_eq!(class_weights(&m).unwrap(), [1.0, 4.0]);
        let m = act(vec![vec![&[][..]], vec![&[][..]]], vec![0, 1], 2);
        assert_eq!(class_weights(&m).unwrap(), [1.0, 1.0]);
        let m = act(vec![vec![&[][..]]], vec![1], 2);
        assert!(matches!(class_weights(&m), Err(Error::EmptyClass(0))));
    }

    #[test]
    fn closure_pulls_duplicate_columns() {
        // components 0 and 1 always co-occur on class-1 rows
        let m = act(
            vec![vec![&[0, 1, 2], &[2]], vec![&[0, 1]], vec![&[0]]],
            vec![1, 1, 0],
            3,
        );
        let node = SearchNode::new(&m, 1, Components::from_indices([0]), Components::from_indices([1, 2]));
        let (closed, valid) = closure(&node, &m);
        assert!(valid);
        assert_eq!(closed.a, Components::from_indices([0, 1]));
        assert_eq!(closed.pot, Components::from_indices([2]));
        assert_eq!(closed.g_target, node.g_target);

        let (again, valid) = closure(&closed, &m);
        assert!(valid);
        assert_eq!(again.a, closed.a);

        // with 1 excluded, closing {0} is invalid
        let node = SearchNode::new(&m, 1, Components::from_indices([0]), Components::from_indices([2]));
        let (_, valid) = closure(&node, &m);
        assert!(!valid);
    }

    #[test]
    fn search_node_sets() {
        let m = act(
            vec![vec![&[0, 1], &[0]], vec![&[0]], vec![&[0, 1]]],
            vec![1, 1, 0],
            2,
        );
        let node = SearchNode::new(&m, 1, Components::from_indices([0]), Components::from_indices([1]));
        assert_eq!(node.g_target, vec![0, 1]);
        assert_eq!(node.g_other, vec![2]);
        assert_eq!(node.tg_target, vec![0]);
        assert_eq!(node.tg_other, vec![2]);
    }

    #[test]
    fn bound_is_exact_without_pot() {
        let m = act(
            vec![vec![&[0, 1], &[0, 2]], vec![&[0, 1, 2]], vec![&[1]], vec![&[0, 1]]],
            vec![1, 1, 0, 0],
            3,
        );
        let bg = BackgroundModel::fit(&m).unwrap();
        let p = MinerParams::default();
        let w = class_weights(&m).unwrap();
        for bits in 1..8u64 {
            let c = Components(bits);
            for class in 0..2 {
                let node = SearchNode::new(&m, class, c, Components::EMPTY);
                let ub = ub_si(&node, &bg, &m, class, &p, w);
                assert_eq!(ub, si_sg(&bg, &m, c, class, &p).unwrap());
            }
        }
    }

    #[test]
    fn planted_rule_is_found() {
        // class-1 rows all carry {0, 5}; class-0 rows never do
        let m = act(
            vec![
                vec![&[0, 5, 2], &[1, 3]],
                vec![&[0, 5], &[4]],
                vec![&[0, 5, 1]],
                vec![&[0, 2], &[5, 3]],
                vec![&[1, 4], &[5]],
                vec![&[0, 3]],
            ],
            vec![1, 1, 1, 0, 0, 0],
            6,
        );
        let bg = BackgroundModel::fit(&m).unwrap();
        let p = MinerParams {
            min_si: 0.0,
            ..Default::default()
        };
        let out = mine_best(&m, &bg, 1, &p, 0.0).unwrap();
        assert_eq!(out.best.unwrap().components, Components::from_indices([0, 5]));
    }

    #[test]
    fn identical_rows_yield_nothing() {
        let row: &[usize] = &[0, 2];
        let m = act(vec![vec![row, row], vec![row, row]], vec![0, 1], 3);
        let bg = BackgroundModel::fit(&m).unwrap();
        let p = MinerParams::default();
        for class in 0..2 {
            assert!(mine_best(&m, &bg, class, &p, p.min_si).unwrap().best.is_none());
        }
    }

    #[test]
    fn zero_patterns_requested() {
        let m = act(vec![vec![&[0]], vec![&[1]]], vec![0, 1], 2);
        let p = MinerParams {
            nb_patt: 0,
            ..Default::default()
        };
        assert!(mine_all(&m, &p, 1).unwrap().rules.is_empty());
    }

    #[test]
    fn rule_support_lists() {
        let m = act(vec![vec![&[0, 1], &[0]], vec![&[0]], vec![&[0, 1]]], vec![1, 1, 0], 2);
        let rule = ActivationRule::from_components(&m, 1, Components::from_indices([0, 1]), 1.5);
        assert_eq!(rule.support_pos, vec!["G1"]);
        assert_eq!(rule.support_neg, vec!["G3"]);
        assert_eq!(rule.activating_nodes["G1"], vec![0]);
        assert_eq!(rule.bits(), Components::from_indices([0, 1]));
    }

    #[test]
    fn invalid_params() {
        let bad = MinerParams {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
