//! Maximum-entropy background model over an activation matrix.
//!
//! The initial model is the MaxEnt distribution over independent Bernoulli
//! cells whose expected row and column sums equal the observed ones. Its
//! solution has the logistic form `P[v,k] = sigmoid(a_v + b_k)`, which is
//! fitted by alternating exact 1-D updates of the row and column
//! parameters. Rows (columns) sharing the same observed sum share the same
//! parameter, so the solve works on the distinct margins only.
//!
//! Cells whose value is the same in every matrix with the observed margins
//! (all-zero or all-one rows and columns, and more generally any cell on no
//! alternating cycle) are fixed to their value, zeros floored at
//! [`EPSILON`]; the logistic form is fitted on each block of free cells.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::components::Components;
use crate::error::{Error, Result};
use crate::gcn::ActivationMatrix;

/// Probability floor keeping surprisals finite.
pub const EPSILON: f64 = 1e-12;
/// Target for the largest absolute marginal residual.
pub const FIT_TOLERANCE: f64 = 1e-9;
pub const MAX_SWEEPS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct BackgroundModel {
    pub layer: usize,
    width: usize,
    probabilities: Vec<f64>,
    /// `-log2 P`, kept in sync with `probabilities`.
    surprisal: Vec<f64>,
    residual: f64,
}

impl BackgroundModel {
    /// Fits the MaxEnt model to the row and column sums of `act`.
    pub fn fit(act: &ActivationMatrix) -> Result<Self> {
        let n = act.row_count();
        let k = act.width();
        if n == 0 || k == 0 {
            return Err(Error::EmptyDataset);
        }
        let rows = act.rows();
        let mut p = vec![EPSILON; n * k];

        // A cell is free iff some other matrix with the same margins flips
        // it, i.e. its arc lies on a cycle of the residual graph (row -> col
        // for zeros, col -> row for ones). Free cells group into the strongly
        // connected components; every other cell keeps its observed value.
        for v in 0..n {
            for c in 0..k {
                p[v * k + c] = if rows[v].contains(c) { 1.0 } else { EPSILON };
            }
        }
        let mut arcs = vec![Vec::new(); n + k];
        for v in 0..n {
            for c in 0..k {
                if rows[v].contains(c) {
                    arcs[n + c].push(v);
                } else {
                    arcs[v].push(n + c);
                }
            }
        }
        let mut blocks: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (node, comp) in strongly_connected(&arcs).into_iter().enumerate() {
            let entry = blocks.entry(comp).or_default();
            if node < n {
                entry.0.push(node);
            } else {
                entry.1.push(node - n);
            }
        }
        for (block_rows, block_cols) in blocks.into_values() {
            if block_rows.is_empty() || block_cols.is_empty() {
                continue;
            }
            let col_mask = Components::from_indices(block_cols.iter().copied());
            let row_targets: Vec<usize> = block_rows
                .iter()
                .map(|&v| rows[v].intersection(col_mask).len())
                .collect();
            let col_targets: Vec<usize> = block_cols
                .iter()
                .map(|&c| block_rows.iter().filter(|&&v| rows[v].contains(c)).count())
                .collect();
            let (row_params, col_params) = solve_logistic(&row_targets, &col_targets)?;
            for (i, &v) in block_rows.iter().enumerate() {
                for (j, &c) in block_cols.iter().enumerate() {
                    p[v * k + c] = sigmoid(row_params[&row_targets[i]] + col_params[&col_targets[j]]);
                }
            }
        }
        let mut model = BackgroundModel::from_probabilities_unchecked(act.layer, k, p);
        model.residual = model.marginal_residual(act);
        Ok(model)
    }

    /// Model with explicit probabilities (row-major, `width` per row).
    pub fn from_probabilities(layer: usize, width: usize, probabilities: Vec<f64>) -> Result<Self> {
        if width == 0 || probabilities.len() % width != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} probabilities do not form rows of width {width}",
                probabilities.len()
            )));
        }
        if let Some(x) = probabilities.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidParameter(format!("probability {x} outside [0, 1]")));
        }
        Ok(Self::from_probabilities_unchecked(layer, width, probabilities))
    }

    fn from_probabilities_unchecked(layer: usize, width: usize, mut probabilities: Vec<f64>) -> Self {
        for x in &mut probabilities {
            *x = x.clamp(EPSILON, 1.0);
        }
        let surprisal = probabilities.iter().map(|x| -x.log2()).collect();
        BackgroundModel {
            layer,
            width,
            probabilities,
            surprisal,
            residual: 0.0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row_count(&self) -> usize {
        self.probabilities.len() / self.width
    }

    pub fn probability(&self, row: usize, k: usize) -> f64 {
        self.probabilities[row * self.width + k]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Largest absolute marginal residual measured right after fitting.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `-log2 P[row, k]` summed over `components`.
    #[inline]
    pub fn surprisal(&self, row: usize, components: Components) -> f64 {
        let base = row * self.width;
        components.iter().map(|k| self.surprisal[base + k]).sum()
    }

    /// Largest absolute difference between the model's expected row/column
    /// sums and the observed ones.
    pub fn marginal_residual(&self, act: &ActivationMatrix) -> f64 {
        let k = self.width;
        let mut worst: f64 = 0.0;
        let mut col = vec![0.0; k];
        for (v, row) in act.rows().iter().enumerate() {
            let mut sum = 0.0;
            for c in 0..k {
                let x = self.probabilities[v * k + c];
                sum += x;
                col[c] += x;
            }
            worst = worst.max((sum - row.len() as f64).abs());
        }
        for (c, observed) in act.column_sums().into_iter().enumerate() {
            worst = worst.max((col[c] - observed as f64).abs());
        }
        worst
    }

    /// Information content (bits) of `components` over the graphs in
    /// `subset`: for each graph with an activating node, the largest
    /// surprisal among its activating nodes.
    pub fn information_content(
        &self,
        act: &ActivationMatrix,
        components: Components,
        subset: impl IntoIterator<Item = usize>,
    ) -> f64 {
        let mut total = 0.0;
        for g in subset {
            let best = act
                .graph_rows(g)
                .filter(|&r| components.is_subset(act.row(r)))
                .map(|r| self.surprisal(r, components))
                .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
            if let Some(best) = best {
                total += best;
            }
        }
        total
    }

    /// Integrates an extracted rule: every cell `(v, k)` with `k` in the rule
    /// and `v` activating the rule becomes certain.
    pub fn update(&mut self, components: Components, act: &ActivationMatrix) {
        if components.is_empty() {
            return;
        }
        for (v, row) in act.rows().iter().enumerate() {
            if components.is_subset(*row) {
                for k in components.iter() {
                    self.probabilities[v * self.width + k] = 1.0;
                    self.surprisal[v * self.width + k] = 0.0;
                }
            }
        }
    }

    /// Sum of the Bernoulli entropies (bits) of all cells.
    pub fn entropy(&self) -> f64 {
        self.probabilities.iter().map(|&p| bernoulli_entropy(p)).sum()
    }

    /// CSV laid out like the activation matrix export.
    pub fn to_csv(&self, act: &ActivationMatrix) -> String {
        let mut out = String::from("graph,node");
        for k in 1..=self.width {
            write!(out, ",c{k}").unwrap();
        }
        out.push('\n');
        for r in 0..self.row_count() {
            let (g, v) = act.row_index(r);
            write!(out, "{},{}", act.graph_id(g), v).unwrap();
            for k in 0..self.width {
                write!(out, ",{}", self.probability(r, k)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn bernoulli_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Component id of every node (Kosaraju, iterative).
fn strongly_connected(arcs: &[Vec<usize>]) -> Vec<usize> {
    let n = arcs.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((u, i)) = stack.pop() {
            if let Some(&w) = arcs[u].get(i) {
                stack.push((u, i + 1));
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(u);
            }
        }
    }
    let mut reverse = vec![Vec::new(); n];
    for (u, out) in arcs.iter().enumerate() {
        for &w in out {
            reverse[w].push(u);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &w in &reverse[u] {
                if comp[w] == usize::MAX {
                    comp[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Distinct values with multiplicities.
fn groups(targets: &[usize]) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &t in targets {
        *counts.entry(t).or_default() += 1;
    }
    counts.into_iter().map(|(t, m)| (t, m as f64)).collect()
}

type Params = BTreeMap<usize, f64>;

/// Finds `a`, `b` with `sum_j m_j sigmoid(a_i + b_j) = t_i` for rows and the
/// symmetric column equations. All targets are strictly interior.
fn solve_logistic(row_targets: &[usize], col_targets: &[usize]) -> Result<(Params, Params)> {
    let row_groups = groups(row_targets);
    let col_groups = groups(col_targets);
    let ncols = col_targets.len() as f64;

    // start from the independent-margins logits
    let logit = |x: f64| (x / (1.0 - x)).ln();
    let mut a: Vec<f64> = row_groups.iter().map(|&(t, _)| logit(t as f64 / ncols)).collect();
    let mut b: Vec<f64> = vec![0.0; col_groups.len()];

    let mut residual = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        for (i, &(t, _)) in row_groups.iter().enumerate() {
            a[i] = solve_1d(t as f64, &b, &col_groups, a[i]);
        }
        for (j, &(t, _)) in col_groups.iter().enumerate() {
            b[j] = solve_1d(t as f64, &a, &row_groups, b[j]);
        }
        residual = 0.0;
        for (i, &(t, _)) in row_groups.iter().enumerate() {
            let s: f64 = col_groups.iter().zip(&b).map(|(&(_, m), &bj)| m * sigmoid(a[i] + bj)).sum();
            residual = residual.max((s - t as f64).abs());
        }
        for (j, &(t, _)) in col_groups.iter().enumerate() {
            let s: f64 = row_groups.iter().zip(&a).map(|(&(_, m), &ai)| m * sigmoid(ai + b[j])).sum();
            residual = residual.max((s - t as f64).abs());
        }
        if residual < FIT_TOLERANCE {
            let rows = row_groups.iter().map(|g| g.0).zip(a).collect();
            let cols = col_groups.iter().map(|g| g.0).zip(b).collect();
            return Ok((rows, cols));
        }
    }
    Err(Error::NoConvergence {
        sweeps: MAX_SWEEPS,
        residual,
    })
}

/// Solves `sum_j m_j sigmoid(x + other_j) = target` for `x` by Newton steps
/// safeguarded with bisection.
fn solve_1d(target: f64, other: &[f64], mult: &[(usize, f64)], start: f64) -> f64 {
    let eval = |x: f64| {
        let mut f = -target;
        let mut df = 0.0;
        for (&o, &(_, m)) in other.iter().zip(mult) {
            let s = sigmoid(x + o);
            f += m * s;
            df += m * s * (1.0 - s);
        }
        (f, df)
    };
    let mut lo = start - 1.0;
    let mut step = 1.0;
    while eval(lo).0 > 0.0 {
        step *= 2.0;
        lo = start - step;
    }
    let mut hi = start + 1.0;
    step = 1.0;
    while eval(hi).0 < 0.0 {
        step *= 2.0;
        hi = start + step;
    }
    let mut x = start.clamp(lo, hi);
    for _ in 0..200 {
        let (f, df) = eval(x);
        if f.abs() <= 1e-13 * (1.0 + target) {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= 1e-15 * (1.0 + x.abs()) {
            return x;
        }
        let newton = x - f / df;
        x = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[usize]], width: usize, graph_of_row: &[usize], decisions: Vec<u8>) -> ActivationMatrix {
        let graphs = decisions.len();
        let mut blocks = vec![Vec::new(); graphs];
        for (r, comps) in rows.iter().enumerate() {
            blocks[graph_of_row[r]].push(Components::from_indices(comps.iter().copied()));
        }
        ActivationMatrix::from_rows(
            3,
            width,
            (0..graphs).map(|g| format!("G{}", g + 1)).collect(),
            decisions,
            blocks,
        )
        .unwrap()
    }

    #[test]
    fn all_zero_matrix_is_epsilon() {
        let act = matrix(&[&[], &[]], 3, &[0, 1], vec![0, 1]);
        let bg = BackgroundModel::fit(&act).unwrap();
        assert!(bg.probabilities().iter().all(|&p| p == EPSILON));
    }

    #[test]
    fn identity_two_by_two_margins() {
        let act = matrix(&[&[0], &[1]], 2, &[0, 1], vec![0, 1]);
        let bg = BackgroundModel::fit(&act).unwrap();
        for r in 0..2 {
            let s: f64 = (0..2).map(|k| bg.probability(r, k)).sum();
            assert!((s - 1.0).abs() < 1e-9);
            let c: f64 = (0..2).map(|v| bg.probability(v, r)).sum();
            assert!((c - 1.0).abs() < 1e-9);
        }
        assert!((bg.probability(0, 0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn peeling_fixes_full_rows_and_columns() {
        // column 0 all ones, row 2 all zero elsewhere
        let act = matrix(&[&[0, 1], &[0, 2], &[0], &[0, 1, 2]], 3, &[0, 0, 1, 1], vec![0, 1]);
        let bg = BackgroundModel::fit(&act).unwrap();
        for v in 0..4 {
            assert_eq!(bg.probability(v, 0), 1.0);
        }
        assert_eq!(bg.probability(2, 1), EPSILON);
        assert_eq!(bg.probability(3, 2), 1.0);
        assert!(bg.residual() < 1e-9, "{}", bg.residual());
    }

    #[test]
    fn update_sets_matching_cells_and_is_monotone() {
        let act = matrix(&[&[0, 1], &[0], &[0, 1, 2], &[1]], 3, &[0, 0, 1, 1], vec![0, 1]);
        let mut bg = BackgroundModel::fit(&act).unwrap();
        let before = bg.probabilities().to_vec();
        let rule = Components::from_indices([0, 1]);
        bg.update(rule, &act);
        for (i, (&old, &new)) in before.iter().zip(bg.probabilities()).enumerate() {
            assert!(new >= old);
            let (r, k) = (i / 3, i % 3);
            let matches = rule.is_subset(act.row(r)) && rule.contains(k);
            assert_eq!(new == 1.0, matches || old == 1.0);
        }
        assert_eq!(bg.information_content(&act, rule, 0..2), 0.0);
    }

    #[test]
    fn empty_update_is_noop() {
        let act = matrix(&[&[0, 1], &[0]], 2, &[0, 1], vec![0, 1]);
        let mut bg = BackgroundModel::fit(&act).unwrap();
        let before = bg.probabilities().to_vec();
        bg.update(Components::EMPTY, &act);
        assert_eq!(before, bg.probabilities());
    }

    #[test]
    fn ic_of_empty_support_is_zero() {
        let act = matrix(&[&[0], &[1]], 2, &[0, 1], vec![0, 1]);
        let bg = BackgroundModel::fit(&act).unwrap();
        let rule = Components::from_indices([0, 1]);
        assert_eq!(bg.information_content(&act, rule, 0..2), 0.0);
        assert_eq!(bg.information_content(&act, Components::from_indices([0]), []), 0.0);
    }

    #[test]
    fn ic_with_certain_cells_is_zero() {
        let act = matrix(&[&[0, 1], &[1]], 2, &[0, 1], vec![0, 1]);
        let bg = BackgroundModel::from_probabilities(1, 2, vec![1.0, 1.0, 0.3, 1.0]).unwrap();
        assert_eq!(bg.information_content(&act, Components::from_indices([1]), 0..2), 0.0);
    }

    #[test]
    fn one_dimensional_solve_hits_target() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let m = rng.gen_range(1..7);
            let other: Vec<f64> = (0..m).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let mult: Vec<(usize, f64)> = (0..m).map(|_| (0, rng.gen_range(1..6) as f64)).collect();
            let total: f64 = mult.iter().map(|x| x.1).sum();
            if total < 2.0 {
                continue;
            }
            let target = rng.gen_range(1..total as usize) as f64;
            let x = solve_1d(target, &other, &mult, rng.gen_range(-20.0..20.0));
            let f: f64 = other.iter().zip(&mult).map(|(&o, &(_, m))| m * sigmoid(x + o)).sum();
            assert!((f - target).abs() < 1e-9, "{f} vs {target}");
        }
    }

    #[test]
    fn forced_cells_are_fixed() {
        // staircase margins admit a single matrix
        let act = matrix(&[&[0, 1, 2], &[0, 1], &[0]], 3, &[0, 0, 1], vec![0, 1]);
        let bg = BackgroundModel::fit(&act).unwrap();
        for v in 0..3 {
            for k in 0..3 {
                let expected = if act.row(v).contains(k) { 1.0 } else { EPSILON };
                assert_eq!(bg.probability(v, k), expected);
            }
        }
        // a free 2x2 block next to a forced column
        let act = matrix(&[&[0, 2], &[1, 2]], 3, &[0, 1], vec![0, 1]);
        let bg = BackgroundModel::fit(&act).unwrap();
        assert_eq!(bg.probability(0, 2), 1.0);
        assert!((bg.probability(0, 0) - 0.5).abs() < 1e-9);
    }
}
