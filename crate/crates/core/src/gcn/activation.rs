use std::fmt::Write as _;
use std::ops::Range;

use crate::components::{Components, MAX_COMPONENTS};
use crate::error::{Error, Result};
use crate::graph::GraphDataset;

use super::Inference;

/// Binary node x component matrix of one layer: bit `k` of a row is set iff
/// component `k` of the node embedding is strictly positive.
///
/// Rows are ordered by graph, then by node, so every graph owns a contiguous
/// row range.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMatrix {
    pub layer: usize,
    width: usize,
    rows: Vec<Components>,
    row_graph: Vec<usize>,
    row_node: Vec<usize>,
    graph_ids: Vec<String>,
    graph_rows: Vec<Range<usize>>,
    decisions: Vec<u8>,
}

impl ActivationMatrix {
    /// Builds a matrix from per-graph row sets. `graphs[i]` holds the rows of
    /// graph `i` in node order.
    pub fn from_rows(
        layer: usize,
        width: usize,
        graph_ids: Vec<String>,
        decisions: Vec<u8>,
        graphs: Vec<Vec<Components>>,
    ) -> Result<Self> {
        if width > MAX_COMPONENTS {
            return Err(Error::TooManyComponents(width));
        }
        if graph_ids.len() != graphs.len() || decisions.len() != graphs.len() {
            return Err(Error::InvalidDataset(format!(
                "{} graph ids, {} decisions and {} row blocks",
                graph_ids.len(),
                decisions.len(),
                graphs.len()
            )));
        }
        if let Some(c) = decisions.iter().find(|&&c| c > 1) {
            return Err(Error::InvalidDataset(format!("decision {c} is not a binary class")));
        }
        let full = Components::full(width);
        let mut rows = Vec::new();
        let mut row_graph = Vec::new();
        let mut row_node = Vec::new();
        let mut graph_rows = Vec::with_capacity(graphs.len());
        for (gi, block) in graphs.into_iter().enumerate() {
            let start = rows.len();
            for (v, r) in block.into_iter().enumerate() {
                if !r.is_subset(full) {
                    return Err(Error::InvalidDataset(format!(
                        "row for node {v} of graph {} sets a component >= {width}",
                        graph_ids[gi]
                    )));
                }
                rows.push(r);
                row_graph.push(gi);
                row_node.push(v);
            }
            graph_rows.push(start..rows.len());
        }
        Ok(ActivationMatrix {
            layer,
            width,
            rows,
            row_graph,
            row_node,
            graph_ids,
            graph_rows,
            decisions,
        })
    }

    /// Thresholds real-valued embeddings (`embeddings[graph][node][k] > 0`).
    pub fn from_embeddings(
        layer: usize,
        graph_ids: Vec<String>,
        decisions: Vec<u8>,
        embeddings: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        let width = embeddings
            .iter()
            .flatten()
            .map(Vec::len)
            .next()
            .unwrap_or(0);
        let blocks = embeddings
            .iter()
            .map(|g| g.iter().map(|h| threshold(h)).collect())
            .collect();
        Self::from_rows(layer, width, graph_ids, decisions, blocks)
    }

    pub(super) fn from_inferences(
        ds: &GraphDataset,
        inferences: &[Inference],
        layer: usize,
    ) -> Result<Self> {
        let ids = ds.graphs.iter().map(|g| g.id().to_string()).collect();
        let decisions = inferences.iter().map(|i| i.decision).collect();
        let per_graph: Vec<Vec<Vec<f64>>> =
            inferences.iter().map(|i| i.layer(layer).to_vec()).collect();
        let width = inferences
            .first()
            .map_or(0, |i| i.embeddings[layer - 1].first().map_or(0, Vec::len));
        let blocks = per_graph
            .iter()
            .map(|g| g.iter().map(|h| threshold(h)).collect())
            .collect();
        Self::from_rows(layer, width, ids, decisions, blocks)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Components] {
        &self.rows
    }

    pub fn row(&self, r: usize) -> Components {
        self.rows[r]
    }

    /// Owning graph and local node index of row `r`.
    pub fn row_index(&self, r: usize) -> (usize, usize) {
        (self.row_graph[r], self.row_node[r])
    }

    pub fn row_graph(&self, r: usize) -> usize {
        self.row_graph[r]
    }

    pub fn graph_count(&self) -> usize {
        self.graph_ids.len()
    }

    pub fn graph_id(&self, g: usize) -> &str {
        &self.graph_ids[g]
    }

    pub fn graph_ids(&self) -> &[String] {
        &self.graph_ids
    }

    pub fn graph_rows(&self, g: usize) -> Range<usize> {
        self.graph_rows[g].clone()
    }

    pub fn decision(&self, g: usize) -> u8 {
        self.decisions[g]
    }

    pub fn decisions(&self) -> &[u8] {
        &self.decisions
    }

    /// Decision of the graph owning row `r`.
    pub fn row_decision(&self, r: usize) -> u8 {
        self.decisions[self.row_graph[r]]
    }

    /// Graph indices with the given decision, ascending.
    pub fn class_graphs(&self, class: u8) -> Vec<usize> {
        (0..self.graph_count())
            .filter(|&g| self.decisions[g] == class)
            .collect()
    }

    /// Local node indices of graph `g` whose rows contain every component of
    /// `components`.
    pub fn activating_nodes(&self, g: usize, components: Components) -> Vec<usize> {
        self.graph_rows(g)
            .filter(|&r| components.is_subset(self.rows[r]))
            .map(|r| self.row_node[r])
            .collect()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.len()).collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.width];
        for r in &self.rows {
            for k in r.iter() {
                sums[k] += 1;
            }
        }
        sums
    }

    /// CSV with header `graph,node,c1..cK,decision`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("graph,node");
        for k in 1..=self.width {
            write!(out, ",c{k}").unwrap();
        }
        out.push_str(",decision\n");
        for (r, bits) in self.rows.iter().enumerate() {
            let (g, v) = self.row_index(r);
            write!(out, "{},{}", self.graph_ids[g], v).unwrap();
            for k in 0..self.width {
                out.push_str(if bits.contains(k) { ",1" } else { ",0" });
            }
            writeln!(out, ",{}", self.decisions[g]).unwrap();
        }
        out
    }
}

fn threshold(h: &[f64]) -> Components {
    Components::from_indices(h.iter().enumerate().filter(|(_, x)| **x > 0.0).map(|(k, _)| k))
}
