//! Forward inference of a graph convolutional network with mean-pool
//! readout, plus activation-matrix extraction and masked inference.

mod activation;
mod mask;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphDataset, LabeledGraph};

pub use activation::ActivationMatrix;
pub use mask::{apply_mask, Mask, MaskMode, MaskPayload};

/// Predicted probabilities used when masking leaves no node to classify.
pub const EMPTY_GRAPH_PROBABILITIES: [f64; 2] = [0.5, 0.5];

/// Dense row-major matrix; `rows[i][j]` maps input `j` to output `i`.
pub type Matrix = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    #[serde(rename = "W")]
    pub weights: Matrix,
    pub b: [f64; 2],
}

/// Trained GCN: `layers[0]` is K x |T|, the others K x K; the readout maps
/// the mean-pooled last-layer embedding (K) to two logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    #[serde(rename = "L")]
    pub layer_count: usize,
    #[serde(rename = "K")]
    pub width: usize,
    #[serde(rename = "T")]
    pub label_count: usize,
    pub layers: Vec<Matrix>,
    pub readout: Readout,
}

/// Output of one forward pass.
#[derive(Clone, Debug)]
pub struct Inference {
    /// `embeddings[l][v]` is the layer-(l+1) embedding of node `v`.
    pub embeddings: Vec<Vec<Vec<f64>>>,
    pub probabilities: [f64; 2],
    pub decision: u8,
}

impl Inference {
    /// Node embeddings at 1-based `layer`.
    pub fn layer(&self, layer: usize) -> &[Vec<f64>] {
        &self.embeddings[layer - 1]
    }
}

fn check_matrix(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.len() != rows {
        return Err(Error::InvalidModel(format!(
            "{what} has {} rows, expected {rows}",
            m.len()
        )));
    }
    if let Some(r) = m.iter().find(|r| r.len() != cols) {
        return Err(Error::InvalidModel(format!(
            "{what} has a row of length {}, expected input dimension {cols}",
            r.len()
        )));
    }
    Ok(())
}

impl GcnModel {
    pub fn new(label_count: usize, layers: Vec<Matrix>, readout: Readout) -> Result<Self> {
        let width = layers.first().map_or(0, Vec::len);
        let model = GcnModel {
            layer_count: layers.len(),
            width,
            label_count,
            layers,
            readout,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_count == 0 || self.layers.len() != self.layer_count {
            return Err(Error::InvalidModel(format!(
                "L = {} but {} layer matrices",
                self.layer_count,
                self.layers.len()
            )));
        }
        if self.width == 0 {
            return Err(Error::InvalidModel("K must be at least 1".into()));
        }
        if self.label_count == 0 {
            return Err(Error::InvalidModel("T must be at least 1".into()));
        }
        for (i, w) in self.layers.iter().enumerate() {
            let input = if i == 0 { self.label_count } else { self.width };
            check_matrix(w, self.width, input, &format!("layer {}", i + 1))?;
        }
        check_matrix(&self.readout.weights, 2, self.width, "readout")?;
        let finite = self
            .layers
            .iter()
            .chain(std::iter::once(&self.readout.weights))
            .flatten()
            .flatten()
            .chain(self.readout.b.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidModel("non-finite weight".into()));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let model: GcnModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
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

    /// Runs all layers, mean-pools the last one and applies the readout.
    pub fn forward(&self, g: &LabeledGraph) -> Result<Inference> {
        let n = g.node_count();
        if n == 0 {
            return Err(Error::EmptyGraph(g.id().to_string()));
        }
        if let Some(&l) = g.node_labels().iter().find(|&&l| l >= self.label_count) {
            return Err(Error::InvalidGraph {
                graph_id: g.id().to_string(),
                reason: format!("label {l} but the model expects {} labels", self.label_count),
            });
        }

        // N(v) contains v with unit self-weight.
        let adj = g.adjacency();
        let degree: Vec<f64> = adj
            .iter()
            .map(|nb| 1.0 + nb.iter().map(|(_, w)| w).sum::<f64>())
            .collect();
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();

        let mut h: Vec<Vec<f64>> = g
            .node_labels()
            .iter()
            .map(|&l| {
                let mut x = vec![0.0; self.label_count];
                x[l] = 1.0;
                x
            })
            .collect();
        let mut embeddings = Vec::with_capacity(self.layer_count);
        for w in &self.layers {
            let dim = h[0].len();
            let mut next = Vec::with_capacity(n);
            for v in 0..n {
                let mut agg = vec![0.0; dim];
                let self_coef = inv_sqrt[v] * inv_sqrt[v];
                for (a, x) in agg.iter_mut().zip(&h[v]) {
                    *a += self_coef * x;
                }
                for &(u, e) in &adj[v] {
                    let coef = e * inv_sqrt[v] * inv_sqrt[u];
                    for (a, x) in agg.iter_mut().zip(&h[u]) {
                        *a += coef * x;
                    }
                }
                next.push(matvec(w, &agg).into_iter().map(|x| x.max(0.0)).collect::<Vec<_>>());
            }
            embeddings.push(next.clone());
            h = next;
        }

        let mut pooled = vec![0.0; self.width];
        for row in &h {
            for (p, x) in pooled.iter_mut().zip(row) {
                *p += x;
            }
        }
        for p in &mut pooled {
            *p /= n as f64;
        }
        let logits = matvec(&self.readout.weights, &pooled);
        let probabilities = softmax2(logits[0] + self.readout.b[0], logits[1] + self.readout.b[1]);
        let decision = u8::from(probabilities[1] > probabilities[0]);
        Ok(Inference {
            embeddings,
            probabilities,
            decision,
        })
    }

    /// Class probabilities, falling back to [`EMPTY_GRAPH_PROBABILITIES`] for
    /// a graph without nodes.
    pub fn predict(&self, g: &LabeledGraph) -> Result<[f64; 2]> {
        match self.forward(g) {
            Ok(inf) => Ok(inf.probabilities),
            Err(Error::EmptyGraph(_)) => Ok(EMPTY_GRAPH_PROBABILITIES),
            Err(e) => Err(e),
        }
    }

    /// Forward pass on every graph of the dataset, in parallel.
    pub fn infer_dataset(&self, ds: &GraphDataset) -> Result<Vec<Inference>> {
        ds.graphs.par_iter().map(|g| self.forward(g)).collect()
    }

    /// Copy of `ds` with the model's decisions filled in.
    pub fn annotate(&self, ds: &GraphDataset) -> Result<GraphDataset> {
        let inferences = self.infer_dataset(ds)?;
        let mut out = ds.clone();
        out.decisions = Some(inferences.iter().map(|i| i.decision).collect());
        Ok(out)
    }

    pub fn activation_matrix(&self, ds: &GraphDataset, layer: usize) -> Result<ActivationMatrix> {
        self.check_layer(layer)?;
        let inferences = self.infer_dataset(ds)?;
        ActivationMatrix::from_inferences(ds, &inferences, layer)
    }

    /// Activation matrices of layers `1..=L` from a single pass over the data.
    pub fn activation_matrices(&self, ds: &GraphDataset) -> Result<Vec<ActivationMatrix>> {
        let inferences = self.infer_dataset(ds)?;
        (1..=self.layer_count)
            .map(|l| ActivationMatrix::from_inferences(ds, &inferences, l))
            .collect()
    }

    pub fn check_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer > self.layer_count {
            return Err(Error::LayerOutOfRange {
                layer,
                layers: self.layer_count,
            });
        }
        Ok(())
    }
}

fn matvec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn softmax2(a: f64, b: f64) -> [f64; 2] {
    let m = a.max(b);
    let ea = (a - m).exp();
    let eb = (b - m).exp();
    let s = ea + eb;
    [ea / s, eb / s]
}
