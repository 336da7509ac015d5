#![allow(dead_code)]

use std::path::PathBuf;

use actrules_core::{ActivationMatrix, Components, GraphDataset, LabeledGraph};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn toy_dataset() -> GraphDataset {
    GraphDataset::load(fixture("toy_dataset.json")).unwrap()
}

/// Layer-3 embeddings of the four toy graphs (components 1..6).
pub fn toy_embeddings() -> Vec<Vec<Vec<f64>>> {
    vec![
        vec![
            vec![0.1, 0.2, 0.0, 0.0, 0.0, 0.3],
            vec![0.0, 0.0, 0.2, 0.2, 0.4, 0.0],
            vec![0.2, 0.1, 0.0, 0.0, 0.0, 0.2],
            vec![0.0, 0.1, 0.0, 0.0, 0.0, 0.2],
            vec![0.0, 0.0, 0.2, 0.0, 0.3, 0.0],
        ],
        vec![
            vec![0.1, 0.0, 0.2, 0.2, 0.3, 0.0],
            vec![0.1, 0.0, 0.1, 0.0, 0.1, 0.4],
            vec![0.1, 0.0, 0.2, 0.2, 0.3, 0.0],
            vec![0.0, 0.0, 0.2, 0.0, 0.3, 0.0],
            vec![0.0, 0.0, 0.1, 0.0, 0.1, 0.3],
        ],
        vec![
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.3, 0.1, 0.0, 0.1, 0.1],
            vec![0.0, 0.0, 0.0, 0.4, 0.2, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.1, 0.0],
            vec![0.0, 0.2, 0.0, 0.0, 0.1, 0.1],
        ],
        vec![
            vec![0.0, 0.2, 0.0, 0.0, 0.0, 0.3],
            vec![0.0, 0.0, 0.2, 0.2, 0.3, 0.0],
            vec![0.0, 0.1, 0.0, 0.0, 0.0, 0.1],
            vec![0.0, 0.1, 0.0, 0.0, 0.0, 0.1],
            vec![0.0, 0.0, 0.1, 0.0, 0.2, 0.0],
            vec![0.0, 0.2, 0.0, 0.0, 0.0, 0.0],
        ],
    ]
}

pub fn toy_activations() -> ActivationMatrix {
    let ids = ["G1", "G2", "G3", "G4"].map(String::from).to_vec();
    ActivationMatrix::from_embeddings(3, ids, vec![1, 1, 0, 0], &toy_embeddings()).unwrap()
}

/// Background probabilities of the toy matrix, one row per node.
pub fn toy_probabilities() -> Vec<[f64; 6]> {
    let a = [0.729, 0.556, 0.556, 0.507, 0.346, 0.346];
    let b = [0.527, 0.402, 0.402, 0.366, 0.250, 0.250];
    let c = [0.999, 0.762, 0.762, 0.695, 0.474, 0.474];
    let d = [0.527, 0.402, 0.402, 0.366, 0.250, 0.251];
    let e = [0.256, 0.195, 0.195, 0.178, 0.122, 0.122];
    let f = [0.374, 0.285, 0.285, 0.259, 0.177, 0.177];
    let a2 = [0.730, 0.556, 0.556, 0.507, 0.346, 0.346];
    vec![
        a, a, a, b, b, // G1
        c, c, c, d, a, // G2
        e, c, b, f, a2, // G3
        b, a, b, b, b, f, // G4
    ]
}

/// Random activation matrix with both decision classes present.
pub fn random_activations(rng: &mut impl Rng, max_rows: usize, max_width: usize) -> ActivationMatrix {
    loop {
        let width = rng.gen_range(2..=max_width);
        let graphs = rng.gen_range(2..=(max_rows / 2).max(2));
        let density = rng.gen_range(0.2..0.7);
        let mut rows_left = max_rows;
        let mut blocks = Vec::new();
        let mut decisions = Vec::new();
        for _ in 0..graphs {
            if rows_left == 0 {
                break;
            }
            let n = rng.gen_range(1..=rows_left.min(4));
            rows_left -= n;
            blocks.push(
                (0..n)
                    .map(|_| Components::from_bools(&(0..width).map(|_| rng.gen_bool(density)).collect::<Vec<_>>()))
                    .collect(),
            );
            decisions.push(u8::from(rng.gen_bool(0.5)));
        }
        if !decisions.contains(&0) || !decisions.contains(&1) {
            continue;
        }
        let ids = (0..blocks.len()).map(|g| format!("g{g}")).collect();
        return ActivationMatrix::from_rows(1, width, ids, decisions, blocks).unwrap();
    }
}

/// Random connected-or-not labeled graph with `n` nodes.
pub fn random_graph(rng: &mut impl Rng, id: &str, n: usize, labels: usize, p: f64) -> LabeledGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v, 1.0));
            }
        }
    }
    let node_labels = (0..n).map(|_| rng.gen_range(0..labels)).collect();
    LabeledGraph::new(id, node_labels, edges, labels).unwrap()
}
