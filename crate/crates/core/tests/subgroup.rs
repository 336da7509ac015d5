mod common;

use actrules_core::miner::ActivationRule;
use actrules_core::subgroup::numeric::{self, BeamParams, NodeFeatureTable};
use actrules_core::subgroup::{
    build_ego_dataset, min_dfs_code, mine_top_subgraph, EgoInstance, GraphMinerParams, SubgroupDataset,
};
use actrules_core::{Components, LabeledGraph};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn toy_rule() -> ActivationRule {
    ActivationRule::from_components(&common::toy_activations(), 1, Components::from_indices([0, 5]), 1.0)
}

#[test]
fn toy_ego_dataset() {
    let ds = common::toy_dataset();
    let d = build_ego_dataset(&toy_rule(), &ds, &common::toy_activations()).unwrap();
    assert_eq!(d.len(), 21);
    let positives: Vec<(String, usize)> = d
        .instances
        .iter()
        .filter(|i| i.positive)
        .map(|i| (i.graph_id.clone(), i.node))
        .collect();
    assert_eq!(positives, [("G1".into(), 0), ("G1".into(), 2), ("G2".into(), 1)]);
    // radius 3 covers each small toy graph entirely
    let g1 = &d.instances[0].graph;
    assert_eq!((g1.node_count(), g1.edge_count()), (5, 5));
}

#[test]
fn toy_subgraph_mining_reports_best_pattern() {
    let ds = common::toy_dataset();
    let d = build_ego_dataset(&toy_rule(), &ds, &common::toy_activations()).unwrap();
    let params = GraphMinerParams {
        min_sup: 2,
        max_edges: 3,
        ..GraphMinerParams::default()
    };
    let result = mine_top_subgraph(&d, &params).unwrap();
    let best = result.best.unwrap();
    assert!(best.wracc > 0.0);
    assert!(best.support >= 2);
    let json = best.to_json(&d.label_names);
    assert_eq!(json["support"], best.support);
    assert!(best.to_dot(&d.label_names, "rule0").starts_with("graph \"rule0\" {"));
}

#[test]
fn floor_collects_patterns_in_order() {
    let ds = common::toy_dataset();
    let d = build_ego_dataset(&toy_rule(), &ds, &common::toy_activations()).unwrap();
    let params = GraphMinerParams {
        min_sup: 2,
        max_edges: 3,
        prune: true,
        floor: Some(0.0),
    };
    let result = mine_top_subgraph(&d, &params).unwrap();
    assert!(!result.above_floor.is_empty());
    assert!(result.above_floor.windows(2).all(|w| w[0].wracc >= w[1].wracc));
    assert_eq!(result.above_floor.first(), result.best.as_ref());
}

fn connected(rng: &mut impl Rng, n: usize) -> LabeledGraph {
    loop {
        let g = common::random_graph(rng, "g", n, 3, 0.5);
        let reach = g.geodesic_distances(0).unwrap();
        if reach.iter().all(Option::is_some) && g.edge_count() > 0 {
            return g;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minimal_code_is_canonical_and_permutation_invariant(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(2..=7);
        let g = connected(&mut rng, n);
        let code = min_dfs_code(&g).unwrap();
        prop_assert!(code.is_canonical());
        prop_assert_eq!(code.edge_count(), g.edge_count());
        prop_assert_eq!(min_dfs_code(&code.to_graph("c", 3)).unwrap(), code.clone());

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut labels = vec![0; n];
        for v in 0..n {
            labels[perm[v]] = g.label(v);
        }
        let edges = g.edges().iter().map(|e| (perm[e.u], perm[e.v], 1.0));
        let h = LabeledGraph::new("h", labels, edges, 3).unwrap();
        prop_assert_eq!(min_dfs_code(&h).unwrap(), code);
    }
}

fn planted_table() -> NodeFeatureTable {
    let mut rng = common::rng(19);
    let mut table = NodeFeatureTable {
        columns: numeric::feature_names(),
        graph_ids: Vec::new(),
        nodes: Vec::new(),
        values: Vec::new(),
        target: Vec::new(),
    };
    for gi in 0..30 {
        let n = rng.gen_range(4..=9);
        let g = common::random_graph(&mut rng, "g", n, 1, 0.4);
        for (v, row) in numeric::node_features(&g).into_iter().enumerate() {
            table.graph_ids.push(format!("g{gi}"));
            table.nodes.push(v);
            table.target.push(row[0] == 3.0);
            table.values.push(row);
        }
    }
    table
}

#[test]
fn planted_degree_pattern_is_top() {
    let t = planted_table();
    let top = numeric::mine_numeric_subgroups(&t, &BeamParams::default()).unwrap();
    let best = &top[0];
    let n = t.len() as f64;
    let p = t.target.iter().filter(|&&x| x).count() as f64 / n;
    assert!((best.wracc - p * (1.0 - p)).abs() <= 1e-12);
    assert_eq!(best.display(&t.columns), "degree=3");
    for (row, &y) in t.values.iter().zip(&t.target) {
        assert_eq!(best.covers(row), y);
    }
    assert!(top.len() <= 10);
    assert!(top.iter().all(|p| p.wracc > 0.0));
    assert!(top.windows(2).all(|w| w[0].wracc >= w[1].wracc));
}

#[test]
fn each_feature_appears_once_per_pattern() {
    let t = planted_table();
    for p in numeric::mine_numeric_subgroups(&t, &BeamParams::default()).unwrap() {
        let mut features: Vec<usize> = p.conditions.iter().map(|c| c.feature).collect();
        let len = features.len();
        features.dedup();
        assert_eq!(features.len(), len);
        assert!(len <= 4);
    }
}

#[test]
fn propositionalized_toy_table() {
    let ds = common::toy_dataset();
    let t = numeric::propositionalize(&ds, &toy_rule(), &common::toy_activations()).unwrap();
    assert_eq!(t.len(), 21);
    assert_eq!(t.columns.len(), 12);
    assert_eq!(t.target.iter().filter(|&&x| x).count(), 3);
    // G1 node 1 touches 0, 2 and 4
    assert_eq!(t.values[1][0], 3.0);
    assert!(t.to_csv().starts_with("graph,node,degree,"));
}

#[test]
fn planted_edge_is_recovered() {
    let mut rng = common::rng(23);
    let instances = (0..60)
        .map(|i| {
            let n = rng.gen_range(2..=6);
            let graph = connected(&mut rng, n);
            let positive = graph.edges().iter().any(|e| {
                let mut l = [graph.label(e.u), graph.label(e.v)];
                l.sort_unstable();
                l == [0, 2]
            });
            EgoInstance {
                graph_id: format!("g{i}"),
                node: 0,
                graph,
                positive,
            }
        })
        .collect();
    let d = SubgroupDataset {
        label_names: vec!["C".into(), "N".into(), "O".into()],
        instances,
    };
    let params = GraphMinerParams {
        min_sup: 3,
        max_edges: 3,
        ..GraphMinerParams::default()
    };
    let best = mine_top_subgraph(&d, &params).unwrap().best.unwrap();
    assert_eq!(best.code.edge_count(), 1);
    let mut labels = best.code.node_labels();
    labels.sort_unstable();
    assert_eq!(labels, [0, 2]);
    assert_eq!(best.support, d.positives());
    assert_eq!(best.support_pos, d.positives());
}
