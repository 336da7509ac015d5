//! Characterizing an activation rule by subgroups of the nodes supporting
//! it: labeled subgraphs of their ego-graphs, or interval conditions on
//! topological node features. Both score candidates by WRAcc with the
//! supporting nodes as the target class.

mod dfs_code;
pub mod graph;
mod isomorphism;
pub mod numeric;

pub use dfs_code::{min_dfs_code, DfsCode, DfsEdge};
pub use graph::{
    build_ego_dataset, mine_top_subgraph, EgoInstance, GraphMinerParams, MiningResult, SubgraphPattern,
    SubgroupDataset,
};
pub use isomorphism::subgraph_isomorphic;

/// Numerator of WRAcc over the common denominator `total^2`:
/// `support_pos * total - support * total_pos`.
pub fn wracc_numerator(support: usize, support_pos: usize, total: usize, total_pos: usize) -> i128 {
    support_pos as i128 * total as i128 - support as i128 * total_pos as i128
}

/// Weighted relative accuracy
/// `(support / total) * (support_pos / support - total_pos / total)`;
/// zero for an empty support.
pub fn wracc(support: usize, support_pos: usize, total: usize, total_pos: usize) -> f64 {
    if support == 0 || total == 0 {
        return 0.0;
    }
    wracc_numerator(support, support_pos, total, total_pos) as f64 / (total as f64 * total as f64)
}

/// Bound numerators (over `total^2`) on the WRAcc of any extension whose
/// support stays at least `min_sup`.
pub fn ub_numerator(support: usize, total: usize, total_pos: usize, min_sup: usize) -> i128 {
    support as i128 * (total as i128 - min_sup.max(total_pos) as i128)
}

pub fn ub2_numerator(support_pos: usize, total: usize, total_pos: usize, min_sup: usize) -> i128 {
    support_pos as i128 * total as i128 - min_sup as i128 * total_pos as i128
}

pub fn ub3_numerator(support: usize, support_pos: usize, total: usize, total_pos: usize, min_sup: usize) -> i128 {
    ub_numerator(support, total, total_pos, min_sup).min(ub2_numerator(support_pos, total, total_pos, min_sup))
}

fn over_total_squared(num: i128, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    num as f64 / (total as f64 * total as f64)
}

/// `(support / total) * (1 - max(min_sup, total_pos) / total)`.
pub fn ub(support: usize, total: usize, total_pos: usize, min_sup: usize) -> f64 {
    over_total_squared(ub_numerator(support, total, total_pos, min_sup), total)
}

/// `support_pos / total - (min_sup / total) * (total_pos / total)`.
pub fn ub2(support_pos: usize, total: usize, total_pos: usize, min_sup: usize) -> f64 {
    over_total_squared(ub2_numerator(support_pos, total, total_pos, min_sup), total)
}

pub fn ub3(support: usize, support_pos: usize, total: usize, total_pos: usize, min_sup: usize) -> f64 {
    over_total_squared(ub3_numerator(support, support_pos, total, total_pos, min_sup), total)
}
