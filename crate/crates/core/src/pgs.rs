//! Pivot-guided search for high-weight 3-cliques.
//!
//! Instead of enumerating triangles, pick the `k1` heaviest edges as pivots
//! and, for each, scan every node once for common neighbors, keeping the `k2`
//! best completions by aggregated weight. The scan is a flat pass over two
//! weight rows, so the work is `pivots * (n - 2)` checks exactly; the
//! returned counter lets callers verify that.
//!
//! On an ordered graph each triangle `i < j < z` survives only at its
//! lowest-indexed edge `(i, j)`, so the search emits it at most once. On the
//! symmetric graph all three edges can emit it; the duplicates are removed
//! after the global sort, and the pre-dedup count is reported.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{CompatGraph, WeightedGraph};

/// Hard cap for [`brute_force_3cliques`]; it is an oracle, not a fast path.
pub const MAX_BRUTE_FORCE_NODES: usize = 2000;

/// An edge chosen as an expansion seed, with its weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pivot {
    pub i: usize,
    pub j: usize,
    pub weight: u32,
}

/// Three mutually adjacent nodes, stored ascending, with the sum of the three
/// pairwise weights on the graph that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TurboClique {
    pub nodes: [usize; 3],
    pub aggregated_weight: u32,
}

impl TurboClique {
    pub fn new(a: usize, b: usize, c: usize, aggregated_weight: u32) -> Self {
        let mut nodes = [a, b, c];
        nodes.sort_unstable();
        debug_assert!(nodes[0] < nodes[1] && nodes[1] < nodes[2]);
        TurboClique {
            nodes,
            aggregated_weight,
        }
    }
}

/// Everything a search run reports.
#[derive(Debug, Clone)]
pub struct PgsOutput {
    /// Globally sorted by aggregated weight (descending), ties by ascending
    /// node triple. On a symmetric graph, deduplicated.
    pub cliques: Vec<TurboClique>,
    /// Number of selected triples before deduplication.
    pub raw_len: usize,
    /// Exact number of candidate-node checks performed.
    pub neighbor_checks: u64,
    /// Pivots actually expanded: `min(k1, positive edges)`.
    pub pivots_used: usize,
}

/// The `k1` heaviest positive edges, weight descending, ties by ascending
/// `(i, j)`. Fewer if the graph has fewer positive edges; empty if none.
pub fn select_pivots(g: &WeightedGraph, k1: usize) -> Result<Vec<Pivot>> {
    if k1 == 0 {
        return Err(Error::invalid_param("k1", "must be >= 1"));
    }
    let mut edges: Vec<Pivot> = g
        .positive_edges()
        .into_iter()
        .map(|(i, j, weight)| Pivot { i, j, weight })
        .collect();
    edges.sort_unstable_by(|a, b| {
        b.weight
            .cmp(&a.weight)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    edges.truncate(k1);
    Ok(edges)
}

/// Nodes adjacent (positive weight) to both `i` and `j`, ascending. On an
/// ordered graph the zeroed lower triangle restricts the result to `z > j`.
pub fn common_neighbors(g: &WeightedGraph, i: usize, j: usize) -> Result<Vec<usize>> {
    let n = g.n();
    if i >= n {
        return Err(Error::NodeOutOfRange { index: i, n });
    }
    if j >= n {
        return Err(Error::NodeOutOfRange { index: j, n });
    }
    if i == j {
        return Err(Error::invalid_param("nodes", "i and j must differ"));
    }
    let ri = g.row(i);
    let rj = g.row(j);
    Ok((0..n)
        .filter(|&z| z != i && z != j && ri[z] > 0 && rj[z] > 0)
        .collect())
}

struct PivotExpansion {
    triples: Vec<TurboClique>,
    checks: u64,
}

fn expand_pivot(g: &WeightedGraph, p: &Pivot, k2: usize) -> PivotExpansion {
    let n = g.n();
    let ri = g.row(p.i);
    let rj = g.row(p.j);
    let mut checks = 0u64;
    let mut candidates: Vec<(u32, usize)> = Vec::new();
    for z in 0..n {
        if z == p.i || z == p.j {
            continue;
        }
        checks += 1;
        let wi = ri[z];
        let wj = rj[z];
        // Positive product of the three pairwise weights verifies the triangle.
        if wi > 0 && wj > 0 {
            debug_assert!(p.weight > 0);
            candidates.push((p.weight + wi + wj, z));
        }
    }
    candidates.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    candidates.truncate(k2);
    let triples = candidates
        .into_iter()
        .map(|(s, z)| TurboClique::new(p.i, p.j, z, s))
        .collect();
    PivotExpansion { triples, checks }
}

fn sort_cliques(cliques: &mut [TurboClique]) {
    cliques.sort_unstable_by(|a, b| {
        b.aggregated_weight
            .cmp(&a.aggregated_weight)
            .then(a.nodes.cmp(&b.nodes))
    });
}

/// Full search: pivots, per-pivot completion, global ordering, and (on a
/// symmetric graph) deduplication. Empty output means no pivot closed a
/// triangle; callers treat that as registration failure.
pub fn pgs_search(g: &WeightedGraph, k1: usize, k2: usize) -> Result<PgsOutput> {
    if k2 == 0 {
        return Err(Error::invalid_param("k2", "must be >= 1"));
    }
    let pivots = select_pivots(g, k1)?;
    let expansions: Vec<PivotExpansion> = pivots
        .par_iter()
        .map(|p| expand_pivot(g, p, k2))
        .collect();
    let mut neighbor_checks = 0u64;
    let mut cliques = Vec::new();
    for e in &expansions {
        neighbor_checks += e.checks;
        cliques.extend_from_slice(&e.triples);
    }
    sort_cliques(&mut cliques);
    let raw_len = cliques.len();
    if !g.ordered() {
        cliques.dedup_by(|a, b| a.nodes == b.nodes);
    }
    Ok(PgsOutput {
        cliques,
        raw_len,
        neighbor_checks,
        pivots_used: pivots.len(),
    })
}

/// Exhaustive triangle enumeration on the boolean graph, ascending `(i, j, z)`
/// with `i < j < z`. Weights are not computed (always 0); this is the
/// reference the search is checked against, kept deliberately simple.
pub fn brute_force_3cliques(g: &CompatGraph) -> Result<Vec<TurboClique>> {
    let n = g.n();
    if n > MAX_BRUTE_FORCE_NODES {
        return Err(Error::BruteForceTooLarge {
            got: n,
            max: MAX_BRUTE_FORCE_NODES,
        });
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !g.contains(i, j) {
                continue;
            }
            for z in j + 1..n {
                if g.contains(i, z) && g.contains(j, z) {
                    out.push(TurboClique {
                        nodes: [i, j, z],
                        aggregated_weight: 0,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_sc2, to_o2graph};
    use std::collections::HashMap;

    /// Same 7-node fixture as in the graph tests: complete on {0..4} plus the
    /// 4-clique {1,3,5,6}; 15 edges, 14 triangles.
    fn fixture() -> CompatGraph {
        let mut edges = Vec::new();
        for i in 0..5usize {
            for j in i + 1..5 {
                edges.push((i, j));
            }
        }
        edges.extend_from_slice(&[(1, 5), (1, 6), (3, 5), (3, 6), (5, 6)]);
        CompatGraph::from_edges(7, &edges).unwrap()
    }

    #[test]
    fn pivot_order_and_quota() {
        let w = build_sc2(&fixture());
        let pivots = select_pivots(&w, 3).unwrap();
        assert_eq!(pivots.len(), 3);
        // (1,3) is the unique heaviest edge (weight 5).
        assert_eq!((pivots[0].i, pivots[0].j, pivots[0].weight), (1, 3, 5));
        // Everything else in the 5-clique core has weight 3; lexicographic
        // order breaks the tie.
        assert_eq!((pivots[1].i, pivots[1].j), (0, 1));
        assert_eq!((pivots[2].i, pivots[2].j), (0, 2));
    }

    #[test]
    fn pivot_selection_caps_at_edge_count() {
        let w = build_sc2(&fixture());
        let pivots = select_pivots(&w, 1000).unwrap();
        assert_eq!(pivots.len(), 15);
        assert!(select_pivots(&w, 0).is_err());
    }

    #[test]
    fn no_positive_edges_means_no_pivots() {
        let g = CompatGraph::from_edges(4, &[(0, 1)]).unwrap();
        // A single edge has no triangle, so its second-order weight is 0.
        let w = build_sc2(&g);
        assert!(select_pivots(&w, 5).unwrap().is_empty());
        let out = pgs_search(&w, 5, 2).unwrap();
        assert!(out.cliques.is_empty());
        assert_eq!(out.pivots_used, 0);
        assert_eq!(out.neighbor_checks, 0);
    }

    #[test]
    fn common_neighbors_on_both_modes() {
        let sym = build_sc2(&fixture());
        assert_eq!(common_neighbors(&sym, 1, 3).unwrap(), vec![0, 2, 4, 5, 6]);
        let ord = to_o2graph(&sym).unwrap();
        // Ordered: only completions above the pivot's high end survive.
        assert_eq!(common_neighbors(&ord, 1, 3).unwrap(), vec![4, 5, 6]);
        assert!(common_neighbors(&sym, 1, 1).is_err());
        assert!(common_neighbors(&sym, 0, 9).is_err());
    }

    #[test]
    fn ordered_search_finds_each_triangle_once() {
        let g = fixture();
        let ord = to_o2graph(&build_sc2(&g)).unwrap();
        let out = pgs_search(&ord, 1000, 7).unwrap();
        assert_eq!(out.cliques.len(), 14);
        assert_eq!(out.raw_len, 14, "ordered mode never produces duplicates");
        let mut seen = out.cliques.clone();
        seen.sort_unstable_by(|a, b| a.nodes.cmp(&b.nodes));
        seen.dedup_by(|a, b| a.nodes == b.nodes);
        assert_eq!(seen.len(), 14);
        let brute = brute_force_3cliques(&g).unwrap();
        let brute_nodes: Vec<[usize; 3]> = brute.iter().map(|c| c.nodes).collect();
        let mut got_nodes: Vec<[usize; 3]> = out.cliques.iter().map(|c| c.nodes).collect();
        got_nodes.sort_unstable();
        assert_eq!(got_nodes, brute_nodes);
    }

    #[test]
    fn symmetric_search_triplicates_then_dedups() {
        let g = fixture();
        let sym = build_sc2(&g);
        let out = pgs_search(&sym, 1000, 7).unwrap();
        assert_eq!(out.raw_len, 3 * 14);
        assert_eq!(out.cliques.len(), 14);
    }

    #[test]
    fn aggregated_weight_is_edge_sum() {
        let sym = build_sc2(&fixture());
        let out = pgs_search(&sym, 1000, 7).unwrap();
        for c in &out.cliques {
            let [a, b, z] = c.nodes;
            let expect = sym.weight(a, b) + sym.weight(a, z) + sym.weight(b, z);
            assert_eq!(c.aggregated_weight, expect);
        }
        // Top clique by aggregated weight: inside the 5-clique core every
        // triangle aggregates 3+3+3 or with (1,3) 5+3+3; the best uses (1,3).
        assert_eq!(out.cliques[0].aggregated_weight, 11);
        assert!(out.cliques[0].nodes.contains(&1) && out.cliques[0].nodes.contains(&3));
    }

    #[test]
    fn k2_tie_breaks_prefer_lower_completion() {
        // Path-free toy: two triangles share the pivot edge (0,1) and tie on
        // aggregated weight; the lower completion index must win at k2 = 1.
        let g = CompatGraph::from_edges(4, &[(0, 1), (0, 2), (1, 2), (0, 3), (1, 3)]).unwrap();
        let sym = build_sc2(&g);
        assert_eq!(sym.weight(0, 2), sym.weight(0, 3));
        let ord = to_o2graph(&sym).unwrap();
        let out = pgs_search(&ord, 1, 1).unwrap();
        assert_eq!(out.cliques.len(), 1);
        assert_eq!(out.cliques[0].nodes, [0, 1, 2]);
    }

    #[test]
    fn neighbor_check_count_is_exact() {
        let g = fixture();
        let ord = to_o2graph(&build_sc2(&g)).unwrap();
        for k1 in [1usize, 4, 15, 100] {
            let out = pgs_search(&ord, k1, 2).unwrap();
            assert_eq!(out.neighbor_checks, (out.pivots_used as u64) * (7 - 2));
            assert_eq!(out.pivots_used, k1.min(15));
        }
    }

    #[test]
    fn budget_bounds_hold() {
        let ord = to_o2graph(&build_sc2(&fixture())).unwrap();
        for k1 in 1..=16 {
            for k2 in 1..=8 {
                let out = pgs_search(&ord, k1, k2).unwrap();
                assert!(out.raw_len <= k1 * k2);
                assert!(out.cliques.len() <= out.raw_len);
            }
        }
    }

    #[test]
    fn output_grows_monotonically_in_budgets() {
        let ord = to_o2graph(&build_sc2(&fixture())).unwrap();
        let mut prev = 0;
        for k1 in 1..=16 {
            let len = pgs_search(&ord, k1, 3).unwrap().cliques.len();
            assert!(len >= prev);
            prev = len;
        }
        let mut prev = 0;
        for k2 in 1..=8 {
            let len = pgs_search(&ord, 15, k2).unwrap().cliques.len();
            assert!(len >= prev);
            prev = len;
        }
    }

    #[test]
    fn global_order_is_weight_then_lex() {
        let ord = to_o2graph(&build_sc2(&fixture())).unwrap();
        let out = pgs_search(&ord, 1000, 7).unwrap();
        for w in out.cliques.windows(2) {
            assert!(
                w[0].aggregated_weight > w[1].aggregated_weight
                    || (w[0].aggregated_weight == w[1].aggregated_weight
                        && w[0].nodes < w[1].nodes)
            );
        }
    }

    #[test]
    fn symmetric_duplicates_cover_every_edge_role() {
        // With full budgets each triangle must be reached from all three of
        // its edges on the symmetric graph.
        let sym = build_sc2(&fixture());
        let pivots = select_pivots(&sym, 1000).unwrap();
        let mut hits: HashMap<[usize; 3], usize> = HashMap::new();
        for p in &pivots {
            for z in common_neighbors(&sym, p.i, p.j).unwrap() {
                let c = TurboClique::new(p.i, p.j, z, 0);
                *hits.entry(c.nodes).or_insert(0) += 1;
            }
        }
        assert_eq!(hits.len(), 14);
        assert!(hits.values().all(|&v| v == 3));
    }

    #[test]
    fn brute_force_guard() {
        let g = CompatGraph::from_edges(MAX_BRUTE_FORCE_NODES + 1, &[(0, 1)]).unwrap();
        assert!(matches!(
            brute_force_3cliques(&g),
            Err(Error::BruteForceTooLarge { .. })
        ));
    }
}
