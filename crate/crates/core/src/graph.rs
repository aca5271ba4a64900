//! Compatibility graphs over a correspondence set.
//!
//! The first-order graph joins two correspondences when they preserve
//! pairwise distance: `| ||x_i - x_j|| - ||y_i - y_j|| | <= tau`, with
//! non-squared distances and a closed threshold. Second-order weights then
//! count, for each surviving edge, how many nodes are adjacent to both of its
//! endpoints; that integer equals the number of triangles the edge sits in.
//! The ordered variant keeps only the upper triangle so that every triangle
//! is reachable from exactly one of its edges.
//!
//! Storage is dense: one bit per pair for adjacency, one `u32` per pair for
//! weights. That is exact and cache-friendly at the scales this crate
//! targets, and [`MAX_DENSE_NODES`] refuses inputs where it would stop being
//! reasonable.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{CorrespondenceSet, Point3};

/// Hard cap on nodes for the dense layouts.
pub const MAX_DENSE_NODES: usize = 20_000;

/// Undirected boolean adjacency, bit-packed per row, zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatGraph {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl CompatGraph {
    fn empty(n: usize) -> Result<Self> {
        if n > MAX_DENSE_NODES {
            return Err(Error::TooManyNodes {
                got: n,
                max: MAX_DENSE_NODES,
            });
        }
        let words = n.div_ceil(64);
        Ok(CompatGraph {
            n,
            words,
            bits: vec![0u64; n * words],
        })
    }

    /// Build from an explicit edge list; useful for fixtures and diagnostics.
    /// Self-loops are rejected, duplicate edges are fine.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = CompatGraph::empty(n)?;
        for &(i, j) in edges {
            if i >= n {
                return Err(Error::NodeOutOfRange { index: i, n });
            }
            if j >= n {
                return Err(Error::NodeOutOfRange { index: j, n });
            }
            if i == j {
                return Err(Error::invalid_param("edges", format!("self-loop at {i}")));
            }
            g.set(i, j);
            g.set(j, i);
        }
        Ok(g)
    }

    fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1u64 << (j % 64);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    /// Bit words of row `i`.
    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let total: usize = (0..self.n).map(|i| self.degree(i)).sum();
        total / 2
    }

    /// Ascending neighbor indices of `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree(i));
        for (w, &word) in self.row(i).iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                out.push(w * 64 + b);
                bits &= bits - 1;
            }
        }
        out
    }
}

/// First-order compatibility. Every pair is tested; the graph is symmetric
/// with a zero diagonal. `tau = 0` keeps only exactly distance-preserving
/// pairs.
pub fn build_first_order(corr: &CorrespondenceSet, tau: f64) -> Result<CompatGraph> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::invalid_param(
            "tau",
            format!("must be finite and >= 0, got {tau}"),
        ));
    }
    let n = corr.len();
    let mut g = CompatGraph::empty(n)?;
    let src = corr.source_points();
    let tgt = corr.target_points();
    let words = g.words;
    // Each row is computed independently (both triangles); the distance terms
    // are symmetric in floating point, so the result is too.
    g.bits
        .par_chunks_mut(words)
        .enumerate()
        .for_each(|(i, row)| {
            for j in 0..n {
                if j == i {
                    continue;
                }
                let ds = src[i].dist(&src[j]);
                let dt = tgt[i].dist(&tgt[j]);
                if (ds - dt).abs() <= tau {
                    row[j / 64] |= 1u64 << (j % 64);
                }
            }
        });
    Ok(g)
}

/// Integer edge weights, dense `n x n`. `ordered = false` means symmetric;
/// `ordered = true` means everything at or below the diagonal is zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    n: usize,
    ordered: bool,
    w: Vec<u32>,
}

impl WeightedGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ordered(&self) -> bool {
        self.ordered
    }

    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.w[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    /// Number of pairs `i < j` with positive weight.
    pub fn positive_edge_count(&self) -> usize {
        let n = self.n;
        (0..n)
            .map(|i| (i + 1..n).filter(|&j| self.weight(i, j) > 0).count())
            .sum()
    }

    /// `(i, j, w)` for every pair `i < j` with positive weight, ascending.
    pub fn positive_edges(&self) -> Vec<(usize, usize, u32)> {
        let n = self.n;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = self.weight(i, j);
                if w > 0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Test-and-fixture constructor from a full row-major weight matrix.
    pub fn from_matrix(n: usize, w: Vec<u32>, ordered: bool) -> Result<Self> {
        if w.len() != n * n {
            return Err(Error::LengthMismatch {
                what: "weight matrix",
                got: w.len(),
                expected: n * n,
            });
        }
        Ok(WeightedGraph { n, ordered, w })
    }
}

/// Second-order consistency weights: for each first-order edge `(i, j)`, the
/// number of nodes adjacent to both `i` and `j`. Non-edges get weight zero.
/// Exact integers, so the result is identical regardless of thread count.
pub fn build_sc2(g: &CompatGraph) -> WeightedGraph {
    let n = g.n();
    let mut w = vec![0u32; n * n];
    w.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let ri = g.row(i);
        for j in g.neighbors(i) {
            let rj = g.row(j);
            let common: u32 = ri
                .iter()
                .zip(rj.iter())
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            row[j] = common;
        }
    });
    WeightedGraph {
        n,
        ordered: false,
        w,
    }
}

/// Restrict a symmetric weighted graph to its strict upper triangle.
pub fn to_o2graph(g: &WeightedGraph) -> Result<WeightedGraph> {
    if g.ordered {
        return Err(Error::invalid_param(
            "graph",
            "already ordered; ordering is applied to the symmetric form",
        ));
    }
    let n = g.n;
    let mut w = vec![0u32; n * n];
    for i in 0..n {
        let src = &g.w[i * n + i + 1..(i + 1) * n];
        w[i * n + i + 1..(i + 1) * n].copy_from_slice(src);
    }
    Ok(WeightedGraph {
        n,
        ordered: true,
        w,
    })
}

/// Median nearest-neighbor distance of a point cloud; the usual stand-in for
/// sampling resolution when picking `tau`. Even-sized inputs take the
/// midpoint of the two central values.
pub fn estimate_resolution(points: &[Point3]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid_param(
            "points",
            format!("need at least 2 points, got {}", points.len()),
        ));
    }
    for (index, p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite {
                what: "point coordinate",
                index,
            });
        }
    }
    let mut nn: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best = f64::INFINITY;
            for (j, q) in points.iter().enumerate() {
                if i != j {
                    best = best.min(p.dist(q));
                }
            }
            best
        })
        .collect();
    nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = nn.len();
    if m % 2 == 1 {
        Ok(nn[m / 2])
    } else {
        Ok(0.5 * (nn[m / 2 - 1] + nn[m / 2]))
    }
}
