//! Weighted union-kNN graph under per-dimension RBF weights.
//!
//! `W_ij = exp(-Σ_m a_m (x_im - x_jm)²)` on the union-kNN pattern, where the
//! neighbor ordering uses the same `a`-weighted squared distance. The
//! normalized matrix is `P = D^{-1/2} W D^{-1/2}` with `D = diag(W·1)`.
//!
//! Matrices are stored in CSR form with both `(i,j)` and `(j,i)` entries
//! present; rows are sorted by column.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::math::{exp, sqrt};
use crate::{Error, Mat, Result};

/// Edges whose weight falls below this value are treated as underflow and dropped.
pub const W_FLOOR: f64 = 1e-300;

/// One hyperparameter configuration: neighbor count and per-dimension weights `a_m = 1/σ_m²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    /// Neighbor count.
    pub k: usize,
    /// Per-dimension inverse squared bandwidths.
    pub a: Vec<f64>,
}

impl HyperConfig {
    /// Configuration with the same bandwidth `sigma` on all `d` dimensions.
    pub fn uniform(k: usize, sigma: f64, d: usize) -> Self {
        Self { k, a: vec![1.0 / (sigma * sigma); d] }
    }

    /// Checks the configuration against a problem of `n` points in `d` dimensions.
    pub fn check(&self, n: usize, d: usize) -> Result<()> {
        if self.k == 0 || self.k >= n {
            return Err(Error::InvalidParameter(format!("k={} must lie in 1..{}", self.k, n)));
        }
        if self.a.len() != d {
            return Err(Error::InvalidParameter(format!("{} weights for {d} dimensions", self.a.len())));
        }
        if self.a.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// `Σ_m a_m (x_im - x_jm)²`.
#[inline]
pub fn weighted_sq_dist(xi: &[f64], xj: &[f64], a: &[f64]) -> f64 {
    xi.iter()
        .zip(xj)
        .zip(a)
        .map(|((p, q), w)| {
            let diff = p - q;
            w * diff * diff
        })
        .sum()
}

/// RBF weight `exp(-Σ_m a_m (x_im - x_jm)²)`.
#[inline]
pub fn pair_weight(xi: &[f64], xj: &[f64], a: &[f64]) -> f64 {
    exp(-weighted_sq_dist(xi, xj, a))
}

/// Source of k-nearest-neighbor lists under an `a`-weighted distance.
///
/// Implementations must return, for every point, exactly `k` distinct other
/// points ordered by ascending distance with ties broken by lower index.
pub trait NeighborIndex {
    /// Neighbor lists, one per row of `features`.
    fn knn(&self, features: &Mat, a: &[f64], k: usize) -> Vec<Vec<usize>>;
}

/// Exhaustive O(n²d) neighbor search with per-node partial selection.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactNeighbors;

fn by_dist_then_index(x: &(f64, usize), y: &(f64, usize)) -> Ordering {
    x.0.total_cmp(&y.0).then(x.1.cmp(&y.1))
}

fn knn_of(features: &Mat, a: &[f64], k: usize, i: usize) -> Vec<usize> {
    let n = features.rows();
    let xi = features.row(i);
    let mut cand: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != i)
        .map(|j| (weighted_sq_dist(xi, features.row(j), a), j))
        .collect();
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by_dist_then_index);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_dist_then_index);
    cand.into_iter().map(|(_, j)| j).collect()
}

impl NeighborIndex for ExactNeighbors {
    fn knn(&self, features: &Mat, a: &[f64], k: usize) -> Vec<Vec<usize>> {
        let n = features.rows();
        #[cfg(feature = "std")]
        {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(|i| knn_of(features, a, k, i)).collect()
        }
        #[cfg(not(feature = "std"))]
        {
            (0..n).map(|i| knn_of(features, a, k, i)).collect()
        }
    }
}

/// Symmetric CSR sparsity pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl Pattern {
    /// Builds the symmetric union of the given directed neighbor lists.
    pub fn from_neighbor_lists(lists: &[Vec<usize>]) -> Self {
        let n = lists.len();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, list) in lists.iter().enumerate() {
            for &j in list {
                if j != i {
                    rows[i].push(j);
                    rows[j].push(i);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(&r);
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols }
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (directed) entries `e`.
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Range of entry slots belonging to row `i`.
    #[inline]
    pub fn row_range(&self, i: usize) -> core::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Column indices of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.cols[self.row_range(i)]
    }

    /// Column of entry slot `s`.
    #[inline]
    pub fn col(&self, s: usize) -> usize {
        self.cols[s]
    }

    /// Iterates `(slot, i, j)` over all stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.row_range(i).map(move |s| (s, i, self.cols[s])))
    }

    /// Slot of entry `(i, j)` if stored.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.cols[r.clone()].binary_search(&j).ok().map(|p| r.start + p)
    }

    fn filtered(&self, keep: &[bool]) -> Self {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::with_capacity(self.cols.len());
        row_ptr.push(0);
        for i in 0..self.n {
            for s in self.row_range(i) {
                if keep[s] {
                    cols.push(self.cols[s]);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n: self.n, row_ptr, cols }
    }
}

/// kNN-sparse symmetric weight matrix `W` with degrees and `P = D^{-1/2} W D^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    pattern: Pattern,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    normalized: Vec<f64>,
}

impl SparseGraph {
    /// Builds a graph from a pattern and one weight per stored entry,
    /// dropping entries below [`W_FLOOR`].
    pub fn from_pattern_weights(pattern: Pattern, weights: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), weights.len());
        let (pattern, weights) = if weights.iter().any(|&w| w < W_FLOOR) {
            let keep: Vec<bool> = weights.iter().map(|&w| w >= W_FLOOR).collect();
            let pattern = pattern.filtered(&keep);
            let weights = weights.into_iter().filter(|&w| w >= W_FLOOR).collect();
            (pattern, weights)
        } else {
            (pattern, weights)
        };
        let degrees: Vec<f64> = (0..pattern.n()).map(|i| weights[pattern.row_range(i)].iter().sum()).collect();
        let normalized = normalize(&pattern, &weights, &degrees);
        Self { pattern, weights, degrees, normalized }
    }

    /// Sparsity pattern.
    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    /// Number of stored directed entries `e = nnz(W)`.
    pub fn edge_count(&self) -> usize {
        self.pattern.nnz()
    }

    /// `W` values aligned with the pattern's entry slots.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `P` values aligned with the pattern's entry slots.
    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    /// Degrees `d_i = Σ_j W_ij`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Nodes left without any stored edge.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.pattern.row_range(i).is_empty()).collect()
    }

    /// `W_ij` (0 when not stored).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |s| self.weights[s])
    }

    /// `P_ij` (0 when not stored).
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |s| self.normalized[s])
    }

    /// `out = P · x` for an `n × c` matrix `x`.
    pub fn p_mul(&self, x: &Mat, out: &mut Mat) {
        let c = x.cols();
        if c == 0 {
            return;
        }
        let xs = x.as_slice();
        for (i, o) in out.as_mut_slice().chunks_exact_mut(c).enumerate() {
            o.fill(0.0);
            let range = self.pattern.row_range(i);
            let cols = &self.pattern.cols[range.clone()];
            for (&pij, &j) in self.normalized[range].iter().zip(cols) {
                let xj = &xs[j * c..(j + 1) * c];
                for (ov, &xv) in o.iter_mut().zip(xj) {
                    *ov += pij * xv;
                }
            }
        }
    }

    /// Dense copy of `W`.
    pub fn dense_weights(&self) -> Mat {
        self.dense(&self.weights)
    }

    /// Dense copy of `P`.
    pub fn dense_normalized(&self) -> Mat {
        self.dense(&self.normalized)
    }

    fn dense(&self, vals: &[f64]) -> Mat {
        let mut m = Mat::zeros(self.n(), self.n());
        for (s, i, j) in self.pattern.entries() {
            m[(i, j)] = vals[s];
        }
        m
    }
}

/// `P_ij = W_ij / √(d_i d_j)` on the pattern; entries touching a zero-degree node are 0.
pub fn normalize(pattern: &Pattern, weights: &[f64], degrees: &[f64]) -> Vec<f64> {
    let inv_sqrt: Vec<f64> =
        degrees.iter().map(|&d| if d > 0.0 { 1.0 / sqrt(d) } else { 0.0 }).collect();
    pattern.entries().map(|(s, i, j)| weights[s] * (inv_sqrt[i] * inv_sqrt[j])).collect()
}

/// Computes RBF weights for a fixed pattern.
pub fn pattern_weights(features: &Mat, pattern: &Pattern, a: &[f64]) -> Vec<f64> {
    pattern
        .entries()
        .map(|(_, i, j)| pair_weight(features.row(i), features.row(j), a))
        .collect()
}

/// Builds the union-kNN graph with exact neighbor search.
pub fn build_knn_graph(dataset: &Dataset, config: &HyperConfig) -> Result<SparseGraph> {
    build_knn_graph_with(&ExactNeighbors, dataset.features(), config)
}

/// Builds the union-kNN graph with a caller-provided neighbor index.
pub fn build_knn_graph_with<I: NeighborIndex + ?Sized>(
    index: &I,
    features: &Mat,
    config: &HyperConfig,
) -> Result<SparseGraph> {
    config.check(features.rows(), features.cols())?;
    let lists = index.knn(features, &config.a, config.k);
    let pattern = Pattern::from_neighbor_lists(&lists);
    let weights = pattern_weights(features, &pattern, &config.a);
    Ok(SparseGraph::from_pattern_weights(pattern, weights))
}

/// Recomputes weights for new `a` on an existing pattern (fixed topology).
pub fn reweight(features: &Mat, pattern: &Pattern, a: &[f64]) -> SparseGraph {
    SparseGraph::from_pattern_weights(pattern.clone(), pattern_weights(features, pattern, a))
}

/// A `d`-vector per stored graph entry, aligned with the pattern slots.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTensor {
    dims: usize,
    data: Vec<f64>,
}

impl EdgeTensor {
    /// Zero tensor for `entries` slots of `dims` components.
    pub fn zeros(entries: usize, dims: usize) -> Self {
        Self { dims, data: vec![0.0; entries * dims] }
    }

    /// Component count per entry.
    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Number of entry slots.
    pub fn entries(&self) -> usize {
        self.data.len().checked_div(self.dims).unwrap_or(0)
    }

    /// Total stored reals.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// True when nothing is stored.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Vector of slot `s`.
    #[inline]
    pub fn at(&self, s: usize) -> &[f64] {
        &self.data[s * self.dims..(s + 1) * self.dims]
    }

    /// Mutable vector of slot `s`.
    #[inline]
    pub fn at_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.dims..(s + 1) * self.dims]
    }
}

/// `ΔX_ij = (x_i - x_j)^{⊙2}` stored only on the graph's entries.
pub fn delta_x_on_pattern(features: &Mat, pattern: &Pattern) -> EdgeTensor {
    let d = features.cols();
    let mut t = EdgeTensor::zeros(pattern.nnz(), d);
    for (s, i, j) in pattern.entries() {
        let (xi, xj) = (features.row(i), features.row(j));
        for (m, v) in t.at_mut(s).iter_mut().enumerate() {
            let diff = xi[m] - xj[m];
            *v = diff * diff;
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line(points: &[f64]) -> Mat {
        Mat::from_vec(points.len(), 1, points.to_vec())
    }

    #[test]
    fn pair_weight_cases() {
        assert_eq!(pair_weight(&[1.0, 2.0], &[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_eq!(pair_weight(&[1.0, 2.0], &[7.0, -2.0], &[0.0, 0.0]), 1.0);
        let w = pair_weight(&[0.0, 0.0], &[1.0, 2.0], &[1.0, 0.25]);
        assert!((w - libm::exp(-2.0)).abs() < 1e-16);
    }

    #[test]
    fn collinear_union_knn() {
        let x = line(&[0.0, 1.0, 10.0]);
        let g = build_knn_graph_with(&ExactNeighbors, &x, &HyperConfig { k: 1, a: vec![1.0] }).unwrap();
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.pattern().row(0), &[1]);
        assert_eq!(g.pattern().row(1), &[0, 2]);
        assert_eq!(g.pattern().row(2), &[1]);
    }

    #[test]
    fn complete_graph_uniform_weights() {
        let n = 5;
        let x = line(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let g = build_knn_graph_with(&ExactNeighbors, &x, &HyperConfig { k: n - 1, a: vec![0.0] }).unwrap();
        for i in 0..n {
            assert_eq!(g.degrees()[i], (n - 1) as f64);
            for j in 0..n {
                let expect = if i == j { 0.0 } else { 1.0 / (n - 1) as f64 };
                assert!((g.p(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_node_normalization() {
        let lists = vec![vec![1], vec![0]];
        let g = SparseGraph::from_pattern_weights(Pattern::from_neighbor_lists(&lists), vec![0.5, 0.5]);
        assert_eq!(g.degrees(), &[0.5, 0.5]);
        assert!((g.p(0, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn underflow_edges_are_dropped_and_node_isolated() {
        let lists = vec![vec![1], vec![0], vec![0]];
        let pattern = Pattern::from_neighbor_lists(&lists);
        // entries: (0,1),(0,2),(1,0),(2,0)
        let g = SparseGraph::from_pattern_weights(pattern, vec![0.5, 0.0, 0.5, 0.0]);
        assert_eq!(g.isolated(), vec![2]);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.p(2, 0), 0.0);
        assert!(g.normalized().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn tie_break_prefers_lower_index() {
        // point 1 is equidistant from 0 and 2
        let x = line(&[0.0, 1.0, 2.0]);
        let lists = ExactNeighbors.knn(&x, &[1.0], 1);
        assert_eq!(lists[1], vec![0]);
    }

    #[test]
    fn delta_x_values() {
        let x = Mat::from_vec(2, 2, vec![1.0, 3.0, 2.0, 1.0]);
        let p = Pattern::from_neighbor_lists(&[vec![1], vec![0]]);
        let t = delta_x_on_pattern(&x, &p);
        assert_eq!(t.at(0), &[1.0, 4.0]);
        assert_eq!(t.at(1), &[1.0, 4.0]);
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn config_check() {
        assert!(HyperConfig { k: 0, a: vec![1.0] }.check(5, 1).is_err());
        assert!(HyperConfig { k: 5, a: vec![1.0] }.check(5, 1).is_err());
        assert!(HyperConfig { k: 2, a: vec![-1.0] }.check(5, 1).is_err());
        assert!(HyperConfig { k: 2, a: vec![1.0, 1.0] }.check(5, 1).is_err());
        assert!(HyperConfig { k: 4, a: vec![1.0] }.check(5, 1).is_ok());
    }
}
