//! Local-and-global-consistency label diffusion.
//!
//! Solves `(I + αL) F = Y` with `L = I - P`, either by the damped fixed-point
//! iteration `F ← μ P F + (1-μ) Y` (`μ = α/(1+α)`) or, for small graphs, by a
//! dense Cholesky factorization that serves as a reference.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::graph::SparseGraph;
use crate::math::sqrt;
use crate::{Error, Mat, Result};

/// Largest graph accepted by [`lgc_direct_solve`].
pub const DIRECT_SOLVE_MAX_N: usize = 2000;

/// Power-iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Damping `μ ∈ (0,1)`.
    pub mu: f64,
    /// Stop once the ∞-norm of an update is at most this.
    pub tol: f64,
    /// Iteration cap; hitting it is reported, not an error.
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { mu: 0.99, tol: 1e-6, max_iter: 1000 }
    }
}

impl SolverSettings {
    /// Checks `0 < μ < 1`, `tol ≥ 0`.
    pub fn check(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidParameter(format!("mu={} not in (0,1)", self.mu)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tol={} must be >= 0", self.tol)));
        }
        Ok(())
    }

    /// `α = μ / (1 - μ)`.
    pub fn alpha(&self) -> f64 {
        mu_to_alpha(self.mu)
    }
}

/// `μ = α / (1 + α)`.
pub fn alpha_to_mu(alpha: f64) -> f64 {
    alpha / (1.0 + alpha)
}

/// `α = μ / (1 - μ)`.
pub fn mu_to_alpha(mu: f64) -> f64 {
    mu / (1.0 - mu)
}

/// Output of a diffusion solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionMatrix {
    /// `n × c` scores.
    pub f: Mat,
    /// Iterations performed (0 for the direct solver).
    pub iterations: usize,
    /// ∞-norm of the last update (0 for the direct solver).
    pub residual: f64,
    /// Whether the tolerance was met.
    pub converged: bool,
}

/// Iterates `X ← μ P X + B` from `init` (zero when `None`) until the ∞-norm
/// update is at most `tol`. `on_step` sees every update norm.
pub fn fixed_point(
    graph: &SparseGraph,
    forcing: &Mat,
    mu: f64,
    tol: f64,
    max_iter: usize,
    init: Option<&Mat>,
    mut on_step: impl FnMut(f64),
) -> Result<SolutionMatrix> {
    let (n, c) = (forcing.rows(), forcing.cols());
    if graph.n() != n {
        return Err(Error::InvalidData(format!("graph has {} nodes, forcing has {n} rows", graph.n())));
    }
    let mut x = match init {
        Some(m) if m.rows() == n && m.cols() == c => m.clone(),
        _ => Mat::zeros(n, c),
    };
    let mut next = Mat::zeros(n, c);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        graph.p_mul(&x, &mut next);
        let mut delta: f64 = 0.0;
        for ((nv, &b), &old) in next.as_mut_slice().iter_mut().zip(forcing.as_slice()).zip(x.as_slice()) {
            *nv = mu * *nv + b;
            let dv = (*nv - old).abs();
            if dv > delta || dv.is_nan() {
                delta = dv;
            }
        }
        iterations += 1;
        if !delta.is_finite() {
            return Err(Error::NonFinite("value in diffusion iteration"));
        }
        core::mem::swap(&mut x, &mut next);
        residual = delta;
        on_step(delta);
        if delta <= tol {
            break;
        }
    }
    let converged = residual <= tol;
    Ok(SolutionMatrix { f: x, iterations, residual, converged })
}

/// Power-iteration solve of the diffusion problem, optionally warm-started.
pub fn lgc_power_solve(
    graph: &SparseGraph,
    y: &Mat,
    settings: &SolverSettings,
    warm: Option<&Mat>,
) -> Result<SolutionMatrix> {
    settings.check()?;
    let mut forcing = y.clone();
    for v in forcing.as_mut_slice() {
        *v *= 1.0 - settings.mu;
    }
    fixed_point(graph, &forcing, settings.mu, settings.tol, settings.max_iter, warm, |_| {})
}

/// Dense solve of `(I + αL) F = Y`, building `L` directly from `W`.
pub fn lgc_direct_solve(graph: &SparseGraph, y: &Mat, alpha: f64) -> Result<SolutionMatrix> {
    let n = graph.n();
    if n > DIRECT_SOLVE_MAX_N {
        return Err(Error::InvalidParameter(format!("direct solve limited to n <= {DIRECT_SOLVE_MAX_N}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha={alpha} must be > 0")));
    }
    let w = graph.dense_weights();
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).iter().sum()).collect();
    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let p = if deg[i] > 0.0 && deg[j] > 0.0 { w[(i, j)] / sqrt(deg[i] * deg[j]) } else { 0.0 };
            let l = if i == j { 1.0 } else { 0.0 } - p;
            a[(i, j)] = if i == j { 1.0 } else { 0.0 } + alpha * l;
        }
    }
    let chol = cholesky(a)?;
    let mut f = Mat::zeros(n, y.cols());
    let mut col = vec![0.0; n];
    for q in 0..y.cols() {
        for i in 0..n {
            col[i] = y[(i, q)];
        }
        cholesky_solve(&chol, &mut col);
        for i in 0..n {
            f[(i, q)] = col[i];
        }
    }
    Ok(SolutionMatrix { f, iterations: 0, residual: 0.0, converged: true })
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
fn cholesky(mut a: Mat) -> Result<Mat> {
    let n = a.rows();
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= a[(j, k)] * a[(j, k)];
        }
        if !(diag > 0.0) {
            return Err(Error::Internal(format!("system not positive definite at pivot {j}")));
        }
        let ljj = sqrt(diag);
        a[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = s / ljj;
        }
    }
    Ok(a)
}

fn cholesky_solve(l: &Mat, b: &mut [f64]) {
    let n = l.rows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Argmax readout of a solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    /// Predicted class per point (0-based).
    pub labels: Vec<usize>,
    /// Rows that were entirely zero (no label mass reached them).
    pub unreached: Vec<bool>,
}

impl Prediction {
    /// Number of unreached rows.
    pub fn unreached_count(&self) -> usize {
        self.unreached.iter().filter(|&&u| u).count()
    }
}

/// `argmax_j F_ij` per row; ties go to the lowest class, all-zero rows to class 0 and are flagged.
pub fn predict(f: &Mat) -> Prediction {
    let mut labels = Vec::with_capacity(f.rows());
    let mut unreached = Vec::with_capacity(f.rows());
    for i in 0..f.rows() {
        let row = f.row(i);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = j;
            }
        }
        labels.push(best);
        unreached.push(row.iter().all(|&v| v == 0.0));
    }
    Prediction { labels, unreached }
}

/// Fraction of `subset` whose prediction matches the truth.
pub fn accuracy(predictions: &[usize], truth: &[Option<usize>], subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("accuracy over an empty subset".into()));
    }
    let hits = subset.iter().filter(|&&i| truth[i] == Some(predictions[i])).count();
    Ok(hits as f64 / subset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Pattern;

    fn edgeless(n: usize) -> SparseGraph {
        SparseGraph::from_pattern_weights(Pattern::from_neighbor_lists(&vec![Vec::new(); n]), Vec::new())
    }

    fn y3() -> Mat {
        Mat::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    }

    #[test]
    fn edgeless_power_solve_is_scaled_labels() {
        let s = SolverSettings::default();
        let sol = lgc_power_solve(&edgeless(3), &y3(), &s, None).unwrap();
        for (f, y) in sol.f.as_slice().iter().zip(y3().as_slice()) {
            assert_eq!(*f, (1.0 - s.mu) * y);
        }
        assert!(sol.converged);
        let direct = lgc_direct_solve(&edgeless(3), &y3(), 99.0).unwrap();
        for (f, y) in direct.f.as_slice().iter().zip(y3().as_slice()) {
            assert!((f - y / 100.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_labels_give_zero_solution() {
        let g = SparseGraph::from_pattern_weights(Pattern::from_neighbor_lists(&[vec![1], vec![2], vec![0]]), vec![0.5; 6]);
        let sol = lgc_power_solve(&g, &Mat::zeros(3, 2), &SolverSettings::default(), None).unwrap();
        assert_eq!(sol.f.max_abs(), 0.0);
    }

    #[test]
    fn small_alpha_recovers_labels() {
        let g = SparseGraph::from_pattern_weights(Pattern::from_neighbor_lists(&[vec![1], vec![2], vec![0]]), vec![0.5; 6]);
        let sol = lgc_direct_solve(&g, &y3(), 1e-9).unwrap();
        assert!(sol.f.max_abs_diff(&y3()) < 1e-8);
    }

    #[test]
    fn rejects_bad_mu() {
        let s = SolverSettings { mu: 1.0, ..Default::default() };
        assert!(lgc_power_solve(&edgeless(3), &y3(), &s, None).is_err());
    }

    #[test]
    fn predict_rules() {
        let f = Mat::from_vec(3, 3, vec![0.1, 0.7, 0.2, 0.4, 0.4, 0.1, 0.0, 0.0, 0.0]);
        let p = predict(&f);
        assert_eq!(p.labels, vec![1, 0, 0]);
        assert_eq!(p.unreached, vec![false, false, true]);
        assert_eq!(p.unreached_count(), 1);
    }

    #[test]
    fn accuracy_cases() {
        let truth = vec![Some(0), Some(1), Some(1), Some(0)];
        assert_eq!(accuracy(&[0, 1, 1, 0], &truth, &[0, 1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0, 0, 1], &truth, &[0, 1, 2, 3]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 1], &truth, &[0, 1, 2, 3]).unwrap(), 0.75);
        assert!(accuracy(&[0], &truth, &[]).is_err());
    }
}
