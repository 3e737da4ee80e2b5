//! Validation rank loss and its gradient with respect to the RBF weights `a`.
//!
//! The loss sums `-log σ(F_vc' - F_v'c')` over every class `c'` and every
//! ordered pair of validation points `v ∈ V_c'`, `v' ∈ V ∖ V_c'`.
//!
//! Its gradient flows through three sparse edge tensors that share the
//! sparsity pattern of `W`:
//!
//! * `ΔX_ij = (x_i - x_j)^{⊙2}`
//! * `Ω = dW/da = -W ⊙ ΔX`
//! * `dP/da = Ω ⊙ (P⊘W) - ½ P^{⊗3} ⊘ W^{⊗2} ⊙ (W·1·(Ω·1)ᵀ + (W·1·(Ω·1)ᵀ)ᵀ)`
//!
//! followed by one linear solve per dimension,
//! `(I + αL) dF/da_m = α (dP/da_m) F`, and the chain rule through the loss.
//! All gradients are taken at a fixed kNN topology.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{delta_x_on_pattern, EdgeTensor, SparseGraph};
use crate::math::{neg_log_sigmoid, sigmoid};
use crate::propagation::{fixed_point, SolutionMatrix, SolverSettings};
use crate::{Error, Mat, Result};

/// Value of the pairwise rank loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankLoss {
    /// Summed negative log-likelihood.
    pub value: f64,
    /// Number of ordered cross-class pairs summed over classes.
    pub pair_count: usize,
}

/// Sparse `∂g/∂F`: `(row, class, coefficient)` triples on validation rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossSeed {
    entries: Vec<(usize, usize, f64)>,
}

impl LossSeed {
    /// `⟨∂g/∂F, M⟩` for an `n × c` matrix `M`.
    pub fn dot(&self, m: &Mat) -> f64 {
        self.entries.iter().map(|&(i, q, g)| g * m[(i, q)]).sum()
    }

    /// Non-zero entries.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }
}

fn validation_classes(validation: &[usize], truth: &[Option<usize>], classes: usize) -> Result<Vec<usize>> {
    validation
        .iter()
        .map(|&v| match truth.get(v).copied().flatten() {
            Some(y) if y < classes => Ok(y),
            _ => Err(Error::InvalidData(format!("validation point {v} has no usable label"))),
        })
        .collect()
}

fn pair_count(ys: &[usize], classes: usize) -> usize {
    let mut sizes = vec![0usize; classes];
    for &y in ys {
        sizes[y] += 1;
    }
    sizes.iter().map(|&s| s * (ys.len() - s)).sum()
}

/// Pairwise rank loss of `f` on the validation points.
pub fn rank_loss(f: &Mat, validation: &[usize], truth: &[Option<usize>]) -> Result<RankLoss> {
    let ys = validation_classes(validation, truth, f.cols())?;
    let pairs = pair_count(&ys, f.cols());
    if pairs == 0 {
        return Err(Error::DegenerateValidation);
    }
    let mut value = 0.0;
    for (a, &v) in validation.iter().enumerate() {
        let class = ys[a];
        for (b, &w) in validation.iter().enumerate() {
            if ys[b] != class {
                value += neg_log_sigmoid(f[(v, class)] - f[(w, class)]);
            }
        }
    }
    Ok(RankLoss { value, pair_count: pairs })
}

/// Rank loss together with `∂g/∂F`.
///
/// Each pair contributes `(o_vv' - 1)` to `∂g/∂F_vc'` and `-(o_vv' - 1)` to
/// `∂g/∂F_v'c'`, where `o_vv' = σ(F_vc' - F_v'c')`.
pub fn loss_seed(f: &Mat, validation: &[usize], truth: &[Option<usize>]) -> Result<(RankLoss, LossSeed)> {
    let loss = rank_loss(f, validation, truth)?;
    let ys = validation_classes(validation, truth, f.cols())?;
    let c = f.cols();
    let mut coef = vec![0.0; validation.len() * c];
    for (a, &v) in validation.iter().enumerate() {
        let class = ys[a];
        for (b, &w) in validation.iter().enumerate() {
            if ys[b] != class {
                let o = sigmoid(f[(v, class)] - f[(w, class)]);
                coef[a * c + class] += o - 1.0;
                coef[b * c + class] -= o - 1.0;
            }
        }
    }
    let entries = validation
        .iter()
        .enumerate()
        .flat_map(|(a, &v)| (0..c).map(move |q| (a, v, q)))
        .filter_map(|(a, v, q)| {
            let g = coef[a * c + q];
            (g != 0.0).then_some((v, q, g))
        })
        .collect();
    Ok((loss, LossSeed { entries }))
}

/// `Ω_ij = -W_ij ΔX_ij` on every stored entry.
pub fn compute_omega(weights: &[f64], delta_x: &EdgeTensor) -> EdgeTensor {
    assert_eq!(weights.len(), delta_x.entries());
    let mut omega = EdgeTensor::zeros(delta_x.entries(), delta_x.dims());
    for (s, &w) in weights.iter().enumerate() {
        for (o, dx) in omega.at_mut(s).iter_mut().zip(delta_x.at(s)) {
            *o = -w * dx;
        }
    }
    omega
}

/// Sparse tensor-form `dP/da` on `W`'s pattern.
///
/// The row sums `W·1` and `Ω·1` are accumulated once. The second term is
/// evaluated as `½ P_ij ((Ω·1)_i/(W·1)_i + (Ω·1)_j/(W·1)_j)`, which equals
/// `½ P³/W² (d_i (Ω·1)_j + d_j (Ω·1)_i)` without forming `(d_i d_j)^{-3/2}`.
pub fn grad_p(graph: &SparseGraph, omega: &EdgeTensor) -> Result<EdgeTensor> {
    let pattern = graph.pattern();
    let d = omega.dims();
    if omega.entries() != pattern.nnz() {
        return Err(Error::InvalidData("omega does not match the graph pattern".into()));
    }
    let w = graph.weights();
    let p = graph.normalized();
    let degrees = graph.degrees();

    // (Ω·1)_i / (W·1)_i, one d-vector per node
    let mut rel_row_omega = vec![0.0; pattern.n() * d];
    for i in 0..pattern.n() {
        if degrees[i] <= 0.0 {
            continue;
        }
        let acc = &mut rel_row_omega[i * d..(i + 1) * d];
        for s in pattern.row_range(i) {
            for (a, o) in acc.iter_mut().zip(omega.at(s)) {
                *a += o;
            }
        }
        for a in acc.iter_mut() {
            *a /= degrees[i];
        }
    }

    let mut dp = EdgeTensor::zeros(pattern.nnz(), d);
    for (s, i, j) in pattern.entries() {
        if w[s] == 0.0 {
            return Err(Error::Internal(format!("zero weight stored at ({i},{j})")));
        }
        let p_over_w = p[s] / w[s];
        let half_p = 0.5 * p[s];
        let (ri, rj) = (&rel_row_omega[i * d..(i + 1) * d], &rel_row_omega[j * d..(j + 1) * d]);
        let out = dp.at_mut(s);
        for m in 0..d {
            out[m] = omega.at(s)[m] * p_over_w - half_p * (ri[m] + rj[m]);
        }
    }
    Ok(dp)
}

/// `out = (dP/da_m) · F`.
fn dp_mul(graph: &SparseGraph, dp: &EdgeTensor, m: usize, f: &Mat, out: &mut Mat) {
    let pattern = graph.pattern();
    let c = f.cols();
    for i in 0..pattern.n() {
        let o = out.row_mut(i);
        o.fill(0.0);
        for s in pattern.row_range(i) {
            let v = dp.at(s)[m];
            let fj = f.row(pattern.col(s));
            for q in 0..c {
                o[q] += v * fj[q];
            }
        }
    }
}

/// Solves `(I + αL) X = α (dP/da_m) F` for one dimension by the damped
/// iteration `X ← μ P X + μ (dP/da_m) F`, started from zero.
pub fn grad_f_dim(
    graph: &SparseGraph,
    f: &Mat,
    dp: &EdgeTensor,
    m: usize,
    settings: &SolverSettings,
) -> Result<SolutionMatrix> {
    settings.check()?;
    let mut forcing = Mat::zeros(f.rows(), f.cols());
    dp_mul(graph, dp, m, f, &mut forcing);
    for v in forcing.as_mut_slice() {
        *v *= settings.mu;
    }
    fixed_point(graph, &forcing, settings.mu, settings.tol, settings.max_iter, None, |_| {})
}

/// Solves a batch of dimensions at once as one `n × (c·|dims|)` iteration;
/// column block `b` of the result is `dF/da_{dims[b]}`.
pub fn grad_f_block(
    graph: &SparseGraph,
    f: &Mat,
    dp: &EdgeTensor,
    dims: &[usize],
    settings: &SolverSettings,
) -> Result<SolutionMatrix> {
    settings.check()?;
    let (n, c) = (f.rows(), f.cols());
    let width = c * dims.len();
    let mut forcing = Mat::zeros(n, width);
    let mut one = Mat::zeros(n, c);
    for (b, &m) in dims.iter().enumerate() {
        dp_mul(graph, dp, m, f, &mut one);
        for i in 0..n {
            for (dst, &v) in forcing.row_mut(i)[b * c..(b + 1) * c].iter_mut().zip(one.row(i)) {
                *dst = settings.mu * v;
            }
        }
    }
    fixed_point(graph, &forcing, settings.mu, settings.tol, settings.max_iter, None, |_| {})
}

/// `dF/da_m` for every dimension `m`.
pub fn grad_f(graph: &SparseGraph, f: &Mat, dp: &EdgeTensor, settings: &SolverSettings) -> Result<Vec<SolutionMatrix>> {
    (0..dp.dims()).map(|m| grad_f_dim(graph, f, dp, m, settings)).collect()
}

/// Chain rule through the rank loss: `Σ (o_vv' - 1)(∂F_vc'/∂a_m - ∂F_v'c'/∂a_m)`.
pub fn grad_loss(f: &Mat, df: &[Mat], validation: &[usize], truth: &[Option<usize>]) -> Result<Vec<f64>> {
    let (_, seed) = loss_seed(f, validation, truth)?;
    Ok(df.iter().map(|dfm| seed.dot(dfm)).collect())
}

/// Storage accounting for one gradient evaluation, in stored reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GradientStats {
    /// Stored graph entries `e`.
    pub edge_count: usize,
    /// Entries of `ΔX`.
    pub delta_x_entries: usize,
    /// Entries of `Ω`.
    pub omega_entries: usize,
    /// Entries of `dP/da`.
    pub dp_entries: usize,
    /// Largest number of auxiliary reals alive at once.
    pub peak_aux_entries: usize,
    /// Largest per-dimension solve iteration count.
    pub max_df_iterations: usize,
    /// Dimensions whose `dF/da_m` solve hit the iteration cap.
    pub unconverged_dims: usize,
}

impl GradientStats {
    /// Largest single edge tensor.
    pub fn max_tensor_entries(&self) -> usize {
        self.delta_x_entries.max(self.omega_entries).max(self.dp_entries)
    }
}

/// Loss value, gradient and accounting from [`loss_and_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    /// Rank loss at the current `F`.
    pub loss: RankLoss,
    /// `dg/da`.
    pub gradient: Vec<f64>,
    /// Storage and solver accounting.
    pub stats: GradientStats,
}

/// Number of dimensions whose `dF/da_m` buffers are alive at once.
pub const DIM_BATCH: usize = 8;

/// Full sparse gradient pipeline for a converged solution `f` on `graph`.
///
/// `dF/da_m` matrices are reduced against `∂g/∂F` as soon as they are
/// computed, in batches of [`DIM_BATCH`] dimensions.
pub fn loss_and_gradient(
    features: &Mat,
    graph: &SparseGraph,
    f: &Mat,
    validation: &[usize],
    truth: &[Option<usize>],
    settings: &SolverSettings,
) -> Result<LossGradient> {
    let (loss, seed) = loss_seed(f, validation, truth)?;
    let e = graph.edge_count();
    let d = features.cols();
    let (n, c) = (f.rows(), f.cols());

    let delta_x = delta_x_on_pattern(features, graph.pattern());
    let omega = compute_omega(graph.weights(), &delta_x);
    let after_omega = delta_x.len() + omega.len();
    drop(delta_x);
    let dp = grad_p(graph, &omega)?;
    // grad_p keeps n·d row sums alongside Ω and dP
    let during_dp = omega.len() + n * d + dp.len();
    drop(omega);

    let batch = DIM_BATCH.min(d);
    // forcing, iterate and scratch per in-flight dimension
    let during_df = dp.len() + batch * 3 * n * c;

    let mut gradient = Vec::with_capacity(d);
    let mut max_iters = 0;
    let mut unconverged = 0;
    let batches: Vec<Vec<usize>> =
        (0..d).step_by(DIM_BATCH).map(|start| (start..(start + DIM_BATCH).min(d)).collect()).collect();
    let solve = |dims: &Vec<usize>| grad_f_block(graph, f, &dp, dims, settings);
    let solved: Vec<Result<SolutionMatrix>> = {
        #[cfg(feature = "std")]
        {
            use rayon::prelude::*;
            batches.par_iter().map(solve).collect()
        }
        #[cfg(not(feature = "std"))]
        {
            batches.iter().map(solve).collect()
        }
    };
    for (dims, sol) in batches.iter().zip(solved) {
        let sol = sol?;
        max_iters = max_iters.max(sol.iterations);
        if !sol.converged {
            unconverged += dims.len();
        }
        for b in 0..dims.len() {
            let g = seed.entries().iter().map(|&(v, q, s)| s * sol.f[(v, b * c + q)]).sum();
            gradient.push(g);
        }
    }

    let stats = GradientStats {
        edge_count: e,
        delta_x_entries: e * d,
        omega_entries: e * d,
        dp_entries: e * d,
        peak_aux_entries: after_omega.max(during_dp).max(during_df),
        max_df_iterations: max_iters,
        unconverged_dims: unconverged,
    };
    Ok(LossGradient { loss, gradient, stats })
}
