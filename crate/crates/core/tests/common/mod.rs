#![allow(dead_code)]

use nalgebra::DMatrix;
use pglearn_core::dataset::{synthetic, Dataset};
use pglearn_core::graph::{build_knn_graph, HyperConfig, SparseGraph};
use pglearn_core::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Mat {
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(i, j)] = m[(i, j)];
        }
    }
    out
}

/// Random point cloud, config and label matrix.
pub struct Instance {
    pub data: Dataset,
    pub config: HyperConfig,
    pub graph: SparseGraph,
    pub y: Mat,
}

pub fn random_instance(seed: u64, n: usize, d: usize, c: usize) -> Instance {
    let mut r = rng(seed);
    let data = synthetic::uniform_cloud(n, d, c, seed ^ 0x55).unwrap();
    let k = r.random_range(1..=(n - 1).min(6));
    let a = (0..d).map(|_| r.random_range(0.2..4.0)).collect();
    let config = HyperConfig { k, a };
    let graph = build_knn_graph(&data, &config).unwrap();
    let mut y = Mat::zeros(n, c);
    for i in 0..n {
        if r.random_bool(0.4) {
            y[(i, r.random_range(0..c))] = 1.0;
        }
    }
    Instance { data, config, graph, y }
}

/// `L = I - D^{-1/2} W D^{-1/2}` built densely from a dense `W`.
pub fn dense_laplacian(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let p = if deg[i] > 0.0 && deg[j] > 0.0 { w[(i, j)] / (deg[i] * deg[j]).sqrt() } else { 0.0 };
        if i == j { 1.0 - p } else { -p }
    })
}

/// Dense LU reference for `(I + αL)^{-1} B`.
pub fn dense_lgc(w: &DMatrix<f64>, b: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let n = w.nrows();
    let a = DMatrix::identity(n, n) + dense_laplacian(w) * alpha;
    a.lu().solve(b).expect("I + αL is non-singular")
}

/// Dense weight matrix on a fixed pattern for weights `a`, computed from scratch.
pub fn dense_weights_on(graph: &SparseGraph, x: &Mat, a: &[f64]) -> DMatrix<f64> {
    let n = graph.n();
    let mut w = DMatrix::zeros(n, n);
    for (_, i, j) in graph.pattern().entries() {
        let s: f64 = (0..x.cols()).map(|m| a[m] * (x[(i, m)] - x[(j, m)]).powi(2)).sum();
        w[(i, j)] = libm::exp(-s);
    }
    w
}
