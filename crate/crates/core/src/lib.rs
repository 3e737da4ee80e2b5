//! Graph structure learning for graph-based semi-supervised learning.
//!
//! The crate learns the hyperparameters of a kNN graph (the neighbor count
//! `k` and one RBF weight `a_m = 1/σ_m²` per feature dimension) by gradient
//! descent on a pairwise ranking loss measured on held-out labeled points,
//! and runs many such descents in a successive-halving scheduler.
//!
//! The pipeline, bottom-up:
//!
//! * [`dataset`] - point clouds, labeled/validation/test splits, noise features.
//! * [`graph`] - weighted union-kNN graph and its symmetric normalization.
//! * [`propagation`] - local-and-global-consistency label diffusion.
//! * [`objective`] - validation rank loss and its sparse gradient in `a`.
//! * [`optimizer`] - resumable gradient search over `a` at fixed `k`.
//! * [`scheduler`] - parallel successive halving with restarts on idle threads.
//! * [`baselines`] - grid and random search under the same budget accounting.
//!
//! The crate is `no_std` + `alloc`. The default `std` feature only adds
//! data-parallel gradient evaluation and `std::error::Error` integration.
#![cfg_attr(not(feature = "std"), no_std)]
#![deny(missing_docs)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod dataset;
mod error;
pub mod graph;
pub mod math;
pub mod matrix;
pub mod objective;
pub mod optimizer;
pub mod propagation;
pub mod report;
pub mod rng;
pub mod scheduler;

pub use error::{Error, Result};
pub use matrix::Mat;
