//! Adaptive binary-search allocators for splitting a unit budget across `K`
//! resources with concave, non-decreasing rewards, when only noisy gradients
//! of the rewards are observed.
//!
//! * [`reward`] holds the reward families, instance generators and the noisy oracle.
//! * [`sign_test`] is the Hoeffding sequential sign test every search is built on.
//! * [`k2`] is the two-resource binary search.
//! * [`tree`] imbricates two-resource searches over a balanced tree for `K >= 3`.
//! * [`optimum`] computes ground-truth optima and brute-force profiles.
//! * [`harness`] measures regret, fits rates and runs Monte-Carlo experiments.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64`/`*32` aliases below pin the common choices.

// NaN must fail validation, so range checks are written as `!(x >= lo)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod k2;
pub mod optimum;
pub mod presets;
pub mod reward;
pub mod scalar;
pub mod trace;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use harness::{Algorithm, ExperimentResult, RegretTrace};
pub use k2::{run_k2, K2Config};
pub use optimum::optimal_allocation;
pub use reward::{InstanceSpec, NoiseKind, NoiseModel, Oracle, RewardFunction};
pub use sign_test::{SequentialSignTest, Sign, Status};
pub use trace::RunTrace;
pub use tree::{build_tree, run_tree, FunctionTree, GradientEstimate, TreeConfig};

pub type RewardFunction64 = RewardFunction<f64>;
pub type RewardFunction32 = RewardFunction<f32>;
pub type InstanceSpec64 = InstanceSpec<f64>;
pub type InstanceSpec32 = InstanceSpec<f32>;
pub type SequentialSignTest64 = SequentialSignTest<f64>;
pub type SequentialSignTest32 = SequentialSignTest<f32>;
pub type RunTrace64 = RunTrace<f64>;
pub type RunTrace32 = RunTrace<f32>;
pub type FunctionTree64 = FunctionTree<f64>;
pub type FunctionTree32 = FunctionTree<f32>;
