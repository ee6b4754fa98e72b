//! Nested sampling with a Slice-within-Gibbs replacement kernel for
//! hierarchical and Markov-structured models.
//!
//! The pieces, bottom up:
//!
//! - [`model`]: the factorised-model contract and [`ParamState`] with its
//!   cached per-group log-likelihoods.
//! - [`slice`]: constrained slice-sampling primitives and the block-diagonal
//!   covariance used to shape move directions.
//! - [`kernel`]: the SwiG replacement kernel (iid and Markov) with `O(1)`
//!   per-group budget checks, plus the joint-space baseline.
//! - [`engine`]: the batch-deletion nested sampling loop.
//! - [`benchmarks`]: reference models with analytic evidences.
//! - [`diag`]: experiment orchestration, scaling fits, MMD and plot data.

pub mod benchmarks;
pub mod diag;
pub mod engine;
pub mod error;
pub mod kernel;
pub mod model;
pub mod quad;
pub mod slice;
pub mod stats;

pub use engine::{run_nested_sampling, KernelKind, RunConfig, RunResult};
pub use error::{Error, Result};
pub use kernel::{KernelConfig, KernelStats};
pub use model::{Model, ModelDims, ParamState, Structure};
