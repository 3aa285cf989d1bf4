//! Divide-and-conquer kernel regression.
//!
//! The crate trains local estimators on disjoint partitions of a sample and
//! averages them, using either multi-pass mini-batch stochastic gradient
//! methods or spectral regularization filters (Tikhonov, Landweber, spectral
//! cut-off, bias-corrected Tikhonov). It also ships a synthetic problem family
//! on `[0, 1]` whose kernel spectrum, regression function and noise level are
//! known exactly, so excess risks, the bias/variance split and empirical
//! learning-rate exponents can be measured without Monte Carlo error.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`problem`] | synthetic problems, sampling, effective dimension |
//! | [`kernel`] | kernel evaluation, Gram matrices, symmetric eigensolver |
//! | [`filter`] | spectral filters and their qualification checks |
//! | [`train`] | partitioning, SGM, GM, spectral algorithms, averaging, planner |
//! | [`eval`] | exact and Monte Carlo excess risk, error decomposition, rate fits |
//! | [`harness`] | experiment configs, sweeps, CSV output |

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod filter;
pub mod harness;
pub mod kernel;
pub mod problem;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
pub use filter::{FilterKind, FilterSpec};
pub use kernel::{GramMatrix, KernelSpec};
pub use problem::{Dataset, SpectralProblem};
pub use train::{AveragedModel, LocalModel, SgmConfig, StepSchedule};
