//! Matrix-free search for ε-first-order stationary points of smooth nonconvex
//! functions.
//!
//! The optimizer treats the choice of each displacement `Δ_n` as an online
//! linear-optimization problem (online-to-nonconvex conversion) and solves it
//! with an optimistic method whose hint is a quasi-Newton model of the next
//! midpoint gradient. The Hessian approximations are themselves learned online
//! over the operator-norm ball with a projection-free scheme.
//!
//! Everything that touches a matrix goes through matrix-vector products, and
//! every product is counted:
//!
//! - [`linops`]: symmetric operators with run-scoped matvec counters.
//! - [`eig`]: randomized Lanczos, the `MinEvec` certificate and the `SEP`
//!   separation oracle.
//! - [`trsolver`]: inexact trust-region solver (FISTA followed by Super FISTA-G
//!   on a convexified problem).
//! - [`hessian_learner`]: online learning of the Hessian approximation.
//! - [`oqn`]: the driver, hyperparameters and regret audits.
//! - [`problems`]: the objective-oracle contract and a catalog of test functions.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod eig;
mod error;
pub mod hessian_learner;
pub mod linops;
pub mod oqn;
pub mod problems;
pub mod rng;
pub mod trsolver;
pub mod vecops;

pub use error::{Error, Result};
pub use linops::{MatvecCounter, ShiftedOperator, SymOperator, SymmetricOp};
pub use oqn::{HyperParams, RunReport};
pub use problems::{GradientCounter, ObjectiveSpec};
pub use rng::SeedStream;
