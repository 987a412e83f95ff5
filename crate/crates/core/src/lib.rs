//! Budgeted multi-player influence on DeGroot opinion networks.
//!
//! Players hold fixed reference opinions and spend a per-player budget on
//! individuals of a trust network. The network's long-run opinion is the
//! fixed point of the influenced DeGroot update, and each player wants that
//! opinion projected as far as possible onto its own reference.
//!
//! The crate is organised bottom-up:
//!
//! - [`netgen`]: random and archetype trust networks, eigenvector centrality
//! - [`game`]: simplex reference opinions and the two player objectives
//! - [`dynamics`]: the normalized augmented update and its fixed point
//! - [`solvers`]: the iterated-linear allocator, baselines and a
//!   finite-difference projected-gradient oracle
//! - [`dcform`]: evaluation of the difference-of-convex reformulation
//! - [`harness`]: seeded experiment batches with CSV/JSONL output
//! - [`cli`]: the command-line front end
//!
//! Batch work (seeds in the harness, finite-difference coordinates in the
//! oracle) runs on rayon when the `parallel` feature is enabled and an
//! [`Execution::Parallel`] policy is selected; otherwise it runs sequentially
//! with identical results.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense matrix code indexes several arrays by the same node index.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod dcform;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod harness;
mod linalg;
pub mod netgen;
pub mod par;
pub mod solvers;

pub use dynamics::{AugmentedSystem, InfluenceAllocation, OpinionState};
pub use error::{Error, Result};
pub use game::ReferenceSet;
pub use netgen::{CentralityVector, SocialNetwork};
pub use par::Execution;
pub use solvers::{ILParams, Momentum, SolveReport};
