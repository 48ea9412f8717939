//! Exact numerical laboratory for quantum partial search when the target
//! items are spread unevenly over the marked blocks.
//!
//! The crate simulates the algorithm (both in the reduced invariant subspace
//! and on the full statevector), solves the cancellation constraint, optimizes
//! the query count in the large-block limit, and checks the second-order
//! perturbative penalty for uneven distributions against those numerics.

pub mod cancellation;
pub mod cli;
pub mod error;
pub mod full_sim;
pub mod optimizer;
pub mod perturbation;
pub mod problem;
pub mod reduced_sim;
pub mod roots;

pub use error::{Error, Result};
pub use problem::{make_problem, make_problem_relaxed, BlockModel, Problem};
